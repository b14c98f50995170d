//! Switching-element machinery: exact certification that a set is
//! F-switching, Monte Carlo estimates of how often the walk is switching,
//! coset-decay estimates, and the hash-thinned stopping time whose stopped
//! measure has F-switching support.
//!
//! A set `A` is F-switching when `f1 a1 f2 = f3 a2 f4` with `f_i` in `F`
//! forces `f1 = f3`, `f2 = f4`, `a1 = a2`. For a single element `w` this
//! reduces to: no `u` in `F^2 \ {e}` has `w^-1 u w` in `F^2`; the check runs
//! in amortized O(|F^2|) time per element through bounded cancellation
//! arithmetic, with no product materialized unless it is short.
//!
//! The thinning comparison `u_w >= u_b` over the class `b in F^2 w F^2`
//! composes rolling polynomial fingerprints of `w` with precomputed side
//! fingerprints of `F^2`, so each candidate costs O(1) regardless of |w|.

pub mod ladder;

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;

use crate::group::{FreeWord, Letter, Projection};
use crate::measures::{BaseStep, StepMeasure};
use crate::seeding::{trial_rng, uniform_hash};
use crate::stats::{binomial_estimate, BinomialEstimate};
use crate::stopping::StoppedSample;

/// A finite subset of F2 in canonical order (length, then letters).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSet {
    elems: Vec<FreeWord>,
    symmetric: bool,
}

impl FiniteSet {
    pub fn new(mut elems: Vec<FreeWord>) -> FiniteSet {
        elems.sort_by(canonical_order);
        elems.dedup();
        let symmetric = elems.iter().all(|w| {
            elems
                .binary_search_by(|x| canonical_order(x, &w.inverse()))
                .is_ok()
        });
        FiniteSet { elems, symmetric }
    }

    /// The ball of the given radius in the word metric.
    pub fn ball(radius: usize) -> FiniteSet {
        let mut seen: HashSet<FreeWord> = HashSet::new();
        let mut frontier = vec![FreeWord::identity()];
        seen.insert(FreeWord::identity());
        for _ in 0..radius {
            let mut next = Vec::new();
            for w in frontier {
                for l in Letter::ALL {
                    let mut v = w.clone();
                    v.push(l);
                    if seen.insert(v.clone()) {
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        FiniteSet::new(seen.into_iter().collect())
    }

    pub fn symmetrized(&self) -> FiniteSet {
        if self.symmetric {
            return self.clone();
        }
        let mut elems = self.elems.clone();
        elems.extend(self.elems.iter().map(FreeWord::inverse));
        FiniteSet::new(elems)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &[FreeWord] {
        &self.elems
    }

    pub fn contains(&self, w: &FreeWord) -> bool {
        self.elems
            .binary_search_by(|x| canonical_order(x, w))
            .is_ok()
    }
}

pub fn canonical_order(a: &FreeWord, b: &FreeWord) -> std::cmp::Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.letters().cmp(b.letters()))
}

/// Witness of a switching failure: two factorizations of the same product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchWitness {
    pub left: (FreeWord, FreeWord, FreeWord),
    pub right: (FreeWord, FreeWord, FreeWord),
    pub product: FreeWord,
}

/// Exhaustive check that `A` is F-switching, by hashing every product
/// `f1 a f2` in canonical form. Returns a witness on failure.
pub fn is_switching(a_set: &FiniteSet, f_set: &FiniteSet) -> Result<(), SwitchWitness> {
    let mut seen: HashMap<Vec<u8>, (usize, usize, usize)> = HashMap::new();
    for (ai, a) in a_set.elems.iter().enumerate() {
        for (fi, f1) in f_set.elems.iter().enumerate() {
            let left = f1.mul(a);
            for (gi, f2) in f_set.elems.iter().enumerate() {
                let prod = left.mul(f2);
                let key = prod.canonical_bytes();
                if let Some(&(pfi, pai, pgi)) = seen.get(&key) {
                    if (pfi, pai, pgi) != (fi, ai, gi) {
                        return Err(SwitchWitness {
                            left: (
                                f_set.elems[pfi].clone(),
                                a_set.elems[pai].clone(),
                                f_set.elems[pgi].clone(),
                            ),
                            right: (f1.clone(), a.clone(), f2.clone()),
                            product: prod,
                        });
                    }
                } else {
                    seen.insert(key, (fi, ai, gi));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bounded conjugation arithmetic
// ---------------------------------------------------------------------------

fn lcp(a: &[Letter], b: &[Letter]) -> usize {
    let max = a.len().min(b.len());
    let mut i = 0;
    while i < max && a[i] == b[i] {
        i += 1;
    }
    i
}

/// Reduced form of `w^-1 u w` when its length is at most `bound`, else None.
/// Runs in O(cancelled letters), not O(|w|), except on near-periodic words.
pub fn conjugate_bounded(w: &[Letter], u: &[Letter], bound: usize) -> Option<Vec<Letter>> {
    if u.is_empty() {
        return Some(Vec::new());
    }
    let c1 = lcp(w, u);
    if c1 == u.len() {
        // u is a prefix of w: w^-1 u w = S^-1 (prefix) S with S the suffix.
        return conjugate_bounded(&w[c1..], &w[..c1], bound);
    }
    let mid = &u[c1..];
    let mut c2 = 0;
    while c2 < mid.len() && c2 < w.len() && mid[mid.len() - 1 - c2] == w[c2].inverse() {
        c2 += 1;
    }
    if c2 == mid.len() {
        // mid fully absorbed; cascade between (w[c1..])^-1 and w[c2..]
        let a = &w[c1..];
        let b = &w[c2..];
        let c3 = lcp(a, b);
        let len = (a.len() - c3) + (b.len() - c3);
        if len > bound {
            return None;
        }
        let mut out: Vec<Letter> = a[c3..].iter().rev().map(|l| l.inverse()).collect();
        out.extend_from_slice(&b[c3..]);
        return Some(out);
    }
    let len = (w.len() - c1) + (mid.len() - c2) + (w.len() - c2);
    if len > bound {
        return None;
    }
    let mut out: Vec<Letter> = w[c1..].iter().rev().map(|l| l.inverse()).collect();
    out.extend_from_slice(&mid[..mid.len() - c2]);
    out.extend_from_slice(&w[c2..]);
    Some(out)
}

/// Reduced form of `w u w` when its length is at most `bound` (used by the
/// superswitching cross check), else None.
fn sandwich_bounded(w: &[Letter], u: &[Letter], bound: usize) -> Option<Vec<Letter>> {
    let mut c1 = 0;
    while c1 < w.len() && c1 < u.len() && w[w.len() - 1 - c1] == u[c1].inverse() {
        c1 += 1;
    }
    let mid = &u[c1..];
    if mid.is_empty() {
        let a = &w[..w.len() - c1];
        let mut c2 = 0;
        while c2 < a.len() && c2 < w.len() && a[a.len() - 1 - c2] == w[c2].inverse() {
            c2 += 1;
        }
        let len = (a.len() - c2) + (w.len() - c2);
        if len > bound {
            return None;
        }
        let mut out = a[..a.len() - c2].to_vec();
        out.extend_from_slice(&w[c2..]);
        return Some(out);
    }
    let mut c2 = 0;
    while c2 < mid.len() && c2 < w.len() && mid[mid.len() - 1 - c2] == w[c2].inverse() {
        c2 += 1;
    }
    if c2 == mid.len() {
        let a = &w[..w.len() - c1];
        let b = &w[c2..];
        let mut c3 = 0;
        while c3 < a.len() && c3 < b.len() && a[a.len() - 1 - c3] == b[c3].inverse() {
            c3 += 1;
        }
        let len = (a.len() - c3) + (b.len() - c3);
        if len > bound {
            return None;
        }
        let mut out = a[..a.len() - c3].to_vec();
        out.extend_from_slice(&b[c3..]);
        return Some(out);
    }
    let len = (w.len() - c1) + (mid.len() - c2) + (w.len() - c2);
    if len > bound {
        return None;
    }
    let mut out = w[..w.len() - c1].to_vec();
    out.extend_from_slice(&mid[..mid.len() - c2]);
    out.extend_from_slice(&w[c2..]);
    Some(out)
}

/// Singleton switching test on a letter slice.
fn letters_are_switching(
    w: &[Letter],
    fsq: &[FreeWord],
    fsq_keys: &HashSet<Vec<u8>>,
    fsq_max_len: usize,
) -> bool {
    for u in fsq {
        if u.is_identity() {
            continue;
        }
        if let Some(v) = conjugate_bounded(w, u.letters(), fsq_max_len) {
            let key: Vec<u8> = v.iter().map(|l| l.to_char() as u8).collect();
            if fsq_keys.contains(&key) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Polynomial fingerprints
// ---------------------------------------------------------------------------

const FP_MOD: u128 = (1 << 61) - 1;
const FP_BASE1: u128 = 131;
const FP_BASE2: u128 = 1_000_003;

#[inline]
fn fp_push(h: u64, base: u128, code: u64) -> u64 {
    (((h as u128) * base + code as u128) % FP_MOD) as u64
}

fn fp_word(letters: &[Letter], base: u128) -> u64 {
    let mut h = 0u64;
    for &l in letters {
        h = fp_push(h, base, l as u64 + 1);
    }
    h
}

fn pow_mod(base: u128, mut e: u64) -> u128 {
    let mut acc: u128 = 1;
    let mut b = base % FP_MOD;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % FP_MOD;
        }
        b = b * b % FP_MOD;
        e >>= 1;
    }
    acc
}

#[inline]
fn fp_sub(a: u64, b: u64) -> u64 {
    ((a as u128 + FP_MOD - b as u128) % FP_MOD) as u64
}

#[inline]
fn fp_mul(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % FP_MOD) as u64
}

// ---------------------------------------------------------------------------
// Thinned switch-hitting target
// ---------------------------------------------------------------------------

/// The thinned target set of the switch-hitting stopping time.
///
/// `T = { a : a is F-switching and u_a >= u_b for all b in F^2 a F^2 }`,
/// with `u_x` the hash uniform of the canonical form of `x`. The symmetric
/// variant requires superswitching, compares over both classes of `a` and
/// `a^-1`, and the sampler hits `T union T^-1`.
#[derive(Debug, Clone)]
pub struct SwitchTarget {
    fset: FiniteSet,
    /// F^2 in canonical order; iteration order is fixed for determinism.
    fsq: Vec<FreeWord>,
    fsq_keys: HashSet<Vec<u8>>,
    fsq_max_len: usize,
    pub seed: u64,
    pub symmetric: bool,
}

impl SwitchTarget {
    /// Builds the target; `f` is symmetrized internally.
    pub fn new(f: &FiniteSet, seed: u64, symmetric: bool) -> SwitchTarget {
        let fset = f.symmetrized();
        let mut prods: Vec<FreeWord> = Vec::new();
        for f1 in fset.elems() {
            for f2 in fset.elems() {
                prods.push(f1.mul(f2));
            }
        }
        prods.sort_by(canonical_order);
        prods.dedup();
        let fsq_keys = prods.iter().map(|w| w.canonical_bytes()).collect();
        let fsq_max_len = prods.iter().map(FreeWord::len).max().unwrap_or(0);
        SwitchTarget {
            fset,
            fsq: prods,
            fsq_keys,
            fsq_max_len,
            seed,
            symmetric,
        }
    }

    pub fn f_set(&self) -> &FiniteSet {
        &self.fset
    }

    /// Is the single element `w` F-switching?
    pub fn elem_is_switching(&self, w: &FreeWord) -> bool {
        letters_are_switching(w.letters(), &self.fsq, &self.fsq_keys, self.fsq_max_len)
    }

    /// Is `{w, w^-1}` F-switching?
    pub fn elem_is_superswitching(&self, w: &FreeWord) -> bool {
        if !self.elem_is_switching(w) {
            return false;
        }
        let inv = w.inverse();
        if !self.elem_is_switching(&inv) {
            return false;
        }
        // cross collisions f1 w f2 = f3 w^-1 f4  <=>  w u w in F^2 for some
        // u in F^2 (including e), and symmetrically for w^-1.
        for u in &self.fsq {
            for side in [w.letters(), inv.letters()] {
                if let Some(v) = sandwich_bounded(side, u.letters(), self.fsq_max_len) {
                    let key: Vec<u8> = v.iter().map(|l| l.to_char() as u8).collect();
                    if self.fsq_keys.contains(&key) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Uniform hash of an element given its two fingerprints and length.
    fn u_of_fp(&self, fp1: u64, fp2: u64, len: usize) -> f64 {
        let mut key = [0u8; 24];
        key[..8].copy_from_slice(&fp1.to_le_bytes());
        key[8..16].copy_from_slice(&fp2.to_le_bytes());
        key[16..].copy_from_slice(&(len as u64).to_le_bytes());
        uniform_hash(self.seed, &key)
    }

    pub fn u_value(&self, w: &FreeWord) -> f64 {
        self.u_of_fp(
            fp_word(w.letters(), FP_BASE1),
            fp_word(w.letters(), FP_BASE2),
            w.len(),
        )
    }

    /// Membership of `w` in the thinned target (one-off form; the sampler
    /// keeps a rolling [`SwitchWalk`] instead).
    pub fn hits(&self, w: &FreeWord) -> bool {
        let mut run = SwitchWalk::new(self);
        for &l in w.letters() {
            run.push(l);
        }
        run.current_hits()
    }
}

/// Precomputed side data for one element of F^2.
#[derive(Debug, Clone)]
struct SideFp {
    letters: Vec<Letter>,
    /// letters of the reversed inverse, for left-seam cancellation scans
    rev_inv: Vec<Letter>,
    /// prefix fingerprints: fp of letters[..k], k = 0..=len
    pre1: Vec<u64>,
    pre2: Vec<u64>,
    /// suffix fingerprints: fp of letters[k..], k = 0..=len
    suf1: Vec<u64>,
    suf2: Vec<u64>,
}

impl SideFp {
    fn new(w: &FreeWord) -> SideFp {
        let letters = w.letters().to_vec();
        let n = letters.len();
        let mut pre1 = vec![0u64; n + 1];
        let mut pre2 = vec![0u64; n + 1];
        for i in 0..n {
            pre1[i + 1] = fp_push(pre1[i], FP_BASE1, letters[i] as u64 + 1);
            pre2[i + 1] = fp_push(pre2[i], FP_BASE2, letters[i] as u64 + 1);
        }
        let mut suf1 = vec![0u64; n + 1];
        let mut suf2 = vec![0u64; n + 1];
        for k in (0..n).rev() {
            suf1[k] = fp_word(&letters[k..], FP_BASE1);
            suf2[k] = fp_word(&letters[k..], FP_BASE2);
        }
        SideFp {
            rev_inv: letters.iter().rev().map(|l| l.inverse()).collect(),
            letters,
            pre1,
            pre2,
            suf1,
            suf2,
        }
    }
}

/// Walk state for the switch-hit sampler: the reduced word plus rolling
/// fingerprint stacks for the word and its inverse, so every thinning
/// candidate `b = f1 w f2` is fingerprinted in O(1).
pub struct SwitchWalk<'t> {
    target: &'t SwitchTarget,
    letters: Vec<Letter>,
    // prefix fingerprint stacks, one entry per prefix length
    fwd1: Vec<u64>,
    fwd2: Vec<u64>,
    // anchored inverse fingerprints: sum over j < i of code(inv(w[j])) B^j
    rinv1: Vec<u64>,
    rinv2: Vec<u64>,
    pow1: Vec<u64>,
    pow2: Vec<u64>,
    ipow1: Vec<u64>,
    ipow2: Vec<u64>,
    inv_base1: u64,
    inv_base2: u64,
    side: Vec<SideFp>,
}

impl<'t> SwitchWalk<'t> {
    pub fn new(target: &'t SwitchTarget) -> SwitchWalk<'t> {
        SwitchWalk {
            target,
            letters: Vec::new(),
            fwd1: vec![0],
            fwd2: vec![0],
            rinv1: vec![0],
            rinv2: vec![0],
            pow1: vec![1],
            pow2: vec![1],
            ipow1: vec![1],
            ipow2: vec![1],
            inv_base1: pow_mod(FP_BASE1, (FP_MOD - 2) as u64) as u64,
            inv_base2: pow_mod(FP_BASE2, (FP_MOD - 2) as u64) as u64,
            side: target.fsq.iter().map(SideFp::new).collect(),
        }
    }

    fn ensure_pows(&mut self, n: usize) {
        while self.pow1.len() <= n {
            self.pow1.push(fp_mul(*self.pow1.last().unwrap(), FP_BASE1 as u64));
            self.pow2.push(fp_mul(*self.pow2.last().unwrap(), FP_BASE2 as u64));
            self.ipow1.push(fp_mul(*self.ipow1.last().unwrap(), self.inv_base1));
            self.ipow2.push(fp_mul(*self.ipow2.last().unwrap(), self.inv_base2));
        }
    }

    /// Append a letter with free reduction.
    pub fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inverse()) {
            self.letters.pop();
            self.fwd1.pop();
            self.fwd2.pop();
            self.rinv1.pop();
            self.rinv2.pop();
            return;
        }
        let n = self.letters.len();
        self.ensure_pows(n + 1);
        let code = l as u64 + 1;
        let icode = l.inverse() as u64 + 1;
        self.letters.push(l);
        self.fwd1.push(fp_push(*self.fwd1.last().unwrap(), FP_BASE1, code));
        self.fwd2.push(fp_push(*self.fwd2.last().unwrap(), FP_BASE2, code));
        self.rinv1.push(
            ((*self.rinv1.last().unwrap() as u128 + icode as u128 * self.pow1[n] as u128)
                % FP_MOD) as u64,
        );
        self.rinv2.push(
            ((*self.rinv2.last().unwrap() as u128 + icode as u128 * self.pow2[n] as u128)
                % FP_MOD) as u64,
        );
    }

    pub fn word(&self) -> FreeWord {
        FreeWord::from_letters(self.letters.iter().copied())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Fingerprint of the segment w[i..j].
    #[inline]
    fn seg_fp(&self, i: usize, j: usize) -> (u64, u64) {
        let f1 = fp_sub(self.fwd1[j], fp_mul(self.fwd1[i], self.pow1[j - i]));
        let f2 = fp_sub(self.fwd2[j], fp_mul(self.fwd2[i], self.pow2[j - i]));
        (f1, f2)
    }

    /// Fingerprint of the segment (w^-1)[i..j].
    #[inline]
    fn inv_seg_fp(&self, i: usize, j: usize) -> (u64, u64) {
        let n = self.letters.len();
        let f1 = fp_mul(fp_sub(self.rinv1[n - i], self.rinv1[n - j]), self.ipow1[n - j]);
        let f2 = fp_mul(fp_sub(self.rinv2[n - i], self.rinv2[n - j]), self.ipow2[n - j]);
        (f1, f2)
    }

    /// Letter at position `m` of the current word or its inverse.
    #[inline]
    fn letter_of(&self, inverse: bool, m: usize) -> Letter {
        if inverse {
            self.letters[self.letters.len() - 1 - m].inverse()
        } else {
            self.letters[m]
        }
    }

    /// Evaluate membership of the current word in the thinned target
    /// (or `T union T^-1` for the symmetric variant).
    pub fn current_hits(&mut self) -> bool {
        let tgt = self.target;
        if !letters_are_switching(&self.letters, &tgt.fsq, &tgt.fsq_keys, tgt.fsq_max_len) {
            return false;
        }
        if tgt.symmetric {
            let w = self.word();
            if !tgt.elem_is_superswitching(&w) {
                return false;
            }
            self.dominates_class(false) && self.dominates_class(true)
        } else {
            self.dominates_class(false)
        }
    }

    /// Check `u_x >= u_b` for all `b = f1 x f2`, where `x` is the current
    /// word (`inverse = false`) or its inverse. Candidates are fingerprinted
    /// by composing precomputed side fingerprints with rolling segments; the
    /// product is materialized only to break exact hash ties or when the
    /// word is too short for seam independence.
    fn dominates_class(&mut self, inverse: bool) -> bool {
        let n = self.letters.len();
        self.ensure_pows(n + 2 * self.target.fsq_max_len + 2);
        if n <= 2 * self.target.fsq_max_len + 2 {
            return self.dominates_class_slow(inverse);
        }
        let (x1, x2) = if inverse {
            (self.rinv1[n], self.rinv2[n])
        } else {
            (self.fwd1[n], self.fwd2[n])
        };
        let u_x = self.target.u_of_fp(x1, x2, n);

        for i in 0..self.side.len() {
            for j in 0..self.side.len() {
                let (f1, f2) = (&self.side[i], &self.side[j]);
                let l1 = f1.letters.len();
                let l2 = f2.letters.len();
                // left-seam cancellation: rev_inv(f1) against the head of x
                let mut cl = 0;
                while cl < l1 && cl < n && f1.rev_inv[cl] == self.letter_of(inverse, cl) {
                    cl += 1;
                }
                // right-seam cancellation: tail of x against inv head of f2
                let mut cr = 0;
                while cr < l2
                    && cr < n
                    && self.letter_of(inverse, n - 1 - cr) == f2.letters[cr].inverse()
                {
                    cr += 1;
                }
                if cl + cr >= n {
                    // seams interact; cannot happen for n > 2 max_len, but
                    // guard anyway
                    return self.dominates_class_slow(inverse);
                }
                let (m1, m2) = if inverse {
                    self.inv_seg_fp(cl, n - cr)
                } else {
                    self.seg_fp(cl, n - cr)
                };
                let mid_len = n - cl - cr;
                let tail_len = l2 - cr;
                let b_len = (l1 - cl) + mid_len + tail_len;
                let b1 = {
                    let h = ((f1.pre1[l1 - cl] as u128 * self.pow1[mid_len] as u128
                        + m1 as u128)
                        % FP_MOD) as u64;
                    ((h as u128 * self.pow1[tail_len] as u128 + f2.suf1[cr] as u128) % FP_MOD)
                        as u64
                };
                let b2 = {
                    let h = ((f1.pre2[l1 - cl] as u128 * self.pow2[mid_len] as u128
                        + m2 as u128)
                        % FP_MOD) as u64;
                    ((h as u128 * self.pow2[tail_len] as u128 + f2.suf2[cr] as u128) % FP_MOD)
                        as u64
                };
                let u_b = self.target.u_of_fp(b1, b2, b_len);
                if u_b > u_x {
                    return false;
                }
                if u_b == u_x && (b1, b2, b_len) != (x1, x2, n) {
                    // exact tie on distinct elements: break on canonical order
                    let x_word = if inverse { self.word().inverse() } else { self.word() };
                    let b = self.target.fsq[i].mul(&x_word).mul(&self.target.fsq[j]);
                    if canonical_order(&b, &x_word) == std::cmp::Ordering::Greater {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn dominates_class_slow(&self, inverse: bool) -> bool {
        let x_word = if inverse {
            self.word().inverse()
        } else {
            self.word()
        };
        let u_x = self.target.u_value(&x_word);
        for f1 in &self.target.fsq {
            for f2 in &self.target.fsq {
                let b = f1.mul(&x_word).mul(f2);
                let u_b = self.target.u_value(&b);
                if u_b > u_x
                    || (u_b == u_x
                        && b != x_word
                        && canonical_order(&b, &x_word) == std::cmp::Ordering::Greater)
                {
                    return false;
                }
            }
        }
        true
    }
}

/// Run the lazy walk to the first hit of the thinned target.
pub fn run_switch_hit(
    base: &StepMeasure<BaseStep>,
    target: &SwitchTarget,
    horizon_cap: u64,
    rng: &mut impl Rng,
) -> StoppedSample {
    let mut walk = SwitchWalk::new(target);
    let mut t = 0u64;
    loop {
        if t >= horizon_cap {
            let w = walk.word();
            return StoppedSample {
                projected: Projection::FreeGroup.project_word(&w),
                endpoint: w,
                steps_used: t,
                component: None,
                truncated: true,
            };
        }
        t += 1;
        if let Some(l) = base.sample(rng).as_letter() {
            walk.push(l);
        }
        if walk.current_hits() {
            let w = walk.word();
            return StoppedSample {
                projected: Projection::FreeGroup.project_word(&w),
                endpoint: w,
                steps_used: t,
                component: None,
                truncated: false,
            };
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo estimates
// ---------------------------------------------------------------------------

/// Per-n Monte Carlo frequency of the event `w_n is F-switching`.
pub fn switching_frequency(
    base: &StepMeasure<BaseStep>,
    f: &FiniteSet,
    n_list: &[u64],
    paths: u64,
    master_seed: u64,
) -> Vec<(u64, BinomialEstimate)> {
    let target = SwitchTarget::new(f, 0, false);
    let max_n = n_list.iter().copied().max().unwrap_or(0);
    let hits: Vec<u64> = (0..paths)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, "switching-frequency", trial);
            let mut w = FreeWord::identity();
            let mut out = vec![0u64; n_list.len()];
            for t in 0..=max_n {
                if t > 0 {
                    if let Some(l) = base.sample(&mut rng).as_letter() {
                        w.push(l);
                    }
                }
                for (slot, &n) in n_list.iter().enumerate() {
                    if n == t && target.elem_is_switching(&w) {
                        out[slot] = 1;
                    }
                }
            }
            out
        })
        .reduce(
            || vec![0u64; n_list.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    n_list
        .iter()
        .zip(hits)
        .map(|(&n, h)| (n, binomial_estimate(h, paths)))
        .collect()
}

/// Built-in subgroup membership tests for coset decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subgroup {
    WholeGroup,
    Trivial,
    /// The cyclic subgroup generated by `a`.
    CyclicA,
    /// The kernel of the free-group projection to the lamplighter.
    KernelPi,
}

impl Subgroup {
    pub fn contains(self, w: &FreeWord) -> bool {
        match self {
            Subgroup::WholeGroup => true,
            Subgroup::Trivial => w.is_identity(),
            Subgroup::CyclicA => {
                w.letters().iter().all(|&l| l == Letter::A)
                    || w.letters().iter().all(|&l| l == Letter::AInv)
            }
            Subgroup::KernelPi => Projection::FreeGroup.project_word(w).is_identity(),
        }
    }
}

/// Per-n Monte Carlo estimate of `P(w_n in H F)`.
pub fn coset_decay(
    base: &StepMeasure<BaseStep>,
    h: Subgroup,
    f: &FiniteSet,
    n_list: &[u64],
    paths: u64,
    master_seed: u64,
) -> Vec<(u64, BinomialEstimate)> {
    let max_n = n_list.iter().copied().max().unwrap_or(0);
    let hits: Vec<u64> = (0..paths)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, "coset-decay", trial);
            let mut w = FreeWord::identity();
            let mut out = vec![0u64; n_list.len()];
            for t in 0..=max_n {
                if t > 0 {
                    if let Some(l) = base.sample(&mut rng).as_letter() {
                        w.push(l);
                    }
                }
                for (slot, &n) in n_list.iter().enumerate() {
                    if n == t {
                        let in_hf = f
                            .elems()
                            .iter()
                            .any(|fe| h.contains(&w.mul(&fe.inverse())));
                        if in_hf {
                            out[slot] = 1;
                        }
                    }
                }
            }
            out
        })
        .reduce(
            || vec![0u64; n_list.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    n_list
        .iter()
        .zip(hits)
        .map(|(&n, h)| (n, binomial_estimate(h, paths)))
        .collect()
}

/// Draw `count` independent switch-hit stopped samples.
pub fn switch_hit_samples(
    base: &StepMeasure<BaseStep>,
    target: &SwitchTarget,
    count: u64,
    horizon_cap: u64,
    master_seed: u64,
) -> Vec<StoppedSample> {
    (0..count)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, "switch-hit", trial);
            run_switch_hit(base, target, horizon_cap, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::lazy_srw_f2;

    fn naive_is_switching(a_set: &FiniteSet, f_set: &FiniteSet) -> bool {
        for a1 in a_set.elems() {
            for a2 in a_set.elems() {
                for f1 in f_set.elems() {
                    for f2 in f_set.elems() {
                        for f3 in f_set.elems() {
                            for f4 in f_set.elems() {
                                let lhs = f1.mul(a1).mul(f2);
                                let rhs = f3.mul(a2).mul(f4);
                                if lhs == rhs && (f1 != f3 || f2 != f4 || a1 != a2) {
                                    return false;
                                }
                            }
                        }
                    }
                }
            }
        }
        true
    }

    #[test]
    fn singleton_always_e_switching() {
        let f = FiniteSet::new(vec![FreeWord::identity()]);
        let a = FiniteSet::new(vec![FreeWord::parse("abA").unwrap()]);
        assert!(is_switching(&a, &f).is_ok());
    }

    #[test]
    fn spec_counterexample_a_with_f_e_a() {
        // A = {a}, F = {e, a}: e.a.a = a.a.e
        let f = FiniteSet::new(vec![FreeWord::identity(), FreeWord::parse("a").unwrap()]);
        let a = FiniteSet::new(vec![FreeWord::parse("a").unwrap()]);
        let w = is_switching(&a, &f).unwrap_err();
        assert_eq!(w.product, FreeWord::parse("aa").unwrap());
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(FiniteSet::ball(0).len(), 1);
        assert_eq!(FiniteSet::ball(1).len(), 5);
        assert_eq!(FiniteSet::ball(2).len(), 17);
        assert!(FiniteSet::ball(1).is_symmetric());
    }

    #[test]
    fn is_switching_matches_naive_oracle() {
        let mut rng = trial_rng(17, "switch-oracle", 0);
        let mut checked_true = 0;
        let mut checked_false = 0;
        for _ in 0..300 {
            let rand_word = |rng: &mut rand_chacha::ChaCha8Rng, max_len: usize| {
                let len = rand::Rng::gen_range(rng, 0..=max_len);
                FreeWord::from_letters(
                    (0..len).map(|_| Letter::ALL[rand::Rng::gen_range(rng, 0..4)]),
                )
            };
            let a = FiniteSet::new(
                (0..rand::Rng::gen_range(&mut rng, 1..=4))
                    .map(|_| rand_word(&mut rng, 4))
                    .collect(),
            );
            let f = FiniteSet::new(
                (0..rand::Rng::gen_range(&mut rng, 1..=4))
                    .map(|_| rand_word(&mut rng, 3))
                    .collect(),
            );
            let fast = is_switching(&a, &f).is_ok();
            let naive = naive_is_switching(&a, &f);
            assert_eq!(fast, naive, "A={:?} F={:?}", a.elems(), f.elems());
            if fast {
                checked_true += 1;
            } else {
                checked_false += 1;
            }
        }
        assert!(checked_true > 0 && checked_false > 0);
    }

    #[test]
    fn elem_switching_agrees_with_set_version() {
        let f = FiniteSet::ball(1);
        let target = SwitchTarget::new(&f, 0, false);
        let mut rng = trial_rng(17, "elem-switch", 0);
        for _ in 0..400 {
            let len = rand::Rng::gen_range(&mut rng, 0..10);
            let w = FreeWord::from_letters(
                (0..len).map(|_| Letter::ALL[rand::Rng::gen_range(&mut rng, 0..4)]),
            );
            let singleton = FiniteSet::new(vec![w.clone()]);
            let expected = is_switching(&singleton, target.f_set()).is_ok();
            assert_eq!(target.elem_is_switching(&w), expected, "w = {w}");
        }
    }

    #[test]
    fn identity_not_switching_for_ball_one() {
        let target = SwitchTarget::new(&FiniteSet::ball(1), 0, false);
        assert!(!target.elem_is_switching(&FreeWord::identity()));
        // periodic powers commute with their root: never switching
        assert!(!target.elem_is_switching(&FreeWord::parse("aaaaaaaa").unwrap()));
        // a generic long word is switching
        assert!(target.elem_is_switching(&FreeWord::parse("abABBabAbbA").unwrap()));
    }

    #[test]
    fn superswitching_cross_case() {
        let target = SwitchTarget::new(&FiniteSet::ball(1), 0, true);
        assert!(!target.elem_is_superswitching(&FreeWord::parse("a").unwrap()));
        let long = FreeWord::parse("abABBabAbbA").unwrap();
        assert!(target.elem_is_superswitching(&long));
    }

    #[test]
    fn trivial_f_makes_tau_equal_one() {
        let f = FiniteSet::new(vec![FreeWord::identity()]);
        let target = SwitchTarget::new(&f, 33, false);
        let base = lazy_srw_f2();
        let mut rng = trial_rng(17, "tau-one", 0);
        for _ in 0..50 {
            let s = run_switch_hit(&base, &target, 1_000, &mut rng);
            assert_eq!(s.steps_used, 1);
            assert!(!s.truncated);
        }
    }

    #[test]
    fn fast_thinning_agrees_with_slow_path() {
        let f = FiniteSet::ball(1);
        let target = SwitchTarget::new(&f, 7, false);
        let mut rng = trial_rng(18, "thin-agree", 0);
        let mut hit_count = 0;
        for _ in 0..400 {
            // build a longish random reduced word
            let len = rand::Rng::gen_range(&mut rng, 12..40);
            let mut walk = SwitchWalk::new(&target);
            while walk.len() < len {
                walk.push(Letter::ALL[rand::Rng::gen_range(&mut rng, 0..4)]);
            }
            if !walk.current_hits() {
                continue;
            }
            hit_count += 1;
            // cross-check with full materialization
            assert!(walk.dominates_class_slow(false));
        }
        // hits exist but are rare; the loop above mostly checks agreement on
        // the switching filter path
        let _ = hit_count;
    }

    #[test]
    fn switch_hit_support_is_switching_set() {
        let f = FiniteSet::ball(1);
        let target = SwitchTarget::new(&f, 7, false);
        let base = lazy_srw_f2();
        let samples = switch_hit_samples(&base, &target, 120, 1_000_000, 23);
        assert!(samples.iter().all(|s| !s.truncated));
        let support = FiniteSet::new(samples.iter().map(|s| s.endpoint.clone()).collect());
        assert!(is_switching(&support, target.f_set()).is_ok());
    }

    #[test]
    fn thinning_deterministic_under_query_order() {
        let f = FiniteSet::ball(1);
        let target = SwitchTarget::new(&f, 7, false);
        let words = ["abAB", "bbaBA", "ababab", "BAbaBA"];
        let first: Vec<bool> = words
            .iter()
            .map(|s| target.hits(&FreeWord::parse(s).unwrap()))
            .collect();
        let mut second: Vec<bool> = words
            .iter()
            .rev()
            .map(|s| target.hits(&FreeWord::parse(s).unwrap()))
            .collect();
        second.reverse();
        assert_eq!(first, second);
    }

    #[test]
    fn conjugate_bounded_matches_naive() {
        let mut rng = trial_rng(17, "conj", 0);
        for _ in 0..2000 {
            let wl = rand::Rng::gen_range(&mut rng, 0..14);
            let ul = rand::Rng::gen_range(&mut rng, 0..6);
            let w = FreeWord::from_letters(
                (0..wl).map(|_| Letter::ALL[rand::Rng::gen_range(&mut rng, 0..4)]),
            );
            let u = FreeWord::from_letters(
                (0..ul).map(|_| Letter::ALL[rand::Rng::gen_range(&mut rng, 0..4)]),
            );
            let exact = w.inverse().mul(&u).mul(&w);
            let bound = 8;
            match conjugate_bounded(w.letters(), u.letters(), bound) {
                Some(v) => assert_eq!(v, exact.letters().to_vec(), "w={w} u={u}"),
                None => assert!(exact.len() > bound, "w={w} u={u} len={}", exact.len()),
            }
            let exact_s = w.mul(&u).mul(&w);
            match sandwich_bounded(w.letters(), u.letters(), bound) {
                Some(v) => assert_eq!(v, exact_s.letters().to_vec(), "sandwich w={w} u={u}"),
                None => assert!(exact_s.len() > bound),
            }
        }
    }

    #[test]
    fn segment_fingerprints_match_direct_computation() {
        let target = SwitchTarget::new(&FiniteSet::ball(1), 0, false);
        let mut walk = SwitchWalk::new(&target);
        for l in FreeWord::parse("abABbaBAbbaABab").unwrap().letters() {
            walk.push(*l);
        }
        let n = walk.len();
        let w = walk.word();
        let inv = w.inverse();
        for i in 0..n {
            for j in i..=n {
                let (s1, s2) = walk.seg_fp(i, j);
                assert_eq!(s1, fp_word(&w.letters()[i..j], FP_BASE1));
                assert_eq!(s2, fp_word(&w.letters()[i..j], FP_BASE2));
                let (t1, t2) = walk.inv_seg_fp(i, j);
                assert_eq!(t1, fp_word(&inv.letters()[i..j], FP_BASE1));
                assert_eq!(t2, fp_word(&inv.letters()[i..j], FP_BASE2));
            }
        }
    }

    #[test]
    fn coset_membership_tests() {
        assert!(Subgroup::CyclicA.contains(&FreeWord::parse("aaa").unwrap()));
        assert!(Subgroup::CyclicA.contains(&FreeWord::parse("AA").unwrap()));
        assert!(Subgroup::CyclicA.contains(&FreeWord::identity()));
        assert!(!Subgroup::CyclicA.contains(&FreeWord::parse("ab").unwrap()));
        // aa projects to identity (toggle twice), so it is in ker(pi)
        assert!(Subgroup::KernelPi.contains(&FreeWord::parse("aa").unwrap()));
        assert!(!Subgroup::KernelPi.contains(&FreeWord::parse("ab").unwrap()));
    }
}
