//! Exact arithmetic for the free group F2, the free semigroup F2+, and the
//! lamplighter group Z wr Z/2Z, together with the projection homomorphisms.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * free-group elements are reduced words over `{a, A, b, B}` (capital =
//!   inverse); the empty word is the identity;
//! * lamplighter elements are written lamps-first, `L{i1,i2,...}P{x}` in text
//!   form, with the product `(phi, x) * (psi, y) = (phi xor shift(psi, x), x + y)`:
//!   right multiplication by a generator acts at the walker's current position;
//! * the free-group projection sends `a` (and `a^-1`) to the lamp toggle at the
//!   current position and `b` to a step right; the semigroup projection sends
//!   `a` to a step right and `b` to toggle-then-step-left.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// A generator of F2 or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Letter {
    A = 0,
    AInv = 1,
    B = 2,
    BInv = 3,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::A, Letter::AInv, Letter::B, Letter::BInv];

    /// Positive generators, the alphabet of the free semigroup.
    pub const POSITIVE: [Letter; 2] = [Letter::A, Letter::B];

    #[inline]
    pub fn inverse(self) -> Letter {
        match self {
            Letter::A => Letter::AInv,
            Letter::AInv => Letter::A,
            Letter::B => Letter::BInv,
            Letter::BInv => Letter::B,
        }
    }

    #[inline]
    pub fn to_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::AInv => 'A',
            Letter::B => 'b',
            Letter::BInv => 'B',
        }
    }

    pub fn from_char(c: char) -> Result<Letter, ParseWordError> {
        match c {
            'a' => Ok(Letter::A),
            'A' => Ok(Letter::AInv),
            'b' => Ok(Letter::B),
            'B' => Ok(Letter::BInv),
            _ => Err(ParseWordError::BadLetter(c)),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseWordError {
    #[error("invalid letter {0:?}, expected one of a, A, b, B")]
    BadLetter(char),
}

/// A reduced word over `{a, A, b, B}`: the canonical form of an F2 element.
///
/// The no-adjacent-inverses invariant is maintained by construction; all
/// constructors reduce.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct FreeWord {
    letters: Vec<Letter>,
}

impl FreeWord {
    pub fn identity() -> FreeWord {
        FreeWord::default()
    }

    pub fn generator(l: Letter) -> FreeWord {
        FreeWord { letters: vec![l] }
    }

    /// Reduce an arbitrary letter sequence.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> FreeWord {
        let mut w = FreeWord::identity();
        for l in letters {
            w.push(l);
        }
        w
    }

    pub fn parse(s: &str) -> Result<FreeWord, ParseWordError> {
        let mut w = FreeWord::identity();
        for c in s.chars() {
            w.push(Letter::from_char(c)?);
        }
        Ok(w)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    #[inline]
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Append one letter, cancelling against the current last letter.
    #[inline]
    pub fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    /// Append a reduced word, cancelling at the seam only.
    pub fn push_word(&mut self, rhs: &FreeWord) {
        let c = self.seam_cancellation(rhs);
        self.letters.truncate(self.letters.len() - c);
        self.letters.extend_from_slice(&rhs.letters[c..]);
    }

    /// Product of two reduced words.
    pub fn mul(&self, rhs: &FreeWord) -> FreeWord {
        let mut out = self.clone();
        out.push_word(rhs);
        out
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    /// Length of the reduced product `self * rhs` without materializing it.
    pub fn mul_len(&self, rhs: &FreeWord) -> usize {
        let c = self.seam_cancellation(rhs);
        self.len() + rhs.len() - 2 * c
    }

    /// Number of letters cancelling at the seam of `self * rhs`.
    pub fn seam_cancellation(&self, rhs: &FreeWord) -> usize {
        let max = self.len().min(rhs.len());
        let mut c = 0;
        while c < max && self.letters[self.len() - 1 - c] == rhs.letters[c].inverse() {
            c += 1;
        }
        c
    }

    /// The length-`d` prefix, if the word is that long.
    pub fn prefix(&self, d: usize) -> Option<&[Letter]> {
        self.letters.get(..d)
    }

    /// Canonical byte form, used for hashing and text output.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.letters.iter().map(|l| l.to_char() as u8).collect()
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "e");
        }
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

/// A positive (unreduced) word over `{a, b}`: an element of the free semigroup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PosWord {
    pub letters: Vec<Letter>,
}

impl PosWord {
    pub fn new(letters: Vec<Letter>) -> PosWord {
        debug_assert!(letters
            .iter()
            .all(|l| matches!(l, Letter::A | Letter::B)));
        PosWord { letters }
    }
}

/// A lamplighter element: finite set of lit lamps plus walker position.
///
/// Lamps are kept sorted; two elements are equal iff their fields agree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LampElem {
    lamps: Vec<i64>,
    pos: i64,
}

impl LampElem {
    pub fn identity() -> LampElem {
        LampElem::default()
    }

    /// Construct from arbitrary lamp positions (deduplicated pairs cancel).
    pub fn new(mut lamps: Vec<i64>, pos: i64) -> LampElem {
        lamps.sort_unstable();
        let mut out = Vec::with_capacity(lamps.len());
        let mut i = 0;
        while i < lamps.len() {
            if i + 1 < lamps.len() && lamps[i] == lamps[i + 1] {
                i += 2; // toggled twice: off
            } else {
                out.push(lamps[i]);
                i += 1;
            }
        }
        LampElem { lamps: out, pos }
    }

    pub fn lamps(&self) -> &[i64] {
        &self.lamps
    }

    pub fn pos(&self) -> i64 {
        self.pos
    }

    pub fn is_identity(&self) -> bool {
        self.lamps.is_empty() && self.pos == 0
    }

    /// Group product: `self * rhs` shifts the right factor's lamps by
    /// `self.pos` and takes the symmetric difference.
    pub fn mul(&self, rhs: &LampElem) -> LampElem {
        let mut lamps = Vec::with_capacity(self.lamps.len() + rhs.lamps.len());
        let mut i = 0;
        let mut j = 0;
        while i < self.lamps.len() && j < rhs.lamps.len() {
            let x = self.lamps[i];
            let y = rhs.lamps[j] + self.pos;
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    lamps.push(x);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    lamps.push(y);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        lamps.extend_from_slice(&self.lamps[i..]);
        lamps.extend(rhs.lamps[j..].iter().map(|y| y + self.pos));
        LampElem {
            lamps,
            pos: self.pos + rhs.pos,
        }
    }

    pub fn inverse(&self) -> LampElem {
        LampElem {
            lamps: self.lamps.iter().map(|x| x - self.pos).collect(),
            pos: -self.pos,
        }
    }

    /// Canonical byte form `L{...}P{x}`, used for hashing and text output.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.to_string().into_bytes()
    }
}

impl fmt::Display for LampElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{{")?;
        for (i, x) in self.lamps.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}P{{{}}}", self.pos)
    }
}

/// The two projection homomorphisms onto the lamplighter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// F2 -> Z wr Z/2Z with `a` the toggle and `b` the right shift.
    FreeGroup,
    /// F2+ -> Z wr Z/2Z with `a` the right shift and `b` toggle-then-left.
    FreeSemigroup,
}

impl Projection {
    /// Image of a single letter.
    pub fn letter_image(self, l: Letter) -> LampElem {
        match self {
            Projection::FreeGroup => match l {
                // toggle at the current position; self-inverse
                Letter::A | Letter::AInv => LampElem::new(vec![0], 0),
                Letter::B => LampElem::new(vec![], 1),
                Letter::BInv => LampElem::new(vec![], -1),
            },
            Projection::FreeSemigroup => match l {
                Letter::A => LampElem::new(vec![], 1),
                Letter::B => LampElem::new(vec![0], -1),
                Letter::AInv | Letter::BInv => {
                    panic!("semigroup projection applied to an inverse letter")
                }
            },
        }
    }

    /// Image of a word, folded left to right.
    pub fn project(self, letters: &[Letter]) -> LampElem {
        let mut state = LampState::new();
        for &l in letters {
            state.apply(self, l);
        }
        state.to_elem()
    }

    pub fn project_word(self, w: &FreeWord) -> LampElem {
        self.project(w.letters())
    }
}

/// Incremental projected state of a walk: lamp set plus position, with O(1)
/// per-letter updates and a maintained count of lamps inside a fixed window.
///
/// This is the workhorse of the stopping-time simulations: the lamps-clear
/// predicate is checked from `window_count` without scanning the lamp set.
#[derive(Debug, Clone)]
pub struct LampState {
    lamps: HashSet<i64>,
    pos: i64,
    window: i64,
    window_count: usize,
}

impl LampState {
    pub fn new() -> LampState {
        LampState {
            lamps: HashSet::new(),
            pos: 0,
            window: -1,
            window_count: 0,
        }
    }

    /// Start from an arbitrary lamplighter element.
    pub fn from_elem(e: &LampElem) -> LampState {
        let mut s = LampState::new();
        s.lamps = e.lamps().iter().copied().collect();
        s.pos = e.pos();
        s
    }

    /// Track the number of lit lamps inside `[-window, window]`.
    pub fn set_window(&mut self, window: i64) {
        self.window = window;
        self.window_count = self
            .lamps
            .iter()
            .filter(|&&x| x.abs() <= window)
            .count();
    }

    #[inline]
    pub fn pos(&self) -> i64 {
        self.pos
    }

    #[inline]
    pub fn lamp_on(&self, site: i64) -> bool {
        self.lamps.contains(&site)
    }

    /// Lamps lit inside the tracked window; meaningful after `set_window`.
    #[inline]
    pub fn window_count(&self) -> usize {
        self.window_count
    }

    #[inline]
    fn toggle(&mut self, site: i64) {
        if !self.lamps.insert(site) {
            self.lamps.remove(&site);
            if self.window >= 0 && site.abs() <= self.window {
                self.window_count -= 1;
            }
        } else if self.window >= 0 && site.abs() <= self.window {
            self.window_count += 1;
        }
    }

    /// Apply one letter of the walk under the given projection.
    #[inline]
    pub fn apply(&mut self, proj: Projection, l: Letter) {
        match proj {
            Projection::FreeGroup => match l {
                Letter::A | Letter::AInv => self.toggle(self.pos),
                Letter::B => self.pos += 1,
                Letter::BInv => self.pos -= 1,
            },
            Projection::FreeSemigroup => match l {
                Letter::A => self.pos += 1,
                Letter::B => {
                    self.toggle(self.pos);
                    self.pos -= 1;
                }
                Letter::AInv | Letter::BInv => {
                    panic!("semigroup projection applied to an inverse letter")
                }
            },
        }
    }

    /// Right-multiply by an already-projected element.
    pub fn apply_elem(&mut self, e: &LampElem) {
        for &x in e.lamps() {
            self.toggle(x + self.pos);
        }
        self.pos += e.pos();
    }

    pub fn to_elem(&self) -> LampElem {
        let mut lamps: Vec<i64> = self.lamps.iter().copied().collect();
        lamps.sort_unstable();
        LampElem { lamps, pos: self.pos }
    }
}

impl Default for LampState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_word(rng: &mut impl Rng, len: usize) -> FreeWord {
        FreeWord::from_letters((0..len).map(|_| Letter::ALL[rng.gen_range(0..4)]))
    }

    #[test]
    fn mul_cancels_at_seam() {
        let u = FreeWord::parse("ab").unwrap();
        let v = FreeWord::parse("Ba").unwrap();
        assert_eq!(u.mul(&v), FreeWord::parse("aa").unwrap());
    }

    #[test]
    fn identity_is_neutral() {
        let w = FreeWord::parse("abAB").unwrap();
        assert_eq!(FreeWord::identity().mul(&w), w);
        assert_eq!(w.mul(&FreeWord::identity()), w);
    }

    #[test]
    fn conjugate_cancels_fully() {
        let u = FreeWord::parse("abA").unwrap();
        let v = FreeWord::parse("aBA").unwrap();
        assert!(u.mul(&v).is_identity());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(
            FreeWord::parse("ab").unwrap().inverse(),
            FreeWord::parse("BA").unwrap()
        );
        assert_eq!(FreeWord::identity().inverse(), FreeWord::identity());
    }

    #[test]
    fn group_laws_random() {
        let mut rng = crate::seeding::trial_rng(1, "group-laws", 0);
        for _ in 0..200 {
            let lu = rng.gen_range(0..200);
            let u = random_word(&mut rng, lu);
            let lv = rng.gen_range(0..200);
            let v = random_word(&mut rng, lv);
            let lw = rng.gen_range(0..200);
            let w = random_word(&mut rng, lw);
            assert_eq!(u.mul(&v).mul(&w), u.mul(&v.mul(&w)));
            assert!(u.mul(&u.inverse()).is_identity());
            assert_eq!(u.inverse().inverse(), u);
            assert_eq!(u.mul_len(&v), u.mul(&v).len());
        }
    }

    #[test]
    fn lamp_mul_examples() {
        let shift = LampElem::new(vec![], 1);
        let toggle = LampElem::new(vec![0], 0);
        assert_eq!(shift.mul(&toggle), LampElem::new(vec![1], 1));
        assert_eq!(LampElem::identity().mul(&toggle), toggle);
        assert!(toggle.mul(&toggle).is_identity());
    }

    #[test]
    fn lamp_inverse_law() {
        let mut rng = crate::seeding::trial_rng(1, "lamp-laws", 0);
        for _ in 0..200 {
            let x = LampElem::new(
                (0..rng.gen_range(0..8)).map(|_| rng.gen_range(-20..20)).collect(),
                rng.gen_range(-10..10),
            );
            let y = LampElem::new(
                (0..rng.gen_range(0..8)).map(|_| rng.gen_range(-20..20)).collect(),
                rng.gen_range(-10..10),
            );
            let z = LampElem::new(
                (0..rng.gen_range(0..8)).map(|_| rng.gen_range(-20..20)).collect(),
                rng.gen_range(-10..10),
            );
            assert!(x.mul(&x.inverse()).is_identity());
            assert!(x.inverse().mul(&x).is_identity());
            assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
        }
    }

    #[test]
    fn lamp_conjugation_shifts_index() {
        // t * lamp(0) * t^-1 = lamp(t)
        for t in -5i64..=5 {
            let shift = LampElem::new(vec![], t);
            let conj = shift.mul(&LampElem::new(vec![0], 0)).mul(&shift.inverse());
            assert_eq!(conj, LampElem::new(vec![t], 0));
        }
    }

    #[test]
    fn projection_base_cases() {
        let p = Projection::FreeGroup;
        assert_eq!(
            p.project_word(&FreeWord::parse("a").unwrap()),
            LampElem::new(vec![0], 0)
        );
        // b a B: toggle happens one step to the right
        assert_eq!(
            p.project_word(&FreeWord::parse("baB").unwrap()),
            LampElem::new(vec![1], 0)
        );
        // a^2 reduces to the kernel
        assert!(p
            .project(&[Letter::A, Letter::A])
            .is_identity());
    }

    #[test]
    fn projection_semigroup_base_cases() {
        let p = Projection::FreeSemigroup;
        assert_eq!(p.letter_image(Letter::A), LampElem::new(vec![], 1));
        assert_eq!(p.letter_image(Letter::B), LampElem::new(vec![0], -1));
        let w = PosWord::new(vec![Letter::A, Letter::B]);
        // a then b: move right, then toggle at 1 and move back to 0
        assert_eq!(p.project(&w.letters), LampElem::new(vec![1], 0));
    }

    #[test]
    fn projection_is_homomorphism() {
        let mut rng = crate::seeding::trial_rng(1, "proj-hom", 0);
        for _ in 0..500 {
            let lu = rng.gen_range(0..80);
            let u = random_word(&mut rng, lu);
            let lv = rng.gen_range(0..80);
            let v = random_word(&mut rng, lv);
            let p = Projection::FreeGroup;
            assert_eq!(
                p.project_word(&u).mul(&p.project_word(&v)),
                p.project_word(&u.mul(&v))
            );
        }
    }

    #[test]
    fn semigroup_projection_is_homomorphism() {
        let mut rng = crate::seeding::trial_rng(1, "proj-hom-semi", 0);
        for _ in 0..500 {
            let u: Vec<Letter> = (0..rng.gen_range(0..80))
                .map(|_| Letter::POSITIVE[rng.gen_range(0..2)])
                .collect();
            let v: Vec<Letter> = (0..rng.gen_range(0..80))
                .map(|_| Letter::POSITIVE[rng.gen_range(0..2)])
                .collect();
            let p = Projection::FreeSemigroup;
            let uv: Vec<Letter> = u.iter().chain(v.iter()).copied().collect();
            assert_eq!(p.project(&u).mul(&p.project(&v)), p.project(&uv));
        }
    }

    #[test]
    fn lamp_state_matches_batch_projection() {
        let mut rng = crate::seeding::trial_rng(1, "lamp-state", 0);
        for _ in 0..100 {
            let lw = rng.gen_range(0..200);
            let w = random_word(&mut rng, lw);
            let mut s = LampState::new();
            s.set_window(2);
            for &l in w.letters() {
                s.apply(Projection::FreeGroup, l);
            }
            let elem = Projection::FreeGroup.project_word(&w);
            assert_eq!(s.to_elem(), elem);
            let in_window = elem.lamps().iter().filter(|&&x| x.abs() <= 2).count();
            assert_eq!(s.window_count(), in_window);
        }
    }

    #[test]
    fn text_forms() {
        assert_eq!(FreeWord::identity().to_string(), "e");
        assert_eq!(FreeWord::parse("aBa").unwrap().to_string(), "aBa");
        assert_eq!(LampElem::new(vec![2, -1], 3).to_string(), "L{-1,2}P{3}");
        assert!(FreeWord::parse("xyz").is_err());
    }
}
