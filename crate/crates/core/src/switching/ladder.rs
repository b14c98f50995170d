//! Scales, ladders, spike decompositions, the despiking forest, and the two
//! experiments built on them: subtree retention and the optional-stopping
//! gap.
//!
//! A scale is a triple `(lambda, Sigma, A)`; an element `g` is spiked at
//! level `n` when `g = p * sigma * q` with `sigma` in `Sigma_n` and `p, q`
//! products of at most `lambda(n)` elements of `Delta_n`. The ladder
//! certificates checked here are exactly the two defining properties: no
//! element reachable in an experiment has two spike decompositions, and
//! `Sigma_n` is disjoint from `Delta_n^{3 lambda(n)}`.
//!
//! Scale data is built at desk scale: component stopping times come from the
//! hash-thinned switch-hitting construction against small product sets, and
//! the S-sets are empirical high-probability supports of the sampled stopped
//! measures. The mixture used by the experiments resamples those pools, so
//! every support certificate holds exactly for the measure the experiments
//! actually run.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::group::{FreeWord, Letter};
use crate::measures::{BaseStep, RecordMeasure, StepMeasure};
use crate::seeding::trial_rng;
use crate::stats::binomial_estimate;
use crate::stopping::StoppingSpec;
use crate::switching::{
    canonical_order, is_switching, run_switch_hit, FiniteSet, SwitchTarget,
};
use crate::walks::{collect_cylinder_samples, histogram_from_samples, IncrementSampler};

#[derive(Debug, Error)]
pub enum LadderError {
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("ladder certificate violated: {0}")]
    CertificateViolation(String),
}

// ---------------------------------------------------------------------------
// Scale data
// ---------------------------------------------------------------------------

/// A formal product set: `generators^exponent`, stored unexpanded.
#[derive(Debug, Clone)]
pub struct ProductSet {
    pub generators: FiniteSet,
    pub exponent: u64,
}

impl ProductSet {
    /// Expand to an explicit set, aborting once more than `budget` elements
    /// have been generated.
    pub fn expand(&self, budget: usize) -> Result<FiniteSet, LadderError> {
        let mut seen: std::collections::HashSet<FreeWord> = std::collections::HashSet::new();
        seen.insert(FreeWord::identity());
        let mut frontier: Vec<FreeWord> = vec![FreeWord::identity()];
        for _ in 0..self.exponent {
            let mut next = Vec::new();
            for w in &frontier {
                for g in self.generators.elems() {
                    let prod = w.mul(g);
                    if seen.insert(prod.clone()) {
                        if seen.len() > budget {
                            return Err(LadderError::BudgetExceeded(format!(
                                "product set expansion beyond {budget} elements"
                            )));
                        }
                        next.push(prod);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(FiniteSet::new(seen.into_iter().collect()))
    }
}

/// One level of derived Delta data: the explicit element set and whether it
/// is exactly the ball of radius one (the fast membership case).
#[derive(Debug, Clone)]
struct DeltaData {
    elems: FiniteSet,
    ball_one: bool,
}

impl DeltaData {
    fn new(elems: FiniteSet) -> DeltaData {
        let ball_one = elems == FiniteSet::ball(1);
        DeltaData { elems, ball_one }
    }

    /// Membership of `w` in `elems^{<= max_factors}`, with a work budget.
    fn power_contains(
        &self,
        w: &FreeWord,
        max_factors: u64,
        budget: &mut u64,
    ) -> Result<bool, LadderError> {
        if self.ball_one {
            return Ok(w.len() as u64 <= max_factors);
        }
        // budgeted DFS: peel one factor at a time, preferring progress
        fn dfs(
            w: &FreeWord,
            remaining: u64,
            elems: &FiniteSet,
            budget: &mut u64,
            memo: &mut std::collections::HashSet<(Vec<Letter>, u64)>,
        ) -> Result<bool, LadderError> {
            if w.is_identity() {
                return Ok(true);
            }
            if remaining == 0 {
                return Ok(false);
            }
            if *budget == 0 {
                return Err(LadderError::BudgetExceeded(
                    "delta power membership search".into(),
                ));
            }
            *budget -= 1;
            let key = (w.letters().to_vec(), remaining);
            if !memo.insert(key) {
                return Ok(false);
            }
            for d in elems.elems() {
                if d.is_identity() {
                    continue;
                }
                let rest = d.inverse().mul(w);
                if dfs(&rest, remaining - 1, elems, budget, memo)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        let mut memo = std::collections::HashSet::new();
        dfs(w, max_factors, &self.elems, budget, &mut memo)
    }
}

/// Scale data `(lambda, Sigma, A)` with derived Delta sets and a substring
/// index over the long spikes.
#[derive(Debug, Clone)]
pub struct ScaleLadder {
    /// lambda(n) for n = 1..=K.
    pub lambda: Vec<u64>,
    /// Sigma_n for n = 1..=K.
    pub sigma: Vec<FiniteSet>,
    /// A_0 (contains the identity).
    pub a0: FiniteSet,
    /// A_n for n = 1..=K, as formal product data.
    pub a_sets: Vec<ProductSet>,
    deltas: Vec<DeltaData>,
    spike_index: SpikeIndex,
}

/// Anchor length for the substring index over long spikes.
const ANCHOR_LEN: usize = 32;

/// Rolling-hash index over fixed anchor blocks of the long spikes: each
/// sigma long enough contributes the block sigma[lambda .. lambda+ANCHOR_LEN],
/// which must appear inside the spike core of any valid decomposition.
#[derive(Debug, Clone, Default)]
struct SpikeIndex {
    /// anchor hash -> (level index, sigma index)
    anchors: HashMap<u64, Vec<(usize, usize)>>,
    /// spikes too short for anchoring, tried by direct alignment
    short: Vec<(usize, usize)>,
}

fn anchor_hash(letters: &[Letter]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &l in letters {
        h ^= l as u64 + 1;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl ScaleLadder {
    pub fn new(
        lambda: Vec<u64>,
        sigma: Vec<FiniteSet>,
        a0: FiniteSet,
        a_sets: Vec<ProductSet>,
        expansion_budget: usize,
    ) -> Result<ScaleLadder, LadderError> {
        assert_eq!(lambda.len(), sigma.len());
        assert_eq!(lambda.len(), a_sets.len());
        if !a0.contains(&FreeWord::identity()) {
            return Err(LadderError::CertificateViolation(
                "A_0 must contain the identity".into(),
            ));
        }
        // Delta_n = A_0 union over i < n of (Sigma_i +- and A_i +-)
        let mut deltas = Vec::new();
        for n in 1..=lambda.len() {
            let mut elems: Vec<FreeWord> = a0.elems().to_vec();
            for i in 1..n {
                let sym = sigma[i - 1].symmetrized();
                elems.extend(sym.elems().iter().cloned());
                let expanded = a_sets[i - 1].expand(expansion_budget)?;
                let expanded_sym = expanded.symmetrized();
                elems.extend(expanded_sym.elems().iter().cloned());
            }
            deltas.push(DeltaData::new(FiniteSet::new(elems)));
        }

        let mut index = SpikeIndex::default();
        for (li, (set, &lam)) in sigma.iter().zip(&lambda).enumerate() {
            for (si, s) in set.elems().iter().enumerate() {
                let lam = lam as usize;
                if s.len() >= 2 * lam + ANCHOR_LEN {
                    let block = &s.letters()[lam..lam + ANCHOR_LEN];
                    index
                        .anchors
                        .entry(anchor_hash(block))
                        .or_default()
                        .push((li, si));
                } else {
                    index.short.push((li, si));
                }
            }
        }

        Ok(ScaleLadder {
            lambda,
            sigma,
            a0,
            a_sets,
            deltas,
            spike_index: index,
        })
    }

    pub fn levels(&self) -> usize {
        self.lambda.len()
    }

    /// Membership of `w` in `Delta_n^{<= max_factors}`.
    pub fn delta_power_contains(
        &self,
        n: usize,
        w: &FreeWord,
        max_factors: u64,
        budget: &mut u64,
    ) -> Result<bool, LadderError> {
        self.deltas[n - 1].power_contains(w, max_factors, budget)
    }

    pub fn delta_elems(&self, n: usize) -> &FiniteSet {
        &self.deltas[n - 1].elems
    }

    /// Certificate: `Sigma_n` and `Delta_n^{3 lambda(n)}` are disjoint, for
    /// every level.
    pub fn check_disjointness(&self, budget: u64) -> Result<(), LadderError> {
        for n in 1..=self.levels() {
            let mut b = budget;
            for s in self.sigma[n - 1].elems() {
                if self.delta_power_contains(n, s, 3 * self.lambda[n - 1], &mut b)? {
                    return Err(LadderError::CertificateViolation(format!(
                        "sigma element of level {n} lies in Delta_{n}^(3 lambda)"
                    )));
                }
            }
        }
        // Sigma sets pairwise disjoint
        for i in 1..=self.levels() {
            for j in i + 1..=self.levels() {
                for s in self.sigma[i - 1].elems() {
                    if self.sigma[j - 1].contains(s) {
                        return Err(LadderError::CertificateViolation(format!(
                            "Sigma_{i} and Sigma_{j} intersect"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Structured text form: lambda table, A generators and exponents,
    /// Sigma elements in canonical form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# lampwalk ladder v1").unwrap();
        writeln!(out, "levels={}", self.levels()).unwrap();
        let a0: Vec<String> = self.a0.elems().iter().map(|w| w.to_string()).collect();
        writeln!(out, "a0={}", a0.join(",")).unwrap();
        for n in 1..=self.levels() {
            writeln!(out, "level {n}").unwrap();
            writeln!(out, "lambda={}", self.lambda[n - 1]).unwrap();
            writeln!(out, "a_exponent={}", self.a_sets[n - 1].exponent).unwrap();
            let gens: Vec<String> = self.a_sets[n - 1]
                .generators
                .elems()
                .iter()
                .map(|w| w.to_string())
                .collect();
            writeln!(out, "a_generators={}", gens.join(",")).unwrap();
            writeln!(out, "sigma_count={}", self.sigma[n - 1].len()).unwrap();
            for s in self.sigma[n - 1].elems() {
                writeln!(out, "sigma {s}").unwrap();
            }
        }
        out
    }
}

/// A spike decomposition `g = prefix * spike * postfix`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeDecomposition {
    pub prefix: FreeWord,
    pub spike: FreeWord,
    pub postfix: FreeWord,
    pub level: usize,
}

/// Find the spike decomposition of `g`, scanning all levels and all spikes.
///
/// Returns None for unspiked elements. Finding two distinct decompositions is
/// a certificate violation and reported as an error, as is exhausting the
/// work budget.
pub fn spike_decompose(
    g: &FreeWord,
    ladder: &ScaleLadder,
    budget: u64,
) -> Result<Option<SpikeDecomposition>, LadderError> {
    let mut budget = budget;
    let mut found: Option<SpikeDecomposition> = None;

    let consider =
        |cand: SpikeDecomposition, found: &mut Option<SpikeDecomposition>| -> Result<(), LadderError> {
            if let Some(prev) = found {
                if *prev != cand {
                    return Err(LadderError::CertificateViolation(format!(
                        "two spike decompositions for |g| = {}: levels {} and {}",
                        g.len(),
                        prev.level,
                        cand.level
                    )));
                }
                return Ok(());
            }
            *found = Some(cand);
            Ok(())
        };

    // Long spikes: roll the anchor hash over g and look up the index.
    if !ladder.spike_index.anchors.is_empty() && g.len() >= ANCHOR_LEN {
        let letters = g.letters();
        for h in 0..=letters.len() - ANCHOR_LEN {
            let hash = anchor_hash(&letters[h..h + ANCHOR_LEN]);
            let Some(cands) = ladder.spike_index.anchors.get(&hash) else {
                continue;
            };
            for &(li, si) in cands {
                if budget == 0 {
                    return Err(LadderError::BudgetExceeded("spike anchor scan".into()));
                }
                budget -= 1;
                let level = li + 1;
                let lam = ladder.lambda[li] as usize;
                let sigma = &ladder.sigma[li].elems()[si];
                if let Some(cand) =
                    try_alignment(g, sigma, lam, h, level, ladder, &mut budget)?
                {
                    consider(cand, &mut found)?;
                }
            }
        }
    }

    // Short spikes: direct alignment search.
    for &(li, si) in &ladder.spike_index.short {
        let level = li + 1;
        let lam = ladder.lambda[li] as usize;
        let sigma = &ladder.sigma[li].elems()[si];
        for i in 0..=lam.min(g.len()) {
            for c_p in 0..=lam.min(sigma.len()) {
                if budget == 0 {
                    return Err(LadderError::BudgetExceeded("short spike scan".into()));
                }
                budget -= 1;
                let prefix = FreeWord::from_letters(g.letters()[..i].iter().copied())
                    .mul(&FreeWord::from_letters(sigma.letters()[..c_p].iter().copied()).inverse());
                let postfix = sigma.inverse().mul(&prefix.inverse()).mul(g);
                if let Some(cand) = validate_decomposition(
                    g, &prefix, sigma, &postfix, level, ladder, &mut budget,
                )? {
                    consider(cand, &mut found)?;
                }
            }
        }
    }

    Ok(found)
}

/// Extend an anchor occurrence at position `h` of `g` to a candidate
/// decomposition and validate it.
fn try_alignment(
    g: &FreeWord,
    sigma: &FreeWord,
    lam: usize,
    h: usize,
    level: usize,
    ladder: &ScaleLadder,
    budget: &mut u64,
) -> Result<Option<SpikeDecomposition>, LadderError> {
    let gl = g.letters();
    let sl = sigma.letters();
    // anchor block sits at sigma offset lam; verify it really matches
    if sl.len() < lam + ANCHOR_LEN || gl.len() < h + ANCHOR_LEN {
        return Ok(None);
    }
    if sl[lam..lam + ANCHOR_LEN] != gl[h..h + ANCHOR_LEN] {
        return Ok(None); // hash collision
    }
    // extend left: positions sigma[lam-1-e] vs g[h-1-e]
    let mut left = 0;
    while left < lam && left < h && sl[lam - 1 - left] == gl[h - 1 - left] {
        left += 1;
    }
    let c_p = lam - left;
    let i = h - left;
    // extend right from sigma offset lam+ANCHOR_LEN
    let mut right = 0;
    while lam + ANCHOR_LEN + right < sl.len()
        && h + ANCHOR_LEN + right < gl.len()
        && sl[lam + ANCHOR_LEN + right] == gl[h + ANCHOR_LEN + right]
    {
        right += 1;
    }
    let matched_end = lam + ANCHOR_LEN + right; // letters of sigma matched
    let c_q = sl.len() - matched_end;
    if c_q > lam {
        return Ok(None); // too much of sigma missing on the right
    }
    let k = h + ANCHOR_LEN + right;
    // prefix = g[..i] * inv(sigma[..c_p]); postfix = inv(sigma[end..]) * g[k..]
    let prefix = FreeWord::from_letters(gl[..i].iter().copied())
        .mul(&FreeWord::from_letters(sl[..c_p].iter().copied()).inverse());
    let postfix = FreeWord::from_letters(sl[matched_end..].iter().copied())
        .inverse()
        .mul(&FreeWord::from_letters(gl[k..].iter().copied()));
    validate_decomposition(g, &prefix, sigma, &postfix, level, ladder, budget)
}

fn validate_decomposition(
    g: &FreeWord,
    prefix: &FreeWord,
    sigma: &FreeWord,
    postfix: &FreeWord,
    level: usize,
    ladder: &ScaleLadder,
    budget: &mut u64,
) -> Result<Option<SpikeDecomposition>, LadderError> {
    let lam = ladder.lambda[level - 1];
    if !ladder.delta_power_contains(level, prefix, lam, budget)? {
        return Ok(None);
    }
    if !ladder.delta_power_contains(level, postfix, lam, budget)? {
        return Ok(None);
    }
    if &prefix.mul(sigma).mul(postfix) != g {
        return Ok(None);
    }
    Ok(Some(SpikeDecomposition {
        prefix: prefix.clone(),
        spike: sigma.clone(),
        postfix: postfix.clone(),
        level,
    }))
}

// ---------------------------------------------------------------------------
// Despiking forest
// ---------------------------------------------------------------------------

/// The despiking graph over a finite vertex set, closed under parents.
#[derive(Debug, Clone)]
pub struct DespikingForest {
    pub vertices: Vec<FreeWord>,
    /// parent[i] = index of the despiking prefix, None for unspiked roots.
    pub parent: Vec<Option<usize>>,
    pub roots: Vec<usize>,
}

impl DespikingForest {
    pub fn edge_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    /// Edge list in canonical text form: child,parent per line.
    pub fn edge_list(&self) -> String {
        let mut out = String::from("child,parent\n");
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                writeln!(out, "{},{}", self.vertices[i], self.vertices[*p]).unwrap();
            }
        }
        out
    }
}

/// Build the forest over the closure of `vertices` under despiking parents.
/// Asserts acyclicity and one unspiked root per tree; any violation is an
/// error, loudly.
pub fn build_forest(
    vertices: &[FreeWord],
    ladder: &ScaleLadder,
    budget: u64,
) -> Result<DespikingForest, LadderError> {
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut verts: Vec<FreeWord> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();

    let intern = |w: &FreeWord,
                      verts: &mut Vec<FreeWord>,
                      parent: &mut Vec<Option<usize>>,
                      pending: &mut Vec<usize>,
                      index: &mut HashMap<Vec<u8>, usize>| {
        let key = w.canonical_bytes();
        if let Some(&i) = index.get(&key) {
            return i;
        }
        let i = verts.len();
        verts.push(w.clone());
        parent.push(None);
        pending.push(i);
        index.insert(key, i);
        i
    };

    for w in vertices {
        intern(w, &mut verts, &mut parent, &mut pending, &mut index);
    }

    let mut processed: Vec<bool> = Vec::new();
    while let Some(i) = pending.pop() {
        if processed.len() < verts.len() {
            processed.resize(verts.len(), false);
        }
        if processed[i] {
            continue;
        }
        processed[i] = true;
        let g = verts[i].clone();
        if let Some(dec) = spike_decompose(&g, ladder, budget)? {
            let p = intern(&dec.prefix, &mut verts, &mut parent, &mut pending, &mut index);
            parent[i] = Some(p);
        }
    }

    // acyclicity and root uniqueness via parent-chain walks
    let mut roots = Vec::new();
    for i in 0..verts.len() {
        if parent[i].is_none() {
            roots.push(i);
        }
        let mut seen = vec![i];
        let mut cur = i;
        while let Some(p) = parent[cur] {
            if seen.contains(&p) {
                return Err(LadderError::CertificateViolation(format!(
                    "cycle in despiking graph through vertex {}",
                    verts[i]
                )));
            }
            seen.push(p);
            cur = p;
        }
    }
    Ok(DespikingForest {
        vertices: verts,
        parent,
        roots,
    })
}

// ---------------------------------------------------------------------------
// S-sets and the empirical mixture
// ---------------------------------------------------------------------------

/// Empirical high-probability supports of the component measures.
#[derive(Debug, Clone)]
pub struct SSets {
    /// distinct elements of pool i (1-based level), ordered by decreasing
    /// empirical frequency then canonical order
    ordered: Vec<Vec<(FreeWord, u64)>>,
    /// cut[i][j] = size of S_{i,j} as a prefix of ordered[i]
    cuts: Vec<Vec<usize>>,
    pub reports: Vec<SSetReport>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SSetReport {
    pub i: u64,
    pub j: u64,
    pub threshold: f64,
    pub in_sample_mass: f64,
    pub support_size: usize,
    pub pool_size: u64,
}

impl SSets {
    /// S_{i,j} as an explicit set (i >= 1).
    pub fn set(&self, i: u64, j: u64) -> FiniteSet {
        let cut = self.cuts[(i - 1) as usize][(j - 1) as usize];
        FiniteSet::new(
            self.ordered[(i - 1) as usize][..cut]
                .iter()
                .map(|(w, _)| w.clone())
                .collect(),
        )
    }
}

fn build_ssets(
    pools: &[Vec<FreeWord>],
    p: &RecordMeasure,
    lambda: &[u64],
    k: u64,
) -> SSets {
    let mut ordered = Vec::new();
    let mut cuts = Vec::new();
    let mut reports = Vec::new();
    for (idx, pool) in pools.iter().enumerate() {
        let i = idx as u64 + 1;
        let mut freq: HashMap<Vec<u8>, (FreeWord, u64)> = HashMap::new();
        for w in pool {
            freq.entry(w.canonical_bytes())
                .or_insert_with(|| (w.clone(), 0))
                .1 += 1;
        }
        let mut items: Vec<(FreeWord, u64)> = freq.into_values().collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| canonical_order(&a.0, &b.0)));
        let n = pool.len() as f64;
        let mut level_cuts = Vec::new();
        for j in 1..=k {
            let lam = lambda[(j - 1) as usize] as f64;
            let base = 1.0 - p.pmf(i) * 0.5f64.powi(j as i32) / lam;
            // CI safety margin of three sigma on the captured mass
            let margin = 3.0 * (base * (1.0 - base) / n).sqrt();
            let threshold = (base + margin).min(1.0);
            let mut acc = 0.0;
            let mut cut = items.len();
            for (idx, (_, c)) in items.iter().enumerate() {
                acc += *c as f64 / n;
                if acc >= threshold {
                    cut = idx + 1;
                    break;
                }
            }
            let mass: f64 = items[..cut].iter().map(|(_, c)| *c as f64 / n).sum();
            reports.push(SSetReport {
                i,
                j,
                threshold,
                in_sample_mass: mass,
                support_size: cut,
                pool_size: pool.len() as u64,
            });
            level_cuts.push(cut);
        }
        // nestedness: thresholds grow with j, so cuts must too
        for w in level_cuts.windows(2) {
            debug_assert!(w[0] <= w[1]);
        }
        ordered.push(items);
        cuts.push(level_cuts);
    }
    SSets {
        ordered,
        cuts,
        reports,
    }
}

/// One component of the empirical mixture.
#[derive(Debug, Clone)]
pub enum PoolComponent {
    /// A fresh base step (components whose stopping time is identically one).
    FreshBase,
    /// Resample an endpoint pool (the empirical stopped measure).
    Pool(Arc<Vec<FreeWord>>),
}

/// The mixture over empirical component measures: one step draws a component
/// index from `p` conditioned on `0..=K`, then an increment from that
/// component.
#[derive(Debug, Clone)]
pub struct EmpiricalMixture {
    pub p: RecordMeasure,
    pub components: Vec<PoolComponent>,
    pub base: StepMeasure<BaseStep>,
}

impl EmpiricalMixture {
    pub fn draw_component(&self, rng: &mut impl Rng) -> u64 {
        loop {
            let i = self.p.sample(rng);
            if (i as usize) < self.components.len() {
                return i;
            }
        }
    }

    /// Mass of component `n` after conditioning on the available range.
    pub fn conditioned_mass(&self, n: u64) -> f64 {
        let z: f64 = (0..self.components.len() as u64)
            .map(|i| self.p.pmf(i))
            .sum();
        self.p.pmf(n) / z
    }

    pub fn sample_component(&self, i: u64, rng: &mut ChaCha8Rng) -> FreeWord {
        match &self.components[i as usize] {
            PoolComponent::FreshBase => match self.base.sample(rng).as_letter() {
                Some(l) => FreeWord::generator(l),
                None => FreeWord::identity(),
            },
            PoolComponent::Pool(pool) => pool[rng.gen_range(0..pool.len())].clone(),
        }
    }
}

impl IncrementSampler for EmpiricalMixture {
    fn sample_increment(&self, rng: &mut ChaCha8Rng) -> (FreeWord, bool) {
        let i = self.draw_component(rng);
        (self.sample_component(i, rng), false)
    }
}

// ---------------------------------------------------------------------------
// build_ladder
// ---------------------------------------------------------------------------

/// Desk-scale knobs of the ladder construction.
#[derive(Debug, Clone)]
pub struct LadderConfig {
    /// Number of levels K.
    pub k: u64,
    /// lambda(n) per level (factor bound for spike prefixes).
    pub lambda: Vec<u64>,
    /// Product-set exponent per level for the switch-hit input sets.
    pub exponents: Vec<u64>,
    /// Endpoint pool size per level.
    pub pool_sizes: Vec<u64>,
    /// Seed of the thinning uniforms.
    pub switch_seed: u64,
    /// Cap on base steps per switch-hit run.
    pub horizon_cap: u64,
    /// Max elements when expanding product sets.
    pub expansion_budget: usize,
    /// Work budget for decomposition searches.
    pub decompose_budget: u64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            k: 2,
            lambda: vec![1, 64],
            exponents: vec![1, 2],
            pool_sizes: vec![4_000, 400],
            switch_seed: 0x5eed,
            horizon_cap: 4_000_000,
            expansion_budget: 4_096,
            decompose_budget: 1_000_000,
        }
    }
}

/// Everything the ladder experiments need.
#[derive(Debug, Clone)]
pub struct LadderBuild {
    pub ladder: ScaleLadder,
    pub ssets: SSets,
    pub mixture: EmpiricalMixture,
    /// Stopping specs of the components (for reporting).
    pub component_specs: Vec<StoppingSpec>,
    /// Per level: fraction of the S_{n,n} support removed to enforce the
    /// disjointness certificate.
    pub sigma_filtered_fraction: Vec<f64>,
    pub pool_truncated: u64,
    pub certificate_log: Vec<String>,
}

/// Inductively build the stopping times, pools, S-sets and the scale, then
/// verify the ladder certificates.
pub fn build_ladder(
    base: &StepMeasure<BaseStep>,
    p: &RecordMeasure,
    cfg: &LadderConfig,
    master_seed: u64,
) -> Result<LadderBuild, LadderError> {
    assert_eq!(cfg.lambda.len(), cfg.k as usize);
    assert_eq!(cfg.exponents.len(), cfg.k as usize);
    assert_eq!(cfg.pool_sizes.len(), cfg.k as usize);

    // A_0: the identity together with the base-step support.
    let a0 = FiniteSet::ball(1);
    let mut certificate_log = Vec::new();
    let mut pools: Vec<Vec<FreeWord>> = Vec::new();
    let mut targets: Vec<SwitchTarget> = Vec::new();
    let mut component_specs: Vec<StoppingSpec> = vec![StoppingSpec::Fixed(1)];
    let mut a_sets: Vec<ProductSet> = Vec::new();
    let mut pool_truncated = 0u64;

    // interim S-set data is rebuilt as levels are added; the input of tau_k
    // uses the S_{i,k} sets of the previously built pools
    for k in 1..=cfg.k {
        let interim = build_ssets(&pools, p, &cfg.lambda, cfg.k);
        // union of S_{i,k} for 0 <= i <= k-1 (S_0k = {e})
        let mut gens: Vec<FreeWord> = vec![FreeWord::identity()];
        for i in 1..k {
            gens.extend(interim.set(i, k).elems().iter().cloned());
        }
        let product = ProductSet {
            generators: FiniteSet::new(gens),
            exponent: cfg.exponents[(k - 1) as usize],
        };
        let f_input = product.expand(cfg.expansion_budget)?;
        let target = SwitchTarget::new(&f_input, cfg.switch_seed.wrapping_add(k), false);
        certificate_log.push(format!(
            "level {k}: switch-hit input |F| = {} (exponent {})",
            target.f_set().len(),
            product.exponent
        ));

        let pool_size = cfg.pool_sizes[(k - 1) as usize];
        let samples: Vec<(FreeWord, bool)> = (0..pool_size)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(master_seed, &format!("ladder-pool-{k}"), trial);
                let s = run_switch_hit(base, &target, cfg.horizon_cap, &mut rng);
                (s.endpoint, s.truncated)
            })
            .collect();
        let truncated = samples.iter().filter(|(_, t)| *t).count() as u64;
        pool_truncated += truncated;
        pools.push(
            samples
                .into_iter()
                .filter(|(_, t)| !t)
                .map(|(w, _)| w)
                .collect(),
        );
        targets.push(target);
        a_sets.push(product);
        component_specs.push(StoppingSpec::SwitchHit(targets.last().unwrap().clone()));
    }

    let ssets = build_ssets(&pools, p, &cfg.lambda, cfg.k);

    // Sigma_n = S_{n,n} minus any element of Delta_n^{3 lambda(n)}: the
    // certificate is enforced by construction and the removed fraction
    // reported. For switch-built levels the removal is expected to be empty
    // or tiny (short endpoints from early stops).
    let mut sigma: Vec<FiniteSet> = Vec::new();
    let mut sigma_filtered_fraction = Vec::new();
    for n in 1..=cfg.k {
        // Delta_n from A_0 and the previously fixed levels
        let interim = ScaleLadder::new(
            cfg.lambda[..n as usize].to_vec(),
            {
                let mut s = sigma.clone();
                s.push(FiniteSet::new(vec![])); // placeholder for level n
                s
            },
            a0.clone(),
            a_sets[..n as usize].to_vec(),
            cfg.expansion_budget,
        )?;
        let raw = ssets.set(n, n);
        let mut kept = Vec::new();
        let mut removed = 0usize;
        let mut budget = cfg.decompose_budget;
        for w in raw.elems() {
            if interim.delta_power_contains(
                n as usize,
                w,
                3 * cfg.lambda[(n - 1) as usize],
                &mut budget,
            )? {
                removed += 1;
            } else {
                kept.push(w.clone());
            }
        }
        sigma_filtered_fraction.push(removed as f64 / raw.len().max(1) as f64);
        sigma.push(FiniteSet::new(kept));
    }

    let ladder = ScaleLadder::new(
        cfg.lambda.clone(),
        sigma,
        a0,
        a_sets,
        cfg.expansion_budget,
    )?;
    ladder.check_disjointness(cfg.decompose_budget)?;
    certificate_log.push("disjointness certificates verified".into());

    // switching certificate on each built Sigma as a set
    for (n, target) in targets.iter().enumerate() {
        let set = &ladder.sigma[n];
        if set.is_empty() {
            certificate_log.push(format!("level {}: Sigma empty, trivially switching", n + 1));
            continue;
        }
        match is_switching(set, target.f_set()) {
            Ok(()) => certificate_log.push(format!(
                "level {}: Sigma ({} elements) certified F-switching",
                n + 1,
                set.len()
            )),
            Err(w) => {
                return Err(LadderError::CertificateViolation(format!(
                    "level {}: sampled support is not F-switching ({} = {})",
                    n + 1,
                    w.left.1,
                    w.right.1
                )))
            }
        }
    }

    let mixture = EmpiricalMixture {
        p: p.clone(),
        components: {
            let mut comps = vec![PoolComponent::FreshBase];
            for (k, pool) in pools.iter().enumerate() {
                if ladder.a_sets[k].generators.len() <= 1 {
                    // degenerate level: the stopping time is identically one
                    comps.push(PoolComponent::FreshBase);
                } else {
                    comps.push(PoolComponent::Pool(Arc::new(pool.clone())));
                }
            }
            comps
        },
        base: base.clone(),
    };

    Ok(LadderBuild {
        ladder,
        ssets,
        mixture,
        component_specs,
        sigma_filtered_fraction,
        pool_truncated,
        certificate_log,
    })
}

// ---------------------------------------------------------------------------
// Trajectory chain check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ChainReport {
    pub trajectories: u64,
    /// Trajectories whose top-level record epoch satisfied the premises
    /// (prefix and gap within lambda).
    pub epochs_verified: u64,
    pub epochs_skipped: u64,
    /// Vertices checked inside verified epochs.
    pub vertices_checked: u64,
    /// Vertices whose despiking parent equals the pre-record product.
    pub vertices_ok: u64,
    /// Consecutive record pairs whose chain edge was verified.
    pub chain_edges_ok: u64,
    pub chain_edges_checked: u64,
}

/// Verify on simulated mixture trajectories that the pre-record products form
/// descending paths in the despiking forest: for n in a top-level record
/// epoch, `w_n` is spiked with prefix `w_{T-1}` and spike `g_T`.
pub fn trajectory_chain_check(
    build: &LadderBuild,
    n_steps: u64,
    trajectories: u64,
    master_seed: u64,
) -> Result<ChainReport, LadderError> {
    let top = build.ladder.levels() as u64;
    let lam = build.ladder.lambda[(top - 1) as usize];
    let mut report = ChainReport {
        trajectories,
        ..ChainReport::default()
    };
    for traj in 0..trajectories {
        let mut rng = trial_rng(master_seed, "chain-check", traj);
        let mut w = FreeWord::identity();
        let mut draws: Vec<(u64, FreeWord)> = Vec::new();
        let mut products: Vec<FreeWord> = Vec::new();
        for _ in 0..n_steps {
            let i = build.mixture.draw_component(&mut rng);
            let g = build.mixture.sample_component(i, &mut rng);
            w = w.mul(&g);
            draws.push((i, g));
            products.push(w.clone());
        }
        // first top-level draw and the one after it
        let first = draws.iter().position(|(i, _)| *i == top);
        let Some(t1) = first else {
            report.epochs_skipped += 1;
            continue;
        };
        let second = draws[t1 + 1..]
            .iter()
            .position(|(i, _)| *i == top)
            .map(|d| t1 + 1 + d);
        // premises: prefix factor count and epoch gap inside lambda, and the
        // record increment actually lies in Sigma (the construction's good
        // event; pool draws outside the certified support are excluded the
        // same way the mass bookkeeping excludes them)
        let epoch_end = second.unwrap_or(draws.len());
        if (t1 as u64) > lam
            || ((epoch_end - t1) as u64) > lam
            || !build.ladder.sigma[(top - 1) as usize].contains(&draws[t1].1)
        {
            report.epochs_skipped += 1;
            continue;
        }
        report.epochs_verified += 1;
        let prefix = if t1 == 0 {
            FreeWord::identity()
        } else {
            products[t1 - 1].clone()
        };
        let spike = draws[t1].1.clone();
        let mut all_ok = true;
        for n in t1..epoch_end {
            report.vertices_checked += 1;
            match spike_decompose(&products[n], &build.ladder, 10_000_000)? {
                Some(dec) if dec.prefix == prefix && dec.spike == spike => {
                    report.vertices_ok += 1;
                }
                _ => {
                    all_ok = false;
                }
            }
        }
        if second.is_some() {
            report.chain_edges_checked += 1;
            if all_ok {
                report.chain_edges_ok += 1;
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Subtree retention
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct RetentionReport {
    pub n: u64,
    pub paths: u64,
    pub retained: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub censored: u64,
}

/// Is `v` inside the family of subtrees rooted at descendants of `g w` with
/// `w` a bounded Delta-power: walk the despiking ancestor chain of `v` and
/// test each ancestor `a` for `g^-1 a` in `Delta_n^{lambda(n)}`.
fn in_subtree_family(
    v: &FreeWord,
    g: &FreeWord,
    n: usize,
    ladder: &ScaleLadder,
    budget: &mut u64,
) -> Result<bool, LadderError> {
    let lam = ladder.lambda[n - 1];
    let mut current = v.clone();
    for _ in 0..64 {
        let shifted = g.inverse().mul(&current);
        if ladder.delta_power_contains(n, &shifted, lam, budget)? {
            return Ok(true);
        }
        match spike_decompose(&current, ladder, *budget)? {
            Some(dec) => current = dec.prefix,
            None => return Ok(false),
        }
    }
    Ok(false)
}

/// Estimate the probability that the mixture walk started at `g` drawn from
/// `S_{n,n}` stays inside the subtree family for `n_steps` steps.
pub fn subtree_retention(
    build: &LadderBuild,
    n: u64,
    n_steps: u64,
    paths: u64,
    master_seed: u64,
) -> Result<RetentionReport, LadderError> {
    let starts = build.ssets.set(n, n);
    if starts.is_empty() {
        return Err(LadderError::CertificateViolation(format!(
            "S_{{{n},{n}}} is empty"
        )));
    }
    let results: Vec<Result<(bool, bool), LadderError>> = (0..paths)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, &format!("retention-{n}"), trial);
            let g = starts.elems()[rng.gen_range(0..starts.len())].clone();
            let mut w = g.clone();
            let mut budget = 50_000_000u64;
            for _ in 0..n_steps {
                let i = build.mixture.draw_component(&mut rng);
                let inc = build.mixture.sample_component(i, &mut rng);
                w = w.mul(&inc);
                match in_subtree_family(&w, &g, n as usize, &build.ladder, &mut budget) {
                    Ok(true) => {}
                    Ok(false) => return Ok((false, false)),
                    Err(LadderError::BudgetExceeded(_)) => return Ok((false, true)),
                    Err(e) => return Err(e),
                }
            }
            Ok((true, false))
        })
        .collect();
    let mut retained = 0u64;
    let mut censored = 0u64;
    for r in results {
        let (ok, cens) = r?;
        if cens {
            censored += 1;
        } else if ok {
            retained += 1;
        }
    }
    let est = binomial_estimate(retained, paths - censored);
    Ok(RetentionReport {
        n,
        paths,
        retained,
        estimate: est.p_hat,
        stderr: est.stderr,
        censored,
    })
}

// ---------------------------------------------------------------------------
// Optional-stopping gap
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct OsGapReport {
    pub n: u64,
    pub depth: usize,
    /// Conditioned component mass p(n) used as the weight.
    pub p_n: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub cs_holds: bool,
    pub pooled_cells: usize,
    pub active_cells: usize,
    pub nu_unresolved: f64,
    pub nu_n_unresolved: f64,
    /// The two ensembles are the same process (control case): histograms
    /// are then collected from one sample set and the gap vanishes exactly.
    pub identical_processes: bool,
}

/// Histogram-level lhs: `p_n * sum_c nu_n(c)^2 / nu(c)` over pooled cells.
fn gap_statistic(
    nu_counts: &[u64],
    nun_counts: &[u64],
    pool_mask: &[bool],
    p_n: f64,
) -> (f64, usize) {
    let nu_total: u64 = nu_counts.iter().sum();
    let nun_total: u64 = nun_counts.iter().sum();
    let mut lhs = 0.0;
    let mut other_nu = 0u64;
    let mut other_nun = 0u64;
    let mut active = 0usize;
    for i in 0..nu_counts.len() {
        if pool_mask[i] {
            other_nu += nu_counts[i];
            other_nun += nun_counts[i];
        } else {
            active += 1;
            let nu = nu_counts[i] as f64 / nu_total as f64;
            let nun = nun_counts[i] as f64 / nun_total as f64;
            if nu > 0.0 {
                lhs += nun * nun / nu;
            } else if nun > 0.0 {
                return (f64::INFINITY, active);
            }
        }
    }
    if other_nu > 0 || other_nun > 0 {
        let nu = other_nu as f64 / nu_total as f64;
        let nun = other_nun as f64 / nun_total as f64;
        if nu > 0.0 {
            lhs += nun * nun / nu;
        } else if nun > 0.0 {
            return (f64::INFINITY, active);
        }
    }
    (p_n * lhs, active)
}

/// Estimate the optional-stopping gap for component `n` of the mixture.
///
/// `nu` is the hitting histogram of the mixture walk at the given depth;
/// `nu_n` starts with one component-`n` increment and then continues with the
/// mixture. The left side is the histogram surrogate of
/// `p(n) ||d nu_n / d nu||_2^2`, the right side is `p(n) = h_n(e)`, and the
/// gap comes with a bootstrap CI. Cells with fewer than five `nu` counts are
/// pooled first. When the `nu_n` process coincides with the `nu` process
/// (the `Fixed(1)`-only control) both histograms are read from the same
/// sample set, so the gap is exactly zero.
#[allow(clippy::too_many_arguments)]
pub fn optional_stopping_gap(
    mixture: &EmpiricalMixture,
    n: u64,
    depth: usize,
    paths: u64,
    max_steps: u64,
    margin: u64,
    bootstrap_resamples: usize,
    master_seed: u64,
) -> OsGapReport {
    let identical = mixture.components.len() == 1 && n == 0;
    let p_n = mixture.conditioned_mass(n);

    let (nu_samples, _) = collect_cylinder_samples(
        |_, rng| mixture.sample_increment(rng),
        depth,
        paths,
        max_steps,
        margin,
        master_seed,
        "os-gap-nu",
    );
    let nun_samples: Vec<Option<u32>> = if identical {
        nu_samples.clone()
    } else {
        collect_cylinder_samples(
            |step, rng| {
                if step == 0 {
                    (mixture.sample_component(n, rng), false)
                } else {
                    mixture.sample_increment(rng)
                }
            },
            depth,
            paths,
            max_steps,
            margin,
            master_seed,
            "os-gap-nu-n",
        )
        .0
    };

    let nu_hist = histogram_from_samples(depth, &nu_samples, 0);
    let nun_hist = histogram_from_samples(depth, &nun_samples, 0);

    // pooling mask from the nu histogram
    let pool_mask: Vec<bool> = nu_hist.counts.iter().map(|&c| c < 5).collect();
    let pooled = pool_mask.iter().filter(|&&m| m).count();
    let (lhs, active) = gap_statistic(&nu_hist.counts, &nun_hist.counts, &pool_mask, p_n);
    let gap = lhs - p_n;

    // bootstrap over resolved path samples
    let nu_resolved: Vec<u32> = nu_samples.iter().flatten().copied().collect();
    let nun_resolved: Vec<u32> = nun_samples.iter().flatten().copied().collect();
    let mut boot = Vec::with_capacity(bootstrap_resamples);
    let mut rng = trial_rng(master_seed, "os-gap-bootstrap", 0);
    for _ in 0..bootstrap_resamples {
        let mut nu_counts = vec![0u64; nu_hist.counts.len()];
        let mut nun_counts = vec![0u64; nu_hist.counts.len()];
        if identical {
            for _ in 0..nu_resolved.len() {
                let idx = nu_resolved[rng.gen_range(0..nu_resolved.len())];
                nu_counts[idx as usize] += 1;
                nun_counts[idx as usize] += 1;
            }
        } else {
            for _ in 0..nu_resolved.len() {
                nu_counts[nu_resolved[rng.gen_range(0..nu_resolved.len())] as usize] += 1;
            }
            for _ in 0..nun_resolved.len() {
                nun_counts[nun_resolved[rng.gen_range(0..nun_resolved.len())] as usize] += 1;
            }
        }
        let (l, _) = gap_statistic(&nu_counts, &nun_counts, &pool_mask, p_n);
        boot.push(l - p_n);
    }
    boot.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = boot[(0.025 * bootstrap_resamples as f64) as usize];
    let hi = boot[((0.975 * bootstrap_resamples as f64) as usize).min(boot.len() - 1)];

    OsGapReport {
        n,
        depth,
        p_n,
        lhs,
        rhs: p_n,
        gap,
        ci_lo: lo,
        ci_hi: hi,
        cs_holds: lhs >= p_n - 1e-12,
        pooled_cells: pooled,
        active_cells: active,
        nu_unresolved: nu_hist.unresolved_fraction(),
        nu_n_unresolved: nun_hist.unresolved_fraction(),
        identical_processes: identical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::lazy_srw_f2;

    fn tiny_ladder() -> ScaleLadder {
        // one level, Sigma = two long-ish words, Delta_1 = ball(1)
        let sigma = FiniteSet::new(vec![
            FreeWord::parse("abABabABabABabABabABabABabABabABabABabAB").unwrap(),
            FreeWord::parse("BAbaBAbaBAbaBAbaBAbaBAbaBAbaBAbaBAbaBAba").unwrap(),
        ]);
        ScaleLadder::new(
            vec![3],
            vec![sigma],
            FiniteSet::ball(1),
            vec![ProductSet {
                generators: FiniteSet::new(vec![FreeWord::identity()]),
                exponent: 1,
            }],
            1024,
        )
        .unwrap()
    }

    #[test]
    fn product_set_expansion_is_ball() {
        let ps = ProductSet {
            generators: FiniteSet::ball(1),
            exponent: 2,
        };
        let expanded = ps.expand(1000).unwrap();
        assert_eq!(expanded, FiniteSet::ball(2));
        let too_small = ps.expand(3);
        assert!(too_small.is_err());
    }

    #[test]
    fn delta_power_ball_fast_path() {
        let ladder = tiny_ladder();
        let mut budget = 1000;
        assert!(ladder
            .delta_power_contains(1, &FreeWord::parse("aba").unwrap(), 3, &mut budget)
            .unwrap());
        assert!(!ladder
            .delta_power_contains(1, &FreeWord::parse("abab").unwrap(), 3, &mut budget)
            .unwrap());
    }

    #[test]
    fn delta_power_general_dfs() {
        // Delta = {e, ab, BA}: products of at most 2
        let delta = DeltaData::new(FiniteSet::new(vec![
            FreeWord::identity(),
            FreeWord::parse("ab").unwrap(),
            FreeWord::parse("BA").unwrap(),
        ]));
        let mut budget = 10_000;
        assert!(delta
            .power_contains(&FreeWord::parse("abab").unwrap(), 2, &mut budget)
            .unwrap());
        assert!(!delta
            .power_contains(&FreeWord::parse("ab").unwrap(), 0, &mut budget)
            .unwrap());
        assert!(!delta
            .power_contains(&FreeWord::parse("aab").unwrap(), 2, &mut budget)
            .unwrap());
        let mut zero = 0u64;
        assert!(delta
            .power_contains(&FreeWord::parse("ab").unwrap(), 2, &mut zero)
            .is_err());
    }

    #[test]
    fn spike_decompose_pure_spike() {
        let ladder = tiny_ladder();
        let sigma = ladder.sigma[0].elems()[0].clone();
        let dec = spike_decompose(&sigma, &ladder, 1_000_000).unwrap().unwrap();
        assert!(dec.prefix.is_identity());
        assert!(dec.postfix.is_identity());
        assert_eq!(dec.spike, sigma);
        assert_eq!(dec.level, 1);
    }

    #[test]
    fn spike_decompose_round_trip() {
        let ladder = tiny_ladder();
        let sigma = ladder.sigma[0].elems()[1].clone();
        let p = FreeWord::parse("ba").unwrap();
        let q = FreeWord::parse("aB").unwrap();
        let g = p.mul(&sigma).mul(&q);
        let dec = spike_decompose(&g, &ladder, 1_000_000).unwrap().unwrap();
        assert_eq!(dec.prefix, p);
        assert_eq!(dec.spike, sigma);
        assert_eq!(dec.postfix, q);
    }

    #[test]
    fn spike_decompose_unspiked() {
        let ladder = tiny_ladder();
        assert_eq!(
            spike_decompose(&FreeWord::identity(), &ladder, 1_000_000).unwrap(),
            None
        );
        assert_eq!(
            spike_decompose(&FreeWord::parse("abbaB").unwrap(), &ladder, 1_000_000).unwrap(),
            None
        );
    }

    #[test]
    fn forest_single_root_single_tree() {
        let ladder = tiny_ladder();
        let sigma = ladder.sigma[0].elems()[0].clone();
        let p = FreeWord::parse("a").unwrap();
        let vertices = vec![
            p.mul(&sigma),
            p.mul(&sigma).mul(&FreeWord::parse("b").unwrap()),
            FreeWord::identity(),
        ];
        let forest = build_forest(&vertices, &ladder, 1_000_000).unwrap();
        // spiked vertices point at the shared prefix `a`, itself unspiked
        assert_eq!(forest.edge_count(), 2);
        assert_eq!(forest.roots.len(), forest.vertices.len() - 2);
        let edges = forest.edge_list();
        assert!(edges.contains("child,parent"));
    }

    #[test]
    fn ssets_thresholds_nested() {
        let pool: Vec<FreeWord> = ["a", "a", "a", "b", "b", "A"]
            .iter()
            .map(|s| FreeWord::parse(s).unwrap())
            .collect();
        let p = RecordMeasure::inverse_square();
        let ssets = build_ssets(&[pool], &p, &[1, 4], 2);
        let s11 = ssets.set(1, 1);
        let s12 = ssets.set(1, 2);
        for w in s11.elems() {
            assert!(s12.contains(w));
        }
        for r in &ssets.reports {
            assert!(r.in_sample_mass >= r.threshold || r.support_size == 3);
        }
    }

    #[test]
    fn build_ladder_small_end_to_end() {
        let base = lazy_srw_f2();
        let p = RecordMeasure::inverse_square();
        let cfg = LadderConfig {
            pool_sizes: vec![500, 40],
            ..LadderConfig::default()
        };
        let build = build_ladder(&base, &p, &cfg, 99).unwrap();
        assert_eq!(build.ladder.levels(), 2);
        // level 1 is the degenerate tau = 1 level: its sigma is filtered to
        // nothing because supp(mu) sits inside Delta_1 = ball(1)
        assert!(build.ladder.sigma[0].is_empty());
        assert!(!build.ladder.sigma[1].is_empty());
        // sigma_2 elements are long words, well beyond 3 lambda(2)
        for s in build.ladder.sigma[1].elems() {
            assert!(s.len() as u64 > 3 * build.ladder.lambda[1]);
        }
        assert!(build.pool_truncated == 0);
        // mixture components: fresh, fresh (degenerate), pool
        assert_eq!(build.mixture.components.len(), 3);
        assert!(matches!(build.mixture.components[2], PoolComponent::Pool(_)));
    }

    #[test]
    fn gap_statistic_cauchy_schwarz_floor() {
        // identical histograms: lhs = p exactly
        let nu = [40u64, 60, 100];
        let mask = [false, false, false];
        let (lhs, _) = gap_statistic(&nu, &nu, &mask, 0.25);
        assert!((lhs - 0.25).abs() < 1e-12);
        // different histograms: strictly above
        let nun = [100u64, 60, 40];
        let (lhs2, _) = gap_statistic(&nu, &nun, &mask, 0.25);
        assert!(lhs2 > 0.25);
    }
}
