//! Trajectory engine and the statistical estimators that witness the
//! boundary phenomena: boundary-cylinder hitting histograms, lamp
//! stabilization curves, the limit-lamp functional, mean-value (harmonicity)
//! tests, and entropy profiles.
//!
//! Estimators stream their paths: nothing is materialized beyond the state
//! needed by the statistic, every path has its own derived generator, and
//! censoring (unresolved prefixes, truncated increments) is counted and
//! reported, never silently dropped.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::group::{FreeWord, LampElem, LampState, Letter, Projection};
use crate::measures::{BaseStep, StepMeasure};
use crate::seeding::trial_rng;
use crate::stats::{chi_square_two_sample, entropy_plugin, miller_madow_correction, tv_distance, ChiSquareResult};
use crate::stopping::{run_to_stop, run_to_stop_projected, MixtureSpec, StoppingSpec};

#[derive(Debug, Error, PartialEq)]
pub enum WalksError {
    #[error("cylinder depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),
}

// ---------------------------------------------------------------------------
// Increment sources
// ---------------------------------------------------------------------------

/// Anything that can produce one increment of a driving walk on F2.
pub trait IncrementSampler: Sync {
    /// Returns the increment and whether it was truncated at a horizon.
    fn sample_increment(&self, rng: &mut ChaCha8Rng) -> (FreeWord, bool);
}

/// One base step per increment.
pub struct BaseSampler<'a>(pub &'a StepMeasure<BaseStep>);

impl IncrementSampler for BaseSampler<'_> {
    fn sample_increment(&self, rng: &mut ChaCha8Rng) -> (FreeWord, bool) {
        match self.0.sample(rng).as_letter() {
            Some(l) => (FreeWord::generator(l), false),
            None => (FreeWord::identity(), false),
        }
    }
}

/// One stopped run of the mixture per increment.
pub struct MixtureSampler<'a> {
    pub base: &'a StepMeasure<BaseStep>,
    pub proj: Projection,
    pub mix: &'a MixtureSpec,
    pub horizon_cap: u64,
}

impl IncrementSampler for MixtureSampler<'_> {
    fn sample_increment(&self, rng: &mut ChaCha8Rng) -> (FreeWord, bool) {
        let i = self.mix.draw_component(rng);
        let s = run_to_stop(
            self.base,
            self.proj,
            &self.mix.components[i as usize],
            self.horizon_cap,
            rng,
        );
        (s.endpoint, s.truncated)
    }
}

/// Deterministic increment, for controls and unit tests.
pub struct DiracSampler(pub FreeWord);

impl IncrementSampler for DiracSampler {
    fn sample_increment(&self, rng: &mut ChaCha8Rng) -> (FreeWord, bool) {
        let _ = rng;
        (self.0.clone(), false)
    }
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// A materialized walk: increments, running products, projections.
/// Meant for short runs (certificate checks, unit tests); the statistical
/// estimators stream instead.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub increments: Vec<FreeWord>,
    pub partial_products: Vec<FreeWord>,
    pub projected: Vec<LampElem>,
    pub truncated_increments: u64,
}

pub fn run_walk<S: IncrementSampler>(
    source: &S,
    n_steps: u64,
    start: &FreeWord,
    rng: &mut ChaCha8Rng,
) -> Trajectory {
    assert!(n_steps >= 1);
    let mut increments = Vec::with_capacity(n_steps as usize);
    let mut partial_products = Vec::with_capacity(n_steps as usize);
    let mut projected = Vec::with_capacity(n_steps as usize);
    let mut current = start.clone();
    let mut truncated = 0;
    for _ in 0..n_steps {
        let (inc, trunc) = source.sample_increment(rng);
        if trunc {
            truncated += 1;
        }
        current = current.mul(&inc);
        increments.push(inc);
        partial_products.push(current.clone());
        projected.push(Projection::FreeGroup.project_word(&current));
    }
    Trajectory {
        increments,
        partial_products,
        projected,
        truncated_increments: truncated,
    }
}

/// The length-`depth` prefix of the final product, provided it has been
/// stable over the final `margin` trajectory steps.
pub fn boundary_cylinder(
    traj: &Trajectory,
    depth: usize,
    margin: usize,
) -> Option<Vec<Letter>> {
    let n = traj.partial_products.len();
    if n == 0 || n < margin || margin == 0 {
        return None;
    }
    let last = traj.partial_products[n - 1].prefix(depth)?.to_vec();
    for w in &traj.partial_products[n - margin..] {
        if w.prefix(depth)? != last.as_slice() {
            return None;
        }
    }
    Some(last)
}

// ---------------------------------------------------------------------------
// Cylinder histograms
// ---------------------------------------------------------------------------

/// Number of reduced words of length exactly `depth`.
pub fn cylinder_count(depth: usize) -> usize {
    if depth == 0 {
        1
    } else {
        4 * 3usize.pow(depth as u32 - 1)
    }
}

/// Index of a length-`depth` reduced prefix in the fixed enumeration.
pub fn cylinder_index(prefix: &[Letter]) -> usize {
    let mut idx = 0usize;
    let mut prev: Option<Letter> = None;
    for &l in prefix {
        match prev {
            None => idx = l as usize,
            Some(p) => {
                // rank of l among the three letters that are not p^-1
                let mut rank = 0;
                for cand in Letter::ALL {
                    if cand == p.inverse() {
                        continue;
                    }
                    if cand == l {
                        break;
                    }
                    rank += 1;
                }
                idx = idx * 3 + rank;
            }
        }
        prev = Some(l);
    }
    idx
}

/// The prefix for a cylinder index (inverse of [`cylinder_index`]).
pub fn cylinder_key(depth: usize, mut idx: usize) -> Vec<Letter> {
    if depth == 0 {
        return Vec::new();
    }
    let mut digits = Vec::with_capacity(depth);
    for _ in 0..depth - 1 {
        digits.push(idx % 3);
        idx /= 3;
    }
    let first = Letter::ALL[idx % 4];
    let mut out = vec![first];
    for &d in digits.iter().rev() {
        let prev = *out.last().unwrap();
        let mut rank = 0;
        for cand in Letter::ALL {
            if cand == prev.inverse() {
                continue;
            }
            if rank == d {
                out.push(cand);
                break;
            }
            rank += 1;
        }
    }
    out
}

/// Empirical distribution over depth-`depth` boundary cylinders.
#[derive(Debug, Clone)]
pub struct CylinderHistogram {
    pub depth: usize,
    pub counts: Vec<u64>,
    pub total: u64,
    pub unresolved: u64,
    pub truncated_increments: u64,
}

impl CylinderHistogram {
    pub fn new(depth: usize) -> CylinderHistogram {
        CylinderHistogram {
            depth,
            counts: vec![0; cylinder_count(depth)],
            total: 0,
            unresolved: 0,
            truncated_increments: 0,
        }
    }

    pub fn unresolved_fraction(&self) -> f64 {
        let runs = self.total + self.unresolved;
        if runs == 0 {
            0.0
        } else {
            self.unresolved as f64 / runs as f64
        }
    }
}

/// Per-path resolved cylinder indices of a driving walk.
///
/// Each path runs up to `max_steps` increments and resolves as soon as its
/// depth-`depth` prefix has not changed for `margin` consecutive increments;
/// unresolved paths yield None. `sample_step(step, rng)` supplies the
/// increment for the given step index, so the first increment may come from
/// a different source than the rest.
pub fn collect_cylinder_samples<F>(
    sample_step: F,
    depth: usize,
    paths: u64,
    max_steps: u64,
    margin: u64,
    master_seed: u64,
    stream: &str,
) -> (Vec<Option<u32>>, u64)
where
    F: Fn(u64, &mut ChaCha8Rng) -> (FreeWord, bool) + Sync,
{
    let out: Vec<(Option<u32>, u64)> = (0..paths)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, stream, trial);
            let mut word = FreeWord::identity();
            let mut truncated = 0u64;
            let mut stable_for = 0u64;
            let mut prev_prefix: Option<Vec<Letter>> = None;
            for step in 0..max_steps {
                let (inc, trunc) = sample_step(step, &mut rng);
                if trunc {
                    truncated += 1;
                }
                word.push_word(&inc);
                let prefix = word.prefix(depth).map(|p| p.to_vec());
                if prefix.is_some() && prefix == prev_prefix {
                    stable_for += 1;
                } else {
                    prev_prefix = prefix;
                    stable_for = 0;
                }
                if stable_for >= margin {
                    return (
                        Some(cylinder_index(prev_prefix.as_ref().unwrap()) as u32),
                        truncated,
                    );
                }
            }
            (None, truncated)
        })
        .collect();
    let truncated = out.iter().map(|(_, t)| t).sum();
    (out.into_iter().map(|(c, _)| c).collect(), truncated)
}

/// Histogram of resolved cylinder indices.
pub fn histogram_from_samples(
    depth: usize,
    samples: &[Option<u32>],
    truncated_increments: u64,
) -> CylinderHistogram {
    let mut hist = CylinderHistogram::new(depth);
    hist.truncated_increments = truncated_increments;
    for s in samples {
        match s {
            Some(idx) => {
                hist.counts[*idx as usize] += 1;
                hist.total += 1;
            }
            None => hist.unresolved += 1,
        }
    }
    hist
}

/// Collect the hitting histogram of a driving walk at the given depth.
pub fn collect_hitting_histogram<S: IncrementSampler>(
    source: &S,
    depth: usize,
    paths: u64,
    max_steps: u64,
    margin: u64,
    master_seed: u64,
    stream: &str,
) -> CylinderHistogram {
    let (samples, truncated) = collect_cylinder_samples(
        |_, rng| source.sample_increment(rng),
        depth,
        paths,
        max_steps,
        margin,
        master_seed,
        stream,
    );
    histogram_from_samples(depth, &samples, truncated)
}

/// Total-variation distance plus a two-sample chi-square verdict.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HittingComparison {
    pub tv_distance: f64,
    pub chi_square: ChiSquareResult,
    pub significance: f64,
    /// True when the test does NOT reject equality at the significance level.
    pub pass: bool,
}

pub fn compare_hitting(
    a: &CylinderHistogram,
    b: &CylinderHistogram,
    significance: f64,
) -> Result<HittingComparison, WalksError> {
    if a.depth != b.depth {
        return Err(WalksError::DepthMismatch(a.depth, b.depth));
    }
    let chi = chi_square_two_sample(&a.counts, &b.counts, 5.0);
    Ok(HittingComparison {
        tv_distance: tv_distance(&a.counts, &b.counts),
        pass: chi.p_value >= significance,
        chi_square: chi,
        significance,
    })
}

// ---------------------------------------------------------------------------
// Lamp stabilization
// ---------------------------------------------------------------------------

/// Stabilization frequencies: for each checkpoint `j`, the fraction of paths
/// whose lamp restriction to `[-window, window]` never changes after step `j`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LampStabilityReport {
    pub window: i64,
    pub checkpoints: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub paths: u64,
    pub steps: u64,
    pub truncated_fraction: f64,
    pub mean_base_steps: f64,
}

/// What drives one step of the stability run.
pub enum StabilityDriver<'a> {
    /// Each step is one mixture increment.
    MuTau(&'a MixtureSpec, u64),
    /// Each step is one base step.
    Base,
}

pub fn lamp_stability(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    driver: &StabilityDriver,
    n_steps: u64,
    window: i64,
    checkpoints: &[u64],
    paths: u64,
    master_seed: u64,
) -> LampStabilityReport {
    assert!(checkpoints.iter().all(|&c| c <= n_steps));
    let sites: Vec<i64> = (-window..=window).collect();
    let results: Vec<(Vec<u64>, u64, u64)> = (0..paths)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, "lamp-stability", trial);
            let mut state = LampState::new();
            let mut truncated = 0u64;
            let mut base_steps = 0u64;
            let mut last_change = 0u64;
            let mut prev_mask = 0u32;
            for step in 1..=n_steps {
                match driver {
                    StabilityDriver::MuTau(mix, cap) => {
                        let i = mix.draw_component(&mut rng);
                        let (used, trunc) = run_to_stop_projected(
                            base,
                            proj,
                            &mix.components[i as usize],
                            *cap,
                            &mut state,
                            &mut rng,
                        );
                        base_steps += used;
                        if trunc {
                            truncated += 1;
                        }
                    }
                    StabilityDriver::Base => {
                        if let Some(l) = base.sample(&mut rng).as_letter() {
                            state.apply(proj, l);
                        }
                        base_steps += 1;
                    }
                }
                let mut mask = 0u32;
                for (bit, &site) in sites.iter().enumerate() {
                    if state.lamp_on(site) {
                        mask |= 1 << bit;
                    }
                }
                if mask != prev_mask {
                    prev_mask = mask;
                    last_change = step;
                }
            }
            // стable after j  <=>  last_change <= j
            let succ: Vec<u64> = checkpoints
                .iter()
                .map(|&j| u64::from(last_change <= j))
                .collect();
            (succ, truncated, base_steps)
        })
        .collect();

    let mut freq = vec![0u64; checkpoints.len()];
    let mut truncated = 0u64;
    let mut base_steps = 0u64;
    for (succ, tr, bs) in results {
        for (f, s) in freq.iter_mut().zip(succ) {
            *f += s;
        }
        truncated += tr;
        base_steps += bs;
    }
    LampStabilityReport {
        window,
        checkpoints: checkpoints.to_vec(),
        frequencies: freq.iter().map(|&f| f as f64 / paths as f64).collect(),
        paths,
        steps: n_steps,
        truncated_fraction: truncated as f64 / (paths * n_steps) as f64,
        mean_base_steps: base_steps as f64 / paths as f64,
    }
}

// ---------------------------------------------------------------------------
// Limit-lamp functional
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FunctionalEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: u64,
    pub censored_fraction: f64,
}

/// Parameters of the stability heuristic used to read off the limit value.
#[derive(Debug, Clone, Copy)]
pub struct ResolveParams {
    /// Resolve once the site's lamp has not changed for this many steps.
    pub margin: u64,
    /// Give up (censor) after this many mixture steps.
    pub max_steps: u64,
    /// Cap on base steps per increment.
    pub horizon_cap: u64,
}

impl Default for ResolveParams {
    fn default() -> Self {
        ResolveParams {
            margin: 96,
            max_steps: 768,
            horizon_cap: 1_000_000,
        }
    }
}

/// One stochastic evaluation of the limit-lamp functional: run the projected
/// mixture walk from `start` until the lamp at `site` is stable for
/// `margin` steps, and return its value; None when censored.
pub fn limit_lamp_sample(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    mix: &MixtureSpec,
    start: &LampElem,
    site: i64,
    params: &ResolveParams,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let mut state = LampState::from_elem(start);
    let mut value = state.lamp_on(site);
    let mut stable_for = 0u64;
    for _ in 0..params.max_steps {
        let i = mix.draw_component(rng);
        run_to_stop_projected(
            base,
            proj,
            &mix.components[i as usize],
            params.horizon_cap,
            &mut state,
            rng,
        );
        let now = state.lamp_on(site);
        if now == value {
            stable_for += 1;
            if stable_for >= params.margin {
                return Some(if value { 1.0 } else { 0.0 });
            }
        } else {
            value = now;
            stable_for = 0;
        }
    }
    None
}

/// Monte Carlo estimate of `P_start(limit lamp at site is on)`.
pub fn estimate_limit_functional(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    mix: &MixtureSpec,
    start: &LampElem,
    site: i64,
    paths: u64,
    params: &ResolveParams,
    master_seed: u64,
    stream: &str,
) -> FunctionalEstimate {
    let (sum, resolved, censored): (f64, u64, u64) = (0..paths)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, stream, trial);
            match limit_lamp_sample(base, proj, mix, start, site, params, &mut rng) {
                Some(v) => (v, 1u64, 0u64),
                None => (0.0, 0, 1),
            }
        })
        .reduce(|| (0.0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let n = resolved.max(1);
    let p = sum / n as f64;
    FunctionalEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        paths: resolved,
        censored_fraction: censored as f64 / paths as f64,
    }
}

// ---------------------------------------------------------------------------
// Harmonicity
// ---------------------------------------------------------------------------

/// Mean-value defects `Delta(x) = sum_y m(y) f(x y) - f(x)` with standard
/// errors, one row per test point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HarmonicityReport {
    pub points: Vec<String>,
    pub delta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub censored_fraction: f64,
    pub measure_tag: String,
}

impl HarmonicityReport {
    /// Indices of points violating the mean-value property at `z` sigmas.
    pub fn violations(&self, z: f64) -> Vec<usize> {
        self.delta
            .iter()
            .zip(&self.stderr)
            .enumerate()
            .filter(|(_, (d, s))| d.abs() > z * **s)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The default 25 test points: positions in -2..=2 crossed with five small
/// lamp configurations inside {-1, 0, 1}.
pub fn default_test_points() -> Vec<LampElem> {
    let configs: [&[i64]; 5] = [&[], &[-1], &[0], &[1], &[-1, 1]];
    let mut out = Vec::new();
    for pos in -2..=2 {
        for cfg in configs {
            out.push(LampElem::new(cfg.to_vec(), pos));
        }
    }
    out
}

/// Test the mean-value property of a stochastic functional under an exactly
/// known finitely supported measure on the lamplighter.
///
/// `f_sample(x, rng)` returns one draw of an unbiased estimator of `f(x)`,
/// or None when the draw is censored.
pub fn test_harmonicity_exact<F>(
    f_sample: &F,
    m: &StepMeasure<LampElem>,
    points: &[LampElem],
    paths_per_eval: u64,
    master_seed: u64,
    tag: &str,
) -> HarmonicityReport
where
    F: Fn(&LampElem, &mut ChaCha8Rng) -> Option<f64> + Sync,
{
    let mut delta = Vec::with_capacity(points.len());
    let mut stderr = Vec::with_capacity(points.len());
    let mut censored = 0u64;
    let mut total = 0u64;
    for (pi, x) in points.iter().enumerate() {
        // independent ensemble per evaluation point (x itself and each x*y)
        let mut evals: Vec<(f64, f64, u64, u64)> = Vec::new(); // (mean, se^2, n, censored)
        let mut targets: Vec<LampElem> = vec![x.clone()];
        for (y, _) in m.support() {
            targets.push(x.mul(y));
        }
        for (ti, tgt) in targets.iter().enumerate() {
            let samples: Vec<Option<f64>> = (0..paths_per_eval)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(
                        master_seed,
                        &format!("harmonicity-{tag}-p{pi}-t{ti}"),
                        trial,
                    );
                    f_sample(tgt, &mut rng)
                })
                .collect();
            let vals: Vec<f64> = samples.iter().flatten().copied().collect();
            let cens = (samples.len() - vals.len()) as u64;
            let n = vals.len() as u64;
            // two-pass variance so constant samples give exactly zero spread
            let n_eff = n.max(1) as f64;
            let mean = vals.iter().sum::<f64>() / n_eff;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_eff;
            evals.push((mean, var / n_eff, n, cens));
            censored += cens;
            total += paths_per_eval;
        }
        let f_x = evals[0];
        let mut d = -f_x.0;
        let mut var = f_x.1;
        for ((_, p), e) in m.support().iter().zip(evals.iter().skip(1)) {
            d += p * e.0;
            var += p * p * e.1;
        }
        delta.push(d);
        stderr.push(var.sqrt());
    }
    HarmonicityReport {
        points: points.iter().map(|p| p.to_string()).collect(),
        delta,
        stderr,
        censored_fraction: censored as f64 / total.max(1) as f64,
        measure_tag: tag.to_string(),
    }
}

/// Test the mean-value property under the empirical pushforward of the
/// mixture: each sample pairs `f(x Y) - f(x)` with a fresh increment `Y`.
pub fn test_harmonicity_empirical_mu_tau<F>(
    f_sample: &F,
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    mix: &MixtureSpec,
    horizon_cap: u64,
    points: &[LampElem],
    paths_per_eval: u64,
    master_seed: u64,
) -> HarmonicityReport
where
    F: Fn(&LampElem, &mut ChaCha8Rng) -> Option<f64> + Sync,
{
    let mut delta = Vec::with_capacity(points.len());
    let mut stderr = Vec::with_capacity(points.len());
    let mut censored = 0u64;
    let mut total = 0u64;
    for (pi, x) in points.iter().enumerate() {
        let samples: Vec<Option<f64>> = (0..paths_per_eval)
            .into_par_iter()
            .map(|trial| {
                let mut rng =
                    trial_rng(master_seed, &format!("harmonicity-mutau-p{pi}"), trial);
                let mut inc_state = LampState::new();
                let i = mix.draw_component(&mut rng);
                run_to_stop_projected(
                    base,
                    proj,
                    &mix.components[i as usize],
                    horizon_cap,
                    &mut inc_state,
                    &mut rng,
                );
                let y = inc_state.to_elem();
                let xy = x.mul(&y);
                let a = f_sample(&xy, &mut rng);
                let b = f_sample(x, &mut rng);
                match (a, b) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                }
            })
            .collect();
        let vals: Vec<f64> = samples.iter().flatten().copied().collect();
        let cens = (samples.len() - vals.len()) as u64;
        let n_eff = vals.len().max(1) as f64;
        let mean = vals.iter().sum::<f64>() / n_eff;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_eff;
        delta.push(mean);
        stderr.push((var / n_eff).sqrt());
        censored += cens;
        total += paths_per_eval;
    }
    HarmonicityReport {
        points: points.iter().map(|p| p.to_string()).collect(),
        delta,
        stderr,
        censored_fraction: censored as f64 / total.max(1) as f64,
        measure_tag: "pi*mu_tau(empirical)".to_string(),
    }
}

// ---------------------------------------------------------------------------
// Entropy profile
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct EntropyPoint {
    pub n: u64,
    pub h_plugin: f64,
    /// Miller-Madow corrected estimate; plug-in estimates are biased down,
    /// the correction `(k-1)/(2 paths)` is reported alongside, not asserted.
    pub h_miller_madow: f64,
    pub h_over_n: f64,
    pub distinct_states: usize,
}

/// Plug-in entropy of the n-step distribution of a lamplighter walk, per n.
pub fn avez_entropy_profile(
    m: &StepMeasure<LampElem>,
    n_list: &[u64],
    paths: u64,
    master_seed: u64,
) -> Vec<EntropyPoint> {
    let max_n = n_list.iter().copied().max().unwrap_or(0);
    let maps: Vec<HashMap<Vec<u8>, u64>> = (0..paths)
        .into_par_iter()
        .fold(
            || n_list.iter().map(|_| HashMap::new()).collect::<Vec<_>>(),
            |mut acc, trial| {
                let mut rng = trial_rng(master_seed, "entropy", trial);
                let mut state = LampState::new();
                for t in 1..=max_n {
                    let step = m.sample(&mut rng);
                    state.apply_elem(step);
                    for (slot, &n) in n_list.iter().enumerate() {
                        if n == t {
                            *acc[slot]
                                .entry(state.to_elem().canonical_bytes())
                                .or_insert(0) += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || n_list.iter().map(|_| HashMap::new()).collect::<Vec<_>>(),
            |mut a, b| {
                for (am, bm) in a.iter_mut().zip(b) {
                    for (k, v) in bm {
                        *am.entry(k).or_insert(0) += v;
                    }
                }
                a
            },
        );
    n_list
        .iter()
        .zip(maps)
        .map(|(&n, map)| {
            let counts: Vec<u64> = map.values().copied().collect();
            let h = entropy_plugin(&counts);
            let mm = h + miller_madow_correction(&counts);
            EntropyPoint {
                n,
                h_plugin: h,
                h_miller_madow: mm,
                h_over_n: h / n.max(1) as f64,
                distinct_states: counts.len(),
            }
        })
        .collect()
}

/// Exact entropy of a finitely supported measure (nats).
pub fn exact_step_entropy<T>(m: &StepMeasure<T>) -> f64
where
    T: Clone,
{
    m.support().iter().map(|(_, p)| -p * p.ln()).sum()
}

// ---------------------------------------------------------------------------
// Convenience samplers used by several experiments
// ---------------------------------------------------------------------------

/// A never-stopping dummy spec (used to type out a plain base run).
pub fn base_only_mixture(p: crate::measures::RecordMeasure) -> MixtureSpec {
    MixtureSpec {
        p,
        components: vec![StoppingSpec::Fixed(1)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{lazy_srw_f2, pi_lazy_srw_lamplighter, RecordMeasure};

    #[test]
    fn cylinder_indexing_round_trips() {
        for depth in 1..=4 {
            for idx in 0..cylinder_count(depth) {
                let key = cylinder_key(depth, idx);
                assert_eq!(key.len(), depth);
                assert_eq!(cylinder_index(&key), idx);
                // reduced: no adjacent inverses
                for w in key.windows(2) {
                    assert_ne!(w[1], w[0].inverse());
                }
            }
        }
    }

    #[test]
    fn run_walk_partial_products_invariant() {
        let base = lazy_srw_f2();
        let source = BaseSampler(&base);
        let mut rng = trial_rng(19, "walk", 0);
        let traj = run_walk(&source, 50, &FreeWord::identity(), &mut rng);
        for i in 1..50 {
            assert_eq!(
                traj.partial_products[i],
                traj.partial_products[i - 1].mul(&traj.increments[i])
            );
        }
    }

    #[test]
    fn dirac_walk_compounds() {
        let h = FreeWord::parse("ab").unwrap();
        let source = DiracSampler(h.clone());
        let mut rng = trial_rng(19, "dirac", 0);
        let traj = run_walk(&source, 3, &FreeWord::parse("B").unwrap(), &mut rng);
        assert_eq!(
            traj.partial_products[2],
            FreeWord::parse("B").unwrap().mul(&h).mul(&h).mul(&h)
        );
    }

    #[test]
    fn boundary_cylinder_read_off() {
        let traj = Trajectory {
            increments: vec![],
            partial_products: ["a", "ab", "aba", "abaa"]
                .iter()
                .map(|s| FreeWord::parse(s).unwrap())
                .collect(),
            projected: vec![],
            truncated_increments: 0,
        };
        assert_eq!(
            boundary_cylinder(&traj, 2, 2),
            Some(FreeWord::parse("ab").unwrap().letters().to_vec())
        );
        let empty = Trajectory {
            increments: vec![],
            partial_products: vec![],
            projected: vec![],
            truncated_increments: 0,
        };
        assert_eq!(boundary_cylinder(&empty, 2, 2), None);
    }

    #[test]
    fn boundary_cylinder_stable_under_weaker_margin() {
        let base = lazy_srw_f2();
        let source = BaseSampler(&base);
        for trial in 0..20 {
            let mut rng = trial_rng(19, "stability", trial);
            let traj = run_walk(&source, 400, &FreeWord::identity(), &mut rng);
            if let Some(pfx) = boundary_cylinder(&traj, 3, 100) {
                assert_eq!(boundary_cylinder(&traj, 3, 50), Some(pfx));
            }
        }
    }

    #[test]
    fn walk_endpoint_length_grows_linearly() {
        let base = lazy_srw_f2();
        let source = BaseSampler(&base);
        let n = 10_000u64;
        let mut speeds = Vec::new();
        for trial in 0..20 {
            let mut rng = trial_rng(19, "speed", trial);
            let mut w = FreeWord::identity();
            for _ in 0..n {
                let (inc, _) = source.sample_increment(&mut rng);
                w.push_word(&inc);
            }
            speeds.push(w.len() as f64 / n as f64);
        }
        let (mean, se) = crate::stats::mean_stderr(&speeds);
        assert!(mean > 0.05 && mean < 1.0, "speed {mean}");
        // lazy SRW on F2 has speed 1/4: e keeps length, a +-? moves +1 w.p. 3/4
        // and -1 w.p. 1/4 conditional on moving: drift = (1/2)(3/4 - 1/4) = 1/4
        assert!((mean - 0.25).abs() < 6.0 * se + 0.01, "speed {mean} +- {se}");
    }

    #[test]
    fn identical_histograms_compare_equal() {
        let mut h = CylinderHistogram::new(2);
        h.counts[0] = 50;
        h.counts[5] = 100;
        h.total = 150;
        let cmp = compare_hitting(&h, &h, 0.01).unwrap();
        assert_eq!(cmp.tv_distance, 0.0);
        assert!(cmp.pass);
        let other = CylinderHistogram::new(3);
        assert_eq!(
            compare_hitting(&h, &other, 0.01).unwrap_err(),
            WalksError::DepthMismatch(2, 3)
        );
    }

    #[test]
    fn base_hitting_histogram_is_roughly_uniform() {
        let base = lazy_srw_f2();
        let source = BaseSampler(&base);
        let hist = collect_hitting_histogram(&source, 1, 20_000, 4_000, 40, 19, "uniform-test");
        assert!(hist.unresolved_fraction() < 0.01);
        let expected = hist.total as f64 / 4.0;
        for &c in &hist.counts {
            assert!((c as f64 - expected).abs() < 6.0 * expected.sqrt());
        }
    }

    #[test]
    fn stability_vacuous_at_final_checkpoint() {
        let base = lazy_srw_f2();
        let p = RecordMeasure::inverse_square();
        let mix = MixtureSpec {
            p,
            components: vec![
                StoppingSpec::Fixed(1),
                StoppingSpec::LampClear { s: 0, r: 0 },
            ],
        };
        let n = 32;
        let report = lamp_stability(
            &base,
            Projection::FreeGroup,
            &StabilityDriver::MuTau(&mix, 1_000_000),
            n,
            0,
            &[0, 8, 16, 24, n],
            500,
            77,
        );
        assert_eq!(*report.frequencies.last().unwrap(), 1.0);
        for w in report.frequencies.windows(2) {
            assert!(w[0] <= w[1] + 1e-12, "monotonicity violated");
        }
    }

    #[test]
    fn constant_functional_has_zero_defect() {
        let f = |_x: &LampElem, _rng: &mut ChaCha8Rng| Some(0.37);
        let m = pi_lazy_srw_lamplighter();
        let points = default_test_points();
        let report = test_harmonicity_exact(&f, &m, &points[..5], 50, 23, "const");
        for (d, s) in report.delta.iter().zip(&report.stderr) {
            assert!(d.abs() < 1e-12);
            assert!(*s < 1e-12);
        }
    }

    #[test]
    fn default_test_points_shape() {
        let pts = default_test_points();
        assert_eq!(pts.len(), 25);
        assert!(pts.iter().any(|p| p.is_identity()));
    }

    #[test]
    fn entropy_profile_basics() {
        let m = pi_lazy_srw_lamplighter();
        let pts = avez_entropy_profile(&m, &[1], 200_000, 29);
        let exact = exact_step_entropy(&m);
        assert!(
            (pts[0].h_plugin - exact).abs() < 0.01,
            "plugin {} vs exact {}",
            pts[0].h_plugin,
            exact
        );
        // point mass: zero entropy at every n
        let delta = StepMeasure::point_mass(LampElem::identity());
        let z = avez_entropy_profile(&delta, &[1, 8], 1_000, 29);
        assert_eq!(z[0].h_plugin, 0.0);
        assert_eq!(z[1].h_plugin, 0.0);
    }
}
