//! Stopping-time machinery: lamp-clearing stopping times on the projected
//! walk, their inductive calibration, and the randomized mixture that defines
//! the transformed step measure.
//!
//! A lamp-clearing time `tau = inf { t >= 1 : lamps in [-s, s] all off and
//! |X_t| >= r }` is evaluated on the walk's own projected state, so an
//! increment drawn from the stopped measure leaves no net lamp toggle within
//! `s` of its starting position and lands at least `r` away from it. The
//! mixture draws a component index from a record measure and runs the walk to
//! that component's stopping time; one such run is one increment of the
//! transformed walk.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::group::{FreeWord, LampElem, LampState, Projection};
use crate::measures::{BaseStep, Gauge, RecordMeasure, StepMeasure};
use crate::seeding::trial_rng;
use crate::switching::SwitchTarget;

#[derive(Debug, Error)]
pub enum StoppingError {
    #[error("calibration diverged at level {level}: window {window} exceeds ceiling {ceiling}")]
    CalibrationDiverged {
        level: u64,
        window: i64,
        ceiling: i64,
    },
    #[error("calibration file malformed: {0}")]
    MalformedCalibration(String),
    #[error("calibration mismatch: {0}")]
    CalibrationMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A stopping rule for the base walk.
#[derive(Debug, Clone)]
pub enum StoppingSpec {
    /// Stop after exactly `n` steps. The mixture's component zero is `Fixed(1)`.
    Fixed(u64),
    /// First `t >= 1` with no lamps in `[-s, s]` and `|X_t| >= r`.
    LampClear { s: i64, r: i64 },
    /// First hit of a thinned switching target (word-level rule).
    SwitchHit(SwitchTarget),
    /// Draw a component from `p`, then run that component's rule.
    Mixture(Box<MixtureSpec>),
}

/// A randomized stopping time: mixture of component rules weighted by a
/// record measure, resampled onto the available component range.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub p: RecordMeasure,
    /// Component `i` is the rule for `tau_i`; index 0 must be `Fixed(1)`.
    pub components: Vec<StoppingSpec>,
}

impl MixtureSpec {
    /// The lamp-clear family of a calibration: `tau_0 = 1` plus one
    /// `LampClear(s_k, r_k)` per calibrated level.
    pub fn lamp_clear_family(p: RecordMeasure, calib: &Calibration) -> MixtureSpec {
        let mut components = vec![StoppingSpec::Fixed(1)];
        for lvl in &calib.levels {
            components.push(StoppingSpec::LampClear { s: lvl.s, r: lvl.r });
        }
        MixtureSpec { p, components }
    }

    /// Draw a component index, conditioning `p` on the available range.
    pub fn draw_component(&self, rng: &mut impl Rng) -> u64 {
        loop {
            let i = self.p.sample(rng);
            if (i as usize) < self.components.len() {
                return i;
            }
        }
    }
}

/// Result of running the walk to a stopping time.
#[derive(Debug, Clone)]
pub struct StoppedSample {
    /// The F2 element at the stopping time (empty when using the projected
    /// fast path).
    pub endpoint: FreeWord,
    /// Projected endpoint.
    pub projected: LampElem,
    pub steps_used: u64,
    /// Mixture component that produced this increment, when applicable.
    pub component: Option<u64>,
    /// Stopped by the horizon cap instead of the rule.
    pub truncated: bool,
}

/// Exact runner: maintains the reduced word and the projected state.
pub fn run_to_stop(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    spec: &StoppingSpec,
    horizon_cap: u64,
    rng: &mut impl Rng,
) -> StoppedSample {
    match spec {
        StoppingSpec::Mixture(mix) => {
            let i = mix.draw_component(rng);
            let mut out = run_to_stop(base, proj, &mix.components[i as usize], horizon_cap, rng);
            out.component = Some(i);
            out
        }
        _ => {
            let mut word = FreeWord::identity();
            let mut state = LampState::new();
            if let StoppingSpec::LampClear { s, .. } = spec {
                state.set_window(*s);
            }
            let mut t = 0u64;
            loop {
                if t >= horizon_cap {
                    return StoppedSample {
                        projected: state.to_elem(),
                        endpoint: word,
                        steps_used: t,
                        component: None,
                        truncated: true,
                    };
                }
                t += 1;
                if let Some(l) = base.sample(rng).as_letter() {
                    word.push(l);
                    state.apply(proj, l);
                }
                let stop = match spec {
                    StoppingSpec::Fixed(n) => t >= *n,
                    StoppingSpec::LampClear { r, .. } => {
                        state.window_count() == 0 && state.pos().abs() >= *r
                    }
                    StoppingSpec::SwitchHit(target) => target.hits(&word),
                    StoppingSpec::Mixture(_) => unreachable!(),
                };
                if stop {
                    if let StoppingSpec::LampClear { s, r } = spec {
                        let e = state.to_elem();
                        debug_assert!(e.lamps().iter().all(|x| x.abs() > *s));
                        debug_assert!(e.pos().abs() >= *r);
                    }
                    return StoppedSample {
                        projected: state.to_elem(),
                        endpoint: word,
                        steps_used: t,
                        component: None,
                        truncated: false,
                    };
                }
            }
        }
    }
}

/// Fast runner for lamp-level rules: no word is built. Panics on `SwitchHit`,
/// which needs the word-level runner.
pub fn run_to_stop_projected(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    spec: &StoppingSpec,
    horizon_cap: u64,
    state: &mut LampState,
    rng: &mut impl Rng,
) -> (u64, bool) {
    match spec {
        StoppingSpec::Mixture(mix) => {
            let i = mix.draw_component(rng);
            run_to_stop_projected(base, proj, &mix.components[i as usize], horizon_cap, state, rng)
        }
        StoppingSpec::SwitchHit(_) => {
            panic!("switch-hit stopping requires the word-level runner")
        }
        StoppingSpec::Fixed(n) => {
            let mut t = 0u64;
            while t < *n {
                if t >= horizon_cap {
                    return (t, true);
                }
                t += 1;
                if let Some(l) = base.sample(rng).as_letter() {
                    state.apply(proj, l);
                }
            }
            (t, false)
        }
        StoppingSpec::LampClear { s, r } => {
            // The rule is relative to the increment's own start: run in a
            // local frame and fold the endpoint into the caller's state.
            let mut local = LampState::new();
            local.set_window(*s);
            let mut t = 0u64;
            loop {
                if t >= horizon_cap {
                    state.apply_elem(&local.to_elem());
                    return (t, true);
                }
                t += 1;
                if let Some(l) = base.sample(rng).as_letter() {
                    local.apply(proj, l);
                }
                if local.window_count() == 0 && local.pos().abs() >= *r {
                    state.apply_elem(&local.to_elem());
                    return (t, false);
                }
            }
        }
    }
}

/// One increment of the transformed walk: draw a component, run to its stop.
pub fn sample_mu_tau(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    mix: &MixtureSpec,
    horizon_cap: u64,
    rng: &mut impl Rng,
) -> StoppedSample {
    let i = mix.draw_component(rng);
    let mut out = run_to_stop(base, proj, &mix.components[i as usize], horizon_cap, rng);
    out.component = Some(i);
    out
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// One calibrated level.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CalibrationLevel {
    pub k: u64,
    pub s: i64,
    pub r: i64,
    /// Number of increments the containment event covers at this level.
    pub phi: u64,
    /// Empirical containment frequency at the accepted window.
    pub achieved_confidence: f64,
    /// The target `1 - 2^-k`.
    pub target_confidence: f64,
}

/// Calibrated lamp-clear scales `s_1 <= s_2 <= ...` with `r_k = 3 s_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub levels: Vec<CalibrationLevel>,
    pub seed: u64,
    /// Confidence knob the calibration was run with (recorded for refusal
    /// checks when experiments load the file).
    pub confidence: f64,
    /// Human-readable gauge provenance.
    pub gauge_desc: String,
}

impl Calibration {
    pub fn k_max(&self) -> u64 {
        self.levels.len() as u64
    }

    pub fn level(&self, k: u64) -> &CalibrationLevel {
        &self.levels[(k - 1) as usize]
    }

    /// Structured text form, one line per level.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# lampwalk calibration v1").unwrap();
        writeln!(out, "seed={}", self.seed).unwrap();
        writeln!(out, "confidence={}", self.confidence).unwrap();
        writeln!(out, "gauge={}", self.gauge_desc).unwrap();
        writeln!(out, "k_max={}", self.k_max()).unwrap();
        writeln!(out, "k s r phi achieved_confidence").unwrap();
        for l in &self.levels {
            writeln!(
                out,
                "{} {} {} {} {:.6}",
                l.k, l.s, l.r, l.phi, l.achieved_confidence
            )
            .unwrap();
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<(), StoppingError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Calibration, StoppingError> {
        let mut seed = None;
        let mut confidence = None;
        let mut gauge_desc = String::new();
        let mut levels = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("k ") {
                continue;
            }
            if let Some(v) = line.strip_prefix("seed=") {
                seed = Some(v.parse().map_err(|_| {
                    StoppingError::MalformedCalibration(format!("bad seed {v:?}"))
                })?);
            } else if let Some(v) = line.strip_prefix("confidence=") {
                confidence = Some(v.parse().map_err(|_| {
                    StoppingError::MalformedCalibration(format!("bad confidence {v:?}"))
                })?);
            } else if let Some(v) = line.strip_prefix("gauge=") {
                gauge_desc = v.to_string();
            } else if line.strip_prefix("k_max=").is_some() {
                continue;
            } else {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 5 {
                    return Err(StoppingError::MalformedCalibration(format!(
                        "bad level line {line:?}"
                    )));
                }
                let parse = |s: &str| -> Result<f64, StoppingError> {
                    s.parse().map_err(|_| {
                        StoppingError::MalformedCalibration(format!("bad number {s:?}"))
                    })
                };
                levels.push(CalibrationLevel {
                    k: parse(fields[0])? as u64,
                    s: parse(fields[1])? as i64,
                    r: parse(fields[2])? as i64,
                    phi: parse(fields[3])? as u64,
                    achieved_confidence: parse(fields[4])?,
                    target_confidence: 1.0 - 0.5f64.powi(parse(fields[0])? as i32),
                });
            }
        }
        let calib = Calibration {
            levels,
            seed: seed.ok_or_else(|| {
                StoppingError::MalformedCalibration("missing seed".into())
            })?,
            confidence: confidence.ok_or_else(|| {
                StoppingError::MalformedCalibration("missing confidence".into())
            })?,
            gauge_desc,
        };
        calib.check_invariants()?;
        Ok(calib)
    }

    pub fn load(path: &Path) -> Result<Calibration, StoppingError> {
        Calibration::parse(&std::fs::read_to_string(path)?)
    }

    /// Refuse calibrations whose provenance does not match the experiment
    /// config, preventing silent mismatch.
    pub fn check_provenance(&self, seed: u64, confidence: f64) -> Result<(), StoppingError> {
        if self.seed != seed {
            return Err(StoppingError::CalibrationMismatch(format!(
                "calibration seed {} != config seed {}",
                self.seed, seed
            )));
        }
        if (self.confidence - confidence).abs() > 1e-12 {
            return Err(StoppingError::CalibrationMismatch(format!(
                "calibration confidence {} != config confidence {}",
                self.confidence, confidence
            )));
        }
        Ok(())
    }

    fn check_invariants(&self) -> Result<(), StoppingError> {
        let bad = |msg: String| Err(StoppingError::MalformedCalibration(msg));
        for (idx, l) in self.levels.iter().enumerate() {
            if l.k != idx as u64 + 1 {
                return bad(format!("level {} out of order", l.k));
            }
            if l.k == 1 && (l.s != 0 || l.r != 0) {
                return bad("level 1 must have s = r = 0".into());
            }
            if l.k >= 2 && l.r != 3 * l.s {
                return bad(format!("level {}: r != 3s", l.k));
            }
            if idx > 0 {
                let prev = &self.levels[idx - 1];
                if l.s < prev.s {
                    return bad(format!("s not monotone at level {}", l.k));
                }
                if prev.k >= 2 && l.s <= prev.r {
                    return bad(format!("interleaving violated at level {}", l.k));
                }
            }
        }
        Ok(())
    }
}

/// Knobs of the calibration search.
#[derive(Debug, Clone)]
pub struct CalibrateConfig {
    pub k_max: u64,
    /// Monte Carlo trials per tested sequence per candidate window.
    pub trials: u64,
    /// Random adversarial sequences tested besides the homogeneous one.
    pub random_sequences: u64,
    /// Multiplier applied to the accepted window before fixing `s_k`.
    pub safety_factor: i64,
    /// Search ceiling on the containment window; beyond it the level diverges.
    pub window_ceiling: i64,
    /// Cap on base steps per increment during calibration trials.
    pub increment_cap: u64,
    /// Acceptance confidence recorded in the calibration file.
    pub confidence: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        CalibrateConfig {
            k_max: 2,
            trials: 512,
            random_sequences: 256,
            safety_factor: 1,
            window_ceiling: 64,
            increment_cap: 1_000_000,
            confidence: 0.95,
        }
    }
}

/// Containment frequency for one level candidate: over `trials` products of
/// `phi` increments drawn along `sequence`, the fraction whose every prefix
/// keeps all lamps inside `[-window, window]`. Truncated increments count as
/// failures.
fn containment_frequency(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    levels: &[CalibrationLevel],
    sequence: &[u64],
    window: i64,
    trials: u64,
    increment_cap: u64,
    master_seed: u64,
    stream: &str,
) -> f64 {
    let ok: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, stream, t);
            let mut global = LampState::new();
            global.set_window(window);
            let mut total_lamps = 0usize;
            for &i in sequence {
                let lvl = &levels[(i - 1) as usize];
                let spec = StoppingSpec::LampClear { s: lvl.s, r: lvl.r };
                let mut local = LampState::new();
                let (_, truncated) =
                    run_to_stop_projected(base, proj, &spec, increment_cap, &mut local, &mut rng);
                if truncated {
                    return 0u64;
                }
                let e = local.to_elem();
                total_lamps = total_lamps
                    .wrapping_add(e.lamps().len())
                    .wrapping_sub(2 * count_overlap(&global, &e));
                global.apply_elem(&e);
                // all lamps inside the window <=> none outside
                let inside = global.window_count();
                if total_lamps != inside {
                    return 0u64;
                }
            }
            1u64
        })
        .sum();
    ok as f64 / trials as f64
}

/// Lamps of `e` (shifted into the global frame) already lit in `global`;
/// these toggle off and must not be double counted.
fn count_overlap(global: &LampState, e: &LampElem) -> usize {
    e.lamps()
        .iter()
        .filter(|&&x| global.lamp_on(x + global.pos()))
        .count()
}

/// Inductive calibration of the lamp-clear scales.
///
/// Level 1 is pinned at `s = r = 0`. For each `k >= 2` the search doubles and
/// then bisects the containment window `c`, accepting the smallest `c` whose
/// containment frequency over products of `Phi(k)` increments (indices drawn
/// from the adversarial sequence set over `{1, ..., k-1}`) reaches
/// `1 - 2^-k`; then `s_k = 3 c * safety_factor` (floored to keep the
/// interleaving `r_{k-1} < s_k`) and `r_k = 3 s_k`.
pub fn calibrate(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    p: &RecordMeasure,
    gauge: &Gauge,
    cfg: &CalibrateConfig,
    master_seed: u64,
) -> Result<Calibration, StoppingError> {
    let _ = p; // the mixture weights do not enter the containment event
    let mut levels = vec![CalibrationLevel {
        k: 1,
        s: 0,
        r: 0,
        phi: gauge.eval(1),
        achieved_confidence: 1.0,
        target_confidence: 0.5,
    }];

    for k in 2..=cfg.k_max {
        let phi = gauge.eval(k);
        let target = 1.0 - 0.5f64.powi(k as i32);

        let mut sequences: Vec<Vec<u64>> = vec![vec![k - 1; phi as usize]];
        let mut seq_rng = trial_rng(master_seed, &format!("calibrate-seq-{k}"), 0);
        for _ in 0..cfg.random_sequences {
            let s: Vec<u64> = (0..phi).map(|_| seq_rng.gen_range(1..k)).collect();
            if !sequences.contains(&s) {
                sequences.push(s);
            }
        }

        let freq_at = |window: i64, calls: &mut u64| -> f64 {
            let mut min_freq = 1.0f64;
            for (si, seq) in sequences.iter().enumerate() {
                *calls += 1;
                let stream = format!("calibrate-k{k}-w{window}-s{si}");
                let f = containment_frequency(
                    base,
                    proj,
                    &levels,
                    seq,
                    window,
                    cfg.trials,
                    cfg.increment_cap,
                    master_seed,
                    &stream,
                );
                min_freq = min_freq.min(f);
            }
            min_freq
        };

        let mut calls = 0u64;
        // Grid doubling.
        let mut lo = 0i64; // largest window known to fail (or -1 semantics via lo=0 tested)
        let mut hi = 1i64;
        let mut hi_freq;
        let f0 = freq_at(0, &mut calls);
        if f0 >= target {
            hi = 0;
            hi_freq = f0;
        } else {
            loop {
                let f = freq_at(hi, &mut calls);
                if f >= target {
                    hi_freq = f;
                    break;
                }
                lo = hi;
                hi *= 2;
                if hi > cfg.window_ceiling {
                    return Err(StoppingError::CalibrationDiverged {
                        level: k,
                        window: hi,
                        ceiling: cfg.window_ceiling,
                    });
                }
            }
            // Bisection on the smallest passing window.
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                let f = freq_at(mid, &mut calls);
                if f >= target {
                    hi = mid;
                    hi_freq = f;
                } else {
                    lo = mid;
                }
            }
        }

        let mut s = 3 * hi * cfg.safety_factor;
        // enforce monotonicity and interleaving
        let prev = levels.last().unwrap();
        let floor = if prev.k >= 2 { prev.r + 1 } else { 1 };
        s = s.max(floor).max(prev.s);
        let r = 3 * s;
        levels.push(CalibrationLevel {
            k,
            s,
            r,
            phi,
            achieved_confidence: hi_freq,
            target_confidence: target,
        });
    }

    Ok(Calibration {
        levels,
        seed: master_seed,
        confidence: cfg.confidence,
        gauge_desc: format!(
            "table[{}]",
            (1..=cfg.k_max)
                .map(|k| gauge.eval(k).to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
    })
}

/// Fresh-seed validation: containment frequency at each calibrated level's
/// final window `s_k / 3`, on the homogeneous worst sequence.
pub fn validate_calibration(
    base: &StepMeasure<BaseStep>,
    proj: Projection,
    calib: &Calibration,
    trials: u64,
    increment_cap: u64,
    master_seed: u64,
) -> Vec<(u64, f64, f64)> {
    let mut out = Vec::new();
    for lvl in calib.levels.iter().filter(|l| l.k >= 2) {
        let seq = vec![lvl.k - 1; lvl.phi as usize];
        let f = containment_frequency(
            base,
            proj,
            &calib.levels,
            &seq,
            lvl.s / 3,
            trials,
            increment_cap,
            master_seed,
            &format!("validate-k{}", lvl.k),
        );
        out.push((lvl.k, f, lvl.target_confidence));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::lazy_srw_f2;

    #[test]
    fn fixed_one_is_one_base_step() {
        let base = lazy_srw_f2();
        let mut rng = trial_rng(9, "fixed", 0);
        let mut identity = 0u64;
        let n = 20_000;
        for _ in 0..n {
            let s = run_to_stop(&base, Projection::FreeGroup, &StoppingSpec::Fixed(1), 100, &mut rng);
            assert_eq!(s.steps_used, 1);
            assert!(!s.truncated);
            if s.endpoint.is_identity() {
                identity += 1;
            }
        }
        let est = crate::stats::binomial_estimate(identity, n);
        assert!((est.p_hat - 0.5).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn lamp_clear_zero_zero_stops_when_origin_lamp_off() {
        let base = lazy_srw_f2();
        let spec = StoppingSpec::LampClear { s: 0, r: 0 };
        let mut rng = trial_rng(9, "lamp00", 0);
        let mut truncated = 0u64;
        for _ in 0..5_000 {
            let s = run_to_stop(&base, Projection::FreeGroup, &spec, 1_000_000, &mut rng);
            if s.truncated {
                // the return-time tail is heavy; rare horizon hits are data
                truncated += 1;
                continue;
            }
            // endpoint predicate, re-derived from the endpoint word
            let e = Projection::FreeGroup.project_word(&s.endpoint);
            assert!(!e.lamps().contains(&0));
            assert_eq!(e, s.projected);
        }
        assert!(truncated <= 10, "truncated = {truncated}");
    }

    #[test]
    fn lamp_clear_endurance_predicate_holds_exactly() {
        let base = lazy_srw_f2();
        let spec = StoppingSpec::LampClear { s: 2, r: 6 };
        let mut rng = trial_rng(9, "lamp26", 0);
        for _ in 0..300 {
            let s = run_to_stop(&base, Projection::FreeGroup, &spec, 1_000_000, &mut rng);
            if s.truncated {
                continue;
            }
            let e = Projection::FreeGroup.project_word(&s.endpoint);
            assert!(e.lamps().iter().all(|x| x.abs() > 2));
            assert!(e.pos().abs() >= 6);
        }
    }

    #[test]
    fn projected_runner_agrees_with_exact_runner() {
        let base = lazy_srw_f2();
        let spec = StoppingSpec::LampClear { s: 1, r: 3 };
        for t in 0..200 {
            let mut rng_a = trial_rng(10, "agree", t);
            let mut rng_b = trial_rng(10, "agree", t);
            let exact = run_to_stop(&base, Projection::FreeGroup, &spec, 1_000_000, &mut rng_a);
            let mut state = LampState::new();
            let (steps, truncated) = run_to_stop_projected(
                &base,
                Projection::FreeGroup,
                &spec,
                1_000_000,
                &mut state,
                &mut rng_b,
            );
            assert_eq!(steps, exact.steps_used);
            assert_eq!(truncated, exact.truncated);
            assert_eq!(state.to_elem(), exact.projected);
        }
    }

    #[test]
    fn mixture_component_frequencies_match_conditioned_p() {
        let p = RecordMeasure::inverse_square();
        let mix = MixtureSpec {
            p: p.clone(),
            components: vec![
                StoppingSpec::Fixed(1),
                StoppingSpec::LampClear { s: 0, r: 0 },
                StoppingSpec::LampClear { s: 3, r: 9 },
            ],
        };
        let mut rng = trial_rng(11, "mix-freq", 0);
        let n = 100_000u64;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[mix.draw_component(&mut rng) as usize] += 1;
        }
        let z: f64 = (0..3).map(|i| p.pmf(i as u64)).sum();
        for i in 0..3 {
            let expect = p.pmf(i as u64) / z;
            let est = crate::stats::binomial_estimate(counts[i], n);
            assert!(
                (est.p_hat - expect).abs() < 4.0 * est.stderr,
                "component {i}: {} vs {}",
                est.p_hat,
                expect
            );
        }
    }

    #[test]
    fn sample_mu_tau_reproducible_and_stream_independent() {
        let base = lazy_srw_f2();
        let p = RecordMeasure::inverse_square();
        let calib = Calibration {
            levels: vec![
                CalibrationLevel {
                    k: 1,
                    s: 0,
                    r: 0,
                    phi: 2,
                    achieved_confidence: 1.0,
                    target_confidence: 0.5,
                },
                CalibrationLevel {
                    k: 2,
                    s: 3,
                    r: 9,
                    phi: 2,
                    achieved_confidence: 0.8,
                    target_confidence: 0.75,
                },
            ],
            seed: 5,
            confidence: 0.95,
            gauge_desc: "test".into(),
        };
        let mix = MixtureSpec::lamp_clear_family(p, &calib);
        let run = |seed| {
            let mut rng = trial_rng(seed, "mu-tau", 0);
            (0..50)
                .map(|_| {
                    let s = sample_mu_tau(&base, Projection::FreeGroup, &mix, 1_000_000, &mut rng);
                    (s.projected, s.steps_used, s.component)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn calibration_text_round_trip_and_refusal() {
        let calib = Calibration {
            levels: vec![
                CalibrationLevel {
                    k: 1,
                    s: 0,
                    r: 0,
                    phi: 2,
                    achieved_confidence: 1.0,
                    target_confidence: 0.5,
                },
                CalibrationLevel {
                    k: 2,
                    s: 3,
                    r: 9,
                    phi: 2,
                    achieved_confidence: 0.8125,
                    target_confidence: 0.75,
                },
            ],
            seed: 99,
            confidence: 0.95,
            gauge_desc: "table[2,2]".into(),
        };
        let parsed = Calibration::parse(&calib.to_text()).unwrap();
        assert_eq!(parsed.levels.len(), 2);
        assert_eq!(parsed.level(2).s, 3);
        assert_eq!(parsed.level(2).r, 9);
        assert!(parsed.check_provenance(99, 0.95).is_ok());
        assert!(parsed.check_provenance(98, 0.95).is_err());
        assert!(parsed.check_provenance(99, 0.9).is_err());
    }

    #[test]
    fn calibration_invariants_rejected_when_violated() {
        let text = "seed=1\nconfidence=0.95\nk_max=2\n1 0 0 2 1.0\n2 3 10 2 0.8\n";
        assert!(Calibration::parse(text).is_err()); // r != 3s
        let text2 = "seed=1\nconfidence=0.95\nk_max=1\n1 1 1 2 1.0\n";
        assert!(Calibration::parse(text2).is_err()); // level 1 not (0,0)
    }

    #[test]
    fn calibrate_small_level_two() {
        let base = lazy_srw_f2();
        let p = RecordMeasure::inverse_square();
        let gauge = Gauge::constant(2);
        let cfg = CalibrateConfig {
            k_max: 2,
            trials: 256,
            random_sequences: 8,
            ..CalibrateConfig::default()
        };
        let calib = calibrate(&base, Projection::FreeGroup, &p, &gauge, &cfg, 7).unwrap();
        assert_eq!(calib.k_max(), 2);
        let l2 = calib.level(2);
        assert_eq!(l2.r, 3 * l2.s);
        assert!(l2.s >= 1);
        assert!(l2.achieved_confidence >= l2.target_confidence);
        // validation on a fresh seed stays within 3 sigma of the target
        let checks = validate_calibration(&base, Projection::FreeGroup, &calib, 256, 1_000_000, 8);
        for (k, freq, target) in checks {
            let sigma = (target * (1.0 - target) / 256.0).sqrt();
            assert!(
                freq >= target - 3.0 * sigma,
                "level {k}: {freq} < {target} - 3s"
            );
        }
    }
}
