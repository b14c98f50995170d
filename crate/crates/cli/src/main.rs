//! Config-driven experiment runner: every estimator and certifier of the
//! library as a subcommand, with reproducible seeds and machine-readable
//! reports.
//!
//! Exit codes: 0 when all declared verdicts pass, 2 on a statistical
//! failure, 1 on configuration or I/O errors, so pipelines can tell
//! infrastructure problems from science problems.

mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;

use config::{Config, ConfigError};
use lampwalk::group::{LampElem, Projection};
use lampwalk::measures::{
    drifted_srw_f2, fit_gauge, gauge_violation_rate, lazy_srw_f2, non_simple_frequency,
    pi_lazy_srw_lamplighter, record_hit_probability, trace_records, Gauge, RecordMeasure,
};
use lampwalk::report::{fmt_f64, Csv, Report, Verdict};
use lampwalk::seeding::trial_rng;
use lampwalk::stopping::{
    calibrate, validate_calibration, CalibrateConfig, Calibration, CalibrationLevel, MixtureSpec,
};
use lampwalk::switching::ladder::{
    build_ladder, build_forest, optional_stopping_gap, subtree_retention,
    trajectory_chain_check, LadderConfig,
};
use lampwalk::switching::{
    coset_decay, is_switching, switch_hit_samples, switching_frequency, FiniteSet, Subgroup,
    SwitchTarget,
};
use lampwalk::walks::{
    avez_entropy_profile, collect_hitting_histogram, compare_hitting, default_test_points,
    estimate_limit_functional, exact_step_entropy, lamp_stability, limit_lamp_sample, run_walk,
    test_harmonicity_empirical_mu_tau, test_harmonicity_exact, BaseSampler, MixtureSampler,
    ResolveParams, StabilityDriver,
};

#[derive(Parser, Debug)]
#[command(
    name = "lampwalk",
    about = "Random-walk, stopping-time and ladder experiments on F2 and the lamplighter"
)]
struct Cli {
    /// Experiment to run.
    subcommand: String,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config key `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out`; default `LAMPWALK_OUT` or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional key=value overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Io(std::io::Error),
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Other(s) => write!(f, "{s}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if report.all_pass() {
                std::process::exit(0);
            } else {
                std::process::exit(2);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string());
    }
    if let Some(out) = &cli.out {
        cfg.set("out", &out.to_string_lossy());
    }
    for kv in &cli.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(CliError::Other(format!("--set expects key=value, got {kv:?}")));
        };
        cfg.set(k.trim(), v.trim());
    }

    let default_out = std::env::var("LAMPWALK_OUT").unwrap_or_else(|_| "out".into());
    let out_dir = PathBuf::from(cfg.get_str("out", &default_out));
    std::fs::create_dir_all(&out_dir)?;
    let seed = cfg.get_u64("seed", 1)?;

    // results are independent of the worker count (per-trial seeding);
    // the knob only controls parallelism
    let workers = cfg.get_u64("workers", 0)?;
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers as usize)
            .build_global()
            .map_err(|e| CliError::Other(format!("worker pool: {e}")))?;
    }

    let t0 = Instant::now();
    let mut report = match cli.subcommand.as_str() {
        "calibrate" => cmd_calibrate(&cfg, seed, &out_dir)?,
        "records" => cmd_records(&cfg, seed, &out_dir)?,
        "gauge" => cmd_gauge(&cfg, seed, &out_dir)?,
        "walk" => cmd_walk(&cfg, seed, &out_dir)?,
        "hitting" => cmd_hitting(&cfg, seed, &out_dir)?,
        "lamp-stability" => cmd_lamp_stability(&cfg, seed, &out_dir)?,
        "harmonicity" => cmd_harmonicity(&cfg, seed, &out_dir)?,
        "entropy" => cmd_entropy(&cfg, seed, &out_dir)?,
        "switching-freq" => cmd_switching_freq(&cfg, seed, &out_dir)?,
        "coset-decay" => cmd_coset_decay(&cfg, seed, &out_dir)?,
        "switch-stop" => cmd_switch_stop(&cfg, seed, &out_dir)?,
        "ladder" => cmd_ladder(&cfg, seed, &out_dir)?,
        "forest" => cmd_forest(&cfg, seed, &out_dir)?,
        "retention" => cmd_retention(&cfg, seed, &out_dir)?,
        "os-gap" => cmd_os_gap(&cfg, seed, &out_dir)?,
        other => {
            return Err(CliError::Other(format!(
                "unknown subcommand {other:?}; see README for the list"
            )))
        }
    };
    report.wall_clock_secs = t0.elapsed().as_secs_f64();
    report.config = cfg.consumed();
    report.seed = seed;
    report.write_to(&out_dir.join(format!("{}_report.json", cli.subcommand)))?;
    for v in &report.verdicts {
        println!(
            "[{}] {}: {}",
            if v.pass { "pass" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    Ok(report)
}

/// The stopping mixture the experiments run against: a calibration file when
/// configured (with provenance refusal checks), otherwise the built-in
/// level-one family.
fn load_mixture(cfg: &Config) -> Result<(Calibration, MixtureSpec), CliError> {
    let calib = match cfg.get_path("calibration") {
        Some(path) => {
            let calib = Calibration::load(&path)
                .map_err(|e| CliError::Other(format!("calibration: {e}")))?;
            let want_seed = cfg.get_u64("calibration_seed", calib.seed)?;
            let want_conf = cfg.get_f64("calibration_confidence", calib.confidence)?;
            calib
                .check_provenance(want_seed, want_conf)
                .map_err(|e| CliError::Other(format!("calibration refused: {e}")))?;
            calib
        }
        None => default_calibration(),
    };
    let p = RecordMeasure::inverse_square();
    let mix = MixtureSpec::lamp_clear_family(p, &calib);
    Ok((calib, mix))
}

/// Built-in default: the pinned level-one family (s = r = 0).
fn default_calibration() -> Calibration {
    Calibration {
        levels: vec![CalibrationLevel {
            k: 1,
            s: 0,
            r: 0,
            phi: 2,
            achieved_confidence: 1.0,
            target_confidence: 0.5,
        }],
        seed: 0,
        confidence: 0.95,
        gauge_desc: "builtin".into(),
    }
}

fn resolve_params(cfg: &Config) -> Result<ResolveParams, CliError> {
    Ok(ResolveParams {
        margin: cfg.get_u64("resolve_margin", 96)?,
        max_steps: cfg.get_u64("resolve_max_steps", 768)?,
        horizon_cap: cfg.get_u64("increment_cap", 50_000)?,
    })
}

// ---------------------------------------------------------------------------

fn cmd_calibrate(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("calibrate", seed);
    let base = lazy_srw_f2();
    let p = RecordMeasure::inverse_square();
    let gauge_spec = cfg.get_str("gauge_table", "2,2");
    let table: Vec<u64> = gauge_spec
        .split(',')
        .map(|s| s.trim().parse().unwrap_or(2))
        .collect();
    let gauge = Gauge {
        table,
        fallback: true,
        quantile: 0.0,
    };
    let ccfg = CalibrateConfig {
        k_max: cfg.get_u64("k_max", 1)?,
        trials: cfg.get_u64("trials", 512)?,
        random_sequences: cfg.get_u64("random_sequences", 256)?,
        safety_factor: cfg.get_i64("safety_factor", 1)?,
        window_ceiling: cfg.get_i64("window_ceiling", 64)?,
        increment_cap: cfg.get_u64("increment_cap", 1_000_000)?,
        confidence: cfg.get_f64("confidence", 0.95)?,
    };
    let calib = calibrate(&base, Projection::FreeGroup, &p, &gauge, &ccfg, seed)
        .map_err(|e| CliError::Other(format!("{e}")))?;
    calib
        .write_to(&out.join("calibration.txt"))
        .map_err(|e| CliError::Other(format!("{e}")))?;

    let mut csv = Csv::new(["k", "s", "r", "phi", "achieved_confidence"]);
    for l in &calib.levels {
        csv.push_row([
            l.k.to_string(),
            l.s.to_string(),
            l.r.to_string(),
            l.phi.to_string(),
            fmt_f64(l.achieved_confidence),
        ]);
    }
    csv.write_to(&out.join("calibration.csv"))?;

    let validation = validate_calibration(
        &base,
        Projection::FreeGroup,
        &calib,
        ccfg.trials,
        ccfg.increment_cap,
        seed.wrapping_add(1),
    );
    for (k, freq, target) in validation {
        let sigma = (target * (1.0 - target) / ccfg.trials as f64).sqrt();
        report.metrics.insert(format!("validation_freq_k{k}"), freq);
        report.verdicts.push(Verdict {
            name: format!("containment_level_{k}"),
            pass: freq >= target - 3.0 * sigma,
            detail: format!("fresh-seed containment {freq:.4} vs target {target:.4} - 3 sigma"),
        });
    }
    report
        .metrics
        .insert("k_max".into(), calib.k_max() as f64);
    Ok(report)
}

fn cmd_records(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("records", seed);
    let p = RecordMeasure::inverse_square();
    let trials = cfg.get_u64("trials", 10_000)?;
    let horizon = cfg.get_u64("horizon", 2_048)? as usize;

    // one trace's record table
    let mut rng = trial_rng(seed, "records-trace", 0);
    let samples: Vec<u64> = (0..horizon).map(|_| p.sample(&mut rng)).collect();
    let trace = trace_records(&samples);
    let mut csv = Csv::new(["k", "T_k", "R_k", "simple"]);
    for k in 0..trace.num_records() {
        csv.push_row([
            k.to_string(),
            trace.times[k].to_string(),
            trace.values[k].to_string(),
            match trace.simple[k] {
                Some(true) => "true".to_string(),
                Some(false) => "false".to_string(),
                None => "".to_string(),
            },
        ]);
    }
    csv.write_to(&out.join("records.csv"))?;

    // simplicity decay table
    let mut decay = Csv::new(["k0", "non_simple_freq", "stderr", "records"]);
    let mut freqs = Vec::new();
    for k0 in [1usize, 5, 10] {
        let est = non_simple_frequency(&p, k0, trials, horizon, seed.wrapping_add(2));
        decay.push_row([
            k0.to_string(),
            fmt_f64(est.p_hat),
            fmt_f64(est.stderr),
            est.trials.to_string(),
        ]);
        freqs.push(est);
    }
    decay.write_to(&out.join("simplicity_decay.csv"))?;
    let sep = (freqs[0].p_hat - freqs[2].p_hat)
        / (freqs[0].stderr.powi(2) + freqs[2].stderr.powi(2)).sqrt();
    report.metrics.insert("decay_separation_sigma".into(), sep);
    report.verdicts.push(Verdict {
        name: "non_simple_decay".into(),
        pass: sep > 3.0,
        detail: format!(
            "freq(k0=10) {:.4} below freq(k0=1) {:.4} by {sep:.1} sigma",
            freqs[2].p_hat, freqs[0].p_hat
        ),
    });

    // diagonal transition partial sums
    let s4 = p.diag_square_partial_sum(10_000);
    let s5 = p.diag_square_partial_sum(100_000);
    report.metrics.insert("diag_sq_sum_1e4".into(), s4);
    report.metrics.insert("diag_sq_sum_1e5".into(), s5);
    report.verdicts.push(Verdict {
        name: "diag_square_summable".into(),
        pass: s5 - s4 < 1e-4,
        detail: format!("partial sum increase {:.2e} < 1e-4", s5 - s4),
    });

    // record hit probability at two test values
    let hit5 = record_hit_probability(&p, 5, trials.max(1_000), horizon, seed.wrapping_add(3));
    let hit50 = record_hit_probability(&p, 50, trials.max(1_000), horizon, seed.wrapping_add(3));
    report.metrics.insert("record_hit_5".into(), hit5.p_hat);
    report.metrics.insert("record_hit_50".into(), hit50.p_hat);
    report.verdicts.push(Verdict {
        name: "record_hit_decay".into(),
        pass: hit50.p_hat + 3.0 * hit50.stderr < hit5.p_hat - 3.0 * hit5.stderr,
        detail: format!("P(50 hit) {:.4} below P(5 hit) {:.4}", hit50.p_hat, hit5.p_hat),
    });
    Ok(report)
}

fn cmd_gauge(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("gauge", seed);
    let p = RecordMeasure::inverse_square();
    let trials = cfg.get_u64("trials", 10_000)?;
    let horizon = cfg.get_u64("horizon", 512)? as usize;
    let quantile = cfg.get_f64("quantile", 0.999)?;
    let gauge = fit_gauge(&p, trials, horizon, quantile, true, seed)
        .map_err(|e| CliError::Other(format!("{e}")))?;
    let mut csv = Csv::new(["m", "phi"]);
    for (m, phi) in gauge.table.iter().enumerate() {
        csv.push_row([m.to_string(), phi.to_string()]);
    }
    csv.write_to(&out.join("gauge.csv"))?;
    let viol = gauge_violation_rate(&p, &gauge, trials, horizon, seed.wrapping_add(1));
    report.metrics.insert("violation_rate".into(), viol.p_hat);
    report
        .metrics
        .insert("table_len".into(), gauge.table.len() as f64);
    let bound = 2.0 * (1.0 - quantile);
    report.verdicts.push(Verdict {
        name: "gauge_quantile_contract".into(),
        pass: viol.p_hat <= bound,
        detail: format!("fresh-seed violation rate {:.5} <= {bound:.5}", viol.p_hat),
    });
    // analytic fallback comparison on observed values
    let within = gauge
        .table
        .iter()
        .enumerate()
        .all(|(m, &phi)| phi <= (m as u64 + 1).pow(3).max(2));
    report.verdicts.push(Verdict {
        name: "gauge_below_cubic".into(),
        pass: within,
        detail: "fitted table bounded by (m+1)^3".into(),
    });
    Ok(report)
}

fn cmd_walk(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("walk", seed);
    let base = lazy_srw_f2();
    let n_steps = cfg.get_u64("n_steps", 64)?;
    let source_kind = cfg.get_str("source", "mu");
    let mut rng = trial_rng(seed, "walk-cmd", 0);
    let traj = match source_kind.as_str() {
        "mu" => run_walk(
            &BaseSampler(&base),
            n_steps,
            &lampwalk::group::FreeWord::identity(),
            &mut rng,
        ),
        "mutau" => {
            let (_, mix) = load_mixture(cfg)?;
            let sampler = MixtureSampler {
                base: &base,
                proj: Projection::FreeGroup,
                mix: &mix,
                horizon_cap: cfg.get_u64("horizon_cap", 1_000_000)?,
            };
            run_walk(
                &sampler,
                n_steps,
                &lampwalk::group::FreeWord::identity(),
                &mut rng,
            )
        }
        other => return Err(CliError::Other(format!("unknown source {other:?}"))),
    };
    let mut csv = Csv::new(["t", "word_len", "pos", "lamps_on"]);
    for (t, w) in traj.partial_products.iter().enumerate() {
        let e = &traj.projected[t];
        csv.push_row([
            (t + 1).to_string(),
            w.len().to_string(),
            e.pos().to_string(),
            e.lamps().len().to_string(),
        ]);
    }
    csv.write_to(&out.join("walk.csv"))?;
    report
        .metrics
        .insert("final_word_len".into(), traj.partial_products.last().unwrap().len() as f64);
    report.verdicts.push(Verdict {
        name: "walk_ran".into(),
        pass: true,
        detail: format!("{n_steps} steps simulated"),
    });
    Ok(report)
}

fn cmd_hitting(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("hitting", seed);
    let base = lazy_srw_f2();
    let depth = cfg.get_u64("depth", 3)? as usize;
    let paths = cfg.get_u64("paths", 100_000)?;
    let significance = cfg.get_f64("significance", 0.01)?;
    let (_, mix) = load_mixture(cfg)?;

    let mu_hist = collect_hitting_histogram(
        &BaseSampler(&base),
        depth,
        paths,
        cfg.get_u64("mu_max_steps", 4_000)?,
        cfg.get_u64("mu_margin", 60)?,
        seed,
        "hitting-mu",
    );
    let sampler = MixtureSampler {
        base: &base,
        proj: Projection::FreeGroup,
        mix: &mix,
        horizon_cap: cfg.get_u64("horizon_cap", 1_000_000)?,
    };
    let mt_hist = collect_hitting_histogram(
        &sampler,
        depth,
        paths,
        cfg.get_u64("mutau_max_steps", 256)?,
        cfg.get_u64("mutau_margin", 24)?,
        seed.wrapping_add(1),
        "hitting-mutau",
    );
    let cmp = compare_hitting(&mu_hist, &mt_hist, significance)
        .map_err(|e| CliError::Other(format!("{e}")))?;

    let mut csv = Csv::new(["cylinder", "count_mu", "count_mutau"]);
    for i in 0..mu_hist.counts.len() {
        let key: String = lampwalk::walks::cylinder_key(depth, i)
            .iter()
            .map(|l| l.to_char())
            .collect();
        csv.push_row([
            key,
            mu_hist.counts[i].to_string(),
            mt_hist.counts[i].to_string(),
        ]);
    }
    csv.write_to(&out.join("hitting.csv"))?;

    report.metrics.insert("tv_distance".into(), cmp.tv_distance);
    report
        .metrics
        .insert("chi2_p_value".into(), cmp.chi_square.p_value);
    report
        .censoring
        .insert("mu_unresolved".into(), mu_hist.unresolved_fraction());
    report
        .censoring
        .insert("mutau_unresolved".into(), mt_hist.unresolved_fraction());
    report.verdicts.push(Verdict {
        name: "hitting_measures_agree".into(),
        pass: cmp.pass,
        detail: format!(
            "chi2 p = {:.4} at significance {significance}, tv = {:.4}",
            cmp.chi_square.p_value, cmp.tv_distance
        ),
    });

    let drift = cfg.get_f64("drift", 0.0)?;
    if drift > 0.0 {
        let drifted = drifted_srw_f2(drift);
        let dr_hist = collect_hitting_histogram(
            &BaseSampler(&drifted),
            depth,
            paths,
            cfg.get_u64("mu_max_steps", 4_000)?,
            cfg.get_u64("mu_margin", 60)?,
            seed.wrapping_add(2),
            "hitting-drift",
        );
        let cmp2 = compare_hitting(&mu_hist, &dr_hist, significance)
            .map_err(|e| CliError::Other(format!("{e}")))?;
        report
            .metrics
            .insert("drift_chi2_p_value".into(), cmp2.chi_square.p_value);
        report.verdicts.push(Verdict {
            name: "drift_control_detected".into(),
            pass: !cmp2.pass,
            detail: format!("drifted sampler rejected with p = {:.2e}", cmp2.chi_square.p_value),
        });
    }
    Ok(report)
}

fn cmd_lamp_stability(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("lamp-stability", seed);
    let base = lazy_srw_f2();
    let (_, mix) = load_mixture(cfg)?;
    let n_steps = cfg.get_u64("n_steps", 1_024)?;
    let window = cfg.get_i64("window", 0)?;
    let paths = cfg.get_u64("paths", 20_000)?;
    let cap = cfg.get_u64("horizon_cap", 1_000_000)?;
    let mut checkpoints: Vec<u64> = (0..8).map(|i| i * n_steps / 8).collect();
    checkpoints.push(n_steps.saturating_sub(16));
    checkpoints.push(n_steps.saturating_sub(8));
    checkpoints.push(n_steps);
    checkpoints.dedup();

    let rep = lamp_stability(
        &base,
        Projection::FreeGroup,
        &StabilityDriver::MuTau(&mix, cap),
        n_steps,
        window,
        &checkpoints,
        paths,
        seed,
    );
    let mut csv = Csv::new(["checkpoint", "frequency"]);
    for (c, f) in rep.checkpoints.iter().zip(&rep.frequencies) {
        csv.push_row([c.to_string(), fmt_f64(*f)]);
    }
    csv.write_to(&out.join("stability_mutau.csv"))?;

    // final non-vacuous checkpoint: n - 8
    let gate_idx = rep.checkpoints.len() - 2;
    let gate = rep.frequencies[gate_idx];
    report.metrics.insert("final_checkpoint_freq".into(), gate);
    report
        .metrics
        .insert("mean_base_steps".into(), rep.mean_base_steps);
    report
        .censoring
        .insert("truncated_increments".into(), rep.truncated_fraction);
    let threshold = cfg.get_f64("stability_threshold", 0.95)?;
    report.verdicts.push(Verdict {
        name: "mutau_stabilizes".into(),
        pass: gate >= threshold,
        detail: format!(
            "frequency {gate:.4} at checkpoint {} >= {threshold}",
            rep.checkpoints[gate_idx]
        ),
    });
    // exact monotonicity of the curve
    let monotone = rep.frequencies.windows(2).all(|w| w[0] <= w[1] + 1e-15);
    report.verdicts.push(Verdict {
        name: "stability_monotone".into(),
        pass: monotone,
        detail: "frequencies non-decreasing in the checkpoint".into(),
    });

    // base-walk control at a comparable base-step count
    let control_steps = cfg.get_u64("control_steps", rep.mean_base_steps.round() as u64)?;
    let control_cps: Vec<u64> = vec![
        0,
        control_steps / 4,
        control_steps / 2,
        3 * control_steps / 4,
        control_steps,
    ];
    let control = lamp_stability(
        &base,
        Projection::FreeGroup,
        &StabilityDriver::Base,
        control_steps,
        window,
        &control_cps,
        paths.min(5_000),
        seed.wrapping_add(1),
    );
    let mut csv2 = Csv::new(["checkpoint", "frequency"]);
    for (c, f) in control.checkpoints.iter().zip(&control.frequencies) {
        csv2.push_row([c.to_string(), fmt_f64(*f)]);
    }
    csv2.write_to(&out.join("stability_control.csv"))?;
    let mid = control.frequencies[2];
    report.metrics.insert("control_midpoint_freq".into(), mid);
    report.verdicts.push(Verdict {
        name: "base_walk_does_not_stabilize".into(),
        pass: mid <= 0.9,
        detail: format!("plain-walk frequency {mid:.4} at midpoint <= 0.9"),
    });

    // limit-lamp functional dichotomy
    let params = resolve_params(cfg)?;
    let f_paths = cfg.get_u64("functional_paths", 100_000)?;
    let f0 = estimate_limit_functional(
        &base,
        Projection::FreeGroup,
        &mix,
        &LampElem::identity(),
        0,
        f_paths,
        &params,
        seed.wrapping_add(2),
        "functional-empty",
    );
    let f1 = estimate_limit_functional(
        &base,
        Projection::FreeGroup,
        &mix,
        &LampElem::new(vec![0], 0),
        0,
        f_paths,
        &params,
        seed.wrapping_add(3),
        "functional-lamp0",
    );
    let gap = (f0.estimate - f1.estimate).abs();
    let sigma = (f0.stderr.powi(2) + f1.stderr.powi(2)).sqrt();
    report.metrics.insert("functional_empty".into(), f0.estimate);
    report.metrics.insert("functional_lamp0".into(), f1.estimate);
    report.metrics.insert("functional_gap".into(), gap);
    report
        .censoring
        .insert("functional_censored".into(), f0.censored_fraction.max(f1.censored_fraction));
    report.verdicts.push(Verdict {
        name: "limit_functional_nonconstant".into(),
        pass: gap > 6.0 * sigma,
        detail: format!("|f(empty) - f(lamp0)| = {gap:.4} > 6 sigma = {:.4}", 6.0 * sigma),
    });
    // symmetry: f(empty) = 1 - f(lamp0) within 3 sigma
    let sym = (f0.estimate - (1.0 - f1.estimate)).abs();
    report.verdicts.push(Verdict {
        name: "functional_flip_symmetry".into(),
        pass: sym < 3.0 * sigma,
        detail: format!("|f(empty) - (1 - f(lamp0))| = {sym:.4} < 3 sigma"),
    });
    Ok(report)
}

fn cmd_harmonicity(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("harmonicity", seed);
    let base = lazy_srw_f2();
    let (_, mix) = load_mixture(cfg)?;
    let params = resolve_params(cfg)?;
    let points = default_test_points();
    let mu_paths = cfg.get_u64("mu_paths", 16_000)?;
    let mutau_pairs = cfg.get_u64("mutau_pairs", 12_000)?;

    let base_f = base.clone();
    let mix_f = mix.clone();
    let f_sample = move |x: &LampElem, rng: &mut rand_chacha::ChaCha8Rng| {
        limit_lamp_sample(&base_f, Projection::FreeGroup, &mix_f, x, 0, &params, rng)
    };

    let m = pi_lazy_srw_lamplighter();
    let mu_rep = test_harmonicity_exact(&f_sample, &m, &points, mu_paths, seed, "pi-mu");
    let mutau_rep = test_harmonicity_empirical_mu_tau(
        &f_sample,
        &base,
        Projection::FreeGroup,
        &mix,
        cfg.get_u64("horizon_cap", 1_000_000)?,
        &points,
        mutau_pairs,
        seed.wrapping_add(1),
    );

    let mut csv = Csv::new(["point", "measure", "delta", "stderr", "sigmas"]);
    for (rep, tag) in [(&mu_rep, "pi_mu"), (&mutau_rep, "pi_mutau")] {
        for i in 0..rep.points.len() {
            csv.push_row([
                rep.points[i].clone(),
                tag.to_string(),
                fmt_f64(rep.delta[i]),
                fmt_f64(rep.stderr[i]),
                fmt_f64(rep.delta[i].abs() / rep.stderr[i].max(1e-300)),
            ]);
        }
    }
    csv.write_to(&out.join("harmonicity.csv"))?;

    let mu_violations = mu_rep.violations(3.0);
    let mutau_violations = mutau_rep.violations(3.0);
    report
        .metrics
        .insert("mu_violations".into(), mu_violations.len() as f64);
    report
        .metrics
        .insert("mutau_violations".into(), mutau_violations.len() as f64);
    report
        .censoring
        .insert("mu_censored".into(), mu_rep.censored_fraction);
    report
        .censoring
        .insert("mutau_censored".into(), mutau_rep.censored_fraction);
    report.verdicts.push(Verdict {
        name: "mutau_mean_value_holds".into(),
        pass: mutau_violations.is_empty(),
        detail: format!(
            "{} of {} points violate at 3 sigma",
            mutau_violations.len(),
            points.len()
        ),
    });
    report.verdicts.push(Verdict {
        name: "mu_mean_value_fails_somewhere".into(),
        pass: !mu_violations.is_empty(),
        detail: match mu_violations.first() {
            Some(&i) => format!(
                "point {} violates: delta {:+.4} ({:.1} sigma)",
                mu_rep.points[i],
                mu_rep.delta[i],
                mu_rep.delta[i].abs() / mu_rep.stderr[i]
            ),
            None => "no violating point found".into(),
        },
    });
    Ok(report)
}

fn cmd_entropy(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("entropy", seed);
    let m = pi_lazy_srw_lamplighter();
    let n_list = cfg.get_u64_list("n_list", "32,64,128,256,512")?;
    let paths = cfg.get_u64("paths", 200_000)?;
    let profile = avez_entropy_profile(&m, &n_list, paths, seed);
    let mut csv = Csv::new(["n", "h_plugin", "h_miller_madow", "h_over_n", "distinct"]);
    for pt in &profile {
        csv.push_row([
            pt.n.to_string(),
            fmt_f64(pt.h_plugin),
            fmt_f64(pt.h_miller_madow),
            fmt_f64(pt.h_over_n),
            pt.distinct_states.to_string(),
        ]);
    }
    csv.write_to(&out.join("entropy.csv"))?;
    report
        .metrics
        .insert("h1_exact".into(), exact_step_entropy(&m));
    let first = profile.first().unwrap();
    let last = profile.last().unwrap();
    report
        .metrics
        .insert(format!("h_over_n_{}", first.n), first.h_over_n);
    report
        .metrics
        .insert(format!("h_over_n_{}", last.n), last.h_over_n);
    report.verdicts.push(Verdict {
        name: "entropy_rate_decays".into(),
        pass: last.h_over_n < 0.5 * first.h_over_n,
        detail: format!(
            "H/n at n={} is {:.4}, less than half of {:.4} at n={} (plug-in, biased)",
            last.n, last.h_over_n, first.h_over_n, first.n
        ),
    });
    Ok(report)
}

fn cmd_switching_freq(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("switching-freq", seed);
    let base = lazy_srw_f2();
    let radius = cfg.get_u64("f_radius", 1)? as usize;
    let f = FiniteSet::ball(radius);
    let n_list = cfg.get_u64_list("n_list", "5,10,20,40")?;
    let paths = cfg.get_u64("paths", 20_000)?;
    let freqs = switching_frequency(&base, &f, &n_list, paths, seed);
    let mut csv = Csv::new(["n", "frequency", "stderr"]);
    for (n, est) in &freqs {
        csv.push_row([n.to_string(), fmt_f64(est.p_hat), fmt_f64(est.stderr)]);
    }
    csv.write_to(&out.join("switching_freq.csv"))?;
    let last = &freqs.last().unwrap().1;
    report
        .metrics
        .insert("freq_at_max_n".into(), last.p_hat);
    let threshold = cfg.get_f64("freq_threshold", 0.99)?;
    report.verdicts.push(Verdict {
        name: "switching_frequency_high".into(),
        pass: last.p_hat >= threshold,
        detail: format!(
            "frequency {:.4} at n = {} vs threshold {threshold}",
            last.p_hat,
            freqs.last().unwrap().0
        ),
    });
    Ok(report)
}

fn cmd_coset_decay(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("coset-decay", seed);
    let base = lazy_srw_f2();
    let subgroup = match cfg.get_str("subgroup", "cyclic-a").as_str() {
        "whole" => Subgroup::WholeGroup,
        "trivial" => Subgroup::Trivial,
        "cyclic-a" => Subgroup::CyclicA,
        "kernel-pi" => Subgroup::KernelPi,
        other => return Err(CliError::Other(format!("unknown subgroup {other:?}"))),
    };
    let radius = cfg.get_u64("f_radius", 0)? as usize;
    let f = FiniteSet::ball(radius);
    let n_list = cfg.get_u64_list("n_list", "20,50,100,200")?;
    let paths = cfg.get_u64("paths", 20_000)?;
    let ests = coset_decay(&base, subgroup, &f, &n_list, paths, seed);
    let mut csv = Csv::new(["n", "p_in_hf", "stderr"]);
    for (n, est) in &ests {
        csv.push_row([n.to_string(), fmt_f64(est.p_hat), fmt_f64(est.stderr)]);
    }
    csv.write_to(&out.join("coset_decay.csv"))?;
    let first = &ests.first().unwrap().1;
    let last = &ests.last().unwrap().1;
    let sep = (first.p_hat - last.p_hat)
        / (first.stderr.powi(2) + last.stderr.powi(2)).sqrt().max(1e-12);
    report.metrics.insert("decay_separation_sigma".into(), sep);
    match subgroup {
        Subgroup::WholeGroup => report.verdicts.push(Verdict {
            name: "whole_group_is_constant_one".into(),
            pass: ests.iter().all(|(_, e)| e.p_hat == 1.0),
            detail: "out-of-hypothesis control".into(),
        }),
        _ => report.verdicts.push(Verdict {
            name: "coset_mass_decays".into(),
            pass: sep > 3.0,
            detail: format!(
                "P at n={} is {:.4}, P at n={} is {:.4} ({sep:.1} sigma apart)",
                ests.first().unwrap().0,
                first.p_hat,
                ests.last().unwrap().0,
                last.p_hat
            ),
        }),
    }
    Ok(report)
}

fn cmd_switch_stop(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("switch-stop", seed);
    let base = lazy_srw_f2();
    let radius = cfg.get_u64("f_radius", 1)? as usize;
    let f = FiniteSet::ball(radius);
    let target = SwitchTarget::new(&f, cfg.get_u64("thinning_seed", seed)?, false);
    let count = cfg.get_u64("count", 500)?;
    let cap = cfg.get_u64("horizon_cap", 1_000_000)?;
    let samples = switch_hit_samples(&base, &target, count, cap, seed);
    let truncated = samples.iter().filter(|s| s.truncated).count();
    let mut csv = Csv::new(["endpoint", "steps"]);
    for s in &samples {
        csv.push_row([s.endpoint.to_string(), s.steps_used.to_string()]);
    }
    csv.write_to(&out.join("switch_stop.csv"))?;
    let support = FiniteSet::new(
        samples
            .iter()
            .filter(|s| !s.truncated)
            .map(|s| s.endpoint.clone())
            .collect(),
    );
    let certified = is_switching(&support, target.f_set()).is_ok();
    report
        .metrics
        .insert("support_size".into(), support.len() as f64);
    report
        .censoring
        .insert("truncated".into(), truncated as f64 / count as f64);
    report.verdicts.push(Verdict {
        name: "support_certified_switching".into(),
        pass: certified,
        detail: format!("{} deduplicated endpoints certified", support.len()),
    });
    report.verdicts.push(Verdict {
        name: "truncation_small".into(),
        pass: (truncated as f64 / count as f64) < 0.01,
        detail: format!("{truncated} of {count} truncated at horizon {cap}"),
    });
    Ok(report)
}

fn ladder_config(cfg: &Config, seed: u64) -> Result<(LadderConfig, u64), CliError> {
    Ok((
        LadderConfig {
            k: cfg.get_u64("levels", 2)?,
            lambda: cfg.get_u64_list("lambda", "1,64")?,
            exponents: cfg.get_u64_list("exponents", "1,2")?,
            pool_sizes: cfg.get_u64_list("pool_sizes", "4000,400")?,
            switch_seed: cfg.get_u64("thinning_seed", 0x5eed)?,
            horizon_cap: cfg.get_u64("horizon_cap", 4_000_000)?,
            expansion_budget: cfg.get_u64("expansion_budget", 4_096)? as usize,
            decompose_budget: cfg.get_u64("decompose_budget", 1_000_000)?,
        },
        seed,
    ))
}

fn cmd_ladder(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("ladder", seed);
    let base = lazy_srw_f2();
    let p = RecordMeasure::inverse_square();
    let (lcfg, seed) = ladder_config(cfg, seed)?;
    let build =
        build_ladder(&base, &p, &lcfg, seed).map_err(|e| CliError::Other(format!("{e}")))?;
    std::fs::write(out.join("ladder.txt"), build.ladder.to_text())?;
    let mut csv = Csv::new(["i", "j", "threshold", "in_sample_mass", "support_size", "pool"]);
    for r in &build.ssets.reports {
        csv.push_row([
            r.i.to_string(),
            r.j.to_string(),
            fmt_f64(r.threshold),
            fmt_f64(r.in_sample_mass),
            r.support_size.to_string(),
            r.pool_size.to_string(),
        ]);
    }
    csv.write_to(&out.join("ssets.csv"))?;
    for (n, frac) in build.sigma_filtered_fraction.iter().enumerate() {
        report
            .metrics
            .insert(format!("sigma_filtered_level_{}", n + 1), *frac);
    }
    report
        .metrics
        .insert("pool_truncated".into(), build.pool_truncated as f64);
    report.verdicts.push(Verdict {
        name: "ladder_certificates".into(),
        pass: true, // build_ladder errors out on violations
        detail: build.certificate_log.join("; "),
    });
    Ok(report)
}

fn cmd_forest(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("forest", seed);
    let base = lazy_srw_f2();
    let p = RecordMeasure::inverse_square();
    let (lcfg, seed) = ladder_config(cfg, seed)?;
    let build =
        build_ladder(&base, &p, &lcfg, seed).map_err(|e| CliError::Other(format!("{e}")))?;
    // vertex set: prefixes of mixture trajectories
    let trajectories = cfg.get_u64("trajectories", 10)?;
    let n_steps = cfg.get_u64("n_steps", 32)?;
    let mut vertices = Vec::new();
    for t in 0..trajectories {
        let mut rng = trial_rng(seed, "forest-traj", t);
        let mut w = lampwalk::group::FreeWord::identity();
        for _ in 0..n_steps {
            let i = build.mixture.draw_component(&mut rng);
            let inc = build.mixture.sample_component(i, &mut rng);
            w = w.mul(&inc);
            vertices.push(w.clone());
        }
    }
    let forest = build_forest(&vertices, &build.ladder, lcfg.decompose_budget)
        .map_err(|e| CliError::Other(format!("{e}")))?;
    std::fs::write(out.join("forest_edges.csv"), forest.edge_list())?;
    report
        .metrics
        .insert("vertices".into(), forest.vertices.len() as f64);
    report
        .metrics
        .insert("edges".into(), forest.edge_count() as f64);
    report
        .metrics
        .insert("roots".into(), forest.roots.len() as f64);
    report.verdicts.push(Verdict {
        name: "forest_acyclic_unique_roots".into(),
        // build_forest errors out on violations
        pass: forest.edge_count() + forest.roots.len() == forest.vertices.len(),
        detail: format!(
            "{} vertices, {} edges, {} roots",
            forest.vertices.len(),
            forest.edge_count(),
            forest.roots.len()
        ),
    });
    let chain = trajectory_chain_check(
        &build,
        cfg.get_u64("chain_steps", 48)?,
        cfg.get_u64("chain_trajectories", 30)?,
        seed.wrapping_add(1),
    )
    .map_err(|e| CliError::Other(format!("{e}")))?;
    report
        .metrics
        .insert("chain_vertices_ok".into(), chain.vertices_ok as f64);
    report
        .metrics
        .insert("chain_vertices_checked".into(), chain.vertices_checked as f64);
    report.verdicts.push(Verdict {
        name: "record_chain_descends".into(),
        pass: chain.vertices_ok == chain.vertices_checked
            && chain.chain_edges_ok == chain.chain_edges_checked
            && chain.epochs_verified > 0,
        detail: format!(
            "{} / {} vertices despike onto the pre-record product; {} / {} chain edges",
            chain.vertices_ok, chain.vertices_checked, chain.chain_edges_ok, chain.chain_edges_checked
        ),
    });
    Ok(report)
}

fn cmd_retention(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("retention", seed);
    let base = lazy_srw_f2();
    let p = RecordMeasure::inverse_square();
    let (lcfg, seed) = ladder_config(cfg, seed)?;
    let build =
        build_ladder(&base, &p, &lcfg, seed).map_err(|e| CliError::Other(format!("{e}")))?;
    let n_steps = cfg.get_u64("n_steps", 32)?;
    let paths = cfg.get_u64("paths", 1_500)?;
    let mut csv = Csv::new(["n", "estimate", "stderr", "censored"]);
    let mut ests = Vec::new();
    for n in 1..=lcfg.k {
        let r = subtree_retention(&build, n, n_steps, paths, seed.wrapping_add(n))
            .map_err(|e| CliError::Other(format!("{e}")))?;
        csv.push_row([
            n.to_string(),
            fmt_f64(r.estimate),
            fmt_f64(r.stderr),
            r.censored.to_string(),
        ]);
        report
            .metrics
            .insert(format!("retention_{n}"), r.estimate);
        ests.push(r);
    }
    csv.write_to(&out.join("retention.csv"))?;
    let first = &ests[0];
    let last = ests.last().unwrap();
    report.verdicts.push(Verdict {
        name: "retention_trend".into(),
        pass: last.estimate > first.estimate,
        detail: format!(
            "retention {:.3} at n={} exceeds {:.3} at n=1",
            last.estimate, last.n, first.estimate
        ),
    });
    Ok(report)
}

fn cmd_os_gap(cfg: &Config, seed: u64, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::new("os-gap", seed);
    let base = lazy_srw_f2();
    let p = RecordMeasure::inverse_square();
    let (lcfg, seed) = ladder_config(cfg, seed)?;
    let build =
        build_ladder(&base, &p, &lcfg, seed).map_err(|e| CliError::Other(format!("{e}")))?;
    let n = cfg.get_u64("component", lcfg.k)?;
    let gap = optional_stopping_gap(
        &build.mixture,
        n,
        cfg.get_u64("depth", 2)? as usize,
        cfg.get_u64("paths", 100_000)?,
        cfg.get_u64("max_steps", 256)?,
        cfg.get_u64("margin", 12)?,
        cfg.get_u64("bootstrap", 400)? as usize,
        seed.wrapping_add(7),
    );
    let mut csv = Csv::new(["quantity", "value"]);
    csv.push_row(["p_n".to_string(), fmt_f64(gap.p_n)]);
    csv.push_row(["lhs".to_string(), fmt_f64(gap.lhs)]);
    csv.push_row(["rhs".to_string(), fmt_f64(gap.rhs)]);
    csv.push_row(["gap".to_string(), fmt_f64(gap.gap)]);
    csv.push_row(["ci_lo".to_string(), fmt_f64(gap.ci_lo)]);
    csv.push_row(["ci_hi".to_string(), fmt_f64(gap.ci_hi)]);
    csv.write_to(&out.join("os_gap.csv"))?;
    report.metrics.insert("lhs".into(), gap.lhs);
    report.metrics.insert("gap".into(), gap.gap);
    report.metrics.insert("ci_lo".into(), gap.ci_lo);
    report.metrics.insert("ci_hi".into(), gap.ci_hi);
    report
        .censoring
        .insert("nu_unresolved".into(), gap.nu_unresolved);
    report.verdicts.push(Verdict {
        name: "cauchy_schwarz_floor".into(),
        pass: gap.cs_holds,
        detail: format!("lhs {:.5} >= p(n) {:.5}", gap.lhs, gap.rhs),
    });
    report.verdicts.push(Verdict {
        name: "gap_ci_excludes_zero".into(),
        pass: gap.ci_lo > 0.0,
        detail: format!("95% bootstrap CI ({:.5}, {:.5})", gap.ci_lo, gap.ci_hi),
    });
    Ok(report)
}
