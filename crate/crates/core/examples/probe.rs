//! Desk-scale tuning probe: prints the raw numbers behind the default
//! experiment configuration. Not part of the test suite.

use lampwalk::group::{LampElem, Projection};
use lampwalk::measures::*;
use lampwalk::seeding::trial_rng;
use lampwalk::stopping::*;
use lampwalk::switching::ladder::*;
use lampwalk::switching::*;
use lampwalk::walks::*;
use rayon::prelude::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("all");
    let base = lazy_srw_f2();
    let p = RecordMeasure::inverse_square();

    if which == "all" || which == "tau" {
        // (a) lamp-clear stopping costs
        for (s, r) in [(0i64, 0i64), (1, 3), (2, 6), (3, 9), (4, 12), (6, 18)] {
            let spec = StoppingSpec::LampClear { s, r };
            let runs = 4_000u64;
            let results: Vec<(u64, bool)> = (0..runs)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(1000 + s as u64, "probe-tau", t);
                    let mut st = lampwalk::group::LampState::new();
                    run_to_stop_projected(&base, Projection::FreeGroup, &spec, 2_000_000, &mut st, &mut rng)
                })
                .collect();
            let mean: f64 = results.iter().map(|(n, _)| *n as f64).sum::<f64>() / runs as f64;
            let trunc = results.iter().filter(|(_, t)| *t).count();
            let max = results.iter().map(|(n, _)| *n).max().unwrap();
            let over1e6 = results.iter().filter(|(n, _)| *n >= 1_000_000).count();
            println!(
                "tau({s},{r}): mean steps {mean:.0}, max {max}, trunc@2e6 {trunc}/{runs}, >=1e6: {over1e6}"
            );
        }
    }

    if which == "all" || which == "calib" {
        // (b) honest calibration with the desk gauge
        for phi in [2u64, 3, 4, 8] {
            let gauge = Gauge::constant(phi);
            let cfg = CalibrateConfig {
                k_max: 2,
                trials: 1024,
                random_sequences: 8,
                safety_factor: 1,
                ..CalibrateConfig::default()
            };
            match calibrate(&base, Projection::FreeGroup, &p, &gauge, &cfg, 4242) {
                Ok(c) => {
                    let l2 = c.level(2);
                    println!(
                        "calibrate phi={phi}: s2={} r2={} achieved={:.3} target={:.3}",
                        l2.s, l2.r, l2.achieved_confidence, l2.target_confidence
                    );
                }
                Err(e) => println!("calibrate phi={phi}: {e}"),
            }
        }
    }

    if which == "all" || which == "stab" {
        // (c) stabilization curve for candidate mixtures
        let calib = Calibration {
            levels: vec![
                CalibrationLevel { k: 1, s: 0, r: 0, phi: 2, achieved_confidence: 1.0, target_confidence: 0.5 },
            ],
            seed: 0,
            confidence: 0.95,
            gauge_desc: "probe".into(),
        };
        let mix = MixtureSpec::lamp_clear_family(p.clone(), &calib);
        for n in [1024u64] {
            let cps: Vec<u64> = (0..8).map(|i| i * n / 8).chain([n - 16, n - 8, n]).collect();
            let rep = lamp_stability(
                &base,
                Projection::FreeGroup,
                &StabilityDriver::MuTau(&mix, 1_000_000),
                n,
                0,
                &cps,
                20_000,
                77,
            );
            println!(
                "stability n={n}: mean_base={:.0} freqs={:?}",
                rep.mean_base_steps,
                rep.frequencies.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
        }
        // control at comparable base steps
        let rep = lamp_stability(
            &base,
            Projection::FreeGroup,
            &StabilityDriver::Base,
            10_000,
            0,
            &[0, 2_500, 5_000, 7_500, 9_999],
            4_000,
            78,
        );
        println!("control base 1e4 freqs={:?}", rep.frequencies);
    }

    if which == "all" || which == "func" {
        // (d) limit functional gap
        let calib = Calibration {
            levels: vec![
                CalibrationLevel { k: 1, s: 0, r: 0, phi: 2, achieved_confidence: 1.0, target_confidence: 0.5 },
            ],
            seed: 0,
            confidence: 0.95,
            gauge_desc: "probe".into(),
        };
        let mix = MixtureSpec::lamp_clear_family(p.clone(), &calib);
        let params = ResolveParams { margin: 32, max_steps: 320, horizon_cap: 1_000_000 };
        let f0 = estimate_limit_functional(
            &base, Projection::FreeGroup, &mix, &LampElem::identity(), 0, 20_000, &params, 101, "probe-f0",
        );
        let f1 = estimate_limit_functional(
            &base, Projection::FreeGroup, &mix, &LampElem::new(vec![0], 0), 0, 20_000, &params, 102, "probe-f1",
        );
        println!(
            "f(empty)={:.4}+-{:.4} cens={:.4}; f(lamp0)={:.4}+-{:.4}; gap={:.4}",
            f0.estimate, f0.stderr, f0.censored_fraction, f1.estimate, f1.stderr,
            (f0.estimate - f1.estimate).abs()
        );

        // (e) harmonicity defects
        let params2 = params;
        let base_f = base.clone();
        let f_sample = move |x: &LampElem, rng: &mut rand_chacha::ChaCha8Rng| {
            limit_lamp_sample(&base_f, Projection::FreeGroup, &mix, x, 0, &params2, rng)
        };
        let m = pi_lazy_srw_lamplighter();
        let pts = default_test_points();
        let rep = test_harmonicity_exact(&f_sample, &m, &pts[8..16], 8_000, 103, "probe-mu");
        for i in 0..8 {
            println!(
                "mu defect {}: {:+.4} +- {:.4}  ({:.1} sigma)",
                rep.points[i], rep.delta[i], rep.stderr[i],
                rep.delta[i].abs() / rep.stderr[i]
            );
        }
        let base2 = lazy_srw_f2();
        let calib2 = calib.clone();
        let mix2 = MixtureSpec::lamp_clear_family(p.clone(), &calib2);
        let params3 = ResolveParams::default();
        let f_sample2 = move |x: &LampElem, rng: &mut rand_chacha::ChaCha8Rng| {
            limit_lamp_sample(&base2, Projection::FreeGroup, &mix2, x, 0, &params3, rng)
        };
        let base3 = lazy_srw_f2();
        let mix3 = MixtureSpec::lamp_clear_family(p.clone(), &calib2);
        let rep2 = test_harmonicity_empirical_mu_tau(
            &f_sample2, &base3, Projection::FreeGroup, &mix3, 1_000_000, &pts[8..16], 16_000, 104,
        );
        for i in 0..8 {
            println!(
                "mutau defect {}: {:+.4} +- {:.4}  ({:.1} sigma)",
                rep2.points[i], rep2.delta[i], rep2.stderr[i],
                rep2.delta[i].abs() / rep2.stderr[i].max(1e-12)
            );
        }
    }

    if which == "all" || which == "records" {
        // (f) record diagnostics
        for k0 in [1usize, 5, 10] {
            let est = non_simple_frequency(&p, k0, 4_000, 2_048, 55);
            println!("non-simple freq k0={k0}: {:.4} +- {:.4} (n={})", est.p_hat, est.stderr, est.trials);
        }
        let s4 = p.diag_square_partial_sum(10_000);
        let s5 = p.diag_square_partial_sum(100_000);
        println!("diag^2 partial sums: 1e4 {:.8} 1e5 {:.8} diff {:.2e}", s4, s5, s5 - s4);
        // (g) gauge at acceptance scale
        let g = fit_gauge(&p, 10_000, 512, 0.999, true, 56).unwrap();
        println!("gauge table head: {:?} len {}", &g.table[..g.table.len().min(12)], g.table.len());
        let viol = gauge_violation_rate(&p, &g, 10_000, 512, 57);
        println!("gauge violation rate fresh seed: {:.5} (target <= 0.002)", viol.p_hat);
    }

    if which == "all" || which == "switch" {
        // (h) switching frequency + switch-stop cost
        let f = FiniteSet::ball(1);
        let freqs = switching_frequency(&base, &f, &[5, 10, 20, 40], 10_000, 58);
        for (n, est) in freqs {
            println!("switching freq n={n}: {:.4}", est.p_hat);
        }
        let target = SwitchTarget::new(&f, 59, false);
        let samples = switch_hit_samples(&base, &target, 500, 1_000_000, 60);
        let steps: Vec<f64> = samples.iter().map(|s| s.steps_used as f64).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        let trunc = samples.iter().filter(|s| s.truncated).count();
        println!("switch-hit ball1: mean steps {:.0}, trunc {}/500", mean, trunc);
        let f2 = FiniteSet::ball(2);
        let target2 = SwitchTarget::new(&f2, 61, false);
        let t0 = std::time::Instant::now();
        let samples2 = switch_hit_samples(&base, &target2, 40, 4_000_000, 62);
        let steps2: Vec<f64> = samples2.iter().map(|s| s.steps_used as f64).collect();
        let mean2 = steps2.iter().sum::<f64>() / steps2.len() as f64;
        let lens: Vec<usize> = samples2.iter().map(|s| s.endpoint.len()).collect();
        println!(
            "switch-hit ball2: mean steps {:.0}, max {:.0}, word len min {} mean {:.0}, trunc {}/40, took {:?}",
            mean2,
            steps2.iter().cloned().fold(0.0, f64::max),
            lens.iter().min().unwrap(),
            lens.iter().sum::<usize>() as f64 / lens.len() as f64,
            samples2.iter().filter(|s| s.truncated).count(),
            t0.elapsed()
        );
    }

    if which == "all" || which == "hitting" {
        // (i) hitting comparison
        let calib = Calibration {
            levels: vec![
                CalibrationLevel { k: 1, s: 0, r: 0, phi: 2, achieved_confidence: 1.0, target_confidence: 0.5 },
            ],
            seed: 0,
            confidence: 0.95,
            gauge_desc: "probe".into(),
        };
        let mix = MixtureSpec::lamp_clear_family(p.clone(), &calib);
        let t0 = std::time::Instant::now();
        let mu_hist = collect_hitting_histogram(&BaseSampler(&base), 3, 40_000, 4_000, 60, 63, "probe-mu-hist");
        let mt = MixtureSampler { base: &base, proj: Projection::FreeGroup, mix: &mix, horizon_cap: 1_000_000 };
        let mt_hist = collect_hitting_histogram(&mt, 3, 40_000, 256, 24, 64, "probe-mt-hist");
        let cmp = compare_hitting(&mu_hist, &mt_hist, 0.01).unwrap();
        println!(
            "hitting: tv={:.4} chi2={:.1} p={:.3} pass={} unresolved=({:.4},{:.4}) took {:?}",
            cmp.tv_distance, cmp.chi_square.statistic, cmp.chi_square.p_value, cmp.pass,
            mu_hist.unresolved_fraction(), mt_hist.unresolved_fraction(), t0.elapsed()
        );
        let drift = drifted_srw_f2(0.05);
        let dr_hist = collect_hitting_histogram(&BaseSampler(&drift), 3, 40_000, 4_000, 60, 65, "probe-dr-hist");
        let cmp2 = compare_hitting(&mu_hist, &dr_hist, 0.01).unwrap();
        println!("drift control: tv={:.4} p={:.2e} pass={}", cmp2.tv_distance, cmp2.chi_square.p_value, cmp2.pass);
    }

    if which == "all" || which == "ladder" {
        // (j)+(k) ladder experiments
        let t0 = std::time::Instant::now();
        let cfg = LadderConfig::default();
        let build = build_ladder(&base, &p, &cfg, 4242).unwrap();
        println!("ladder build took {:?}", t0.elapsed());
        println!("sigma sizes: {:?}", build.ladder.sigma.iter().map(|s| s.len()).collect::<Vec<_>>());
        println!("filtered: {:?}, pool trunc {}", build.sigma_filtered_fraction, build.pool_truncated);
        for line in &build.certificate_log {
            println!("  cert: {line}");
        }
        let t1 = std::time::Instant::now();
        let chain = trajectory_chain_check(&build, 48, 30, 71).unwrap();
        println!("chain: {:?} took {:?}", chain, t1.elapsed());
        let t2 = std::time::Instant::now();
        for n in [1u64, 2] {
            match subtree_retention(&build, n, 32, 300, 72) {
                Ok(r) => println!(
                    "retention n={}: {:.3} +- {:.3} (censored {}) took {:?}",
                    n, r.estimate, r.stderr, r.censored, t2.elapsed()
                ),
                Err(e) => println!("retention n={n}: {e}"),
            }
        }
        let t3 = std::time::Instant::now();
        let gap = optional_stopping_gap(&build.mixture, 2, 2, 40_000, 256, 12, 400, 73);
        println!(
            "os-gap n=2: lhs={:.4} rhs={:.4} gap={:.4} ci=({:.4},{:.4}) cs={} unresolved=({:.4},{:.4}) took {:?}",
            gap.lhs, gap.rhs, gap.gap, gap.ci_lo, gap.ci_hi, gap.cs_holds,
            gap.nu_unresolved, gap.nu_n_unresolved, t3.elapsed()
        );
        // control: single-component mixture
        let control = EmpiricalMixture {
            p: p.clone(),
            components: vec![PoolComponent::FreshBase],
            base: base.clone(),
        };
        let gap0 = optional_stopping_gap(&control, 0, 2, 20_000, 4_000, 60, 200, 74);
        println!("os-gap control: gap={:.6} identical={}", gap0.gap, gap0.identical_processes);
    }
}
