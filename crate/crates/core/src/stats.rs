//! Small statistical toolkit shared by the estimators: binomial confidence
//! intervals, a two-sample chi-square test on histograms, bootstrap percentile
//! intervals, and plug-in entropy with the Miller-Madow correction.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Mean and standard error of a Bernoulli estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub stderr: f64,
}

pub fn binomial_estimate(successes: u64, trials: u64) -> BinomialEstimate {
    assert!(trials > 0, "binomial estimate needs at least one trial");
    let p = successes as f64 / trials as f64;
    BinomialEstimate {
        successes,
        trials,
        p_hat: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
    }
}

/// Mean with standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    assert!(!samples.is_empty());
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Result of a two-sample chi-square homogeneity test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pooled_cells: usize,
}

/// Two-sample chi-square test that the two count vectors come from the same
/// distribution. Cells whose pooled expected count is below `min_expected`
/// are merged into one residual cell first.
pub fn chi_square_two_sample(
    counts_a: &[u64],
    counts_b: &[u64],
    min_expected: f64,
) -> ChiSquareResult {
    assert_eq!(counts_a.len(), counts_b.len(), "histogram shape mismatch");
    let n_a: u64 = counts_a.iter().sum();
    let n_b: u64 = counts_b.iter().sum();
    assert!(n_a > 0 && n_b > 0, "empty histogram");
    let total = (n_a + n_b) as f64;

    // Pool sparse cells.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0f64, 0.0f64);
    let mut pooled = 0usize;
    for (&a, &b) in counts_a.iter().zip(counts_b) {
        let pooled_total = (a + b) as f64;
        let expected_a = pooled_total * n_a as f64 / total;
        let expected_b = pooled_total * n_b as f64 / total;
        if expected_a < min_expected || expected_b < min_expected {
            rest.0 += a as f64;
            rest.1 += b as f64;
            pooled += 1;
        } else {
            cells.push((a as f64, b as f64));
        }
    }
    if rest.0 + rest.1 > 0.0 {
        cells.push(rest);
    }

    let mut statistic = 0.0;
    for &(a, b) in &cells {
        let pooled_total = a + b;
        let ea = pooled_total * n_a as f64 / total;
        let eb = pooled_total * n_b as f64 / total;
        if ea > 0.0 {
            statistic += (a - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            statistic += (b - eb).powi(2) / eb;
        }
    }

    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(statistic);
    ChiSquareResult {
        statistic,
        dof,
        p_value,
        pooled_cells: pooled,
    }
}

/// Total-variation distance between two empirical histograms.
pub fn tv_distance(counts_a: &[u64], counts_b: &[u64]) -> f64 {
    assert_eq!(counts_a.len(), counts_b.len());
    let n_a: u64 = counts_a.iter().sum();
    let n_b: u64 = counts_b.iter().sum();
    assert!(n_a > 0 && n_b > 0);
    0.5 * counts_a
        .iter()
        .zip(counts_b)
        .map(|(&a, &b)| (a as f64 / n_a as f64 - b as f64 / n_b as f64).abs())
        .sum::<f64>()
}

/// Percentile bootstrap confidence interval for a statistic of i.i.d. samples.
///
/// Resampling is driven by a caller-supplied uniform index source so the
/// result is deterministic given a seeded generator.
pub fn bootstrap_ci<F>(
    samples: &[f64],
    statistic: F,
    resamples: usize,
    level: f64,
    rng: &mut impl rand::Rng,
) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!samples.is_empty());
    let mut stats = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; samples.len()];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = samples[rng.gen_range(0..samples.len())];
        }
        stats.push(statistic(&buf));
    }
    stats.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let lo_idx = ((1.0 - level) / 2.0 * resamples as f64).floor() as usize;
    let hi_idx = ((1.0 - (1.0 - level) / 2.0) * resamples as f64).ceil() as usize;
    (
        stats[lo_idx.min(stats.len() - 1)],
        stats[hi_idx.min(stats.len() - 1)],
    )
}

/// Plug-in Shannon entropy (nats) of a count histogram.
pub fn entropy_plugin(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    assert!(n > 0);
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Miller-Madow bias correction term `(k - 1) / (2n)` for a plug-in entropy
/// estimate with `k` occupied cells and `n` samples.
pub fn miller_madow_correction(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let k = counts.iter().filter(|&&c| c > 0).count();
    (k.saturating_sub(1)) as f64 / (2.0 * n as f64)
}

/// Empirical quantile (nearest-rank, conservative upward).
pub fn quantile_upper(sorted: &[u64], q: f64) -> u64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_identical_histograms() {
        let a = [100u64, 200, 300];
        let r = chi_square_two_sample(&a, &a, 5.0);
        assert!(r.statistic.abs() < 1e-12);
        assert!(r.p_value > 0.999);
        assert_eq!(tv_distance(&a, &a), 0.0);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a = [1000u64, 1000, 1000];
        let b = [1500u64, 1000, 500];
        let r = chi_square_two_sample(&a, &b, 5.0);
        assert!(r.p_value < 0.001, "p = {}", r.p_value);
    }

    #[test]
    fn chi_square_null_calibration() {
        // Under the null, p-values should not be systematically tiny.
        let mut rng = crate::seeding::trial_rng(5, "chi2-null", 0);
        let mut rejections = 0;
        for _ in 0..200 {
            let mut a = [0u64; 8];
            let mut b = [0u64; 8];
            for _ in 0..2000 {
                a[rand::Rng::gen_range(&mut rng, 0..8)] += 1;
                b[rand::Rng::gen_range(&mut rng, 0..8)] += 1;
            }
            if chi_square_two_sample(&a, &b, 5.0).p_value < 0.01 {
                rejections += 1;
            }
        }
        assert!(rejections <= 10, "rejections = {rejections}");
    }

    #[test]
    fn entropy_of_uniform() {
        let counts = [25u64, 25, 25, 25];
        assert!((entropy_plugin(&counts) - (4.0f64).ln()).abs() < 1e-12);
        let point = [100u64, 0, 0];
        assert_eq!(entropy_plugin(&point), 0.0);
    }

    #[test]
    fn quantile_nearest_rank() {
        let xs = [1u64, 2, 3, 4, 5, 6, 7, 8, 9, 10];
        assert_eq!(quantile_upper(&xs, 0.5), 5);
        assert_eq!(quantile_upper(&xs, 0.999), 10);
        assert_eq!(quantile_upper(&xs, 0.0), 1);
    }

    #[test]
    fn bootstrap_ci_covers_mean() {
        let samples: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let mut rng = crate::seeding::trial_rng(5, "boot", 0);
        let (lo, hi) = bootstrap_ci(&samples, |xs| xs.iter().sum::<f64>() / xs.len() as f64, 500, 0.95, &mut rng);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!(lo <= mean && mean <= hi);
        assert!(hi - lo < 0.8);
    }
}
