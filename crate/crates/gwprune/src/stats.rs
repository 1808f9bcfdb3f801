//! Monte Carlo comparators used by every verification suite: empirical
//! distributions, total variation, chi-square and Kolmogorov-Smirnov
//! goodness-of-fit, and martingale-increment reports.
//!
//! Thresholds are pinned at α ≈ 0.001 so a battery of dozens of checks keeps
//! a small family-wise false-failure probability.

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::prune::{graft_forward, sample_gw, SampleBudget};
use crate::rng::parallel_replicas;
use std::collections::BTreeMap;

/// 99.9th percentile of the standard normal, for the comparator thresholds.
const Z_999: f64 = 3.090_232_306_167_813;

/// Counted observations keyed by strings (serialized trees, class labels).
#[derive(Debug, Clone, Default)]
pub struct EmpiricalLaw {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl EmpiricalLaw {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, key: impl Into<String>) {
        *self.counts.entry(key.into()).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: EmpiricalLaw) {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn from_keys(keys: impl IntoIterator<Item = String>) -> Self {
        let mut law = EmpiricalLaw::new();
        for k in keys {
            law.observe(k);
        }
        law
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// Normalized frequencies.
    pub fn probabilities(&self) -> Result<BTreeMap<String, f64>> {
        if self.total == 0 {
            return Err(Error::domain("empirical law has no observations"));
        }
        Ok(self
            .counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.total as f64))
            .collect())
    }
}

/// Outcome of one statistical check; `pass` iff `statistic <= threshold`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: u64,
    pub notes: String,
}

impl TestReport {
    pub fn new(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        n: u64,
        notes: impl Into<String>,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            n,
            notes: notes.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Total variation distance `½ Σ |a(x) - b(x)|` over the union support.
pub fn total_variation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, &pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            sum += pb.abs();
        }
    }
    0.5 * sum
}

/// Chi-square goodness of fit of counted observations against exact cell
/// probabilities. Cells with expected count below `min_expected` are pooled
/// together with the residual mass `1 - Σ exact`. The threshold is the 99.9th
/// percentile of the chi-square law with `cells - 1` degrees of freedom,
/// computed with the Wilson-Hilferty approximation.
pub fn chi_square_statistic(
    empirical: &EmpiricalLaw,
    exact: &BTreeMap<String, f64>,
    min_expected: f64,
) -> Result<TestReport> {
    let n = empirical.total();
    if n == 0 {
        return Err(Error::domain("chi-square needs observations"));
    }
    let nf = n as f64;
    let exact_sum: f64 = exact.values().sum();
    if exact_sum > 1.0 + 1e-9 || exact.values().any(|&p| p < 0.0) {
        return Err(Error::domain(
            "exact cell probabilities must form a sub-distribution",
        ));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut pooled_obs = 0.0;
    let mut pooled_exp = nf * (1.0 - exact_sum).max(0.0);
    for (key, &p) in exact {
        let expected = nf * p;
        let observed = empirical.count(key) as f64;
        if expected >= min_expected {
            cells.push((observed, expected));
        } else {
            pooled_obs += observed;
            pooled_exp += expected;
        }
    }
    // Observations outside the exact support fall into the pooled cell.
    let covered: f64 = exact.keys().map(|k| empirical.count(k) as f64).sum();
    pooled_obs += nf - covered;
    let mut notes = format!("{} cells", cells.len());
    if pooled_exp > 0.0 || pooled_obs > 0.0 {
        if pooled_exp <= 0.0 {
            // Mass observed where none is possible.
            let report = TestReport::new(
                "chi-square",
                f64::INFINITY,
                0.0,
                n,
                "observations outside the exact support with zero residual mass",
            );
            return Ok(report);
        }
        cells.push((pooled_obs, pooled_exp));
        notes = format!(
            "{} cells (last pooled, expected {pooled_exp:.2})",
            cells.len()
        );
    }
    if cells.len() < 2 {
        return Err(Error::domain(
            "chi-square degenerates with fewer than 2 cells",
        ));
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let df = (cells.len() - 1) as f64;
    let threshold = chi_square_quantile_999(df);
    Ok(TestReport::new(
        "chi-square",
        statistic,
        threshold,
        n,
        format!("{notes}, df {df}"),
    ))
}

/// Wilson-Hilferty approximation of the 99.9th chi-square percentile.
fn chi_square_quantile_999(df: f64) -> f64 {
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + Z_999 * a.sqrt()).powi(3)
}

/// Kolmogorov-Smirnov distance between samples and a continuous CDF, with
/// the asymptotic α ≈ 0.001 threshold `1.95 / sqrt(n)`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestReport> {
    if samples.len() < 100 {
        return Err(Error::domain("KS needs at least 100 samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples are ordered"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let threshold = 1.95 / n.sqrt();
    Ok(TestReport::new("ks", d, threshold, sorted.len() as u64, ""))
}

/// Checks the martingale property of `M(u, G(u))` along a coupled grafting
/// path over `u_grid`: for each consecutive pair the mean increment must
/// vanish, so the report's statistic is the largest `|mean| / SE` across
/// pairs, with threshold 4.
pub fn martingale_report(
    d: &OffspringDistribution,
    u_grid: &[f64],
    n: usize,
    seed: u64,
    threads: usize,
) -> Result<TestReport> {
    if u_grid.len() < 2 {
        return Err(Error::domain(
            "martingale check needs at least two grid points",
        ));
    }
    let horizon = d.critical_horizon();
    if u_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("martingale grid must be increasing"));
    }
    if u_grid.iter().any(|&u| !(0.0..horizon).contains(&u)) {
        return Err(Error::domain(format!(
            "martingale grid must lie in [0, {horizon})"
        )));
    }
    let pairs = u_grid.len() - 1;
    let increments: Vec<Vec<f64>> = parallel_replicas(seed, n, threads, |_, rng| {
        let mut deltas = Vec::with_capacity(pairs);
        let mut state = sample_gw(d, u_grid[0], SampleBudget::default(), rng)
            .expect("sub-critical sampling cannot fail")
            .into_tree();
        let mut m_prev = state
            .leaf_martingale(d, u_grid[0])
            .expect("grid below horizon");
        for w in u_grid.windows(2) {
            state = graft_forward(&state, d, w[0], w[1], SampleBudget::default(), rng)
                .expect("sub-critical grafting cannot fail")
                .into_tree();
            let m = state.leaf_martingale(d, w[1]).expect("grid below horizon");
            deltas.push(m - m_prev);
            m_prev = m;
        }
        deltas
    });
    let mut worst: f64 = 0.0;
    let mut notes = String::new();
    for pair in 0..pairs {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for row in &increments {
            sum += row[pair];
            sumsq += row[pair] * row[pair];
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        let ratio = if se > 0.0 {
            (mean / se).abs()
        } else if mean.abs() > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
        if pair > 0 {
            notes.push_str(", ");
        }
        notes.push_str(&format!(
            "E[ΔM] on ({}, {}) = {mean:.5} (SE {se:.5})",
            u_grid[pair],
            u_grid[pair + 1]
        ));
    }
    Ok(TestReport::new("martingale", worst, 4.0, n as u64, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_law_table;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn binary() -> OffspringDistribution {
        OffspringDistribution::finite(vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn total_variation_values() {
        let a = map(&[("a", 0.75), ("b", 0.25)]);
        assert_eq!(total_variation(&a, &a), 0.0);
        let b = map(&[("a", 0.5), ("b", 0.5)]);
        assert!((total_variation(&a, &b) - 0.25).abs() < 1e-15);
        let disjoint = map(&[("c", 1.0)]);
        assert!((total_variation(&a, &disjoint) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chi_square_calibration() {
        // Sampling from the exact law itself must pass.
        let exact = map(&[("a", 0.4), ("b", 0.3), ("c", 0.2), ("d", 0.1)]);
        let mut rng = rng_from_seed(42);
        let mut emp = EmpiricalLaw::new();
        for _ in 0..100_000 {
            let x: f64 = rng.random();
            let key = if x < 0.4 {
                "a"
            } else if x < 0.7 {
                "b"
            } else if x < 0.9 {
                "c"
            } else {
                "d"
            };
            emp.observe(key);
        }
        let report = chi_square_statistic(&emp, &exact, 5.0).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn chi_square_detects_wrong_law() {
        // Empirical trees from G(0.5) tested against the exact table at 0.6.
        let d = binary();
        let wrong = exact_law_table(&d, 0.6, 7).unwrap();
        let mut rng = rng_from_seed(43);
        let mut emp = EmpiricalLaw::new();
        for _ in 0..100_000 {
            let t = sample_gw(&d, 0.5, SampleBudget::default(), &mut rng)
                .unwrap()
                .into_tree();
            let key = if t.num_nodes() <= 7 {
                t.serialize()
            } else {
                "OTHER".to_string()
            };
            emp.observe(key);
        }
        let exact: BTreeMap<String, f64> = wrong
            .entries()
            .iter()
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        let report = chi_square_statistic(&emp, &exact, 5.0).unwrap();
        assert!(!report.pass, "{report:?}");
    }

    #[test]
    fn chi_square_degenerates_on_single_cell() {
        let mut emp = EmpiricalLaw::new();
        for _ in 0..1000 {
            emp.observe("a");
        }
        let exact = map(&[("a", 1.0)]);
        assert!(chi_square_statistic(&emp, &exact, 5.0).is_err());
    }

    #[test]
    fn ks_self_consistency() {
        // Inverse-CDF samples from the CDF itself.
        let mut rng = rng_from_seed(44);
        let cdf = |x: f64| x.clamp(0.0, 1.0).powi(2);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>().sqrt()).collect();
        let report = ks_statistic(&samples, cdf).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.statistic < 0.01);
    }

    #[test]
    fn ks_rejects_constant_samples() {
        let samples = vec![0.5; 1000];
        let report = ks_statistic(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(report.statistic >= 0.5);
        assert!(!report.pass);
    }

    #[test]
    fn ks_needs_enough_samples() {
        assert!(ks_statistic(&[0.1; 10], |x| x).is_err());
    }

    #[test]
    fn martingale_passes_on_binary_grid() {
        let report = martingale_report(&binary(), &[0.2, 0.5, 0.8], 100_000, 7, 4).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn martingale_rejects_bad_grids() {
        let d = binary();
        assert!(martingale_report(&d, &[0.5], 100, 1, 1).is_err());
        assert!(martingale_report(&d, &[0.5, 0.2], 100, 1, 1).is_err());
        assert!(martingale_report(&d, &[0.5, 1.0], 100, 1, 1).is_err());
    }

    #[test]
    fn martingale_mean_is_one() {
        // E[M(u, G(u))] = 1 at fixed u.
        let d = binary();
        let u = 0.6;
        let mut rng = rng_from_seed(45);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let t = sample_gw(&d, u, SampleBudget::default(), &mut rng)
                .unwrap()
                .into_tree();
            let m = t.leaf_martingale(&d, u).unwrap();
            sum += m;
            sumsq += m * m;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn reports_serialize_deterministically() {
        let a = martingale_report(&binary(), &[0.2, 0.5], 2_000, 9, 1).unwrap();
        let b = martingale_report(&binary(), &[0.2, 0.5], 2_000, 9, 4).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
