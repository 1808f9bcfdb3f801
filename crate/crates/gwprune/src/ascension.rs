//! The ascension process: the pruning process run upward through the
//! super-critical range until the tree becomes infinite.
//!
//! The ascension time `A = inf{u : #G(u) = ∞}` has distribution
//! `P(A <= u) = 1 - F(u)`, so it can be sampled exactly by inverting the
//! survival function. Conditionally on `A = a`, the tree just before
//! ascension is distributed like the pruned conditioned tree `G*(â)` with
//! `â = a F(a)`. Forward simulation over a parameter grid never materializes
//! an infinite tree: each grafted branch is declared infinite by an exact
//! `Bernoulli(1 - F(β))` coin, and the finite branches are drawn from the
//! conjugate law `p^(β̂)`, which is the super-critical law conditioned to die
//! out.
//!
//! Everything here assumes a critical base law with `p_0^(ū) = 0`, which
//! forces `G(ū)` to be infinite and the ascension time to live in `[1, ū)`.

use crate::error::{Error, Result};
use crate::kesten::sample_gstar;
use crate::offspring::OffspringDistribution;
use crate::prune::{replace_leaves, sample_gw_law, SampleBudget, Sampled};
use crate::rng::Prng;
use crate::tree::FiniteTree;
use rand::Rng;

/// State of the ascension process at one grid point: a concrete finite tree,
/// or the absorbing symbol for any infinite tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathState {
    Finite(FiniteTree),
    Infinite,
}

impl PathState {
    pub fn is_infinite(&self) -> bool {
        matches!(self, PathState::Infinite)
    }

    pub fn as_finite(&self) -> Option<&FiniteTree> {
        match self {
            PathState::Finite(t) => Some(t),
            PathState::Infinite => None,
        }
    }

    /// The CLI/JSON encoding: the tree string, or `"INF"`.
    pub fn encode(&self) -> String {
        match self {
            PathState::Finite(t) => t.serialize(),
            PathState::Infinite => "INF".to_string(),
        }
    }
}

/// One simulated path of the ascension process over a parameter grid.
#[derive(Debug, Clone)]
pub struct AscensionPath {
    grid: Vec<f64>,
    states: Vec<PathState>,
    ascension_interval: Option<(f64, f64)>,
    last_finite: Option<FiniteTree>,
}

impl AscensionPath {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[PathState] {
        &self.states
    }

    /// Grid cell `(lower, upper]` bracketing the ascension time, when the
    /// path was absorbed.
    pub fn ascension_interval(&self) -> Option<(f64, f64)> {
        self.ascension_interval
    }

    /// The last finite state before absorption.
    pub fn last_finite(&self) -> Option<&FiniteTree> {
        self.last_finite.as_ref()
    }

    pub fn is_absorbed(&self) -> bool {
        self.ascension_interval.is_some()
    }

    /// Whether the path was absorbed at or before `u`.
    pub fn absorbed_by(&self, u: f64) -> bool {
        self.ascension_interval
            .is_some_and(|(_, upper)| upper <= u + 1e-12)
    }

    /// Finite states are nested and absorption is permanent.
    pub fn is_monotone(&self) -> bool {
        let mut seen_infinite = false;
        for w in self.states.windows(2) {
            match (&w[0], &w[1]) {
                (PathState::Finite(a), PathState::Finite(b)) => {
                    if !a.is_pruning_of(b) {
                        return false;
                    }
                }
                (PathState::Infinite, PathState::Finite(_)) => return false,
                _ => {}
            }
        }
        for s in &self.states {
            if seen_infinite && !s.is_infinite() {
                return false;
            }
            seen_infinite |= s.is_infinite();
        }
        true
    }

    /// One `{"u": ..., "state": ...}` JSON object per grid point.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (u, state) in self.grid.iter().zip(&self.states) {
            out.push_str(&format!(
                "{}\n",
                serde_json::json!({ "u": u, "state": state.encode() })
            ));
        }
        out
    }
}

/// Result of a path simulation: complete, or cut short by the budget with
/// the partial path preserved.
#[derive(Debug, Clone)]
pub enum PathOutcome {
    Completed(AscensionPath),
    BudgetExhausted(AscensionPath),
}

impl PathOutcome {
    pub fn path(&self) -> &AscensionPath {
        match self {
            PathOutcome::Completed(p) | PathOutcome::BudgetExhausted(p) => p,
        }
    }

    pub fn into_path(self) -> AscensionPath {
        match self {
            PathOutcome::Completed(p) | PathOutcome::BudgetExhausted(p) => p,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, PathOutcome::BudgetExhausted(_))
    }

    /// The completed path, or a budget error naming the failure point.
    pub fn completed(self) -> Result<AscensionPath> {
        match self {
            PathOutcome::Completed(p) => Ok(p),
            PathOutcome::BudgetExhausted(p) => Err(Error::Budget(format!(
                "ascension path exhausted its budget after {} of its grid points",
                p.states.len()
            ))),
        }
    }
}

/// An exact draw of the ascension time and the tree just before it.
#[derive(Debug, Clone)]
pub struct AscensionSample {
    pub time: f64,
    pub pre_tree: FiniteTree,
}

/// The standing assumption of the ascension results: critical base law with
/// `p_0^(ū) = 0` (so the terminal tree is infinite almost surely).
pub fn require_ascension_assumption(d: &OffspringDistribution) -> Result<()> {
    if !d.is_critical() {
        return Err(Error::domain(format!(
            "ascension needs a critical law (mean is {})",
            d.mean()
        )));
    }
    let ub = d.max_parameter();
    if !ub.is_finite() {
        return Err(Error::domain("ascension needs a finite ū"));
    }
    let p0_top = d.pruned_p0(ub)?;
    if p0_top > 1e-9 {
        return Err(Error::domain(format!(
            "ascension needs p_0^(ū) = 0, got {p0_top} (the tree stays finite with positive probability at ū)"
        )));
    }
    Ok(())
}

/// Samples the ascension time exactly: `F̄^{-1}(1 - γ)` with `γ` uniform.
pub fn sample_ascension_time(d: &OffspringDistribution, rng: &mut Prng) -> Result<f64> {
    require_ascension_assumption(d)?;
    let gamma: f64 = rng.random();
    d.survival_inverse(1.0 - gamma)
}

/// Samples `G(u)` conditioned to be finite for `u >= 1`: by conjugation this
/// is exactly `GW(p^(û))`.
pub fn sample_gw_conditioned_finite(
    d: &OffspringDistribution,
    u: f64,
    rng: &mut Prng,
) -> Result<FiniteTree> {
    if u < 1.0 {
        return Err(Error::domain(format!(
            "conditioning on finiteness applies to u >= 1, got {u}"
        )));
    }
    let uhat = d.conjugate(u)?;
    let law = d.prune_distribution(uhat)?;
    Ok(sample_gw_law(&law, SampleBudget::default(), rng)?.into_tree())
}

/// Samples one grafted branch for a step ending at `β`: infinite with the
/// residual probability `1 - F(β)`, otherwise a conjugate-law tree.
fn sample_branch(
    survival: f64,
    conditioned: &OffspringDistribution,
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<Option<Sampled>> {
    if survival > 0.0 && rng.random::<f64>() < survival {
        return Ok(None); // infinite branch
    }
    Ok(Some(sample_gw_law(conditioned, budget, rng)?))
}

/// Simulates the ascension process over an increasing parameter grid.
///
/// The path starts from `G(grid[0])` and advances by grafting: every leaf
/// receives a bridge-law number of branches, each branch declared infinite by
/// an exact coin or else drawn from the conjugate law. The first infinite
/// branch absorbs the path into the infinite state, recording the bracketing
/// grid cell and the last finite tree.
pub fn simulate_ascension_path(
    d: &OffspringDistribution,
    grid: &[f64],
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<PathOutcome> {
    require_ascension_assumption(d)?;
    if grid.is_empty() {
        return Err(Error::domain("ascension grid must be non-empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("ascension grid must be strictly increasing"));
    }
    let ub = d.max_parameter();
    for &g in grid {
        d.param(g)?;
        if g < ub - 1e-12 && d.pruned_p0(g)? <= 0.0 {
            return Err(Error::domain(format!("p_0^({g}) = 0 inside the grid")));
        }
    }

    let mut path = AscensionPath {
        grid: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        ascension_interval: None,
        last_finite: None,
    };
    let exhausted = |mut path: AscensionPath| {
        path.grid.truncate(path.states.len());
        Ok(PathOutcome::BudgetExhausted(path))
    };

    // Initial state.
    let g0 = grid[0];
    let survival0 = d.survival(g0)?;
    let first = match sample_branch(
        survival0,
        &d.prune_distribution(d.conjugate(g0)?)?,
        budget,
        rng,
    )? {
        None => {
            path.ascension_interval = Some((1.0, g0));
            PathState::Infinite
        }
        Some(Sampled::Truncated(_)) => return exhausted(path),
        Some(Sampled::Complete(t)) => PathState::Finite(t),
    };
    path.grid.push(g0);
    path.states.push(first);

    for w in grid.windows(2) {
        let (alpha, beta) = (w[0], w[1]);
        let current = match path.states.last().expect("at least the initial state") {
            PathState::Infinite => {
                path.grid.push(beta);
                path.states.push(PathState::Infinite);
                continue;
            }
            PathState::Finite(t) => t.clone(),
        };
        let bridge = d.bridge_distribution(alpha, beta)?;
        let survival = d.survival(beta)?;
        let conditioned = d.prune_distribution(d.conjugate(beta)?)?;
        let leaves = current.num_leaves();
        let mut grafts: Vec<FiniteTree> = Vec::with_capacity(leaves);
        let mut absorbed = false;
        let mut ran_out = false;
        'leaves: for _ in 0..leaves {
            let n = bridge.sample_arity(rng);
            let mut children = Vec::with_capacity(n);
            for _ in 0..n {
                match sample_branch(survival, &conditioned, budget, rng)? {
                    None => {
                        absorbed = true;
                        break 'leaves;
                    }
                    Some(Sampled::Truncated(_)) => {
                        ran_out = true;
                        break 'leaves;
                    }
                    Some(Sampled::Complete(t)) => children.push(t),
                }
            }
            grafts.push(FiniteTree::with_children(children));
        }
        if ran_out {
            return exhausted(path);
        }
        if absorbed {
            path.ascension_interval = Some((alpha, beta));
            path.last_finite = Some(current);
            path.grid.push(beta);
            path.states.push(PathState::Infinite);
            continue;
        }
        let mut feed = grafts.into_iter();
        let next = replace_leaves(
            &current,
            |_| Ok(feed.next().expect("one graft per leaf")),
            rng,
        )?;
        if budget.node_cap.is_some_and(|cap| next.num_nodes() > cap) {
            return exhausted(path);
        }
        path.grid.push(beta);
        path.states.push(PathState::Finite(next));
    }
    Ok(PathOutcome::Completed(path))
}

/// Samples the tree just before ascension given `A = a`: by the density
/// identity this is the pruned conditioned tree `G*(â)` at `â = a F(a)`.
pub fn sample_pre_ascension_tree(
    d: &OffspringDistribution,
    a: f64,
    rng: &mut Prng,
) -> Result<FiniteTree> {
    require_ascension_assumption(d)?;
    let ub = d.max_parameter();
    if !(1.0 < a && a < ub) {
        return Err(Error::domain(format!(
            "ascension time must lie in (1, {ub}), got {a}"
        )));
    }
    let ahat = d.conjugate(a)?;
    sample_gstar(d, ahat, rng)
}

/// Draws the ascension time together with the pre-ascension tree.
pub fn sample_ascension(d: &OffspringDistribution, rng: &mut Prng) -> Result<AscensionSample> {
    require_ascension_assumption(d)?;
    let time = {
        let gamma: f64 = rng.random();
        d.survival_inverse(1.0 - gamma)?
    };
    let ahat = d.conjugate(time)?;
    let pre_tree = sample_gstar(d, ahat.min(1.0 - 1e-12), rng)?;
    Ok(AscensionSample { time, pre_tree })
}

/// Left side of the representation identity: run the ascension process and
/// report its state at `u_eval` — the tree `G(u_eval)` when `u_eval < A`,
/// the infinite marker otherwise.
pub fn representation_left(
    d: &OffspringDistribution,
    u_eval: f64,
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<PathState> {
    require_ascension_assumption(d)?;
    let ub = d.max_parameter();
    if !(0.0..ub).contains(&u_eval) {
        return Err(Error::domain(format!(
            "evaluation point must lie in [0, {ub}), got {u_eval}"
        )));
    }
    let grid = if u_eval == 0.0 {
        vec![0.0]
    } else {
        vec![0.5 * u_eval, u_eval]
    };
    let path = simulate_ascension_path(d, &grid, budget, rng)?.completed()?;
    Ok(path.states().last().expect("grid is non-empty").clone())
}

/// Right side of the representation identity: draw `γ` uniform and report
/// `G*(u_eval γ)` when `u_eval < F̄^{-1}(1-γ)` (equivalently `γ < F(u_eval)`),
/// the infinite marker otherwise.
pub fn representation_right(
    d: &OffspringDistribution,
    u_eval: f64,
    rng: &mut Prng,
) -> Result<PathState> {
    require_ascension_assumption(d)?;
    let ub = d.max_parameter();
    if !(0.0..ub).contains(&u_eval) {
        return Err(Error::domain(format!(
            "evaluation point must lie in [0, {ub}), got {u_eval}"
        )));
    }
    let gamma: f64 = rng.random();
    let f = d.extinction_probability(u_eval)?;
    if gamma < f {
        Ok(PathState::Finite(sample_gstar(d, u_eval * gamma, rng)?))
    } else {
        Ok(PathState::Infinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stats::{total_variation, EmpiricalLaw};
    use std::collections::BTreeMap;

    fn binary() -> OffspringDistribution {
        OffspringDistribution::finite(vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a}");
    }

    #[test]
    fn assumption_gate() {
        assert!(require_ascension_assumption(&binary()).is_ok());
        let geo = OffspringDistribution::geometric_critical(0.5).unwrap();
        assert!(require_ascension_assumption(&geo).is_ok());
        // Sub-critical laws are rejected.
        let sub = OffspringDistribution::finite(vec![0.6, 0.0, 0.4]).unwrap();
        assert!(require_ascension_assumption(&sub).is_err());
        // Truncated k^-3: p_0^(ū) > 0.
        let c = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let cubic =
            OffspringDistribution::from_pmf_truncated(|k| c / (k as f64).powi(3), 200).unwrap();
        assert!(require_ascension_assumption(&cubic).is_err());
    }

    #[test]
    fn ascension_time_support_and_median() {
        let d = binary();
        let mut rng = rng_from_seed(21);
        let n = 100_000;
        let mut times: Vec<f64> = (0..n)
            .map(|_| sample_ascension_time(&d, &mut rng).unwrap())
            .collect();
        assert!(times.iter().all(|&a| (1.0..=2.0).contains(&a)));
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[n / 2];
        close(median, 4.0 / 3.0, 0.01);
    }

    #[test]
    fn conditioned_finite_root_frequency() {
        // P(root-only) under G(1.5) | finite equals p_0^(0.5) = 3/4.
        let d = binary();
        let mut rng = rng_from_seed(22);
        let n = 100_000;
        let mut root_only = 0;
        for _ in 0..n {
            if sample_gw_conditioned_finite(&d, 1.5, &mut rng)
                .unwrap()
                .is_leaf()
            {
                root_only += 1;
            }
        }
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        close(root_only as f64 / n as f64, 0.75, 3.0 * se);
        assert!(sample_gw_conditioned_finite(&d, 0.5, &mut rng).is_err());
    }

    #[test]
    fn conditioned_finite_matches_rejection_oracle() {
        // Independent route: sample the raw super-critical law and keep the
        // realizations that die out. A 2000-node cap detects the infinite
        // ones (a finite sub-critical-conditioned tree of that size has
        // vanishing probability).
        let d = binary();
        let u = 1.5;
        let mut rng = rng_from_seed(23);
        let n = 100_000;
        let detector = SampleBudget::default()
            .with_node_cap(2000)
            .with_height_cap(60);
        let mut emp = EmpiricalLaw::new();
        let mut rejected = 0usize;
        let raw = d.prune_distribution(u).unwrap();
        while emp.total() < n {
            match sample_gw_law(&raw, detector, &mut rng).unwrap() {
                Sampled::Truncated(_) => rejected += 1,
                Sampled::Complete(t) => {
                    let key = if t.num_nodes() <= 7 {
                        t.serialize()
                    } else {
                        "OTHER".to_string()
                    };
                    emp.observe(key);
                }
            }
        }
        // Rejection frequency estimates 1 - F(1.5) = 2/3.
        let total = (rejected + n as usize) as f64;
        let se = (2.0 / 3.0 * (1.0 / 3.0) / total).sqrt();
        close(rejected as f64 / total, 2.0 / 3.0, 4.0 * se);

        let mut exact = BTreeMap::new();
        let mut covered = 0.0;
        let table = crate::oracle::exact_law_table(&d, d.conjugate(u).unwrap(), 7).unwrap();
        for (k, &p) in table.entries() {
            exact.insert(k.clone(), p);
            covered += p;
        }
        exact.insert("OTHER".to_string(), 1.0 - covered);
        let tv = total_variation(&emp.probabilities().unwrap(), &exact);
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn subcritical_grid_never_absorbs() {
        let d = binary();
        let mut rng = rng_from_seed(24);
        for _ in 0..10_000 {
            let path = simulate_ascension_path(
                &d,
                &[0.3, 0.7, 1.0],
                SampleBudget::default().with_node_cap(1_000_000),
                &mut rng,
            )
            .unwrap()
            .into_path();
            assert!(!path.is_absorbed());
            assert!(path.is_monotone());
        }
    }

    #[test]
    fn path_states_are_nested_and_absorbing() {
        let d = binary();
        let mut rng = rng_from_seed(25);
        let budget = SampleBudget::default().with_node_cap(200_000);
        let mut absorbed = 0;
        let n = 2_000;
        for _ in 0..n {
            match simulate_ascension_path(&d, &[0.5, 1.2, 1.6, 2.0], budget, &mut rng).unwrap() {
                PathOutcome::Completed(path) => {
                    assert!(path.is_monotone());
                    if path.is_absorbed() {
                        absorbed += 1;
                        let (lo, hi) = path.ascension_interval().unwrap();
                        assert!(lo < hi);
                        // Absorption is permanent.
                        let first_inf = path.states().iter().position(|s| s.is_infinite()).unwrap();
                        assert!(path.states()[first_inf..].iter().all(|s| s.is_infinite()));
                    } else {
                        assert_eq!(path.states().len(), 4);
                    }
                }
                PathOutcome::BudgetExhausted(_) => {}
            }
        }
        // p_0^(2) = 0 forces absorption by ū on every completed path.
        assert!(absorbed > n * 9 / 10);
    }

    #[test]
    fn grid_validation() {
        let d = binary();
        let mut rng = rng_from_seed(26);
        assert!(simulate_ascension_path(&d, &[], SampleBudget::default(), &mut rng).is_err());
        assert!(
            simulate_ascension_path(&d, &[0.5, 0.5], SampleBudget::default(), &mut rng).is_err()
        );
        assert!(
            simulate_ascension_path(&d, &[0.5, 2.5], SampleBudget::default(), &mut rng).is_err()
        );
    }

    #[test]
    fn pre_ascension_tree_values() {
        let d = binary();
        let mut rng = rng_from_seed(27);
        let n = 100_000;
        let mut root_only = 0;
        for _ in 0..n {
            let t = sample_pre_ascension_tree(&d, 1.5, &mut rng).unwrap();
            if t.is_leaf() {
                root_only += 1;
            }
        }
        // G*(0.5) is root-only with probability 1/2.
        let se = (0.25f64 / n as f64).sqrt();
        close(root_only as f64 / n as f64, 0.5, 3.0 * se);
        assert!(sample_pre_ascension_tree(&d, 1.0, &mut rng).is_err());
        assert!(sample_pre_ascension_tree(&d, 2.0, &mut rng).is_err());
    }

    #[test]
    fn ascension_sample_pairs_time_and_tree() {
        let d = binary();
        let mut rng = rng_from_seed(28);
        for _ in 0..2_000 {
            let s = sample_ascension(&d, &mut rng).unwrap();
            assert!((1.0..=2.0).contains(&s.time));
            assert!(s.pre_tree.num_nodes() < usize::MAX);
        }
    }

    #[test]
    fn representation_at_zero_is_root_only() {
        let d = binary();
        let mut rng = rng_from_seed(29);
        for _ in 0..200 {
            let left = representation_left(
                &d,
                0.0,
                SampleBudget::default().with_node_cap(100_000),
                &mut rng,
            )
            .unwrap();
            assert_eq!(left, PathState::Finite(FiniteTree::leaf()));
            let right = representation_right(&d, 0.0, &mut rng).unwrap();
            assert_eq!(right, PathState::Finite(FiniteTree::leaf()));
        }
    }

    #[test]
    fn representation_markers_subcritical_never() {
        let d = binary();
        let mut rng = rng_from_seed(30);
        for _ in 0..2_000 {
            assert!(!representation_right(&d, 0.8, &mut rng)
                .unwrap()
                .is_infinite());
        }
    }

    #[test]
    fn conditional_state_given_survival_is_conjugate_scaled() {
        // Conditioned on surviving through v, the state at u is a pruning of
        // GW(p^(v̂)) at u/v, i.e. GW(p^(u F(v))).
        let d = binary();
        let (u, v) = (0.5, 1.5);
        let mut rng = rng_from_seed(31);
        let budget = SampleBudget::default().with_node_cap(200_000);
        let n = 60_000;
        let mut emp = EmpiricalLaw::new();
        let mut survived = 0u64;
        for _ in 0..n {
            let path = simulate_ascension_path(&d, &[u, 1.2, v], budget, &mut rng)
                .unwrap()
                .into_path();
            if !path.is_absorbed() {
                survived += 1;
                let t = path.states()[0].as_finite().unwrap();
                let key = if t.num_nodes() <= 5 {
                    t.serialize()
                } else {
                    "OTHER".to_string()
                };
                emp.observe(key);
            }
        }
        // Survival through 1.5 has probability F(1.5) = 1/3.
        let f = d.extinction_probability(v).unwrap();
        let se = (f * (1.0 - f) / n as f64).sqrt();
        close(survived as f64 / n as f64, f, 4.0 * se);

        let scaled = u * f;
        let table = crate::oracle::exact_law_table(&d, scaled, 5).unwrap();
        let mut exact: BTreeMap<String, f64> = table
            .entries()
            .iter()
            .map(|(k, &p)| (k.clone(), p))
            .collect();
        exact.insert("OTHER".to_string(), table.residual());
        let tv = total_variation(&emp.probabilities().unwrap(), &exact);
        assert!(tv < 0.015, "tv = {tv}");
    }
}
