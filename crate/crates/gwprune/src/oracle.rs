//! Brute-force ground truth: exhaustive enumeration of small ordered trees,
//! exact law tables, leaf-count laws, and the leaf-conditioning verifier.
//!
//! Enumeration is bounded by node count, not leaf count: when `p_1 > 0` the
//! set of trees with a given number of leaves is infinite, so a leaf-count
//! table can only be certified complete where every tree with that many
//! leaves fits the node budget.

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::tree::FiniteTree;
use std::collections::BTreeMap;

/// Hard cap on exhaustive enumeration.
pub const ENUMERATION_GUARD: usize = 14;

fn check_guard(max_nodes: usize) -> Result<()> {
    if max_nodes == 0 {
        return Err(Error::domain("enumeration needs at least one node"));
    }
    if max_nodes > ENUMERATION_GUARD {
        return Err(Error::Resource(format!(
            "enumeration beyond {ENUMERATION_GUARD} nodes is not supported (asked for {max_nodes})"
        )));
    }
    Ok(())
}

/// Visits every ordered rooted tree with at most `max_nodes` nodes and every
/// arity at most `max_arity`, exactly once, ordered by node count and then by
/// lexicographic serialization. Streaming, so large enumerations never
/// materialize.
pub fn visit_trees(
    max_nodes: usize,
    max_arity: usize,
    f: &mut dyn FnMut(&FiniteTree),
) -> Result<()> {
    check_guard(max_nodes)?;
    for n in 1..=max_nodes {
        visit_exact(n, max_arity, f);
    }
    Ok(())
}

/// Trees with exactly `n` nodes, in lexicographic serialization order.
/// Lexicographic rank depends on depth profiles rather than subtree sizes,
/// so the shapes are generated first and sorted as strings.
fn visit_exact(n: usize, max_arity: usize, f: &mut dyn FnMut(&FiniteTree)) {
    let mut keys: Vec<String> = Vec::new();
    let mut acc: Vec<FiniteTree> = Vec::new();
    visit_forests(n - 1, max_arity, max_arity, &mut acc, &mut |children| {
        keys.push(FiniteTree::with_children(children.to_vec()).serialize());
    });
    keys.sort_unstable();
    for key in keys {
        f(&FiniteTree::parse(&key).expect("serialized shapes parse back"));
    }
}

fn visit_forests(
    budget: usize,
    slots: usize,
    max_arity: usize,
    acc: &mut Vec<FiniteTree>,
    f: &mut dyn FnMut(&[FiniteTree]),
) {
    if budget == 0 {
        f(acc);
        return;
    }
    if slots == 0 {
        return;
    }
    for first in (1..=budget).rev() {
        visit_exact(first, max_arity, &mut |t| {
            acc.push(t.clone());
            visit_forests(budget - first, slots - 1, max_arity, acc, f);
            acc.pop();
        });
    }
}

/// Materialized enumeration; prefer [`visit_trees`] for anything large.
pub fn enumerate_trees(max_nodes: usize, max_arity: usize) -> Result<Vec<FiniteTree>> {
    let mut out = Vec::new();
    visit_trees(max_nodes, max_arity, &mut |t| out.push(t.clone()))?;
    Ok(out)
}

/// Exact probabilities of every tree within a node bound.
#[derive(Debug, Clone)]
pub struct LawTable {
    entries: BTreeMap<String, f64>,
    covered_mass: f64,
    bound: usize,
}

impl LawTable {
    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn probability(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn covered_mass(&self) -> f64 {
        self.covered_mass
    }

    /// Mass of trees beyond the bound (or of probability-zero shapes).
    pub fn residual(&self) -> f64 {
        (1.0 - self.covered_mass).max(0.0)
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Entries ordered by node count, then lexicographically — the
    /// enumeration order, which diffs cleanly across runs.
    pub fn sorted_entries(&self) -> Vec<(&str, f64)> {
        let mut rows: Vec<(&str, f64)> =
            self.entries.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        rows.sort_by_key(|&(k, _)| (k.len(), k.to_string()));
        rows
    }

    /// One `{"tree": ..., "probability": ...}` JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (tree, p) in self.sorted_entries() {
            out.push_str(&format!(
                "{}\n",
                serde_json::json!({ "tree": tree, "probability": p })
            ));
        }
        out
    }
}

/// Tabulates `P(G(u) = t)` for every tree with at most `max_nodes` nodes.
pub fn exact_law_table(d: &OffspringDistribution, u: f64, max_nodes: usize) -> Result<LawTable> {
    check_guard(max_nodes)?;
    let pruned = d.prune_distribution(u)?;
    let arity_cap = pruned
        .support_max()
        .unwrap_or(usize::MAX)
        .min(max_nodes.saturating_sub(1));
    let mut entries = BTreeMap::new();
    let mut covered = 0.0;
    visit_trees(max_nodes, arity_cap.max(1), &mut |t| {
        let mut p = 1.0;
        t.for_each(|node, _| p *= pruned.prob(node.arity()));
        if p > 0.0 {
            entries.insert(t.serialize(), p);
            covered += p;
        }
    })?;
    Ok(LawTable {
        entries,
        covered_mass: covered,
        bound: max_nodes,
    })
}

/// One leaf count's row of the leaf-count law.
#[derive(Debug, Clone, Copy)]
pub struct LeafCountEntry {
    /// `C_p(n)`: sum over enumerated n-leaf trees of the product of inner
    /// node probabilities.
    pub c_value: f64,
    /// `P(#L = n) = C_p(n) p_0^n`.
    pub probability: f64,
    /// Whether every tree with this many leaves fits the node bound, making
    /// the row exact rather than truncated.
    pub complete: bool,
}

/// Leaf-count law `n -> (C_p(n), P(#L = n))` for the pruned law `p^(u)`,
/// over trees with at most `max_nodes` nodes.
pub fn leaf_count_law(
    d: &OffspringDistribution,
    u: f64,
    max_nodes: usize,
) -> Result<BTreeMap<usize, LeafCountEntry>> {
    check_guard(max_nodes)?;
    let pruned = d.prune_distribution(u)?;
    let arity_cap = pruned
        .support_max()
        .unwrap_or(usize::MAX)
        .min(max_nodes.saturating_sub(1));
    let p0 = pruned.prob(0);
    let no_unary = pruned.prob(1) == 0.0;
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    visit_trees(max_nodes, arity_cap.max(1), &mut |t| {
        let mut c = 1.0;
        t.for_each(|node, _| {
            if !node.is_leaf() {
                c *= pruned.prob(node.arity());
            }
        });
        if c > 0.0 {
            *rows.entry(t.num_leaves()).or_insert(0.0) += c;
        }
    })?;
    Ok(rows
        .into_iter()
        .map(|(n, c)| {
            // Without unary nodes an n-leaf tree has at most 2n - 1 nodes.
            let complete = no_unary && 2 * n - 1 <= max_nodes;
            (
                n,
                LeafCountEntry {
                    c_value: c,
                    probability: c * p0.powi(n as i32),
                    complete,
                },
            )
        })
        .collect())
}

/// A discrepancy found by [`verify_leaf_conditioning`].
#[derive(Debug, Clone, serde::Serialize)]
pub enum Violation {
    /// `q_k` differs from `u^(k-1) p_k`.
    Support {
        arity: usize,
        expected: f64,
        actual: f64,
    },
    /// A tree's conditional probability given its leaf count differs
    /// between the two laws.
    TreeRatio {
        leaf_count: usize,
        tree: String,
        discrepancy: f64,
    },
}

/// Verdict on whether `q` is a pruning of `p`, certified up to a node bound.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LeafConditioningReport {
    pub consistent: bool,
    pub inferred_u: Option<f64>,
    pub violations: Vec<Violation>,
    /// The certificate only covers trees up to this many nodes.
    pub certified_max_nodes: usize,
}

impl LeafConditioningReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Decides whether conditioning on the number of leaves gives the same tree
/// law under `p` and `q`, which holds exactly when `q_k = u^(k-1) p_k` for
/// some `u > 0`. Infers `u` from the first branching arity, checks the
/// support relation, and verifies the per-tree ratio identity
/// `Π p_{a_i} / C_p(n) = Π q_{a_i} / C_q(n)` over the enumeration.
pub fn verify_leaf_conditioning(
    p: &OffspringDistribution,
    q: &OffspringDistribution,
    max_nodes: usize,
) -> Result<LeafConditioningReport> {
    check_guard(max_nodes)?;
    let arity_cap = max_nodes - 1;
    let n0 = (2..=arity_cap.max(2))
        .find(|&k| p.prob(k) > 0.0)
        .ok_or_else(|| Error::domain("p has no arity above 1: conditioning is degenerate"))?;
    let inferred = (q.prob(n0) / p.prob(n0)).powf(1.0 / (n0 as f64 - 1.0));
    let mut violations = Vec::new();
    if !inferred.is_finite() || inferred <= 0.0 {
        violations.push(Violation::Support {
            arity: n0,
            expected: p.prob(n0),
            actual: q.prob(n0),
        });
    } else {
        for k in 1..=arity_cap {
            let expected = inferred.powi(k as i32 - 1) * p.prob(k);
            let actual = q.prob(k);
            if (expected - actual).abs() > 1e-10 {
                violations.push(Violation::Support {
                    arity: k,
                    expected,
                    actual,
                });
            }
        }
    }

    // Per-tree conditional ratios, grouped by leaf count.
    let mut by_leaves: BTreeMap<usize, Vec<(String, f64, f64)>> = BTreeMap::new();
    visit_trees(max_nodes, arity_cap.max(1), &mut |t| {
        let mut pp = 1.0;
        let mut qp = 1.0;
        t.for_each(|node, _| {
            if !node.is_leaf() {
                pp *= p.prob(node.arity());
                qp *= q.prob(node.arity());
            }
        });
        if pp > 0.0 || qp > 0.0 {
            by_leaves
                .entry(t.num_leaves())
                .or_default()
                .push((t.serialize(), pp, qp));
        }
    })?;
    for (leaves, rows) in &by_leaves {
        let cp: f64 = rows.iter().map(|r| r.1).sum();
        let cq: f64 = rows.iter().map(|r| r.2).sum();
        if cp <= 0.0 || cq <= 0.0 {
            continue;
        }
        for (tree, pp, qp) in rows {
            let discrepancy = (pp / cp - qp / cq).abs();
            if discrepancy > 1e-10 {
                violations.push(Violation::TreeRatio {
                    leaf_count: *leaves,
                    tree: tree.clone(),
                    discrepancy,
                });
            }
        }
    }

    let consistent = violations.is_empty();
    Ok(LeafConditioningReport {
        consistent,
        inferred_u: if inferred.is_finite() && inferred > 0.0 {
            Some(inferred)
        } else {
            None
        },
        violations,
        certified_max_nodes: max_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> OffspringDistribution {
        OffspringDistribution::finite(vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a}");
    }

    #[test]
    fn single_node_enumeration() {
        let trees = enumerate_trees(1, 1).unwrap();
        assert_eq!(trees, vec![FiniteTree::leaf()]);
    }

    #[test]
    fn counts_match_catalan() {
        // Trees with exactly n nodes and unrestricted arity.
        let expected = [1usize, 1, 2, 5, 14];
        let trees = enumerate_trees(5, 4).unwrap();
        for (n, &want) in expected.iter().enumerate() {
            let got = trees.iter().filter(|t| t.num_nodes() == n + 1).count();
            assert_eq!(got, want, "n = {}", n + 1);
        }
        // Cross-check against the Catalan recurrence.
        let mut catalan = vec![1u64; 5];
        for n in 1..5 {
            catalan[n] = (0..n).map(|i| catalan[i] * catalan[n - 1 - i]).sum();
        }
        assert_eq!(catalan, [1, 1, 2, 5, 14]);
    }

    #[test]
    fn counts_match_motzkin() {
        let expected = [1usize, 1, 2, 4, 9];
        let trees = enumerate_trees(5, 2).unwrap();
        for (n, &want) in expected.iter().enumerate() {
            let got = trees.iter().filter(|t| t.num_nodes() == n + 1).count();
            assert_eq!(got, want, "n = {}", n + 1);
        }
        // Motzkin recurrence M_{n+1} = M_n + Σ M_k M_{n-1-k}.
        let mut motzkin = vec![1u64; 5];
        for n in 1..5 {
            let mut m = motzkin[n - 1];
            for k in 0..n.saturating_sub(1) {
                m += motzkin[k] * motzkin[n - 2 - k];
            }
            motzkin[n] = m;
        }
        assert_eq!(motzkin, [1, 1, 2, 4, 9]);
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        let trees = enumerate_trees(8, 7).unwrap();
        let keys: Vec<(usize, String)> = trees
            .iter()
            .map(|t| (t.num_nodes(), t.serialize()))
            .collect();
        for w in keys.windows(2) {
            assert!(w[0] < w[1], "{:?} !< {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(enumerate_trees(15, 2).is_err());
        assert!(enumerate_trees(0, 2).is_err());
    }

    #[test]
    fn law_table_binary() {
        let table = exact_law_table(&binary(), 0.5, 3).unwrap();
        assert_eq!(table.entries().len(), 2);
        close(table.probability("()").unwrap(), 0.75, 1e-12);
        close(table.probability("(()())").unwrap(), 0.140625, 1e-12);
        close(table.covered_mass(), 0.890625, 1e-12);

        let degenerate = exact_law_table(&binary(), 0.0, 3).unwrap();
        assert_eq!(degenerate.entries().len(), 1);
        close(degenerate.probability("()").unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn law_table_mass_is_monotone_in_bound() {
        let mut last = 0.0;
        for bound in [3, 5, 7, 9, 11] {
            let table = exact_law_table(&binary(), 0.5, bound).unwrap();
            assert!(table.covered_mass() >= last - 1e-15);
            last = table.covered_mass();
        }
        // Sub-critical: the residual shrinks to a small remainder by 12 nodes.
        let table = exact_law_table(&binary(), 0.5, 12).unwrap();
        assert!(
            table.covered_mass() > 0.95,
            "covered {}",
            table.covered_mass()
        );
    }

    #[test]
    fn law_table_matches_tree_probability() {
        let d = OffspringDistribution::geometric_critical(0.5).unwrap();
        let table = exact_law_table(&d, 0.8, 6).unwrap();
        for (key, &p) in table.entries() {
            let t = FiniteTree::parse(key).unwrap();
            close(t.tree_probability(&d, 0.8).unwrap(), p, 1e-14);
        }
    }

    #[test]
    fn leaf_count_law_binary() {
        let law = leaf_count_law(&binary(), 1.0, 9).unwrap();
        close(law[&1].probability, 0.5, 1e-12);
        close(law[&2].probability, 0.125, 1e-12);
        close(law[&3].probability, 1.0 / 16.0, 1e-12);
        close(law[&3].c_value, 0.5, 1e-12);
        // Binary trees with n leaves have 2n - 1 nodes, so every row up to
        // n = 5 is certified complete under the 9-node bound.
        assert!((1..=5).all(|n| law[&n].complete));
        assert!(!law.contains_key(&6));
    }

    #[test]
    fn leaf_count_partial_sums_below_one() {
        let g = OffspringDistribution::geometric_critical(0.5).unwrap();
        let law = leaf_count_law(&g, 0.9, 8).unwrap();
        let total: f64 = law.values().map(|e| e.probability).sum();
        assert!(total <= 1.0 + 1e-12);
        // Unary nodes make every row incomplete.
        assert!(law.values().all(|e| !e.complete));
    }

    #[test]
    fn restricted_class_matches_enumeration() {
        // r_h-class probability equals the sum of full-tree probabilities
        // over trees agreeing below height h, up to the table residual.
        let d = binary();
        let u = 0.6;
        let table = exact_law_table(&d, u, 9).unwrap();
        for class in ["()", "(()())", "((()())())"] {
            let target = FiniteTree::parse(class).unwrap();
            let h = 2.min(target.height() + 1);
            let rcp = target.restricted_class_probability(&d, u, h).unwrap();
            let mut total = 0.0;
            for (key, &p) in table.entries() {
                let t = FiniteTree::parse(key).unwrap();
                if t.restrict(h) == target.restrict(h) {
                    total += p;
                }
            }
            assert!(total <= rcp + 1e-12);
            assert!(rcp - total <= table.residual() + 1e-12, "class {class}");
        }
    }

    #[test]
    fn leaf_conditioning_accepts_pruning() {
        let p = binary();
        let q = p.prune_distribution(0.5).unwrap();
        let report = verify_leaf_conditioning(&p, &q, 9).unwrap();
        assert!(report.consistent, "{report:?}");
        close(report.inferred_u.unwrap(), 0.5, 1e-10);

        let same = verify_leaf_conditioning(&p, &p, 9).unwrap();
        assert!(same.consistent);
        close(same.inferred_u.unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn leaf_conditioning_rejects_geometric() {
        let p = binary();
        let q = OffspringDistribution::geometric_critical(0.5).unwrap();
        let report = verify_leaf_conditioning(&p, &q, 9).unwrap();
        assert!(!report.consistent);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn leaf_conditioning_degenerate_without_branching() {
        let p = OffspringDistribution::finite(vec![0.6, 0.4]).unwrap();
        assert!(verify_leaf_conditioning(&p, &p, 9).is_err());
    }

    #[test]
    fn leaf_conditioning_is_symmetric() {
        // Swapping the laws inverts the inferred parameter when both
        // directions are valid prunings.
        let p = binary();
        let q = p.prune_distribution(0.5).unwrap();
        let forward = verify_leaf_conditioning(&p, &q, 9).unwrap();
        let backward = verify_leaf_conditioning(&q, &p, 9).unwrap();
        assert!(forward.consistent && backward.consistent);
        let u = forward.inferred_u.unwrap();
        let v = backward.inferred_u.unwrap();
        assert!(v <= q.max_parameter());
        close(u * v, 1.0, 1e-10);
    }
}
