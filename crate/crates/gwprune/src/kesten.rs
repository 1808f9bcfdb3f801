//! The Galton-Watson tree conditioned on non-extinction (Kesten tree) and the
//! pruned conditioned process `G*(u)`.
//!
//! The conditioned tree has a single infinite spine: spine nodes reproduce
//! with the size-biased law `p*_k = k p_k / μ(1)` and pass the spine to a
//! uniformly chosen child, while every other node reproduces with plain `p`.
//! Pruning the conditioned tree at `u < 1` truncates the spine after a
//! geometric number of retentions (each succeeds with probability
//! `μ(u)/μ(1)`), so `G*(u)` is finite almost surely and can be sampled
//! exactly, with no height truncation.

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::prune::{sample_gw_law, SampleBudget};
use crate::rng::Prng;
use crate::tree::{FiniteTree, NodeAddress};
use rand::Rng;

/// A height-`h` restriction of the conditioned tree together with its spine:
/// the child labels `V_1, ..., V_h` of the distinguished path from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinedTree {
    tree: FiniteTree,
    spine: Vec<u32>,
}

impl SpinedTree {
    pub fn new(tree: FiniteTree, spine: Vec<u32>) -> Result<Self> {
        let spined = SpinedTree { tree, spine };
        spined.validate()?;
        Ok(spined)
    }

    fn validate(&self) -> Result<()> {
        let mut node = &self.tree;
        for (i, &label) in self.spine.iter().enumerate() {
            if label == 0 || label as usize > node.arity() {
                return Err(Error::domain(format!(
                    "spine label {label} at depth {i} has no matching child"
                )));
            }
            node = &node.children()[label as usize - 1];
        }
        Ok(())
    }

    pub fn tree(&self) -> &FiniteTree {
        &self.tree
    }

    /// Child labels along the spine (`V_1, ..., V_h`).
    pub fn spine_labels(&self) -> &[u32] {
        &self.spine
    }

    /// Spine addresses `V_0 = root, V_1, ..., V_h`.
    pub fn spine_addresses(&self) -> Vec<NodeAddress> {
        let mut out = vec![NodeAddress::root()];
        for &label in &self.spine {
            let last = out.last().expect("non-empty");
            out.push(last.child(label));
        }
        out
    }

    /// `"(()()) spine:[1]"` — tree string plus spine child labels.
    pub fn serialize(&self) -> String {
        let labels: Vec<String> = self.spine.iter().map(|l| l.to_string()).collect();
        format!("{} spine:[{}]", self.tree.serialize(), labels.join(","))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (tree_part, spine_part) = s
            .split_once(" spine:[")
            .ok_or_else(|| Error::parse("expected `<tree> spine:[...]`"))?;
        let spine_body = spine_part
            .strip_suffix(']')
            .ok_or_else(|| Error::parse("unterminated spine list"))?;
        let spine = if spine_body.trim().is_empty() {
            Vec::new()
        } else {
            spine_body
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::parse(format!("bad spine label `{tok}`")))
                })
                .collect::<Result<Vec<u32>>>()?
        };
        SpinedTree::new(FiniteTree::parse(tree_part)?, spine)
    }
}

impl std::fmt::Display for SpinedTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn require_not_supercritical(d: &OffspringDistribution) -> Result<()> {
    if d.mean() > 1.0 + 1e-9 {
        return Err(Error::domain(
            "conditioning on non-extinction needs a critical or sub-critical law",
        ));
    }
    if d.mean() <= 0.0 {
        return Err(Error::domain("conditioning needs a positive mean"));
    }
    Ok(())
}

/// Samples the height-`h` restriction of the conditioned tree: spine nodes
/// reproduce with the size-biased law and hand the spine to a uniform child,
/// off-spine subtrees are plain Galton-Watson restricted to the remaining
/// height.
pub fn sample_kesten(d: &OffspringDistribution, h: usize, rng: &mut Prng) -> Result<SpinedTree> {
    require_not_supercritical(d)?;
    let size_biased = d.size_biased()?;
    let mut spine = Vec::with_capacity(h);
    let tree = sample_kesten_node(d, &size_biased, h, &mut spine, rng)?;
    Ok(SpinedTree { tree, spine })
}

fn sample_kesten_node(
    d: &OffspringDistribution,
    size_biased: &OffspringDistribution,
    remaining: usize,
    spine: &mut Vec<u32>,
    rng: &mut Prng,
) -> Result<FiniteTree> {
    if remaining == 0 {
        return Ok(FiniteTree::leaf());
    }
    let k = size_biased.sample_arity(rng).max(1);
    let spine_child = rng.random_range(1..=k as u32);
    spine.push(spine_child);
    let mut children = Vec::with_capacity(k);
    for j in 1..=k as u32 {
        if j == spine_child {
            children.push(sample_kesten_node(
                d,
                size_biased,
                remaining - 1,
                spine,
                rng,
            )?);
        } else if remaining == 1 {
            children.push(FiniteTree::leaf());
        } else {
            let budget = SampleBudget::default().with_height_cap(remaining - 1);
            children.push(sample_gw_law(d, budget, rng)?.into_tree());
        }
    }
    Ok(FiniteTree::with_children(children))
}

/// `P(r_h of the conditioned tree = t)`:
/// `μ(1)^(-h) Z_h(t) P(r_h G = r_h t)`; zero when generation `h` is empty.
pub fn kesten_class_probability(
    d: &OffspringDistribution,
    t: &FiniteTree,
    h: usize,
) -> Result<f64> {
    require_not_supercritical(d)?;
    if t.height() > h {
        return Err(Error::domain(format!(
            "tree of height {} is not an r_{h} restriction",
            t.height()
        )));
    }
    let z = t.generation_size(h);
    if z == 0 {
        return Ok(0.0);
    }
    Ok(d.mean().powi(-(h as i32)) * z as f64 * t.restricted_class_probability(d, 1.0, h)?)
}

/// Samples `G*(u)`, the pruning of the conditioned tree at `u < 1`, by the
/// exact spine walk: at each spine node draw `K` size-biased, retain with
/// probability `u^(K-1)`; on retention attach plain `GW(p^(u))` trees to the
/// `K - 1` off-spine children and continue down a uniform child; on failure
/// the spine node becomes a leaf.
pub fn sample_gstar(d: &OffspringDistribution, u: f64, rng: &mut Prng) -> Result<FiniteTree> {
    require_not_supercritical(d)?;
    if !(0.0..1.0).contains(&u) {
        return Err(Error::domain(format!(
            "G*(u) is finite only for u in [0, 1), got {u}"
        )));
    }
    let size_biased = d.size_biased()?;
    let pruned = d.prune_distribution(u)?;
    // Walk down the spine collecting (arity, spine slot, off-spine subtrees).
    let mut frames: Vec<(usize, u32, Vec<FiniteTree>)> = Vec::new();
    loop {
        let k = size_biased.sample_arity(rng).max(1);
        let retained = k == 1 || rng.random::<f64>() < u.powi(k as i32 - 1);
        if !retained {
            break;
        }
        let spine_child = rng.random_range(1..=k as u32);
        let mut others = Vec::with_capacity(k - 1);
        for j in 1..=k as u32 {
            if j != spine_child {
                others.push(sample_gw_law(&pruned, SampleBudget::default(), rng)?.into_tree());
            }
        }
        frames.push((k, spine_child, others));
    }
    // The walk stopped: the current spine node is a leaf. Assemble upwards.
    let mut node = FiniteTree::leaf();
    for (k, spine_child, others) in frames.into_iter().rev() {
        let mut children = Vec::with_capacity(k);
        let mut rest = others.into_iter();
        for j in 1..=k as u32 {
            if j == spine_child {
                children.push(std::mem::replace(&mut node, FiniteTree::leaf()));
            } else {
                children.push(rest.next().expect("k - 1 off-spine subtrees"));
            }
        }
        node = FiniteTree::with_children(children);
    }
    Ok(node)
}

/// Exact law of `G*(u)`:
/// `P(G*(u) = t) = (Σ_{ν in L(t)} μ(1)^-(|ν|+1)) (μ(1) - μ(u))/p_0^(u) P(G(u) = t)`.
/// For a critical law this is `M(u, t) P(G(u) = t)`.
pub fn gstar_probability(d: &OffspringDistribution, u: f64, t: &FiniteTree) -> Result<f64> {
    require_not_supercritical(d)?;
    if !(0.0..1.0).contains(&u) {
        return Err(Error::domain(format!(
            "G*(u) is defined for u in [0, 1), got {u}"
        )));
    }
    let p0 = d.pruned_p0(u)?;
    if p0 <= 0.0 {
        return Err(Error::numeric(format!("p_0^({u}) = 0")));
    }
    let weight = t.kesten_weight(d)?;
    let factor = (d.mean() - d.mean_at(u)?) / p0;
    Ok(weight * factor * t.tree_probability(d, u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::visit_trees;
    use crate::rng::rng_from_seed;
    use crate::stats::{total_variation, EmpiricalLaw};

    fn binary() -> OffspringDistribution {
        OffspringDistribution::finite(vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn geo() -> OffspringDistribution {
        OffspringDistribution::geometric_critical(0.5).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a}");
    }

    #[test]
    fn kesten_height_zero_is_root_only() {
        let mut rng = rng_from_seed(1);
        let s = sample_kesten(&binary(), 0, &mut rng).unwrap();
        assert_eq!(s.tree(), &FiniteTree::leaf());
        assert!(s.spine_labels().is_empty());
    }

    #[test]
    fn binary_spine_nodes_are_always_binary() {
        // The size-biased binary law is a point mass at 2.
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let s = sample_kesten(&binary(), 4, &mut rng).unwrap();
            assert_eq!(s.tree().height(), 4);
            let addrs = s.spine_addresses();
            assert_eq!(addrs.len(), 5);
            for addr in &addrs[..4] {
                assert_eq!(s.tree().subtree(addr).unwrap().arity(), 2);
            }
        }
    }

    #[test]
    fn kesten_rejects_supercritical() {
        let d = binary().prune_distribution(1.5).unwrap();
        let mut rng = rng_from_seed(3);
        assert!(sample_kesten(&d, 2, &mut rng).is_err());
    }

    #[test]
    fn class_probability_values() {
        let d = binary();
        close(
            kesten_class_probability(&d, &FiniteTree::cherry(), 1).unwrap(),
            1.0,
            1e-12,
        );
        // A restriction with an empty top generation carries no mass.
        close(
            kesten_class_probability(&d, &FiniteTree::leaf(), 1).unwrap(),
            0.0,
            1e-12,
        );
        assert!(kesten_class_probability(&d, &FiniteTree::cherry(), 0).is_err());
    }

    #[test]
    fn class_probabilities_sum_to_one() {
        // Binary r_2 classes fit in 7 nodes, so the enumeration is complete.
        let d = binary();
        let mut total = 0.0;
        visit_trees(7, 2, &mut |t| {
            if t.height() <= 2 {
                total += kesten_class_probability(&d, t, 2).unwrap();
            }
        })
        .unwrap();
        close(total, 1.0, 1e-12);
    }

    #[test]
    fn kesten_r1_matches_class_probabilities() {
        // Geometric root arities: size-biased law.
        let d = geo();
        let mut rng = rng_from_seed(4);
        let n = 50_000;
        let mut emp = EmpiricalLaw::new();
        for _ in 0..n {
            let s = sample_kesten(&d, 1, &mut rng).unwrap();
            emp.observe(s.tree().arity().to_string());
        }
        let mut exact = std::collections::BTreeMap::new();
        let p_star = d.size_biased().unwrap();
        for k in 1..60 {
            exact.insert(k.to_string(), p_star.prob(k));
        }
        let tv = total_variation(&emp.probabilities().unwrap(), &exact);
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn kesten_consistency_in_height() {
        // r_1 of a height-3 sample has the law of a height-1 sample.
        let d = geo();
        let mut rng = rng_from_seed(5);
        let n = 30_000;
        let mut deep = EmpiricalLaw::new();
        let mut shallow = EmpiricalLaw::new();
        for _ in 0..n {
            deep.observe(
                sample_kesten(&d, 3, &mut rng)
                    .unwrap()
                    .tree()
                    .arity()
                    .to_string(),
            );
            shallow.observe(
                sample_kesten(&d, 1, &mut rng)
                    .unwrap()
                    .tree()
                    .arity()
                    .to_string(),
            );
        }
        let tv = total_variation(
            &deep.probabilities().unwrap(),
            &shallow.probabilities().unwrap(),
        );
        assert!(tv < 0.015, "tv = {tv}");
    }

    #[test]
    fn gstar_root_only_frequency() {
        // P(G*(u) = root) = (μ(1) - μ(u))/μ(1) = 1/2 for binary at u = 1/2.
        let mut rng = rng_from_seed(6);
        let n = 100_000;
        let mut root_only = 0;
        for _ in 0..n {
            if sample_gstar(&binary(), 0.5, &mut rng).unwrap().is_leaf() {
                root_only += 1;
            }
        }
        let se = (0.25f64 / n as f64).sqrt();
        close(root_only as f64 / n as f64, 0.5, 3.0 * se);
    }

    #[test]
    fn gstar_at_zero_is_root_only_for_binary() {
        let mut rng = rng_from_seed(7);
        for _ in 0..100 {
            assert!(sample_gstar(&binary(), 0.0, &mut rng).unwrap().is_leaf());
        }
        assert!(sample_gstar(&binary(), 1.0, &mut rng).is_err());
    }

    #[test]
    fn gstar_probability_values() {
        let d = binary();
        close(
            gstar_probability(&d, 0.5, &FiniteTree::leaf()).unwrap(),
            0.5,
            1e-12,
        );
        close(
            gstar_probability(&d, 0.5, &FiniteTree::cherry()).unwrap(),
            0.1875,
            1e-12,
        );
    }

    #[test]
    fn gstar_partial_sums_monotone() {
        let d = binary();
        let mut last = 0.0;
        for bound in [3, 6, 9, 12] {
            let mut total = 0.0;
            visit_trees(bound, 2, &mut |t| {
                total += gstar_probability(&d, 0.5, t).unwrap();
            })
            .unwrap();
            assert!(total >= last - 1e-15);
            assert!(total <= 1.0 + 1e-12);
            last = total;
        }
        assert!(last > 0.9, "coverage {last}");
    }

    #[test]
    fn gstar_critical_density_identity() {
        // Critical case: P(G*(u) = t) = M(u, t) P(G(u) = t) exactly.
        for d in [binary(), geo()] {
            let u = 0.5;
            let cap = if d.support_max().is_some() { 2 } else { 8 };
            visit_trees(9, cap, &mut |t| {
                let lhs = gstar_probability(&d, u, t).unwrap();
                let rhs = t.leaf_martingale(&d, u).unwrap() * t.tree_probability(&d, u).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12, "{}", t.serialize());
            })
            .unwrap();
        }
    }

    #[test]
    fn gstar_law_matches_exact_probabilities() {
        let d = binary();
        let u = 0.5;
        let mut rng = rng_from_seed(8);
        let n = 50_000;
        let mut emp = EmpiricalLaw::new();
        for _ in 0..n {
            let t = sample_gstar(&d, u, &mut rng).unwrap();
            let key = if t.num_nodes() <= 5 {
                t.serialize()
            } else {
                "OTHER".to_string()
            };
            emp.observe(key);
        }
        let mut exact = std::collections::BTreeMap::new();
        let mut covered = 0.0;
        visit_trees(5, 2, &mut |t| {
            let p = gstar_probability(&d, u, t).unwrap();
            if p > 0.0 {
                exact.insert(t.serialize(), p);
                covered += p;
            }
        })
        .unwrap();
        exact.insert("OTHER".to_string(), 1.0 - covered);
        let tv = total_variation(&emp.probabilities().unwrap(), &exact);
        assert!(tv < 0.015, "tv = {tv}");
    }

    #[test]
    fn spined_tree_serialization_roundtrip() {
        let s = SpinedTree::new(FiniteTree::cherry(), vec![1]).unwrap();
        assert_eq!(s.serialize(), "(()()) spine:[1]");
        assert_eq!(SpinedTree::parse("(()()) spine:[1]").unwrap(), s);
        let root = SpinedTree::new(FiniteTree::leaf(), vec![]).unwrap();
        assert_eq!(SpinedTree::parse("() spine:[]").unwrap(), root);
        assert!(SpinedTree::parse("(()()) spine:[3]").is_err());
        assert!(SpinedTree::new(FiniteTree::cherry(), vec![5]).is_err());
    }
}
