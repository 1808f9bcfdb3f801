//! Node pruning, the coupled mark process, and Galton-Watson samplers.
//!
//! Pruning a fixed tree at parameter `u` keeps the children of an inner node
//! with `k` children with probability `u^(k-1)`, independently across nodes;
//! a node survives when all of its strict ancestors kept their children.
//! Drawing one mark `ξ_ν` per inner node with `P(ξ_ν <= u) = u^(k-1)` couples
//! every parameter at once: `cut_at` is then deterministic and monotone in
//! `u`, which is the tree-valued process itself.
//!
//! Growing the process forward from `α` to `β` works by grafting: every leaf
//! receives an independent modified Galton-Watson tree whose first generation
//! has the bridge law `p_{α,β}` and whose later generations are plain
//! `p^(β)`. The grafting kernel yields explicit transition probabilities and,
//! in the limit, the transition rates exposed here.

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::rng::Prng;
use crate::tree::{FiniteTree, NodeAddress};
use rand::Rng;

/// Caps for samplers that may produce arbitrarily large trees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleBudget {
    pub height_cap: Option<usize>,
    pub node_cap: Option<usize>,
}

impl SampleBudget {
    pub fn unlimited() -> Self {
        SampleBudget::default()
    }

    pub fn with_node_cap(mut self, cap: usize) -> Self {
        self.node_cap = Some(cap);
        self
    }

    pub fn with_height_cap(mut self, cap: usize) -> Self {
        self.height_cap = Some(cap);
        self
    }

    pub fn is_unlimited(&self) -> bool {
        self.height_cap.is_none() && self.node_cap.is_none()
    }

    fn validate(&self) -> Result<()> {
        if self.node_cap == Some(0) || self.height_cap == Some(0) {
            return Err(Error::domain("sample budget caps must be positive"));
        }
        Ok(())
    }
}

/// A sampled tree, tagged when a budget cap altered the realization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sampled {
    Complete(FiniteTree),
    Truncated(FiniteTree),
}

impl Sampled {
    pub fn tree(&self) -> &FiniteTree {
        match self {
            Sampled::Complete(t) | Sampled::Truncated(t) => t,
        }
    }

    pub fn into_tree(self) -> FiniteTree {
        match self {
            Sampled::Complete(t) | Sampled::Truncated(t) => t,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Sampled::Truncated(_))
    }
}

/// Iterative rebuild shared by `prune_once` and `cut_at`: a node whose
/// `expand` call returns false becomes a leaf, otherwise its children are
/// processed in order. `expand` is invoked exactly once per surviving node,
/// in depth-first preorder.
fn build_pruned<'a, N, C, D>(root: &'a N, children: C, mut expand: D) -> FiniteTree
where
    C: Fn(&'a N) -> &'a [N],
    D: FnMut(&'a N) -> bool,
{
    if !expand(root) {
        return FiniteTree::leaf();
    }
    let mut stack: Vec<(&'a N, Vec<FiniteTree>)> = Vec::new();
    let mut cur = (root, Vec::with_capacity(children(root).len()));
    loop {
        let idx = cur.1.len();
        let kids = children(cur.0);
        if idx == kids.len() {
            let node = FiniteTree::with_children(std::mem::take(&mut cur.1));
            match stack.pop() {
                None => return node,
                Some(mut parent) => {
                    parent.1.push(node);
                    cur = parent;
                }
            }
        } else {
            let child = &kids[idx];
            if expand(child) {
                stack.push(std::mem::replace(
                    &mut cur,
                    (child, Vec::with_capacity(children(child).len())),
                ));
            } else {
                cur.1.push(FiniteTree::leaf());
            }
        }
    }
}

/// One node pruning of `t` at parameter `u in [0, 1]`: each inner node with
/// `k` children keeps them with probability `u^(k-1)` (unary nodes always
/// do), and a node survives when every strict ancestor kept its children.
pub fn prune_once(t: &FiniteTree, u: f64, rng: &mut Prng) -> Result<FiniteTree> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!(
            "pruning parameter {u} outside [0, 1]"
        )));
    }
    Ok(build_pruned(t, FiniteTree::children, |node| {
        let k = node.arity();
        k == 1 || (k > 1 && rng.random::<f64>() < u.powi(k as i32 - 1))
    }))
}

/// A finite tree together with one cut mark per inner node: node `ν` keeps
/// its children at parameter `u` exactly when `scale · ξ_ν <= u`. Cutting is
/// deterministic given the marks and monotone in `u`, so one marked tree
/// encodes an entire pruning-process path on `[0, scale]`.
#[derive(Debug, Clone)]
pub struct MarkedTree {
    root: MarkedNode,
    scale: f64,
}

#[derive(Debug, Clone)]
struct MarkedNode {
    /// Cut mark in [0, 1]; meaningful on inner nodes only, zero on unary
    /// nodes (they are never pruned).
    mark: f64,
    children: Vec<MarkedNode>,
}

/// Draws the marks of a pruning process for `t`: inner nodes with `k >= 2`
/// children get `ξ_ν = U^(1/(k-1))` (so `P(scale ξ_ν <= u) = (u/scale)^(k-1)`),
/// unary nodes get `ξ_ν = 0`.
pub fn attach_marks(t: &FiniteTree, scale: f64, rng: &mut Prng) -> Result<MarkedTree> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::domain(format!(
            "mark scale {scale} must be positive"
        )));
    }
    // Preorder, children in label order, matching `prune_once`. Recursion
    // depth equals the tree height.
    fn mark_node(t: &FiniteTree, rng: &mut Prng) -> MarkedNode {
        let mark = match t.arity() {
            0 | 1 => 0.0,
            k => rng.random::<f64>().powf(1.0 / (k as f64 - 1.0)),
        };
        MarkedNode {
            mark,
            children: t.children().iter().map(|c| mark_node(c, rng)).collect(),
        }
    }
    Ok(MarkedTree {
        root: mark_node(t, rng),
        scale,
    })
}

impl MarkedTree {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The tree `T(u)` of the coupled process: keeps the nodes all of whose
    /// strict ancestors `ν` satisfy `scale · ξ_ν <= u`.
    pub fn cut_at(&self, u: f64) -> Result<FiniteTree> {
        if !(0.0..=self.scale).contains(&u) {
            return Err(Error::domain(format!(
                "cut parameter {u} outside [0, {}]",
                self.scale
            )));
        }
        Ok(build_pruned(
            &self.root,
            |n: &MarkedNode| n.children.as_slice(),
            |n| !n.children.is_empty() && self.scale * n.mark <= u,
        ))
    }

    /// The terminal tree `T(scale)`, i.e. the tree the marks were drawn for.
    pub fn terminal_tree(&self) -> FiniteTree {
        self.cut_at(self.scale)
            .expect("scale is always a valid cut parameter")
    }

    /// Mark of the node at `addr` (zero on leaves and unary nodes).
    pub fn mark_at(&self, addr: &NodeAddress) -> Result<f64> {
        let mut node = &self.root;
        for &label in addr.labels() {
            node = node
                .children
                .get(label as usize - 1)
                .ok_or_else(|| Error::domain(format!("address {addr} not in tree")))?;
        }
        Ok(node.mark)
    }
}

/// Samples a Galton-Watson tree whose offspring law is `law` itself,
/// breadth-first. A super-critical law requires a budget, since the tree is
/// infinite with positive probability.
pub fn sample_gw_law(
    law: &OffspringDistribution,
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<Sampled> {
    budget.validate()?;
    if law.mean() > 1.0 + 1e-12 && budget.is_unlimited() {
        return Err(Error::domain(
            "sampling a super-critical law requires a node or height cap",
        ));
    }
    let mut arities: Vec<usize> = Vec::new();
    let mut depths: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    depths.push_back(0);
    let mut total = 1usize;
    let mut truncated = false;
    let mut exhausted = false;
    while let Some(depth) = depths.pop_front() {
        let k = if exhausted {
            0
        } else {
            let mut k = law.sample_arity(rng);
            if k > 0 && budget.height_cap.is_some_and(|h| depth >= h) {
                truncated = true;
                k = 0;
            }
            if k > 0 && budget.node_cap.is_some_and(|cap| total + k > cap) {
                truncated = true;
                exhausted = true;
                k = 0;
            }
            k
        };
        arities.push(k);
        total += k;
        for _ in 0..k {
            depths.push_back(depth + 1);
        }
    }
    let tree = tree_from_bfs_arities(&arities);
    Ok(if truncated {
        Sampled::Truncated(tree)
    } else {
        Sampled::Complete(tree)
    })
}

/// Samples `G(u)`, a Galton-Watson tree with offspring law `p^(u)`.
pub fn sample_gw(
    d: &OffspringDistribution,
    u: f64,
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<Sampled> {
    sample_gw_law(&d.prune_distribution(u)?, budget, rng)
}

fn tree_from_bfs_arities(arities: &[usize]) -> FiniteTree {
    let n = arities.len();
    let mut child_start = vec![0usize; n];
    let mut next = 1usize;
    for i in 0..n {
        child_start[i] = next;
        next += arities[i];
    }
    let mut slots: Vec<Option<FiniteTree>> = vec![None; n];
    for i in (0..n).rev() {
        let children: Vec<FiniteTree> = (child_start[i]..child_start[i] + arities[i])
            .map(|j| slots[j].take().expect("children built before parents"))
            .collect();
        slots[i] = Some(FiniteTree::with_children(children));
    }
    slots[0].take().expect("root")
}

/// Samples the modified Galton-Watson tree `G_{α,β}`: the first generation
/// has the bridge law `p_{α,β}`, later generations are plain `p^(β)`.
/// The budget applies to each first-generation subtree separately.
pub fn sample_modified_gw(
    d: &OffspringDistribution,
    alpha: f64,
    beta: f64,
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<Sampled> {
    let bridge = d.bridge_distribution(alpha, beta)?;
    let pruned = d.prune_distribution(beta)?;
    if pruned.mean() > 1.0 + 1e-12 && budget.is_unlimited() {
        return Err(Error::domain(
            "sampling a super-critical law requires a node or height cap",
        ));
    }
    let sub_budget = SampleBudget {
        height_cap: budget.height_cap.map(|h| h.saturating_sub(1).max(1)),
        node_cap: budget.node_cap,
    };
    let n = bridge.sample_arity(rng);
    let mut truncated = false;
    let mut children = Vec::with_capacity(n);
    for _ in 0..n {
        let sub = sample_gw_law(&pruned, sub_budget, rng)?;
        truncated |= sub.is_truncated();
        children.push(sub.into_tree());
    }
    let tree = FiniteTree::with_children(children);
    Ok(if truncated {
        Sampled::Truncated(tree)
    } else {
        Sampled::Complete(tree)
    })
}

/// Grows the process from `α` to `β`: attaches an independent modified
/// Galton-Watson tree at every leaf of `t_alpha`. The pair
/// `(t_alpha, result)` is distributed like `(G(α), G(β))`.
pub fn graft_forward(
    t_alpha: &FiniteTree,
    d: &OffspringDistribution,
    alpha: f64,
    beta: f64,
    budget: SampleBudget,
    rng: &mut Prng,
) -> Result<Sampled> {
    let bridge = d.bridge_distribution(alpha, beta)?;
    let pruned = d.prune_distribution(beta)?;
    if pruned.mean() > 1.0 + 1e-12 && budget.is_unlimited() {
        return Err(Error::domain(
            "sampling a super-critical law requires a node or height cap",
        ));
    }
    let mut truncated = false;
    let tree = replace_leaves(
        t_alpha,
        |rng| {
            let n = bridge.sample_arity(rng);
            let mut children = Vec::with_capacity(n);
            for _ in 0..n {
                let sub = sample_gw_law(&pruned, budget, rng)?;
                truncated |= sub.is_truncated();
                children.push(sub.into_tree());
            }
            Ok(FiniteTree::with_children(children))
        },
        rng,
    )?;
    Ok(if truncated {
        Sampled::Truncated(tree)
    } else {
        Sampled::Complete(tree)
    })
}

/// Rebuilds `t` with every leaf replaced by `f`'s output, leaves visited in
/// address order.
pub(crate) fn replace_leaves(
    t: &FiniteTree,
    mut f: impl FnMut(&mut Prng) -> Result<FiniteTree>,
    rng: &mut Prng,
) -> Result<FiniteTree> {
    if t.is_leaf() {
        return f(rng);
    }
    let mut stack: Vec<(&FiniteTree, Vec<FiniteTree>)> = Vec::new();
    let mut cur = (t, Vec::with_capacity(t.arity()));
    loop {
        let idx = cur.1.len();
        if idx == cur.0.arity() {
            let node = FiniteTree::with_children(std::mem::take(&mut cur.1));
            match stack.pop() {
                None => return Ok(node),
                Some(mut parent) => {
                    parent.1.push(node);
                    cur = parent;
                }
            }
        } else {
            let child = &cur.0.children()[idx];
            if child.is_leaf() {
                cur.1.push(f(rng)?);
            } else {
                stack.push(std::mem::replace(
                    &mut cur,
                    (child, Vec::with_capacity(child.arity())),
                ));
            }
        }
    }
}

/// The tree `r(s, ν; t)`: `s` with the subtree `t` grafted at the leaf `ν`
/// (the leaf acquires `t`'s children).
pub fn graft(s: &FiniteTree, leaf: &NodeAddress, t: &FiniteTree) -> Result<FiniteTree> {
    if !s.subtree(leaf)?.is_leaf() {
        return Err(Error::domain(format!("graft target {leaf} is not a leaf")));
    }
    fn rebuild(s: &FiniteTree, labels: &[u32], t: &FiniteTree) -> FiniteTree {
        match labels.split_first() {
            None => t.clone(),
            Some((&first, rest)) => {
                let children = s
                    .children()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        if i == first as usize - 1 {
                            rebuild(c, rest, t)
                        } else {
                            c.clone()
                        }
                    })
                    .collect();
                FiniteTree::with_children(children)
            }
        }
    }
    Ok(rebuild(s, leaf.labels(), t))
}

/// Exact transition probability `P(G(β) = t | G(α) = s)` of the grafting
/// kernel: zero unless `t` refines `s` by grafts at its leaves, otherwise the
/// product over leaves of the modified-tree probabilities.
pub fn transition_probability(
    d: &OffspringDistribution,
    alpha: f64,
    beta: f64,
    s: &FiniteTree,
    t: &FiniteTree,
) -> Result<f64> {
    let bridge = d.bridge_distribution(alpha, beta)?;
    let pruned = d.prune_distribution(beta)?;
    fn walk(
        s: &FiniteTree,
        t: &FiniteTree,
        bridge: &OffspringDistribution,
        pruned: &OffspringDistribution,
    ) -> f64 {
        if s.is_leaf() {
            // The graft at this leaf is the whole subtree of t.
            let mut p = bridge.prob(t.arity());
            for c in t.children() {
                c.for_each(|n, _| p *= pruned.prob(n.arity()));
            }
            return p;
        }
        if s.arity() != t.arity() {
            return 0.0;
        }
        s.children()
            .iter()
            .zip(t.children())
            .map(|(sc, tc)| walk(sc, tc, bridge, pruned))
            .product()
    }
    Ok(walk(s, t, &bridge, &pruned))
}

/// Transition rate at time `u` from `s` to `r(s, ν; t)` for finite `t`:
/// `(k_∅t - 1)/u · P(G(u) = t) / p_0^(u)`.
pub fn transition_rate_finite(
    d: &OffspringDistribution,
    u: f64,
    s: &FiniteTree,
    leaf: &NodeAddress,
    t: &FiniteTree,
) -> Result<f64> {
    if !s.subtree(leaf)?.is_leaf() {
        return Err(Error::domain(format!(
            "{leaf} is not a leaf of the source tree"
        )));
    }
    if t.is_leaf() {
        return Err(Error::domain(
            "rates are defined for grafts other than the root-only tree",
        ));
    }
    let ub = d.max_parameter();
    if !(0.0 < u && u < ub) {
        return Err(Error::domain(format!(
            "rate defined for u in (0, {ub}), got {u}"
        )));
    }
    let p0 = d.pruned_p0(u)?;
    if p0 <= 0.0 {
        return Err(Error::numeric(format!("p_0^({u}) = 0: rate undefined")));
    }
    Ok((t.arity() as f64 - 1.0) / u * t.tree_probability(d, u)? / p0)
}

/// Per-leaf rate at time `u` of jumping to an infinite graft whose first
/// generation has size `k`: `(k-1)/u · (1 - F(u)^k)/p_0^(u) · p_k^(u)`.
/// Zero for `u <= 1`, where the tree cannot become infinite.
pub fn transition_rate_infinite(d: &OffspringDistribution, u: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("infinite-graft rate needs k >= 1"));
    }
    let u = d.param(u)?.value();
    if u <= 1.0 {
        return Ok(0.0);
    }
    let f = d.extinction_probability(u)?;
    let p0 = d.pruned_p0(u)?;
    if p0 <= 0.0 {
        return Err(Error::numeric(format!("p_0^({u}) = 0: rate undefined")));
    }
    let pk = d.prune_distribution(u)?.prob(k);
    Ok((k as f64 - 1.0) / u * (1.0 - f.powi(k as i32)) / p0 * pk)
}

/// Total rate at time `u` of jumping from `s` to the infinite absorbing
/// state: `#L(s)/(u p_0^(u)) · Σ_{k>=2} (k-1) p_k^(u) (1 - F(u)^k)`, with the
/// series summed in closed form through the generating function.
pub fn total_infinite_rate(d: &OffspringDistribution, u: f64, s: &FiniteTree) -> Result<f64> {
    let u = d.param(u)?.value();
    if u <= 1.0 {
        return Ok(0.0);
    }
    let f = d.extinction_probability(u)?;
    let uhat = u * f;
    let p0 = d.pruned_p0(u)?;
    if p0 <= 0.0 {
        return Err(Error::numeric(format!("p_0^({u}) = 0: rate undefined")));
    }
    // Σ (k-1) p_k^(u) (1 - F^k) = g'(u) - g(u)/u - F g'(û) + g(û)/u.
    let series = d.pgf_derivative(u) - d.pgf(u) / u - f * d.pgf_derivative(uhat) + d.pgf(uhat) / u;
    Ok(s.num_leaves() as f64 / (u * p0) * series)
}

/// Expected number of leaves of `G(u)`, `p_0^(u)/(1 - μ(u))`, defined below
/// the critical horizon.
pub fn expected_leaves(d: &OffspringDistribution, u: f64) -> Result<f64> {
    let u = d.param(u)?.value();
    if u >= d.critical_horizon() {
        return Err(Error::domain(format!(
            "expected leaves defined below the critical horizon {}",
            d.critical_horizon()
        )));
    }
    Ok(d.pruned_p0(u)? / (1.0 - d.mean_at(u)?))
}
