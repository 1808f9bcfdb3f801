//! Finite rooted ordered trees in Neveu addressing.
//!
//! A node is addressed by the sequence of child labels (1-based) leading to it
//! from the root; the root is the empty sequence. A tree is a value: an
//! ordered sequence of child subtrees at every node. Trees serialize to
//! balanced-parentheses words — each node emits `(`, its children in order,
//! then `)` — which is a bijection onto balanced words with one outer pair.

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;

/// Address of a node: child labels from the root, each `>= 1`. The empty
/// address is the root; the length is the node's generation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NodeAddress(Vec<u32>);

impl NodeAddress {
    pub fn root() -> Self {
        NodeAddress(Vec::new())
    }

    pub fn from_labels(labels: Vec<u32>) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::domain("node labels are 1-based"));
        }
        Ok(NodeAddress(labels))
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    /// Generation `|w|`.
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Address of the parent, or `None` at the root.
    pub fn parent(&self) -> Option<NodeAddress> {
        if self.0.is_empty() {
            None
        } else {
            Some(NodeAddress(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, label: u32) -> NodeAddress {
        let mut labels = self.0.clone();
        labels.push(label);
        NodeAddress(labels)
    }
}

impl std::fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "root");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A finite rooted ordered tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteTree {
    children: Vec<FiniteTree>,
}

impl FiniteTree {
    /// The tree consisting of the root alone.
    pub fn leaf() -> Self {
        FiniteTree {
            children: Vec::new(),
        }
    }

    pub fn with_children(children: Vec<FiniteTree>) -> Self {
        FiniteTree { children }
    }

    /// Root with two leaf children.
    pub fn cherry() -> Self {
        FiniteTree::with_children(vec![FiniteTree::leaf(), FiniteTree::leaf()])
    }

    pub fn children(&self) -> &[FiniteTree] {
        &self.children
    }

    /// Number of children of the root (`k_∅`).
    pub fn arity(&self) -> usize {
        self.children.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Total number of nodes `#t`.
    pub fn num_nodes(&self) -> usize {
        let mut count = 0;
        self.for_each(|_, _| count += 1);
        count
    }

    /// Number of leaves `#L(t)`.
    pub fn num_leaves(&self) -> usize {
        let mut count = 0;
        self.for_each(|t, _| {
            if t.is_leaf() {
                count += 1;
            }
        });
        count
    }

    /// Number of inner (non-leaf) nodes.
    pub fn num_inner(&self) -> usize {
        self.num_nodes() - self.num_leaves()
    }

    /// Height `|t| = max |ν|`.
    pub fn height(&self) -> usize {
        let mut h = 0;
        self.for_each(|_, depth| h = h.max(depth));
        h
    }

    /// Size of generation `n` (`Z_n`).
    pub fn generation_size(&self, n: usize) -> usize {
        let mut count = 0;
        self.for_each(|_, depth| {
            if depth == n {
                count += 1;
            }
        });
        count
    }

    /// Restriction `r_h t`: all nodes of height at most `h`.
    pub fn restrict(&self, h: usize) -> FiniteTree {
        if h == 0 {
            return FiniteTree::leaf();
        }
        FiniteTree::with_children(self.children.iter().map(|c| c.restrict(h - 1)).collect())
    }

    /// Shifted subtree `T_ν t` above the node at `addr`.
    pub fn subtree(&self, addr: &NodeAddress) -> Result<&FiniteTree> {
        let mut node = self;
        for &label in addr.labels() {
            node = node
                .children
                .get(label as usize - 1)
                .ok_or_else(|| Error::domain(format!("address {addr} not in tree")))?;
        }
        Ok(node)
    }

    /// Visits every node with its depth, in depth-first preorder, children in
    /// label order. Iterative so deep trees cannot overflow the stack.
    pub fn for_each<'a>(&'a self, mut f: impl FnMut(&'a FiniteTree, usize)) {
        let mut stack: Vec<(&FiniteTree, usize)> = vec![(self, 0)];
        while let Some((node, depth)) = stack.pop() {
            f(node, depth);
            for child in node.children.iter().rev() {
                stack.push((child, depth + 1));
            }
        }
    }

    /// Visits every node with its address, preorder.
    pub fn for_each_addressed(&self, mut f: impl FnMut(&FiniteTree, &NodeAddress)) {
        let mut stack: Vec<(&FiniteTree, NodeAddress)> = vec![(self, NodeAddress::root())];
        while let Some((node, addr)) = stack.pop() {
            for (i, child) in node.children.iter().enumerate().rev() {
                stack.push((child, addr.child(i as u32 + 1)));
            }
            f(node, &addr);
        }
    }

    /// Addresses of the leaves, in address order.
    pub fn leaf_addresses(&self) -> Vec<NodeAddress> {
        let mut out = Vec::new();
        self.for_each_addressed(|t, addr| {
            if t.is_leaf() {
                out.push(addr.clone());
            }
        });
        out
    }

    /// Whether `self` is a subtree (prefix) of `other`: every node of `self`
    /// exists in `other`, and every node keeps either all of its children or
    /// none of them. This is exactly reachability by node pruning.
    pub fn is_pruning_of(&self, other: &FiniteTree) -> bool {
        if self.children.is_empty() {
            return true;
        }
        if self.children.len() != other.children.len() {
            return false;
        }
        self.children
            .iter()
            .zip(&other.children)
            .all(|(a, b)| a.is_pruning_of(b))
    }

    /// `P(G^(u) = t)`: product of `p_k^(u)` over all nodes of `t`.
    pub fn tree_probability(&self, d: &OffspringDistribution, u: f64) -> Result<f64> {
        let pruned = d.prune_distribution(u)?;
        let mut prod = 1.0;
        self.for_each(|t, _| prod *= pruned.prob(t.arity()));
        Ok(prod)
    }

    /// Probability that the restriction `r_h` of a Galton-Watson tree equals
    /// `r_h t`: product of `p_k^(u)` over the nodes of `t` of height `< h`.
    pub fn restricted_class_probability(
        &self,
        d: &OffspringDistribution,
        u: f64,
        h: usize,
    ) -> Result<f64> {
        if h > self.height() + 1 {
            return Err(Error::domain(format!(
                "restriction height {h} exceeds tree height {} + 1",
                self.height()
            )));
        }
        let pruned = d.prune_distribution(u)?;
        let mut prod = 1.0;
        self.for_each(|t, depth| {
            if depth < h {
                prod *= pruned.prob(t.arity());
            }
        });
        Ok(prod)
    }

    /// The leaf martingale `M(u, t) = (1 - μ(u)) #L(t) / p_0^(u)`, defined
    /// below the critical horizon.
    pub fn leaf_martingale(&self, d: &OffspringDistribution, u: f64) -> Result<f64> {
        if u >= d.critical_horizon() {
            return Err(Error::domain(format!(
                "martingale defined below the critical horizon {}",
                d.critical_horizon()
            )));
        }
        let p0 = d.pruned_p0(u)?;
        if p0 <= 0.0 {
            return Err(Error::domain(format!(
                "p_0^({u}) = 0: martingale undefined"
            )));
        }
        let mu = d.mean_at(u)?;
        Ok((1.0 - mu) * self.num_leaves() as f64 / p0)
    }

    /// The weight `Σ_{ν in L(t)} μ(1)^-(|ν|+1)` appearing in the law of the
    /// pruned conditioned tree; equals `#L(t)` in the critical case.
    pub fn kesten_weight(&self, d: &OffspringDistribution) -> Result<f64> {
        let mu = d.mean();
        if mu <= 0.0 {
            return Err(Error::domain("kesten weight needs a positive mean"));
        }
        let mut total = 0.0;
        self.for_each(|t, depth| {
            if t.is_leaf() {
                total += mu.powi(-(depth as i32 + 1));
            }
        });
        Ok(total)
    }

    /// Balanced-parentheses serialization.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(2 * self.num_nodes());
        // Preorder with explicit closing markers.
        enum Step<'a> {
            Open(&'a FiniteTree),
            Close,
        }
        let mut stack = vec![Step::Open(self)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(node) => {
                    out.push('(');
                    stack.push(Step::Close);
                    for child in node.children.iter().rev() {
                        stack.push(Step::Open(child));
                    }
                }
                Step::Close => out.push(')'),
            }
        }
        out
    }

    /// Parses a balanced-parentheses word with one outer pair.
    pub fn parse(s: &str) -> Result<FiniteTree> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::parse("empty tree string"));
        }
        let mut stack: Vec<Vec<FiniteTree>> = Vec::new();
        let mut done: Option<FiniteTree> = None;
        for (i, ch) in s.chars().enumerate() {
            if done.is_some() {
                return Err(Error::parse(format!("trailing input at byte {i}")));
            }
            match ch {
                '(' => stack.push(Vec::new()),
                ')' => {
                    let children = stack
                        .pop()
                        .ok_or_else(|| Error::parse(format!("unmatched `)` at byte {i}")))?;
                    let node = FiniteTree::with_children(children);
                    match stack.last_mut() {
                        Some(parent) => parent.push(node),
                        None => done = Some(node),
                    }
                }
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::parse(format!(
                        "unexpected character `{c}` at byte {i}"
                    )))
                }
            }
        }
        done.ok_or_else(|| Error::parse("unbalanced tree string"))
    }

    /// Parses the JSON nested-array form: `[]` is a leaf, `[[],[]]` a cherry.
    pub fn parse_json(s: &str) -> Result<FiniteTree> {
        let value: serde_json::Value =
            serde_json::from_str(s).map_err(|e| Error::parse(format!("invalid JSON: {e}")))?;
        fn build(v: &serde_json::Value) -> Result<FiniteTree> {
            match v {
                serde_json::Value::Array(items) => Ok(FiniteTree::with_children(
                    items.iter().map(build).collect::<Result<Vec<_>>>()?,
                )),
                other => Err(Error::parse(format!("expected array, got {other}"))),
            }
        }
        build(&value)
    }

    /// JSON nested-array serialization.
    pub fn to_json(&self) -> String {
        let mut out = String::with_capacity(2 * self.num_nodes());
        fn emit(t: &FiniteTree, out: &mut String) {
            out.push('[');
            for (i, c) in t.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                emit(c, out);
            }
            out.push(']');
        }
        emit(self, &mut out);
        out
    }
}

impl Drop for FiniteTree {
    fn drop(&mut self) {
        // Flatten iteratively; the default recursive drop overflows the stack
        // on long unary chains.
        if self.children.is_empty() {
            return;
        }
        let mut stack = std::mem::take(&mut self.children);
        while let Some(mut node) = stack.pop() {
            stack.append(&mut node.children);
        }
    }
}

impl std::fmt::Display for FiniteTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl std::str::FromStr for FiniteTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FiniteTree::parse(s)
    }
}
