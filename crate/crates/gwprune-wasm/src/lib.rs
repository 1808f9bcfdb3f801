//! Browser demo bindings: three interactive views over the core crate.
//!
//! 1. A pruning-process explorer — one marked terminal tree whose cut at any
//!    `u` in `[0, 1]` is recomputed as a slider moves.
//! 2. The scalar curves of the pruning parameter — extinction probability,
//!    conjugate, and ascension-time density over `[0, ū]`.
//! 3. Conditioned-tree samplers — the pruned conditioned tree `G*(u)` and the
//!    height-restricted Kesten tree with its spine.
//!
//! Every export returns a JSON string the page renders onto a canvas; all
//! randomness comes from caller-supplied seeds, so views are reproducible.
//! The `#[wasm_bindgen]` exports are thin wrappers over plain `Result`
//! functions, which is also what the host-side tests exercise.

use gwprune::kesten::{sample_gstar, sample_kesten};
use gwprune::prune::{attach_marks, sample_gw, MarkedTree, SampleBudget};
use gwprune::rng::rng_from_seed;
use gwprune::tree::NodeAddress;
use gwprune::{FiniteTree, OffspringDistribution, Result};
use wasm_bindgen::prelude::*;

fn to_js(e: gwprune::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Tidy layout: leaves at consecutive x positions, parents centered over
/// their children, depth as y. Spine nodes (when given) are flagged.
fn layout_json(tree: &FiniteTree, spine: &[NodeAddress]) -> serde_json::Value {
    #[derive(Clone)]
    struct Node {
        x: f64,
        y: usize,
        parent: Option<usize>,
        leaf: bool,
        spine: bool,
    }
    let mut nodes: Vec<Node> = Vec::with_capacity(tree.num_nodes());
    let mut next_leaf_x = 0.0;
    fn place(
        t: &FiniteTree,
        addr: &NodeAddress,
        depth: usize,
        parent: Option<usize>,
        spine: &[NodeAddress],
        nodes: &mut Vec<Node>,
        next_leaf_x: &mut f64,
    ) -> usize {
        let id = nodes.len();
        nodes.push(Node {
            x: 0.0,
            y: depth,
            parent,
            leaf: t.is_leaf(),
            spine: spine.contains(addr),
        });
        if t.is_leaf() {
            nodes[id].x = *next_leaf_x;
            *next_leaf_x += 1.0;
        } else {
            let mut first = f64::MAX;
            let mut last = f64::MIN;
            for (i, child) in t.children().iter().enumerate() {
                let child_addr = addr.child(i as u32 + 1);
                let cid = place(
                    child,
                    &child_addr,
                    depth + 1,
                    Some(id),
                    spine,
                    nodes,
                    next_leaf_x,
                );
                first = first.min(nodes[cid].x);
                last = last.max(nodes[cid].x);
            }
            nodes[id].x = 0.5 * (first + last);
        }
        id
    }
    place(
        tree,
        &NodeAddress::root(),
        0,
        None,
        spine,
        &mut nodes,
        &mut next_leaf_x,
    );
    serde_json::json!({
        "width": next_leaf_x.max(1.0),
        "height": tree.height(),
        "num_nodes": tree.num_nodes(),
        "num_leaves": tree.num_leaves(),
        "nodes": nodes
            .iter()
            .map(|n| {
                serde_json::json!({
                    "x": n.x,
                    "y": n.y,
                    "parent": n.parent,
                    "leaf": n.leaf,
                    "spine": n.spine,
                })
            })
            .collect::<Vec<_>>(),
    })
}

/// One realization of the coupled pruning process: a marked terminal tree
/// whose cut at any `u` is deterministic and monotone.
#[wasm_bindgen]
pub struct PruningProcess {
    dist: OffspringDistribution,
    marked: MarkedTree,
    truncated: bool,
}

impl PruningProcess {
    /// Samples a critical terminal tree `G(1)` (capped) and draws one cut
    /// mark per inner node.
    pub fn build(dist: &str, seed: u64, node_cap: usize) -> Result<PruningProcess> {
        let d = OffspringDistribution::parse_literal(dist)?;
        let mut rng = rng_from_seed(seed);
        let budget = SampleBudget::default()
            .with_node_cap(node_cap.max(2))
            .with_height_cap(40);
        let sampled = sample_gw(&d, 1.0, budget, &mut rng)?;
        let truncated = sampled.is_truncated();
        let marked = attach_marks(sampled.tree(), 1.0, &mut rng)?;
        Ok(PruningProcess {
            dist: d,
            marked,
            truncated,
        })
    }

    /// Layout of the cut tree at `u`, with summary statistics.
    pub fn layout_at(&self, u: f64) -> Result<String> {
        let cut = self.marked.cut_at(u.clamp(0.0, 1.0))?;
        let mut value = layout_json(&cut, &[]);
        let martingale = cut
            .leaf_martingale(&self.dist, u.clamp(0.0, 0.999_999))
            .ok();
        value["martingale"] = serde_json::json!(martingale);
        value["truncated"] = serde_json::json!(self.truncated);
        Ok(value.to_string())
    }
}

#[wasm_bindgen]
impl PruningProcess {
    #[wasm_bindgen(constructor)]
    pub fn new(
        dist: &str,
        seed: u64,
        node_cap: usize,
    ) -> std::result::Result<PruningProcess, JsError> {
        PruningProcess::build(dist, seed, node_cap).map_err(to_js)
    }

    pub fn tree_at(&self, u: f64) -> std::result::Result<String, JsError> {
        self.layout_at(u).map_err(to_js)
    }

    /// Layout of the terminal tree (the cut at `u = 1`).
    pub fn terminal(&self) -> std::result::Result<String, JsError> {
        self.layout_at(1.0).map_err(to_js)
    }
}

/// Scalar curves on `[0, ū]`: extinction probability `F`, conjugate
/// `û = uF(u)`, pruned mean `μ(u)`, and the ascension density `-F'` on
/// `(1, ū)`. Returns `{ubar, points: [{u, f, uhat, mean, density}]}`.
pub fn curve_json(dist: &str, points: usize) -> Result<String> {
    let d = OffspringDistribution::parse_literal(dist)?;
    let ub = d.max_parameter();
    if !ub.is_finite() {
        return Err(gwprune::Error::Domain(
            "this law has no finite ū to plot".into(),
        ));
    }
    let n = points.clamp(2, 4096);
    let mut rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let u = ub * i as f64 / n as f64;
        let f = d.extinction_probability(u)?;
        let density = if 1.0 < u && u < ub {
            d.ascension_density(u).ok()
        } else {
            None
        };
        rows.push(serde_json::json!({
            "u": u,
            "f": f,
            "uhat": u * f,
            "mean": d.mean_at(u).ok(),
            "density": density,
        }));
    }
    Ok(serde_json::json!({ "ubar": ub, "critical": d.is_critical(), "points": rows }).to_string())
}

#[wasm_bindgen]
pub fn extinction_curve(dist: &str, points: usize) -> std::result::Result<String, JsError> {
    curve_json(dist, points).map_err(to_js)
}

/// Layout of one draw of the pruned conditioned tree `G*(u)`, `u < 1`.
pub fn gstar_json(dist: &str, u: f64, seed: u64) -> Result<String> {
    let d = OffspringDistribution::parse_literal(dist)?;
    let mut rng = rng_from_seed(seed);
    let tree = sample_gstar(&d, u, &mut rng)?;
    Ok(layout_json(&tree, &[]).to_string())
}

#[wasm_bindgen]
pub fn gstar_layout(dist: &str, u: f64, seed: u64) -> std::result::Result<String, JsError> {
    gstar_json(dist, u, seed).map_err(to_js)
}

/// Layout of one height-restricted Kesten tree with its spine flagged.
pub fn kesten_json(dist: &str, height: usize, seed: u64) -> Result<String> {
    let d = OffspringDistribution::parse_literal(dist)?;
    let mut rng = rng_from_seed(seed);
    let spined = sample_kesten(&d, height.min(12), &mut rng)?;
    Ok(layout_json(spined.tree(), &spined.spine_addresses()).to_string())
}

#[wasm_bindgen]
pub fn kesten_layout(dist: &str, height: usize, seed: u64) -> std::result::Result<String, JsError> {
    kesten_json(dist, height, seed).map_err(to_js)
}
