//! Pruned Galton-Watson trees and the tree-valued Markov processes they generate.
//!
//! A Galton-Watson tree with offspring distribution `p` can be pruned at its
//! nodes: an inner node with `k` children keeps its subtrees with probability
//! `u^(k-1)`, independently of everything else. The pruned tree is again a
//! Galton-Watson tree, with offspring distribution `p^(u)` given by
//! `p_k^(u) = u^(k-1) p_k` for `k >= 1`. Attaching one cut mark per inner node
//! couples all pruning parameters at once and turns the family
//! `{G(u), 0 <= u <= ū}` into a non-decreasing tree-valued Markov process,
//! sub-critical below `u = 1` and super-critical above it.
//!
//! The crate provides, in matching modules:
//!
//! - [`offspring`] — offspring-distribution families and the scalar functions
//!   of the pruning parameter: `p^(u)`, the generating function `g_u`, the
//!   mean `μ(u)`, the largest parameter `ū`, the extinction probability
//!   `F(u)`, its conjugate `û = u·F(u)`, and the ascension-time density.
//! - [`tree`] — finite rooted ordered trees, structural queries, exact tree
//!   probabilities, the leaf martingale `M(u,t)`, and serialization.
//! - [`prune`] — pruning a fixed tree, the coupled mark process, Galton-Watson
//!   samplers, the forward grafting kernel, and transition rates.
//! - [`kesten`] — the tree conditioned on non-extinction (Kesten tree) via its
//!   spine decomposition, and the pruned conditioned process `G*(u)`.
//! - [`ascension`] — the ascension process: exact ascension-time sampling,
//!   conditioning on finiteness, grid simulation with an absorbing infinite
//!   state, and both sides of the representation identity.
//! - [`oracle`] — brute-force ground truth: exhaustive enumeration of small
//!   trees, exact law tables, leaf-count laws, and the leaf-conditioning
//!   verifier.
//! - [`stats`] — Monte Carlo comparators: total variation, chi-square,
//!   Kolmogorov-Smirnov, and martingale-increment reports.
//! - [`verify`] — named verification suites combining all of the above.

pub mod ascension;
pub mod error;
pub mod kesten;
pub mod offspring;
pub mod oracle;
pub mod prune;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use offspring::{OffspringDistribution, PruningParameter, Regime};
pub use tree::{FiniteTree, NodeAddress};
