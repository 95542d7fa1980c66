//! Partial permutation synchronization.
//!
//! Multi-image keypoint matching produces a viewing graph: one node per
//! image, one edge per matched image pair, and on each edge a *partial
//! permutation* block that pairs up some keypoints of one image with some
//! keypoints of the other. Real pipelines corrupt a fraction of those
//! blocks. This crate estimates which edges are corrupted and recovers
//! absolute image-to-universe assignments that are consistent along the
//! whole graph.
//!
//! The pieces, bottom to top:
//!
//! * [`sparse`]: 0/1 partial permutation blocks and a sparse nonnegative
//!   accumulator, with the handful of exact operations everything else is
//!   built from (composition, transposition, dominance, triple-product
//!   trace).
//! * [`graph`]: the viewing graph, co-neighborhoods, and a deterministic
//!   minimum spanning tree.
//! * [`cycle`]: the triangle inconsistency measure. For a 3-cycle it
//!   compares the number of two-hop match paths against the number of
//!   closed loops; corrupted edges leave loops open.
//! * [`cemp`]: CEMP-Partial, the message-passing estimator that turns
//!   per-triangle inconsistencies into per-edge corruption levels.
//! * [`solver`]: MatchFAME (spanning-tree initialization plus weighted
//!   projected power iterations), the unweighted PPM and dense spectral
//!   baselines, and the projection operators they share.
//! * [`synth`]: synthetic problem generator with three corruption models
//!   (uniform, locally biased, locally adversarial).
//! * [`eval`]: precision/recall, ground-truth corruption levels, and
//!   verifiable checks for the estimator's separation guarantees.
//!
//! # Quick start
//!
//! ```
//! use permsync_core::synth::{generate, CorruptionModel, SynthConfig};
//! use permsync_core::solver::{match_fame, SolverConfig};
//! use permsync_core::eval::precision_recall;
//!
//! let cfg = SynthConfig {
//!     nodes: 20,
//!     universe: 8,
//!     edge_prob: 0.5,
//!     keypoint_prob: 0.8,
//!     model: CorruptionModel::Uniform { fraction: 0.3 },
//!     seed: 7,
//! };
//! let inst = generate(&cfg).unwrap();
//! let out = match_fame(&inst.graph, &SolverConfig::default()).unwrap();
//! let metrics = precision_recall(&inst, &out.matches).unwrap();
//! assert!(metrics.precision > 0.5);
//! ```

pub mod cemp;
pub mod cycle;
pub mod eval;
pub mod graph;
mod rng;
pub mod solver;
pub mod sparse;
pub mod synth;

pub use cemp::{cemp_partial, BetaSchedule, CempConfig, CorruptionEstimates};
pub use cycle::{all_inconsistencies, CycleInconsistencies, CycleStats};
pub use eval::{precision_recall, theorem_quantities, MatchMetrics, TheoremReport};
pub use graph::{minimum_spanning_tree, EdgeWeights, ViewingGraph};
pub use solver::{match_fame, AbsoluteAssignment, FameOutput, SolverConfig};
pub use sparse::{PartialPermutation, SparseNonnegMatrix};
pub use synth::{generate, CorruptionModel, EdgeLabel, SynthConfig, SynthInstance};
