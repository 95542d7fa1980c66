//! Solvers that turn pairwise blocks into absolute assignments.
//!
//! The main solver, [`match_fame`], runs in three stages:
//!
//! 1. estimate per-edge corruption with [`crate::cemp`];
//! 2. initialize absolute blocks along a minimum spanning tree of the
//!    corruption estimates ([`mst_initialize`]);
//! 3. refine with weighted projected power iterations
//!    ([`weighted_ppm_step`]), where edge `{i, j}` votes with weight
//!    `exp(-sharpness * s_ij)`.
//!
//! The refinement update for node `i` accumulates `X_ij * P_j` over
//! neighbors and projects the sum back onto partial permutations, all
//! Jacobi style (every node reads the previous iterate). [`ppm_baseline`]
//! is the same loop with uniform weights, and [`spectral_baseline`] (in
//! [`spectral`]) recovers blocks from leading eigenvectors instead.

mod projection;
mod spectral;

pub use projection::{hungarian_project, project_partial};
pub use spectral::{leading_eigenvectors, spectral_baseline, Embedding, SpectralConfig, SpectralOutput};

use crate::cemp::{cemp_with_table, CempConfig, CorruptionEstimates};
use crate::cycle::all_inconsistencies;
use crate::graph::{minimum_spanning_tree, EdgeWeights, GraphError, ViewingGraph};
use crate::rng;
use crate::sparse::{PartialPermutation, SparseError, SparseNonnegMatrix};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("hungarian projection needs a square block, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("universe factor {0} must be a positive finite number")]
    BadUniverseFactor(f64),
    #[error("weight sharpness {0} must be finite and nonnegative")]
    BadSharpness(f64),
    #[error("acceptance threshold {0} must be finite")]
    BadThreshold(f64),
    #[error("assignment block for node {node} has shape {got:?}, expected {expected:?}")]
    AssignmentShape {
        node: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("dense eigensolver failed: {0}")]
    Eigensolver(String),
}

/// Which empty lines of the stacked assignment get a random 1 after the
/// spanning tree pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMode {
    /// Fill universe columns no block has claimed (the default).
    EmptyColumns,
    /// Fill keypoint rows left unassigned. Paired with unnormalized
    /// weights this reproduces the denser variant used on small outdoor
    /// reconstruction sets.
    EmptyRows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub corruption: CempConfig,
    /// Sharpness of the corruption-to-weight map `exp(-sharpness * s)`.
    pub weight_sharpness: f64,
    /// Refinement iteration budget.
    pub max_refinement_steps: usize,
    /// Scores must strictly exceed this to survive projection.
    pub acceptance_threshold: f64,
    /// Universe size as a multiple of the mean keypoint count, rounded up.
    pub universe_factor: f64,
    pub fill: FillMode,
    /// Divide each node's edge weights by their sum before accumulating.
    pub normalize_weights: bool,
    /// Seed for the fill randomness.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            corruption: CempConfig::default(),
            weight_sharpness: 4.0,
            max_refinement_steps: 60,
            acceptance_threshold: 0.25,
            universe_factor: 2.0,
            fill: FillMode::EmptyColumns,
            normalize_weights: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if !self.weight_sharpness.is_finite() || self.weight_sharpness < 0.0 {
            return Err(SolverError::BadSharpness(self.weight_sharpness));
        }
        if !self.acceptance_threshold.is_finite() {
            return Err(SolverError::BadThreshold(self.acceptance_threshold));
        }
        if !self.universe_factor.is_finite() || self.universe_factor <= 0.0 {
            return Err(SolverError::BadUniverseFactor(self.universe_factor));
        }
        Ok(())
    }
}

/// One absolute block per node, mapping its keypoints into a shared
/// universe of `universe_size` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbsoluteAssignment {
    universe_size: usize,
    blocks: Vec<PartialPermutation>,
}

impl AbsoluteAssignment {
    pub fn new(
        universe_size: usize,
        blocks: Vec<PartialPermutation>,
    ) -> Result<Self, SolverError> {
        for (node, b) in blocks.iter().enumerate() {
            if b.cols() != universe_size {
                return Err(SolverError::AssignmentShape {
                    node,
                    expected: (b.rows(), universe_size),
                    got: (b.rows(), b.cols()),
                });
            }
        }
        Ok(Self {
            universe_size,
            blocks,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn node_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, node: usize) -> &PartialPermutation {
        &self.blocks[node]
    }

    pub fn blocks(&self) -> &[PartialPermutation] {
        &self.blocks
    }

    /// The induced pairwise match `P_i * P_j^T`.
    pub fn relative(&self, i: usize, j: usize) -> PartialPermutation {
        self.blocks[i]
            .compose(&self.blocks[j].transpose())
            .expect("assignment blocks share the universe dimension")
    }

    fn check_against(&self, graph: &ViewingGraph) -> Result<(), SolverError> {
        for (node, b) in self.blocks.iter().enumerate() {
            let expected = (graph.keypoint_count(node), self.universe_size);
            if self.blocks.len() != graph.node_count() || b.rows() != expected.0 {
                return Err(SolverError::AssignmentShape {
                    node,
                    expected,
                    got: (b.rows(), b.cols()),
                });
            }
        }
        Ok(())
    }
}

/// Universe size estimate: `factor` times the mean keypoint count per
/// image, both rounded up.
pub fn estimate_universe_size(graph: &ViewingGraph, factor: f64) -> Result<usize, SolverError> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(SolverError::BadUniverseFactor(factor));
    }
    let n = graph.node_count().max(1);
    let mean = graph.total_keypoints().div_ceil(n);
    Ok((factor * mean as f64).ceil() as usize)
}

/// Edge weights `exp(-sharpness * s)` from corruption estimates.
pub fn corruption_weights(
    graph: &ViewingGraph,
    estimates: &CorruptionEstimates,
    sharpness: f64,
) -> Result<EdgeWeights, SolverError> {
    if !sharpness.is_finite() || sharpness < 0.0 {
        return Err(SolverError::BadSharpness(sharpness));
    }
    let values = estimates
        .values()
        .iter()
        .map(|&s| (-sharpness * s).exp())
        .collect();
    Ok(EdgeWeights::new(graph, values)?)
}

/// Spanning-tree initialization of the absolute assignment.
///
/// A minimum spanning tree of the corruption estimates picks the most
/// trusted edges. Estimates alone can order the bottom of the range
/// badly: a clique of edges that corrupt each other consistently scores
/// even lower than honest edges, since honest edges keep a residual from
/// their few contaminated triangles. To keep such cliques out of the
/// tree, each weight carries a tie-break term far below any meaningful
/// estimate gap: the smaller mean incident estimate of the two
/// endpoints. An edge between two distrusted nodes then loses to an edge
/// that enters the distrusted region from a clean node.
///
/// The root gets the identity into the universe, children
/// get `X_child,parent * P_parent` top down; such products are already
/// partial permutations, so the projection the refinement stage would
/// apply is the identity here. Afterwards the empty lines selected by
/// `config.fill` are populated: each empty universe column goes to the
/// lowest free keypoint row, drawing from the seeded stream only to pick
/// among nodes whose lowest free row ties; each empty keypoint row draws
/// its universe column uniformly among those free in its block.
pub fn mst_initialize(
    graph: &ViewingGraph,
    estimates: &CorruptionEstimates,
    config: &SolverConfig,
) -> Result<AbsoluteAssignment, SolverError> {
    config.validate()?;
    let universe = estimate_universe_size(graph, config.universe_factor)?;

    let n = graph.node_count();
    let mut incident_sum = vec![0.0f64; n];
    let mut incident_count = vec![0usize; n];
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let s = estimates.values()[e];
        incident_sum[i] += s;
        incident_count[i] += 1;
        incident_sum[j] += s;
        incident_count[j] += 1;
    }
    let suspicion: Vec<f64> = (0..n)
        .map(|v| {
            if incident_count[v] == 0 {
                0.0
            } else {
                incident_sum[v] / incident_count[v] as f64
            }
        })
        .collect();
    const TIE_SCALE: f64 = 1e-9;
    let tree_values: Vec<f64> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| {
            estimates.values()[e] + TIE_SCALE * suspicion[i].min(suspicion[j])
        })
        .collect();
    let weights = EdgeWeights::new(graph, tree_values)?;
    let tree = minimum_spanning_tree(graph, &weights)?;

    let mut blocks: Vec<PartialPermutation> = (0..n)
        .map(|i| PartialPermutation::empty(graph.keypoint_count(i), universe))
        .collect();
    blocks[tree.root] = PartialPermutation::identity(graph.keypoint_count(tree.root), universe);
    for step in &tree.steps {
        blocks[step.child] = graph
            .block_from(step.edge, step.child)
            .compose(&blocks[step.parent])?;
    }

    let mut additions: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    match config.fill {
        FillMode::EmptyColumns => {
            let mut rng = rng::stream(config.seed, rng::purpose::FILL, 0, 0);
            let mut col_used = vec![false; universe];
            let mut row_used: Vec<Vec<bool>> = (0..n)
                .map(|i| vec![false; graph.keypoint_count(i)])
                .collect();
            for (i, b) in blocks.iter().enumerate() {
                for &(r, c) in b.entries() {
                    row_used[i][r] = true;
                    col_used[c] = true;
                }
            }
            let mut first_free: Vec<usize> = (0..n)
                .map(|i| row_used[i].iter().position(|&u| !u).unwrap_or(usize::MAX))
                .collect();
            for c in 0..universe {
                if col_used[c] {
                    continue;
                }
                let best = first_free.iter().copied().min().unwrap_or(usize::MAX);
                if best == usize::MAX {
                    break; // every keypoint row is already assigned
                }
                let candidates: Vec<usize> =
                    (0..n).filter(|&i| first_free[i] == best).collect();
                let node = candidates[rng.random_range(0..candidates.len())];
                additions[node].push((best, c));
                row_used[node][best] = true;
                first_free[node] = row_used[node][best..]
                    .iter()
                    .position(|&u| !u)
                    .map(|p| best + p)
                    .unwrap_or(usize::MAX);
            }
        }
        FillMode::EmptyRows => {
            let mut rng = rng::stream(config.seed, rng::purpose::FILL, 1, 0);
            for (i, b) in blocks.iter().enumerate() {
                let mut row_used = vec![false; graph.keypoint_count(i)];
                let mut col_used = vec![false; universe];
                for &(r, c) in b.entries() {
                    row_used[r] = true;
                    col_used[c] = true;
                }
                let mut free_cols: Vec<usize> =
                    (0..universe).filter(|&c| !col_used[c]).collect();
                for r in 0..graph.keypoint_count(i) {
                    if row_used[r] || free_cols.is_empty() {
                        continue;
                    }
                    let pick = rng.random_range(0..free_cols.len());
                    additions[i].push((r, free_cols.swap_remove(pick)));
                }
            }
        }
    }
    for (i, extra) in additions.into_iter().enumerate() {
        if extra.is_empty() {
            continue;
        }
        let mut entries = blocks[i].entries().to_vec();
        entries.extend(extra);
        blocks[i] = PartialPermutation::new(blocks[i].rows(), universe, entries)?;
    }

    AbsoluteAssignment::new(universe, blocks)
}

/// One Jacobi refinement sweep: every node accumulates its neighbors'
/// votes `w_ij * X_ij * P_j` and projects the sum at `threshold`.
///
/// With `normalize` set, each node divides its incident weights by their
/// sum first. Per-node sums run over neighbors in ascending order, so
/// results do not depend on the parallel schedule. Nodes without
/// neighbors keep their block.
pub fn weighted_ppm_step(
    graph: &ViewingGraph,
    weights: &EdgeWeights,
    normalize: bool,
    threshold: f64,
    current: &AbsoluteAssignment,
) -> Result<AbsoluteAssignment, SolverError> {
    current.check_against(graph)?;
    if weights.values().len() != graph.edge_count() {
        return Err(GraphError::WeightCount {
            edges: graph.edge_count(),
            got: weights.values().len(),
        }
        .into());
    }
    let universe = current.universe_size();
    let blocks: Vec<PartialPermutation> = (0..graph.node_count())
        .into_par_iter()
        .map(|i| {
            let neighbors = graph.neighbors(i);
            if neighbors.is_empty() {
                return current.block(i).clone();
            }
            let total: f64 = neighbors.iter().map(|&(_, e)| weights.value(e)).sum();
            let scale = if normalize && total > 0.0 {
                1.0 / total
            } else {
                1.0
            };
            let mut votes = Vec::new();
            for &(j, e) in neighbors {
                let w = weights.value(e) * scale;
                if w == 0.0 {
                    continue;
                }
                let x_ij = graph.block_from(e, i);
                let p_j = current.block(j);
                for &(r, rj) in x_ij.entries() {
                    if let Some(c) = p_j.col_for_row(rj) {
                        votes.push((r, c, w));
                    }
                }
            }
            let scores =
                SparseNonnegMatrix::from_triples(graph.keypoint_count(i), universe, votes)
                    .expect("vote weights are finite and nonnegative");
            project_partial(&scores, threshold)
        })
        .collect();
    AbsoluteAssignment::new(universe, blocks)
}

fn refine(
    graph: &ViewingGraph,
    weights: &EdgeWeights,
    normalize: bool,
    threshold: f64,
    max_steps: usize,
    mut assignment: AbsoluteAssignment,
) -> Result<(AbsoluteAssignment, usize, bool), SolverError> {
    let mut steps = 0;
    let mut converged = false;
    for _ in 0..max_steps {
        let next = weighted_ppm_step(graph, weights, normalize, threshold, &assignment)?;
        steps += 1;
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }
    Ok((assignment, steps, converged))
}

#[derive(Debug, Clone)]
pub struct FameOutput {
    pub assignment: AbsoluteAssignment,
    /// Final corruption estimates the weights were built from.
    pub corruption: CorruptionEstimates,
    /// Synchronized pairwise matches `P_i * P_j^T`, aligned to the graph
    /// edge list.
    pub matches: Vec<PartialPermutation>,
    pub refinement_steps: usize,
    /// Whether refinement reached a fixed point within the step budget.
    pub converged: bool,
}

/// The full pipeline: corruption estimation, spanning-tree
/// initialization, weighted refinement.
pub fn match_fame(graph: &ViewingGraph, config: &SolverConfig) -> Result<FameOutput, SolverError> {
    config.validate()?;
    let table = all_inconsistencies(graph);
    let corruption = cemp_with_table(&table, &config.corruption);
    let initial = mst_initialize(graph, &corruption, config)?;
    let weights = corruption_weights(graph, &corruption, config.weight_sharpness)?;
    let (assignment, refinement_steps, converged) = refine(
        graph,
        &weights,
        config.normalize_weights,
        config.acceptance_threshold,
        config.max_refinement_steps,
        initial,
    )?;
    let matches = relative_matches(graph, &assignment);
    Ok(FameOutput {
        assignment,
        corruption,
        matches,
        refinement_steps,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct PpmOutput {
    pub assignment: AbsoluteAssignment,
    pub matches: Vec<PartialPermutation>,
    pub refinement_steps: usize,
    pub converged: bool,
}

/// Unweighted projected power iterations from a caller-provided
/// initialization (commonly the spectral baseline's output).
pub fn ppm_baseline(
    graph: &ViewingGraph,
    initial: AbsoluteAssignment,
    max_steps: usize,
    threshold: f64,
) -> Result<PpmOutput, SolverError> {
    let weights = EdgeWeights::uniform(graph);
    let (assignment, refinement_steps, converged) =
        refine(graph, &weights, true, threshold, max_steps, initial)?;
    let matches = relative_matches(graph, &assignment);
    Ok(PpmOutput {
        assignment,
        matches,
        refinement_steps,
        converged,
    })
}

/// Pairwise matches induced by an assignment, one per graph edge.
pub fn relative_matches(
    graph: &ViewingGraph,
    assignment: &AbsoluteAssignment,
) -> Vec<PartialPermutation> {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| assignment.relative(i, j))
        .collect()
}
