//! Dense spectral baseline.
//!
//! Stack all absolute blocks into one symmetric `M x M` match matrix `X`
//! (`M` = total keypoints). On clean data `X = P P^T` for the stacked
//! ground truth `P`, so the leading eigenvectors of `X` span the columns
//! of `P`. The baseline runs block power iteration with QR
//! re-orthonormalization (subspace iteration), extracts Ritz pairs, and
//! reads each node's block out of its rows of the eigenvector matrix.
//!
//! Column `c` of the embedding is scaled by `sqrt(max(ritz_c, 0))`;
//! genuine assignment directions keep their size while trailing
//! near-null directions are scaled away, which is what makes recovery on
//! clean data exact. Each block then takes absolute values, rescales by
//! its own maximum, and projects greedily. The projection threshold
//! defaults to 0 here (not the solver's 0.25): after per-block rescaling
//! only the relative order of scores carries information, and a fixed
//! cutoff would reject valid matches in blocks whose leading score is
//! small.
//!
//! With corrupted data the spectrum has no usable gap at the cut, so the
//! sweep usually exhausts its budget; the defaults below are documented
//! behavior, and `converged: false` in the output marks the estimate as
//! the best iterate rather than a fixed point.

use super::{relative_matches, AbsoluteAssignment, SolverError};
use crate::graph::ViewingGraph;
use crate::rng;
use crate::sparse::{PartialPermutation, SparseNonnegMatrix};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, QR, UPLO};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConfig {
    /// Power sweeps before giving up on the Ritz values settling.
    pub max_sweeps: usize,
    /// Relative change of the Ritz value vector considered settled.
    pub tolerance: f64,
    /// Threshold for the per-block greedy projection.
    pub acceptance_threshold: f64,
    /// Seed for the random starting subspace.
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            tolerance: 1e-7,
            acceptance_threshold: 0.0,
            seed: 0,
        }
    }
}

/// Leading eigenpairs of the stacked match matrix.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// Total keypoint count `M`.
    pub rows: usize,
    /// Number of directions kept.
    pub cols: usize,
    /// Row-major `rows x cols` eigenvector matrix, orthonormal columns,
    /// ordered by descending Ritz value.
    pub vectors: Vec<f64>,
    /// Ritz values, descending, aligned with the columns.
    pub ritz_values: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct SpectralOutput {
    pub assignment: AbsoluteAssignment,
    pub matches: Vec<PartialPermutation>,
    pub ritz_values: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Sparse symmetric stacked match matrix in CSR form.
struct Stacked {
    offsets: Vec<usize>,
    columns: Vec<usize>,
}

impl Stacked {
    fn build(graph: &ViewingGraph) -> (Self, Vec<usize>) {
        let mut node_offset = Vec::with_capacity(graph.node_count() + 1);
        let mut total = 0;
        for i in 0..graph.node_count() {
            node_offset.push(total);
            total += graph.keypoint_count(i);
        }
        node_offset.push(total);

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            for &(r, c) in graph.block(e).entries() {
                pairs.push((node_offset[i] + r, node_offset[j] + c));
                pairs.push((node_offset[j] + c, node_offset[i] + r));
            }
        }
        pairs.sort_unstable();

        let mut offsets = vec![0usize; total + 1];
        let mut columns = Vec::with_capacity(pairs.len());
        for &(r, c) in &pairs {
            offsets[r + 1] += 1;
            columns.push(c);
        }
        for r in 0..total {
            offsets[r + 1] += offsets[r];
        }
        (Self { offsets, columns }, node_offset)
    }

    /// `out = X * q` for 0/1 entries: each output row sums the input rows
    /// its keypoint is matched to.
    fn multiply(&self, q: &Array2<f64>, out: &mut Array2<f64>) {
        out.fill(0.0);
        for r in 0..self.offsets.len() - 1 {
            let mut acc = out.row_mut(r);
            for &c in &self.columns[self.offsets[r]..self.offsets[r + 1]] {
                acc += &q.row(c);
            }
        }
    }
}

/// Subspace iteration for the `k` leading eigenpairs of the stacked
/// match matrix.
///
/// Sweeps alternate multiply and thin QR; the magnitudes of the R
/// diagonal estimate the Ritz values, and iteration stops once their
/// relative change drops below `cfg.tolerance`. A final Rayleigh-Ritz
/// pass rotates the basis to actual eigenvector estimates. `k` is capped
/// at `M`; requesting more directions than exist leaves the surplus out
/// of the iteration and reports zero Ritz values for it.
pub fn leading_eigenvectors(
    graph: &ViewingGraph,
    k: usize,
    cfg: &SpectralConfig,
) -> Result<Embedding, SolverError> {
    let m_total = graph.total_keypoints();
    let k_eff = k.min(m_total);
    if k_eff == 0 {
        return Ok(Embedding {
            rows: m_total,
            cols: k,
            vectors: vec![0.0; m_total * k],
            ritz_values: vec![0.0; k],
            converged: true,
            sweeps: 0,
        });
    }
    let (stacked, _) = Stacked::build(graph);

    let mut rng = rng::stream(cfg.seed, rng::purpose::SPECTRAL, 0, 0);
    let start = Array2::from_shape_fn((m_total, k_eff), |_| rng.random_range(-1.0..1.0));
    let (mut q, _) = start
        .qr()
        .map_err(|e| SolverError::Eigensolver(e.to_string()))?;

    let mut product = Array2::zeros((m_total, k_eff));
    let mut previous: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut sweeps = 0;
    for _ in 0..cfg.max_sweeps {
        sweeps += 1;
        stacked.multiply(&q, &mut product);
        let (qq, rr) = product
            .qr()
            .map_err(|e| SolverError::Eigensolver(e.to_string()))?;
        q = qq;
        let mut magnitudes: Vec<f64> = (0..k_eff).map(|c| rr[(c, c)].abs()).collect();
        magnitudes.sort_by(|a, b| b.total_cmp(a));
        if let Some(prev) = &previous {
            let scale = prev.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
            let change = magnitudes
                .iter()
                .zip(prev)
                .map(|(now, was)| (now - was).abs())
                .fold(0.0, f64::max);
            if change / scale < cfg.tolerance {
                converged = true;
                break;
            }
        }
        previous = Some(magnitudes);
    }

    // Rayleigh-Ritz: diagonalize Q^T X Q and rotate the basis.
    stacked.multiply(&q, &mut product);
    let small = q.t().dot(&product);
    let small = 0.5 * (&small + &small.t());
    let (values, rotation): (Array1<f64>, Array2<f64>) = small
        .eigh(UPLO::Lower)
        .map_err(|e| SolverError::Eigensolver(e.to_string()))?;
    let basis = q.dot(&rotation);

    // eigh returns ascending order; emit descending.
    let mut vectors = vec![0.0; m_total * k];
    let mut ritz_values = vec![0.0; k];
    for out_c in 0..k_eff {
        let in_c = k_eff - 1 - out_c;
        ritz_values[out_c] = values[in_c];
        for r in 0..m_total {
            vectors[r * k + out_c] = basis[(r, in_c)];
        }
    }
    Ok(Embedding {
        rows: m_total,
        cols: k,
        vectors,
        ritz_values,
        converged,
        sweeps,
    })
}

/// Recovers absolute blocks from the spectral embedding.
///
/// Each block's slice of the eigenvector matrix is scaled by the square
/// roots of the Ritz values, taken entrywise absolute, rescaled by the
/// block maximum, and projected greedily.
pub fn spectral_baseline(
    graph: &ViewingGraph,
    universe_size: usize,
    cfg: &SpectralConfig,
) -> Result<SpectralOutput, SolverError> {
    let embedding = leading_eigenvectors(graph, universe_size, cfg)?;
    let scales: Vec<f64> = embedding
        .ritz_values
        .iter()
        .map(|&v| v.max(0.0).sqrt())
        .collect();

    let mut blocks = Vec::with_capacity(graph.node_count());
    let mut offset = 0;
    for i in 0..graph.node_count() {
        let m_i = graph.keypoint_count(i);
        let mut dense = vec![0.0; m_i * universe_size];
        let mut block_max = 0.0f64;
        for r in 0..m_i {
            for c in 0..universe_size {
                let v = (embedding.vectors[(offset + r) * universe_size + c] * scales[c]).abs();
                dense[r * universe_size + c] = v;
                block_max = block_max.max(v);
            }
        }
        let triples: Vec<(usize, usize, f64)> = if block_max > 0.0 {
            dense
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v > 0.0)
                .map(|(idx, &v)| (idx / universe_size, idx % universe_size, v / block_max))
                .collect()
        } else {
            Vec::new()
        };
        let scores = SparseNonnegMatrix::from_triples(m_i, universe_size, triples)?;
        blocks.push(super::project_partial(&scores, cfg.acceptance_threshold));
        offset += m_i;
    }
    let assignment = AbsoluteAssignment::new(universe_size, blocks)?;
    let matches = relative_matches(graph, &assignment);
    Ok(SpectralOutput {
        assignment,
        matches,
        ritz_values: embedding.ritz_values,
        converged: embedding.converged,
        sweeps: embedding.sweeps,
    })
}
