//! Synthetic multi-image matching instances with controlled corruption.
//!
//! Generation pipeline: sample an Erdos-Renyi viewing graph (resampling
//! until it is connected), draw a ground-truth universe assignment per
//! node, corrupt a subset of the pairwise match blocks, then subsample
//! keypoints per node and restrict every block to the visible rows and
//! columns. Three corruption regimes are supported:
//!
//! * [`CorruptionModel::Uniform`]: each edge is independently replaced
//!   by a uniform random full permutation with a fixed probability.
//! * [`CorruptionModel::LocallyBiased`]: corruption concentrates around
//!   sampled seed nodes, and corrupted blocks mimic a consistent but
//!   wrong set of node permutations, so they reinforce each other in
//!   cycles. A sample-rejection rule keeps the overlap with the truth
//!   at no more than one match; proposals that overlap more are replaced
//!   by uniform draws.
//! * [`CorruptionModel::LocallyAdversarial`]: corruption again clusters
//!   around seed nodes, and each corrupted block is built to look like
//!   the incident node's assignment was a near-identity, nudged by a
//!   three-point cycle. These blocks are close to plausible and are the
//!   hardest regime for consistency-based screening.
//!
//! Edges are labeled good or bad by comparing the observed block with
//! the ground-truth block after restriction. A corrupted edge whose
//! damage lands entirely outside the sampled keypoints is therefore
//! labeled good: the observation is indistinguishable from the truth.
//!
//! All randomness derives from counter-based streams keyed by the
//! config seed, node or edge indices, and a purpose tag, so generation
//! is deterministic and independent of thread scheduling.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{self, ViewingGraph};
use crate::rng::{purpose, stream};
use crate::sparse::PartialPermutation;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("probability {name} = {value} is outside [0, 1]")]
    BadProbability { name: &'static str, value: f64 },
    #[error("graph has no nodes")]
    NoNodes,
    #[error("sampled graph stayed disconnected after {attempts} attempts")]
    Disconnected { attempts: usize },
    #[error("{seeds} corruption seed nodes exceed the {nodes} nodes")]
    TooManySeeds { seeds: usize, nodes: usize },
    #[error("universe size {got} is below the minimum of {needed} for this model")]
    UniverseTooSmall { needed: usize, got: usize },
    #[error("graph construction rejected generated blocks: {0}")]
    Graph(#[from] graph::GraphError),
}

/// How observed blocks deviate from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionModel {
    /// Independently replace each edge with a uniform random full
    /// permutation with probability `fraction`.
    Uniform { fraction: f64 },
    /// Corrupt edges incident to `seeds` sampled nodes, each with
    /// probability `edge_prob`, using mutually consistent wrong node
    /// permutations plus overlap rejection.
    LocallyBiased { seeds: usize, edge_prob: f64 },
    /// Corrupt edges incident to `seeds` sampled nodes, each with
    /// probability `edge_prob`, using near-identity blocks disturbed by
    /// a three-point cycle.
    LocallyAdversarial { seeds: usize, edge_prob: f64 },
}

impl CorruptionModel {
    /// Biased local corruption at its customary per-edge rate.
    pub fn locally_biased(seeds: usize) -> Self {
        Self::LocallyBiased {
            seeds,
            edge_prob: 0.9,
        }
    }

    /// Adversarial local corruption at its customary per-edge rate.
    pub fn locally_adversarial(seeds: usize) -> Self {
        Self::LocallyAdversarial {
            seeds,
            edge_prob: 0.6,
        }
    }
}

/// Parameters for one synthetic instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Number of images.
    pub nodes: usize,
    /// Number of universe points every image may see.
    pub universe: usize,
    /// Edge probability of the Erdos-Renyi viewing graph.
    pub edge_prob: f64,
    /// Probability that an image observes a given universe point.
    pub keypoint_prob: f64,
    pub model: CorruptionModel,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            nodes: 100,
            universe: 20,
            edge_prob: 0.5,
            keypoint_prob: 0.8,
            model: CorruptionModel::Uniform { fraction: 0.0 },
            seed: 0,
        }
    }
}

/// Whether an observed block equals its ground-truth restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    Good,
    Bad,
}

impl EdgeLabel {
    pub fn is_bad(self) -> bool {
        matches!(self, EdgeLabel::Bad)
    }
}

/// A generated instance together with everything needed to score a
/// solver against it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    /// Observed, possibly corrupted, pairwise matches.
    pub graph: ViewingGraph,
    /// Ground-truth node-to-universe assignment restricted to the
    /// sampled keypoints, one block of shape (m_i, universe) per node.
    pub truth_blocks: Vec<PartialPermutation>,
    /// Ground-truth assignment before keypoint subsampling, one full
    /// square permutation per node.
    pub full_truth: Vec<PartialPermutation>,
    /// Per-edge labels aligned with `graph.edges()`.
    pub labels: Vec<EdgeLabel>,
    /// Kept slots of each node's full keypoint list: `keypoint_ids[i]`
    /// is sorted and has length m_i, and entry r names the slot that
    /// became local row r. The universe point behind that row is
    /// `full_truth[i].col_for_row(keypoint_ids[i][r])`, also available
    /// as `truth_blocks[i].col_for_row(r)`.
    pub keypoint_ids: Vec<Vec<usize>>,
    /// Seed nodes of the local corruption models, empty for uniform
    /// corruption.
    pub seed_nodes: Vec<usize>,
    pub universe_size: usize,
}

impl SynthInstance {
    /// Ground-truth relative matches between two nodes.
    pub fn truth_relative(&self, i: usize, j: usize) -> PartialPermutation {
        self.truth_blocks[i]
            .compose(&self.truth_blocks[j].transpose())
            .expect("truth blocks share the universe dimension")
    }

    pub fn bad_edge_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_bad()).count()
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(SynthError::BadProbability { name, value });
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.nodes == 0 {
            return Err(SynthError::NoNodes);
        }
        if self.universe == 0 {
            return Err(SynthError::UniverseTooSmall {
                needed: 1,
                got: 0,
            });
        }
        check_probability("edge_prob", self.edge_prob)?;
        check_probability("keypoint_prob", self.keypoint_prob)?;
        match self.model {
            CorruptionModel::Uniform { fraction } => {
                check_probability("fraction", fraction)?;
            }
            CorruptionModel::LocallyBiased { seeds, edge_prob }
            | CorruptionModel::LocallyAdversarial { seeds, edge_prob } => {
                check_probability("edge_prob", edge_prob)?;
                if seeds > self.nodes {
                    return Err(SynthError::TooManySeeds {
                        seeds,
                        nodes: self.nodes,
                    });
                }
            }
        }
        if matches!(self.model, CorruptionModel::LocallyAdversarial { .. }) && self.universe < 3 {
            return Err(SynthError::UniverseTooSmall {
                needed: 3,
                got: self.universe,
            });
        }
        Ok(())
    }
}

const GRAPH_ATTEMPTS: usize = 100;

fn edge_key(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | j as u64
}

/// Uniform random full permutation as a row-to-column map.
fn uniform_permutation(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut map: Vec<usize> = (0..len).collect();
    map.shuffle(rng);
    map
}

fn invert(map: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; map.len()];
    for (r, &c) in map.iter().enumerate() {
        inv[c] = r;
    }
    inv
}

/// Number of keypoints on which the composed wrong-proposal block agrees
/// with the ground-truth block.
pub fn proposal_overlap(truth: &[usize], prop_i: &[usize], prop_j: &[usize]) -> usize {
    let inv_j = invert(prop_j);
    truth
        .iter()
        .enumerate()
        .filter(|&(r, &t)| inv_j[prop_i[r]] == t)
        .count()
}

/// Corrupted block of the biased local model: the composition of the two
/// wrong node proposals, unless it overlaps the truth in more than one
/// match, in which case a uniform draw is used instead.
pub fn lbc_block(
    truth: &[usize],
    prop_i: &[usize],
    prop_j: &[usize],
    rng: &mut impl Rng,
) -> Vec<usize> {
    if proposal_overlap(truth, prop_i, prop_j) > 1 {
        uniform_permutation(truth.len(), rng)
    } else {
        let inv_j = invert(prop_j);
        prop_i.iter().map(|&c| inv_j[c]).collect()
    }
}

/// Identity map on `universe` points disturbed by a uniformly chosen
/// cyclic rotation of three distinct points. Exactly three positions
/// move.
pub fn lac_disturbance(universe: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(universe >= 3, "a three-point cycle needs three points");
    let mut picked = rand::seq::index::sample(rng, universe, 3).into_vec();
    picked.sort_unstable();
    let [a, b, c] = picked[..] else { unreachable!() };
    let mut map: Vec<usize> = (0..universe).collect();
    if rng.random_bool(0.5) {
        (map[a], map[b], map[c]) = (b, c, a);
    } else {
        (map[a], map[b], map[c]) = (c, a, b);
    }
    map
}

/// Samples a connected Erdos-Renyi edge set, retrying a bounded number
/// of times.
fn sample_graph(cfg: &SynthConfig) -> Result<Vec<(usize, usize)>, SynthError> {
    let n = cfg.nodes;
    for attempt in 0..GRAPH_ATTEMPTS {
        let mut rng = stream(cfg.seed, purpose::GRAPH, attempt as u64, 0);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(cfg.edge_prob) {
                    pairs.push((i, j));
                }
            }
        }
        if graph::components(n, &pairs).len() == 1 {
            return Ok(pairs);
        }
    }
    Err(SynthError::Disconnected {
        attempts: GRAPH_ATTEMPTS,
    })
}

/// Per-edge corruption decision and replacement map, shared by all three
/// models. Returns the observed full block as a row-to-column map.
fn observed_full_map(
    cfg: &SynthConfig,
    i: usize,
    j: usize,
    truth: Vec<usize>,
    proposals: &[Vec<usize>],
    inv_sigma_j: &[usize],
    is_seed: &[bool],
) -> Vec<usize> {
    let key = edge_key(i, j);
    match cfg.model {
        CorruptionModel::Uniform { fraction } => {
            let selected = stream(cfg.seed, purpose::SELECT, key, 0).random_bool(fraction);
            if selected {
                uniform_permutation(cfg.universe, &mut stream(cfg.seed, purpose::HAAR, key, 0))
            } else {
                truth
            }
        }
        CorruptionModel::LocallyBiased { edge_prob, .. } => {
            if !hit_by_any_seed(cfg, i, j, edge_prob, is_seed) {
                return truth;
            }
            let mut rng = stream(cfg.seed, purpose::HAAR, key, 0);
            lbc_block(&truth, &proposals[i], &proposals[j], &mut rng)
        }
        CorruptionModel::LocallyAdversarial { edge_prob, .. } => {
            if !hit_by_any_seed(cfg, i, j, edge_prob, is_seed) {
                return truth;
            }
            let mut rng = stream(cfg.seed, purpose::ADVERSARIAL, key, 0);
            let tau = lac_disturbance(cfg.universe, &mut rng);
            // The block pretends node i's assignment were the disturbed
            // identity while node j keeps its true one, so it maps slot r
            // to whichever j-slot observes universe point tau(r).
            tau.iter().map(|&u| inv_sigma_j[u]).collect()
        }
    }
}

/// Each sampled seed node gives every incident edge an independent
/// chance of corruption; an edge touched by two seed nodes gets two
/// chances but is corrupted at most once.
fn hit_by_any_seed(cfg: &SynthConfig, i: usize, j: usize, edge_prob: f64, is_seed: &[bool]) -> bool {
    let key = edge_key(i, j);
    [i, j].into_iter().any(|c| {
        is_seed[c] && stream(cfg.seed, purpose::SELECT, c as u64, key).random_bool(edge_prob)
    })
}

/// Generates one synthetic instance.
pub fn generate(cfg: &SynthConfig) -> Result<SynthInstance, SynthError> {
    cfg.validate()?;
    let n = cfg.nodes;
    let m = cfg.universe;

    let pairs = sample_graph(cfg)?;

    // Ground-truth universe assignment per node: sigma[i][r] is the
    // universe point of full keypoint slot r in image i.
    let sigma: Vec<Vec<usize>> = (0..n)
        .map(|i| uniform_permutation(m, &mut stream(cfg.seed, purpose::TRUTH, i as u64, 0)))
        .collect();
    let inv_sigma: Vec<Vec<usize>> = sigma.iter().map(|s| invert(s)).collect();

    // Wrong-assignment proposals for the biased model.
    let proposals: Vec<Vec<usize>> = match cfg.model {
        CorruptionModel::LocallyBiased { .. } => (0..n)
            .map(|i| uniform_permutation(m, &mut stream(cfg.seed, purpose::PROPOSAL, i as u64, 0)))
            .collect(),
        _ => Vec::new(),
    };

    let seed_nodes: Vec<usize> = match cfg.model {
        CorruptionModel::Uniform { .. } => Vec::new(),
        CorruptionModel::LocallyBiased { seeds, .. }
        | CorruptionModel::LocallyAdversarial { seeds, .. } => {
            let mut rng = stream(cfg.seed, purpose::SEEDS, 0, 0);
            let mut picked = rand::seq::index::sample(&mut rng, n, seeds).into_vec();
            picked.sort_unstable();
            picked
        }
    };
    let mut is_seed = vec![false; n];
    for &c in &seed_nodes {
        is_seed[c] = true;
    }

    // Keypoint subsampling: which universe slots each image observes.
    let keypoint_ids: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut rng = stream(cfg.seed, purpose::KEYPOINTS, i as u64, 0);
            (0..m).filter(|_| rng.random_bool(cfg.keypoint_prob)).collect()
        })
        .collect();
    // Position of each full slot within the kept rows, per node.
    let slot_pos: Vec<Vec<Option<usize>>> = keypoint_ids
        .iter()
        .map(|kept| {
            let mut pos = vec![None; m];
            for (local, &slot) in kept.iter().enumerate() {
                pos[slot] = Some(local);
            }
            pos
        })
        .collect();

    let restrict = |map: &[usize], i: usize, j: usize| -> Vec<(usize, usize)> {
        keypoint_ids[i]
            .iter()
            .enumerate()
            .filter_map(|(local, &slot)| slot_pos[j][map[slot]].map(|lj| (local, lj)))
            .collect()
    };

    let per_edge: Vec<(PartialPermutation, EdgeLabel)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            // Full truth block as a map from i-slots to j-slots.
            let truth: Vec<usize> = (0..m).map(|r| inv_sigma[j][sigma[i][r]]).collect();
            let observed =
                observed_full_map(cfg, i, j, truth.clone(), &proposals, &inv_sigma[j], &is_seed);
            let rows = keypoint_ids[i].len();
            let cols = keypoint_ids[j].len();
            let observed_block =
                PartialPermutation::new(rows, cols, restrict(&observed, i, j))
                    .expect("restricted full permutations are valid blocks");
            let label = if restrict(&truth, i, j) == *observed_block.entries() {
                EdgeLabel::Good
            } else {
                EdgeLabel::Bad
            };
            (observed_block, label)
        })
        .collect();

    let truth_blocks: Vec<PartialPermutation> = (0..n)
        .map(|i| {
            let entries: Vec<(usize, usize)> = keypoint_ids[i]
                .iter()
                .enumerate()
                .map(|(local, &slot)| (local, sigma[i][slot]))
                .collect();
            PartialPermutation::new(keypoint_ids[i].len(), m, entries)
                .expect("row-restricted permutations are valid blocks")
        })
        .collect();
    let full_truth: Vec<PartialPermutation> = sigma
        .iter()
        .map(|s| {
            let entries: Vec<(usize, usize)> = s.iter().copied().enumerate().collect();
            PartialPermutation::new(m, m, entries).expect("full permutations are valid blocks")
        })
        .collect();

    let labels: Vec<EdgeLabel> = per_edge.iter().map(|(_, l)| *l).collect();
    let counts: Vec<usize> = keypoint_ids.iter().map(Vec::len).collect();
    let edges: Vec<(usize, usize, PartialPermutation)> = pairs
        .iter()
        .zip(per_edge)
        .map(|(&(i, j), (block, _))| (i, j, block))
        .collect();
    let graph = ViewingGraph::new(counts, edges)?;

    Ok(SynthInstance {
        graph,
        truth_blocks,
        full_truth,
        labels,
        keypoint_ids,
        seed_nodes,
        universe_size: m,
    })
}
