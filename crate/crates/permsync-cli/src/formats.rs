//! Plain text dataset and result formats.
//!
//! A dataset directory holds `meta.toml` (sizes, sampling parameters, and
//! the edge census), `obs.coo` with one observed match per line, and the
//! optional ground-truth files `gt_abs.coo` and `labels.tsv`. A result
//! directory holds whichever of `s_hat.tsv`, `matches.coo` and
//! `assignment.coo` the method produces, plus the resolved `config.toml`
//! and `metrics.toml`. Coordinate files carry single-space separated
//! fields, one record per newline-terminated line, sorted
//! lexicographically, so writing a parsed directory back reproduces it
//! byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use permsync_core::cemp::CorruptionEstimates;
use permsync_core::graph::{GraphError, ViewingGraph};
use permsync_core::solver::AbsoluteAssignment;
use permsync_core::sparse::{PartialPermutation, SparseError};
use permsync_core::synth::{CorruptionModel, EdgeLabel, SynthConfig, SynthInstance};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

pub const META_FILE: &str = "meta.toml";
pub const OBS_FILE: &str = "obs.coo";
pub const TRUTH_FILE: &str = "gt_abs.coo";
pub const LABELS_FILE: &str = "labels.tsv";
pub const ESTIMATES_FILE: &str = "s_hat.tsv";
pub const MATCHES_FILE: &str = "matches.coo";
pub const ASSIGNMENT_FILE: &str = "assignment.coo";
pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.toml";

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required file {path}")]
    Missing { path: PathBuf },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Contents of `meta.toml`. The edge census lists every edge of the
/// viewing graph, including those with no surviving observed match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub format_version: u32,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub universe: Option<usize>,
    pub edge_prob: f64,
    pub keypoint_prob: f64,
    pub seed: u64,
    pub keypoint_counts: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub model: ModelMeta,
}

/// Corruption model and its parameters, mirroring the generator's enum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelMeta {
    Ucm { q: f64 },
    Lbc { seed_nodes: usize, corruption_prob: f64 },
    Lac { seed_nodes: usize, corruption_prob: f64 },
}

impl ModelMeta {
    pub fn to_model(&self) -> CorruptionModel {
        match *self {
            ModelMeta::Ucm { q } => CorruptionModel::Uniform { fraction: q },
            ModelMeta::Lbc {
                seed_nodes,
                corruption_prob,
            } => CorruptionModel::LocallyBiased {
                seeds: seed_nodes,
                edge_prob: corruption_prob,
            },
            ModelMeta::Lac {
                seed_nodes,
                corruption_prob,
            } => CorruptionModel::LocallyAdversarial {
                seeds: seed_nodes,
                edge_prob: corruption_prob,
            },
        }
    }

    pub fn from_model(model: &CorruptionModel) -> Self {
        match *model {
            CorruptionModel::Uniform { fraction } => ModelMeta::Ucm { q: fraction },
            CorruptionModel::LocallyBiased { seeds, edge_prob } => ModelMeta::Lbc {
                seed_nodes: seeds,
                corruption_prob: edge_prob,
            },
            CorruptionModel::LocallyAdversarial { seeds, edge_prob } => ModelMeta::Lac {
                seed_nodes: seeds,
                corruption_prob: edge_prob,
            },
        }
    }
}

/// A parsed dataset directory: the observed graph plus whatever ground
/// truth the directory carries.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: Meta,
    pub graph: ViewingGraph,
    pub truth: Option<Vec<PartialPermutation>>,
    pub labels: Option<Vec<EdgeLabel>>,
}

impl Dataset {
    pub fn from_instance(inst: &SynthInstance, cfg: &SynthConfig) -> Self {
        let graph = inst.graph.clone();
        let meta = Meta {
            format_version: FORMAT_VERSION,
            nodes: cfg.nodes,
            universe: Some(cfg.universe),
            edge_prob: cfg.edge_prob,
            keypoint_prob: cfg.keypoint_prob,
            seed: cfg.seed,
            keypoint_counts: graph.keypoint_counts().to_vec(),
            edges: graph.edges().to_vec(),
            model: ModelMeta::from_model(&cfg.model),
        };
        Dataset {
            meta,
            graph,
            truth: Some(inst.truth_blocks.clone()),
            labels: Some(inst.labels.clone()),
        }
    }

    /// Rebuilds a scorable instance. Requires the ground-truth files and
    /// a recorded universe size. The keypoint slot lists are not part of
    /// the format; the reconstruction uses identity slots, which the
    /// scoring paths never consult.
    pub fn instance(&self) -> Result<SynthInstance, FormatError> {
        let truth = self.truth.clone().ok_or_else(|| FormatError::Missing {
            path: PathBuf::from(TRUTH_FILE),
        })?;
        let labels = self.labels.clone().ok_or_else(|| FormatError::Missing {
            path: PathBuf::from(LABELS_FILE),
        })?;
        let universe_size = self.meta.universe.ok_or_else(|| FormatError::Invalid {
            path: PathBuf::from(META_FILE),
            message: "scoring requires a universe size".into(),
        })?;
        let keypoint_ids = self
            .graph
            .keypoint_counts()
            .iter()
            .map(|&m| (0..m).collect())
            .collect();
        Ok(SynthInstance {
            graph: self.graph.clone(),
            full_truth: truth.clone(),
            truth_blocks: truth,
            labels,
            keypoint_ids,
            seed_nodes: Vec::new(),
            universe_size,
        })
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            FormatError::Missing {
                path: path.to_path_buf(),
            }
        } else {
            FormatError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn read_optional(path: &Path) -> Result<Option<String>, FormatError> {
    match read_file(path) {
        Ok(text) => Ok(Some(text)),
        Err(FormatError::Missing { .. }) => Ok(None),
        Err(other) => Err(other),
    }
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let text = toml::to_string(value).map_err(|e| FormatError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_file(path, &text)
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = read_file(path)?;
    toml::from_str(&text).map_err(|e| FormatError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Splits a coordinate line into exactly `n` fields.
fn fields<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    n: usize,
) -> Result<Vec<&'a str>, FormatError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != n {
        return Err(FormatError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("expected {n} fields, found {}", parts.len()),
        });
    }
    Ok(parts)
}

fn index(path: &Path, line_no: usize, text: &str) -> Result<usize, FormatError> {
    text.parse().map_err(|_| FormatError::Malformed {
        path: path.to_path_buf(),
        line: line_no,
        message: format!("not an index: {text:?}"),
    })
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(|source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_toml(&dir.join(META_FILE), &dataset.meta)?;

    let graph = &dataset.graph;
    let mut lines: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        for &(r, c) in graph.block(e).entries() {
            lines.push((i, j, r, c));
        }
    }
    lines.sort_unstable();
    let mut obs = String::new();
    for (i, j, r, c) in lines {
        writeln!(obs, "{i} {j} {r} {c}").unwrap();
    }
    write_file(&dir.join(OBS_FILE), &obs)?;

    if let Some(truth) = &dataset.truth {
        let mut lines: Vec<(usize, usize, usize)> = Vec::new();
        for (i, block) in truth.iter().enumerate() {
            for &(r, k) in block.entries() {
                lines.push((i, r, k));
            }
        }
        lines.sort_unstable();
        let mut text = String::new();
        for (i, r, k) in lines {
            writeln!(text, "{i} {r} {k}").unwrap();
        }
        write_file(&dir.join(TRUTH_FILE), &text)?;
    }

    if let Some(labels) = &dataset.labels {
        let mut text = String::new();
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            let tag = if labels[e].is_bad() { 'b' } else { 'g' };
            writeln!(text, "{i} {j} {tag}").unwrap();
        }
        write_file(&dir.join(LABELS_FILE), &text)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, FormatError> {
    let meta_path = dir.join(META_FILE);
    let meta: Meta = read_toml(&meta_path)?;
    let invalid = |message: String| FormatError::Invalid {
        path: meta_path.clone(),
        message,
    };
    if meta.keypoint_counts.len() != meta.nodes {
        return Err(invalid(format!(
            "{} keypoint counts for {} nodes",
            meta.keypoint_counts.len(),
            meta.nodes
        )));
    }
    let mut census: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (e, &(i, j)) in meta.edges.iter().enumerate() {
        if i >= j || j >= meta.nodes {
            return Err(invalid(format!("bad edge ({i}, {j})")));
        }
        if census.insert((i, j), e).is_some() {
            return Err(invalid(format!("duplicate edge ({i}, {j})")));
        }
    }

    let obs_path = dir.join(OBS_FILE);
    let mut entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); meta.edges.len()];
    for (no, line) in read_file(&obs_path)?.lines().enumerate() {
        let f = fields(&obs_path, no + 1, line, 4)?;
        let i = index(&obs_path, no + 1, f[0])?;
        let j = index(&obs_path, no + 1, f[1])?;
        let e = *census.get(&(i, j)).ok_or_else(|| FormatError::Malformed {
            path: obs_path.clone(),
            line: no + 1,
            message: format!("edge ({i}, {j}) is not in the meta census"),
        })?;
        entries[e].push((index(&obs_path, no + 1, f[2])?, index(&obs_path, no + 1, f[3])?));
    }
    let mut edges = Vec::with_capacity(meta.edges.len());
    for (e, &(i, j)) in meta.edges.iter().enumerate() {
        let block = PartialPermutation::new(
            meta.keypoint_counts[i],
            meta.keypoint_counts[j],
            std::mem::take(&mut entries[e]),
        )?;
        edges.push((i, j, block));
    }
    let graph = ViewingGraph::new(meta.keypoint_counts.clone(), edges)?;

    let truth_path = dir.join(TRUTH_FILE);
    let truth = match read_optional(&truth_path)? {
        None => None,
        Some(text) => {
            let universe = meta.universe.ok_or_else(|| FormatError::Invalid {
                path: meta_path.clone(),
                message: "ground truth present but no universe size recorded".into(),
            })?;
            let mut per_node: Vec<Vec<(usize, usize)>> = vec![Vec::new(); meta.nodes];
            for (no, line) in text.lines().enumerate() {
                let f = fields(&truth_path, no + 1, line, 3)?;
                let i = index(&truth_path, no + 1, f[0])?;
                if i >= meta.nodes {
                    return Err(FormatError::Malformed {
                        path: truth_path.clone(),
                        line: no + 1,
                        message: format!("node {i} out of range"),
                    });
                }
                per_node[i]
                    .push((index(&truth_path, no + 1, f[1])?, index(&truth_path, no + 1, f[2])?));
            }
            let mut blocks = Vec::with_capacity(meta.nodes);
            for (i, list) in per_node.into_iter().enumerate() {
                blocks.push(PartialPermutation::new(
                    meta.keypoint_counts[i],
                    universe,
                    list,
                )?);
            }
            Some(blocks)
        }
    };

    let labels_path = dir.join(LABELS_FILE);
    let labels = match read_optional(&labels_path)? {
        None => None,
        Some(text) => {
            let mut labels = vec![None; meta.edges.len()];
            for (no, line) in text.lines().enumerate() {
                let f = fields(&labels_path, no + 1, line, 3)?;
                let i = index(&labels_path, no + 1, f[0])?;
                let j = index(&labels_path, no + 1, f[1])?;
                let e = *census.get(&(i, j)).ok_or_else(|| FormatError::Malformed {
                    path: labels_path.clone(),
                    line: no + 1,
                    message: format!("edge ({i}, {j}) is not in the meta census"),
                })?;
                labels[e] = Some(match f[2] {
                    "g" => EdgeLabel::Good,
                    "b" => EdgeLabel::Bad,
                    other => {
                        return Err(FormatError::Malformed {
                            path: labels_path.clone(),
                            line: no + 1,
                            message: format!("label must be g or b, found {other:?}"),
                        })
                    }
                });
            }
            let labels: Option<Vec<EdgeLabel>> = labels.into_iter().collect();
            Some(labels.ok_or_else(|| FormatError::Invalid {
                path: labels_path.clone(),
                message: "some edges have no label".into(),
            })?)
        }
    };

    Ok(Dataset {
        meta,
        graph,
        truth,
        labels,
    })
}

/// One line per edge: endpoints, estimated corruption level, and whether
/// any informative triangle backed the estimate.
pub fn write_estimates(
    dir: &Path,
    graph: &ViewingGraph,
    estimates: &CorruptionEstimates,
) -> Result<(), FormatError> {
    let mut text = String::new();
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let flag = if estimates.has_evidence(e) { "est" } else { "pinned" };
        writeln!(text, "{i} {j} {} {flag}", estimates.value(e)).unwrap();
    }
    write_file(&dir.join(ESTIMATES_FILE), &text)
}

pub fn write_matches(
    dir: &Path,
    graph: &ViewingGraph,
    matches: &[PartialPermutation],
) -> Result<(), FormatError> {
    let mut lines: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        for &(r, c) in matches[e].entries() {
            lines.push((i, j, r, c));
        }
    }
    lines.sort_unstable();
    let mut text = String::new();
    for (i, j, r, c) in lines {
        writeln!(text, "{i} {j} {r} {c}").unwrap();
    }
    write_file(&dir.join(MATCHES_FILE), &text)
}

pub fn read_matches(
    dir: &Path,
    graph: &ViewingGraph,
) -> Result<Vec<PartialPermutation>, FormatError> {
    let path = dir.join(MATCHES_FILE);
    let mut entries: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph.edge_count()];
    for (no, line) in read_file(&path)?.lines().enumerate() {
        let f = fields(&path, no + 1, line, 4)?;
        let i = index(&path, no + 1, f[0])?;
        let j = index(&path, no + 1, f[1])?;
        let e = graph.edge_index(i, j).ok_or_else(|| FormatError::Malformed {
            path: path.clone(),
            line: no + 1,
            message: format!("edge ({i}, {j}) is not in the dataset"),
        })?;
        entries[e].push((index(&path, no + 1, f[2])?, index(&path, no + 1, f[3])?));
    }
    let mut matches = Vec::with_capacity(graph.edge_count());
    for (e, list) in entries.into_iter().enumerate() {
        let block = graph.block(e);
        matches.push(PartialPermutation::new(block.rows(), block.cols(), list)?);
    }
    Ok(matches)
}

pub fn write_assignment(dir: &Path, assignment: &AbsoluteAssignment) -> Result<(), FormatError> {
    let mut lines: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..assignment.node_count() {
        for &(r, k) in assignment.block(i).entries() {
            lines.push((i, r, k));
        }
    }
    lines.sort_unstable();
    let mut text = String::new();
    for (i, r, k) in lines {
        writeln!(text, "{i} {r} {k}").unwrap();
    }
    write_file(&dir.join(ASSIGNMENT_FILE), &text)
}

/// Every run records its fully resolved configuration, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub method: String,
    pub input: String,
    pub iterations: usize,
    pub beta0: f64,
    pub beta_growth: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta_cap: Option<f64>,
    pub gamma: f64,
    pub t0: usize,
    pub theta: f64,
    pub mhat_factor: f64,
    pub fill: String,
    pub normalize_weights: bool,
    pub deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threads: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub refinement_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectral_sweeps: Option<usize>,
    /// Wall clock per phase, milliseconds.
    pub runtime_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub correct_matches: usize,
    pub predicted_matches: usize,
    pub true_matches: usize,
    pub vacuous_precision: bool,
    pub vacuous_recall: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theorem: Option<TheoremMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremMetrics {
    /// "pass", "violated", or "hypotheses_unmet".
    pub status: String,
    pub lambda: f64,
    pub verifiability: f64,
    pub feasibility_bound: f64,
    pub feasible: bool,
    /// Initial temperature and growth of the geometric schedule the
    /// check ran with, derived from the instance's own admissible range.
    pub schedule_beta0: f64,
    pub schedule_growth: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}
