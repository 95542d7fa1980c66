//! Scoring and verification against synthetic ground truth.
//!
//! Three layers live here. Match metrics compare a solver's output with
//! the ground truth on the corrupted edges, masked to the observed match
//! positions, since only observed candidate matches can be kept or
//! rejected. Ground-truth corruption levels classify every universe
//! point seen by an edge's two images as correctly handled or not; the
//! bad fraction is the level the estimator is trying to recover.
//! Separation checks evaluate the guarantees of the estimator: the
//! structural quantities lambda (scarcity of good cycles) and the
//! verifiability fraction, the feasibility test tying them to the
//! universe size, the per-iteration separation bounds, and the two
//! cycle-inconsistency inequalities the analysis rests on. Violation
//! counts are reported rather than asserted, so callers decide whether
//! a breach is fatal.

use std::f64::consts::E;

use thiserror::Error;

use crate::cemp::{CempConfig, CorruptionEstimates};
use crate::cycle::all_inconsistencies;
use crate::sparse::PartialPermutation;
use crate::synth::SynthInstance;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("expected {expected} predicted blocks, got {got}")]
    EdgeCount { expected: usize, got: usize },
    #[error("predicted block {edge} has shape {got:?}, expected {expected:?}")]
    BlockShape {
        edge: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
}

/// Precision and recall of predicted matches on the corrupted edges,
/// with the raw masked counts behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Ground-truth matches that survive masking by the observation.
    pub true_matches: usize,
    /// Predicted matches that survive masking by the observation.
    pub predicted_matches: usize,
    /// Predicted matches that are also ground truth.
    pub correct_matches: usize,
    /// Precision had an empty denominator and defaulted to 1.
    pub vacuous_precision: bool,
    /// Recall had an empty denominator and defaulted to 1.
    pub vacuous_recall: bool,
}

/// Scores predicted relative matches over the bad edges, masking every
/// term by the observed blocks.
pub fn precision_recall(
    inst: &SynthInstance,
    predicted: &[PartialPermutation],
) -> Result<MatchMetrics, EvalError> {
    let graph = &inst.graph;
    if predicted.len() != graph.edge_count() {
        return Err(EvalError::EdgeCount {
            expected: graph.edge_count(),
            got: predicted.len(),
        });
    }
    let mut true_matches = 0usize;
    let mut predicted_matches = 0usize;
    let mut correct_matches = 0usize;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let observed = graph.block(e);
        let z = &predicted[e];
        if (z.rows(), z.cols()) != (observed.rows(), observed.cols()) {
            return Err(EvalError::BlockShape {
                edge: e,
                expected: (observed.rows(), observed.cols()),
                got: (z.rows(), z.cols()),
            });
        }
        if !inst.labels[e].is_bad() {
            continue;
        }
        let truth = inst.truth_relative(i, j);
        for &(r, c) in observed.entries() {
            let in_truth = truth.contains(r, c);
            let in_predicted = z.contains(r, c);
            true_matches += in_truth as usize;
            predicted_matches += in_predicted as usize;
            correct_matches += (in_truth && in_predicted) as usize;
        }
    }
    let vacuous_precision = predicted_matches == 0;
    let vacuous_recall = true_matches == 0;
    Ok(MatchMetrics {
        precision: if vacuous_precision {
            1.0
        } else {
            correct_matches as f64 / predicted_matches as f64
        },
        recall: if vacuous_recall {
            1.0
        } else {
            correct_matches as f64 / true_matches as f64
        },
        true_matches,
        predicted_matches,
        correct_matches,
        vacuous_precision,
        vacuous_recall,
    })
}

/// Ground-truth corruption level of every edge: the fraction of universe
/// points seen by either image that the observed block handles wrongly.
///
/// A universe point seen by both images is handled correctly when the
/// observed block matches exactly its two true keypoints; a point seen
/// by one image is handled correctly when that keypoint is left
/// unmatched. Edges whose images see no universe point at all carry
/// level 0 and no evidence.
pub fn corruption_levels_star(inst: &SynthInstance) -> CorruptionEstimates {
    let graph = &inst.graph;
    let m = inst.universe_size;
    // Per node: local keypoint row observing each universe point.
    let row_of: Vec<Vec<Option<usize>>> = inst
        .truth_blocks
        .iter()
        .map(|block| {
            let mut rows = vec![None; m];
            for &(r, u) in block.entries() {
                rows[u] = Some(r);
            }
            rows
        })
        .collect();

    let mut values = Vec::with_capacity(graph.edge_count());
    let mut evidence = Vec::with_capacity(graph.edge_count());
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let x = graph.block(e);
        let mut total = 0usize;
        let mut bad = 0usize;
        for u in 0..m {
            let handled_well = match (row_of[i][u], row_of[j][u]) {
                (Some(a), Some(b)) => x.contains(a, b),
                (Some(a), None) => x.col_for_row(a).is_none(),
                (None, Some(b)) => x.row_for_col(b).is_none(),
                (None, None) => continue,
            };
            total += 1;
            bad += !handled_well as usize;
        }
        values.push(if total == 0 {
            0.0
        } else {
            bad as f64 / total as f64
        });
        evidence.push(total > 0);
    }
    CorruptionEstimates::from_parts(values, evidence)
}

/// Structural quantities controlling when exact separation of corrupted
/// edges is guaranteed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremReport {
    /// Worst-case scarcity of good cycles: 1 minus the smallest fraction
    /// of co-neighbors forming good cycles, over all edges.
    pub lambda: f64,
    /// Smallest per-edge fraction of good cycles through which every
    /// keypoint of both endpoint images is matched.
    pub verifiability: f64,
    /// Whether lambda is below the feasibility bound for this universe
    /// size and verifiability.
    pub feasible: bool,
    /// The feasibility bound itself.
    pub lambda_bound: f64,
    /// Largest admissible geometric growth rate of the inverse
    /// temperature schedule.
    pub max_growth: f64,
    /// Largest admissible initial inverse temperature.
    pub max_initial_beta: f64,
    pub universe_size: usize,
    /// Edges without co-neighbors, excluded from lambda.
    pub skipped_no_cycles: usize,
    /// Edges without good cycles, excluded from verifiability.
    pub skipped_no_good_cycles: usize,
}

/// Running minimum of integer fractions, compared exactly by cross
/// multiplication so boundary quantities derived from the minimum do
/// not pick up division rounding.
struct MinFraction {
    num: usize,
    den: usize,
}

impl MinFraction {
    fn new() -> Self {
        Self { num: 1, den: 0 }
    }

    fn update(&mut self, num: usize, den: usize) {
        if (num as u128) * (self.den as u128) < (self.num as u128) * (den as u128) {
            self.num = num;
            self.den = den;
        }
    }

    fn seen_any(&self) -> bool {
        self.den != 0
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Computes the separation quantities from ground-truth labels.
pub fn theorem_quantities(inst: &SynthInstance) -> TheoremReport {
    let graph = &inst.graph;
    let good: Vec<bool> = inst.labels.iter().map(|l| !l.is_bad()).collect();

    let mut min_good = MinFraction::new();
    let mut min_verified = MinFraction::new();
    let mut skipped_no_cycles = 0usize;
    let mut skipped_no_good_cycles = 0usize;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let co = graph.co_neighbors_of_edge(e);
        if co.is_empty() {
            skipped_no_cycles += 1;
            continue;
        }
        let mut good_cycles = 0usize;
        let mut verified = 0usize;
        for k in co.iter().copied() {
            let e_ik = graph.edge_index(i, k).expect("co-neighbor edge");
            let e_jk = graph.edge_index(j, k).expect("co-neighbor edge");
            if !(good[e_ik] && good[e_jk]) {
                continue;
            }
            good_cycles += 1;
            // Every keypoint of images i and j must be matched into
            // image k; for partial permutations that is a count check.
            let covers_i = graph.block(e_ik).nnz() == graph.keypoint_count(i);
            let covers_j = graph.block(e_jk).nnz() == graph.keypoint_count(j);
            verified += (covers_i && covers_j) as usize;
        }
        min_good.update(good_cycles, co.len());
        if good_cycles == 0 {
            skipped_no_good_cycles += 1;
        } else {
            min_verified.update(verified, good_cycles);
        }
    }

    let lambda = if min_good.seen_any() {
        (min_good.den - min_good.num) as f64 / min_good.den as f64
    } else {
        1.0
    };
    let verifiability = if min_verified.seen_any() {
        min_verified.value()
    } else {
        1.0
    };

    let m = inst.universe_size as f64;
    let (lambda_bound, feasible) = if verifiability > 0.0 {
        let c = 3.0 * E * m / verifiability;
        let bound = 1.0 + c - (c * (2.0 + c)).sqrt();
        (bound, lambda < bound)
    } else {
        (0.0, false)
    };
    let max_growth = if lambda == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - lambda).powi(2) * verifiability / (6.0 * E * m * lambda)
    };
    let max_initial_beta = if !min_good.seen_any() {
        0.5
    } else if min_good.num == min_good.den {
        f64::INFINITY
    } else {
        // Exactly den / (2 (den - num)), avoiding the rounding that
        // 1 / (2 lambda) would introduce.
        min_good.den as f64 / (2.0 * (min_good.den - min_good.num) as f64)
    };

    TheoremReport {
        lambda,
        verifiability,
        feasible,
        lambda_bound,
        max_growth,
        max_initial_beta,
        universe_size: inst.universe_size,
        skipped_no_cycles,
        skipped_no_good_cycles,
    }
}

/// Result of checking the per-iteration separation bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparationCheck {
    /// The instance or schedule violates a hypothesis of the guarantee,
    /// so the bounds say nothing.
    HypothesesUnmet { reason: String },
    Checked(SeparationOutcome),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationOutcome {
    pub pass: bool,
    /// (edge, iteration) pairs where a bound failed.
    pub violations: usize,
    /// Worst ratio of a good edge's estimate to its upper bound; at
    /// most 1 when the good-edge side holds.
    pub max_good_ratio: f64,
    /// Worst ratio of a bad edge's estimate to its lower bound; at
    /// least 1 when the bad-edge side holds. Infinite when no bad edge
    /// has a positive bound.
    pub min_bad_ratio: f64,
    /// Iterations t >= 1 covered by the check.
    pub steps: usize,
}

/// Verifies the two separation inequalities for every iterate in
/// `history`, provided the guarantee's hypotheses hold for this
/// instance, schedule, and report.
pub fn separation_check(
    history: &[CorruptionEstimates],
    config: &CempConfig,
    inst: &SynthInstance,
    report: &TheoremReport,
) -> SeparationCheck {
    let unmet = |reason: String| SeparationCheck::HypothesesUnmet { reason };
    if report.verifiability <= 0.0 {
        return unmet("no edge has a verifiable good cycle".into());
    }
    if !report.feasible {
        return unmet(format!(
            "lambda {:.6} is not below the feasibility bound {:.6}",
            report.lambda, report.lambda_bound
        ));
    }
    let beta0 = config.schedule.initial();
    let growth = config.schedule.growth();
    if growth <= 1.0 {
        return unmet(format!("growth rate {growth} must exceed 1"));
    }
    if growth >= report.max_growth {
        return unmet(format!(
            "growth rate {growth} is not below the admissible maximum {:.6}",
            report.max_growth
        ));
    }
    if beta0 > report.max_initial_beta {
        return unmet(format!(
            "initial inverse temperature {beta0} exceeds the admissible {:.6}",
            report.max_initial_beta
        ));
    }
    if let Some(cap) = config.schedule.cap() {
        let last = config.iterations.saturating_sub(1);
        if beta0 * growth.powi(last as i32) > cap {
            return unmet(format!(
                "inverse temperature cap {cap} binds before iteration {last}, the schedule is not geometric"
            ));
        }
    }

    let s_star = corruption_levels_star(inst);
    let bad_floor = report.verifiability / (3.0 * E) * (1.0 - report.lambda);
    let mut violations = 0usize;
    let mut max_good_ratio: f64 = 0.0;
    let mut min_bad_ratio = f64::INFINITY;
    for (t, estimates) in history.iter().enumerate().skip(1) {
        let good_cap = 1.0 / (2.0 * beta0 * growth.powi(t as i32));
        for e in 0..estimates.edge_count() {
            let s = estimates.value(e);
            if inst.labels[e].is_bad() {
                let floor = bad_floor * s_star.value(e);
                if floor > 0.0 {
                    min_bad_ratio = min_bad_ratio.min(s / floor);
                    violations += (s < floor) as usize;
                }
            } else {
                max_good_ratio = max_good_ratio.max(s / good_cap);
                violations += (s > good_cap) as usize;
            }
        }
    }
    SeparationCheck::Checked(SeparationOutcome {
        pass: violations == 0,
        violations,
        max_good_ratio,
        min_bad_ratio,
        steps: history.len().saturating_sub(1),
    })
}

/// Outcome of checking the two cycle-inconsistency inequalities the
/// separation analysis is built on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    /// (good edge, informative cycle) pairs checked against the upper
    /// bound by the neighbors' corruption levels.
    pub upper_checked: usize,
    pub upper_violations: usize,
    /// Largest excess of an inconsistency over its upper bound;
    /// nonpositive when the inequality holds everywhere.
    pub upper_worst_margin: f64,
    /// Edges with good cycles checked against the averaged lower bound.
    pub lower_checked: usize,
    pub lower_violations: usize,
    /// Largest shortfall of a mean inconsistency under its lower bound;
    /// nonpositive when the inequality holds everywhere.
    pub lower_worst_margin: f64,
}

/// Evaluates both inequalities over all applicable edge and cycle
/// pairs: inconsistencies of good edges are bounded above through the
/// neighboring corruption levels, and mean inconsistencies over good
/// cycles are bounded below through the edge's own corruption level.
pub fn lemma_suite(inst: &SynthInstance) -> LemmaReport {
    let graph = &inst.graph;
    let table = all_inconsistencies(graph);
    let s_star = corruption_levels_star(inst);
    let verifiability = theorem_quantities(inst).verifiability;
    let m = inst.universe_size as f64;
    let good: Vec<bool> = inst.labels.iter().map(|l| !l.is_bad()).collect();

    let mut upper_checked = 0usize;
    let mut upper_violations = 0usize;
    let mut upper_worst_margin = f64::NEG_INFINITY;
    let mut lower_checked = 0usize;
    let mut lower_violations = 0usize;
    let mut lower_worst_margin = f64::NEG_INFINITY;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        if good[e] {
            for term in table.terms(e) {
                let bound = m * (s_star.value(term.edge_ik) + s_star.value(term.edge_jk));
                upper_checked += 1;
                upper_worst_margin = upper_worst_margin.max(term.value - bound);
                upper_violations += (term.value > bound) as usize;
            }
        }

        // The mean over good cycles counts uninformative ones as zero
        // inconsistency, which only makes the lower bound harder.
        let good_cycles = graph
            .co_neighbors_of_edge(e)
            .into_iter()
            .filter(|&k| {
                let e_ik = graph.edge_index(i, k).expect("co-neighbor edge");
                let e_jk = graph.edge_index(j, k).expect("co-neighbor edge");
                good[e_ik] && good[e_jk]
            })
            .count();
        if good_cycles == 0 {
            continue;
        }
        let sum: f64 = table
            .terms(e)
            .iter()
            .filter(|term| {
                good[term.edge_ik] && good[term.edge_jk]
            })
            .map(|term| term.value)
            .sum();
        let mean = sum / good_cycles as f64;
        let floor = verifiability * s_star.value(e) / 3.0;
        lower_checked += 1;
        lower_worst_margin = lower_worst_margin.max(floor - mean);
        lower_violations += (mean < floor) as usize;
    }

    LemmaReport {
        upper_checked,
        upper_violations,
        upper_worst_margin,
        lower_checked,
        lower_violations,
        lower_worst_margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cemp::{cemp_history, BetaSchedule};
    use crate::graph::ViewingGraph;
    use crate::synth::{generate, CorruptionModel, EdgeLabel, SynthConfig};

    fn pp(rows: usize, cols: usize, e: &[(usize, usize)]) -> PartialPermutation {
        PartialPermutation::new(rows, cols, e.to_vec()).unwrap()
    }

    fn ucm(nodes: usize, universe: usize, fraction: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            nodes,
            universe,
            edge_prob: 0.5,
            keypoint_prob: 0.8,
            model: CorruptionModel::Uniform { fraction },
            seed,
        }
    }

    /// Complete clean graph with full keypoints, with the block of edge
    /// (0, 1) replaced by a two-keypoint swap and relabeled bad.
    fn tampered_clean(n: usize, m: usize) -> SynthInstance {
        let mut cfg = ucm(n, m, 0.0, 9);
        cfg.edge_prob = 1.0;
        cfg.keypoint_prob = 1.0;
        let clean = generate(&cfg).unwrap();
        let mut inst = tamper_first_edge(clean);
        assert_eq!(inst.graph.edges()[0], (0, 1));
        inst.labels[0] = EdgeLabel::Bad;
        inst
    }

    /// Replaces edge (0, 1)'s block with the true block composed with a
    /// swap of the first two keypoints of image 0.
    fn tamper_first_edge(inst: SynthInstance) -> SynthInstance {
        let graph = &inst.graph;
        let mut edges: Vec<(usize, usize, PartialPermutation)> = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| (i, j, graph.block(e).clone()))
            .collect();
        let target = edges
            .iter()
            .position(|&(i, j, _)| (i, j) == (0, 1))
            .expect("complete graph has edge (0, 1)");
        let old = &edges[target].2;
        let mut swapped: Vec<(usize, usize)> = old.entries().to_vec();
        let c0 = old.col_for_row(0).unwrap();
        let c1 = old.col_for_row(1).unwrap();
        swapped[0] = (0, c1);
        swapped[1] = (1, c0);
        edges[target].2 = pp(old.rows(), old.cols(), &swapped);
        let counts: Vec<usize> = (0..graph.node_count())
            .map(|i| graph.keypoint_count(i))
            .collect();
        SynthInstance {
            graph: ViewingGraph::new(counts, edges).unwrap(),
            ..inst
        }
    }

    #[test]
    fn five_point_overlap_example_scores_three_fifths() {
        // Image 0 sees universe points 0..4, image 1 sees 1..5. The
        // observed block matches point 1 correctly, mismatches the
        // keypoints of points 2 and 3, and invents a match touching
        // point 4, so exactly points 0 and 1 are handled well.
        let block = pp(4, 4, &[(1, 0), (2, 2), (3, 3)]);
        let graph = ViewingGraph::new(vec![4, 4], vec![(0, 1, block)]).unwrap();
        let identity5 = pp(5, 5, &(0..5).map(|r| (r, r)).collect::<Vec<_>>());
        let inst = SynthInstance {
            graph,
            truth_blocks: vec![
                pp(4, 5, &[(0, 0), (1, 1), (2, 2), (3, 3)]),
                pp(4, 5, &[(0, 1), (1, 2), (2, 3), (3, 4)]),
            ],
            full_truth: vec![identity5.clone(), identity5],
            labels: vec![EdgeLabel::Bad],
            keypoint_ids: vec![vec![0, 1, 2, 3], vec![1, 2, 3, 4]],
            seed_nodes: vec![],
            universe_size: 5,
        };
        let s = corruption_levels_star(&inst);
        assert!((s.value(0) - 3.0 / 5.0).abs() < 1e-15);
        assert!(s.has_evidence(0));
    }

    #[test]
    fn corruption_level_is_zero_exactly_on_good_edges() {
        let inst = generate(&ucm(30, 10, 0.5, 7)).unwrap();
        let s = corruption_levels_star(&inst);
        for (e, label) in inst.labels.iter().enumerate() {
            assert_eq!(
                s.value(e) == 0.0,
                !label.is_bad(),
                "edge {e} has level {} but label {label:?}",
                s.value(e)
            );
        }
    }

    #[test]
    fn perfect_prediction_scores_one_one() {
        let inst = generate(&ucm(20, 8, 0.4, 5)).unwrap();
        let truth: Vec<PartialPermutation> = inst
            .graph
            .edges()
            .iter()
            .map(|&(i, j)| inst.truth_relative(i, j))
            .collect();
        let metrics = precision_recall(&inst, &truth).unwrap();
        assert_eq!(metrics.precision, 1.0);
        assert_eq!(metrics.recall, 1.0);
        assert!(!metrics.vacuous_precision);
        assert_eq!(metrics.correct_matches, metrics.true_matches);
    }

    #[test]
    fn empty_prediction_is_vacuously_precise_but_recalls_nothing() {
        let inst = generate(&ucm(20, 8, 0.4, 5)).unwrap();
        let empty: Vec<PartialPermutation> = inst
            .graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, _)| {
                let b = inst.graph.block(e);
                PartialPermutation::empty(b.rows(), b.cols())
            })
            .collect();
        let metrics = precision_recall(&inst, &empty).unwrap();
        assert_eq!(metrics.precision, 1.0);
        assert!(metrics.vacuous_precision);
        assert_eq!(metrics.recall, 0.0);
        assert!(metrics.true_matches > 0);
    }

    #[test]
    fn metrics_match_a_dense_mask_and_count_oracle() {
        let inst = generate(&ucm(12, 6, 0.5, 13)).unwrap();
        // Predict the observation itself: plenty of right and wrong
        // matches survive the mask.
        let predicted: Vec<PartialPermutation> = (0..inst.graph.edge_count())
            .map(|e| inst.graph.block(e).clone())
            .collect();
        let metrics = precision_recall(&inst, &predicted).unwrap();

        let dense = |b: &PartialPermutation| -> Vec<Vec<u8>> {
            let mut grid = vec![vec![0u8; b.cols()]; b.rows()];
            for &(r, c) in b.entries() {
                grid[r][c] = 1;
            }
            grid
        };
        let (mut num, mut den_p, mut den_r) = (0usize, 0usize, 0usize);
        for (e, &(i, j)) in inst.graph.edges().iter().enumerate() {
            if !inst.labels[e].is_bad() {
                continue;
            }
            let x = dense(inst.graph.block(e));
            let t = dense(&inst.truth_relative(i, j));
            let z = dense(&predicted[e]);
            for r in 0..x.len() {
                for c in 0..x[r].len() {
                    let mask = x[r][c];
                    num += (t[r][c] * mask * z[r][c] * mask) as usize;
                    den_p += (z[r][c] * mask).pow(2) as usize;
                    den_r += (t[r][c] * mask).pow(2) as usize;
                }
            }
        }
        assert_eq!(metrics.correct_matches, num);
        assert_eq!(metrics.predicted_matches, den_p);
        assert_eq!(metrics.true_matches, den_r);
        assert!((metrics.precision - num as f64 / den_p as f64).abs() < 1e-15);
        assert!((metrics.recall - num as f64 / den_r as f64).abs() < 1e-15);
    }

    #[test]
    fn clean_complete_graph_has_zero_lambda_and_full_verifiability() {
        let mut cfg = ucm(6, 4, 0.0, 2);
        cfg.edge_prob = 1.0;
        cfg.keypoint_prob = 1.0;
        let inst = generate(&cfg).unwrap();
        let report = theorem_quantities(&inst);
        assert_eq!(report.lambda, 0.0);
        assert_eq!(report.verifiability, 1.0);
        assert!(report.feasible);
        assert!(report.max_growth.is_infinite());
        assert!(report.max_initial_beta.is_infinite());
        assert_eq!(report.skipped_no_cycles, 0);
    }

    #[test]
    fn single_bad_edge_in_a_large_complete_graph_is_feasible() {
        let inst = tampered_clean(60, 3);
        let report = theorem_quantities(&inst);
        assert!((report.lambda - 1.0 / 58.0).abs() < 1e-12);
        assert_eq!(report.verifiability, 1.0);
        assert!(report.feasible, "bound {}", report.lambda_bound);
        assert!((report.max_initial_beta - 29.0).abs() < 1e-9);
        assert!(report.max_growth > 1.1 && report.max_growth < 1.2);
    }

    #[test]
    fn lambda_and_verifiability_ignore_node_labels() {
        let inst = generate(&ucm(14, 6, 0.4, 3)).unwrap();
        let before = theorem_quantities(&inst);

        // Relabel nodes by reversal: node i becomes n-1-i.
        let n = inst.graph.node_count();
        let rename = |v: usize| n - 1 - v;
        let counts: Vec<usize> = (0..n).map(|i| inst.graph.keypoint_count(rename(i))).collect();
        let mut edges = Vec::new();
        let mut labels = vec![EdgeLabel::Good; inst.labels.len()];
        let mut renamed: Vec<(usize, usize, usize)> = inst
            .graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| {
                let (a, b) = (rename(i).min(rename(j)), rename(i).max(rename(j)));
                (a, b, e)
            })
            .collect();
        renamed.sort_unstable();
        for (slot, &(a, b, e)) in renamed.iter().enumerate() {
            let (i, _) = inst.graph.edges()[e];
            let block = inst.graph.block(e);
            // Keep the block oriented from the lower new index.
            let oriented = if rename(i) == a { block.clone() } else { block.transpose() };
            edges.push((a, b, oriented));
            labels[slot] = inst.labels[e];
        }
        let relabeled = SynthInstance {
            graph: ViewingGraph::new(counts, edges).unwrap(),
            truth_blocks: (0..n).map(|i| inst.truth_blocks[rename(i)].clone()).collect(),
            full_truth: (0..n).map(|i| inst.full_truth[rename(i)].clone()).collect(),
            labels,
            keypoint_ids: (0..n).map(|i| inst.keypoint_ids[rename(i)].clone()).collect(),
            seed_nodes: inst.seed_nodes.iter().map(|&v| rename(v)).collect(),
            universe_size: inst.universe_size,
        };
        let after = theorem_quantities(&relabeled);
        assert_eq!(before.lambda, after.lambda);
        assert_eq!(before.verifiability, after.verifiability);
    }

    #[test]
    fn separation_holds_on_the_feasible_single_bad_edge_instance() {
        let inst = tampered_clean(60, 3);
        let report = theorem_quantities(&inst);
        let config = CempConfig {
            iterations: 25,
            schedule: BetaSchedule::geometric(29.0, 1.1).unwrap(),
        };
        let history = cemp_history(&all_inconsistencies(&inst.graph), &config);
        match separation_check(&history, &config, &inst, &report) {
            SeparationCheck::Checked(out) => {
                assert!(out.pass, "violations: {}", out.violations);
                assert!(out.max_good_ratio <= 1.0);
                assert!(out.min_bad_ratio >= 1.0);
                assert_eq!(out.steps, 25);
            }
            SeparationCheck::HypothesesUnmet { reason } => {
                panic!("hypotheses should hold: {reason}")
            }
        }
    }

    #[test]
    fn clean_instances_pass_trivially() {
        let mut cfg = ucm(8, 4, 0.0, 6);
        cfg.edge_prob = 1.0;
        let inst = generate(&cfg).unwrap();
        let report = theorem_quantities(&inst);
        let config = CempConfig {
            iterations: 10,
            schedule: BetaSchedule::geometric(2.0, 1.05).unwrap(),
        };
        let history = cemp_history(&all_inconsistencies(&inst.graph), &config);
        let SeparationCheck::Checked(out) = separation_check(&history, &config, &inst, &report)
        else {
            panic!("clean instance satisfies every hypothesis");
        };
        assert!(out.pass);
        assert!(out.min_bad_ratio.is_infinite());
    }

    #[test]
    fn unmet_hypotheses_are_reported_not_checked() {
        let inst = tampered_clean(10, 3);
        let report = theorem_quantities(&inst);
        // lambda = 1/8 here; the feasibility bound for m = 3 is about
        // 0.02, so the hypotheses fail before any bound is evaluated.
        assert!(!report.feasible);
        let config = CempConfig::default();
        let history = cemp_history(&all_inconsistencies(&inst.graph), &config);
        assert!(matches!(
            separation_check(&history, &config, &inst, &report),
            SeparationCheck::HypothesesUnmet { .. }
        ));
    }

    #[test]
    fn capped_schedules_are_rejected_when_the_cap_binds() {
        let inst = tampered_clean(60, 3);
        let report = theorem_quantities(&inst);
        let config = CempConfig {
            iterations: 25,
            schedule: BetaSchedule::new(29.0, 1.1, Some(35.0)).unwrap(),
        };
        let history = cemp_history(&all_inconsistencies(&inst.graph), &config);
        let result = separation_check(&history, &config, &inst, &report);
        let SeparationCheck::HypothesesUnmet { reason } = result else {
            panic!("binding cap breaks the geometric schedule hypothesis");
        };
        assert!(reason.contains("cap"));
    }

    #[test]
    fn lemma_bounds_hold_on_a_uniformly_corrupted_instance() {
        let inst = generate(&ucm(30, 10, 0.5, 21)).unwrap();
        let report = lemma_suite(&inst);
        assert!(report.upper_checked > 0);
        assert!(report.lower_checked > 0);
        assert_eq!(report.upper_violations, 0, "worst {}", report.upper_worst_margin);
        assert_eq!(report.lower_violations, 0, "worst {}", report.lower_worst_margin);
        assert!(report.upper_worst_margin <= 0.0);
        assert!(report.lower_worst_margin <= 0.0);
    }

    #[test]
    fn lemma_bounds_on_a_hand_checked_triangle() {
        let inst = tampered_clean(3, 3);
        // The swapped edge has corruption level 2/3 and its only cycle
        // has inconsistency 2/3; the two good edges see that same cycle
        // value bounded by 3 * (2/3 + 0) = 2.
        let s = corruption_levels_star(&inst);
        assert!((s.value(0) - 2.0 / 3.0).abs() < 1e-15);
        let report = lemma_suite(&inst);
        assert_eq!(report.upper_checked, 2);
        assert_eq!(report.lower_checked, 1);
        assert_eq!(report.upper_violations, 0);
        assert_eq!(report.lower_violations, 0);
        // Good-edge cycles score 2/3 against bound 2; the bad edge's
        // mean 2/3 sits above its floor 1 * (2/3) / 3.
        assert!((report.upper_worst_margin - (2.0 / 3.0 - 2.0)).abs() < 1e-12);
        assert!((report.lower_worst_margin - (2.0 / 9.0 - 2.0 / 3.0)).abs() < 1e-12);
    }
}
