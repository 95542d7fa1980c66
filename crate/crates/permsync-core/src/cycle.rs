//! Triangle consistency of partial matches.
//!
//! For nodes `i, j, k` joined pairwise by blocks, a match loop is *closed*
//! when following `i -> j -> k -> i` returns to the starting keypoint.
//! On uncorrupted data every two-hop path closes; a corrupted block
//! leaves paths open. The inconsistency of a triangle is
//!
//! ```text
//! d = 1 - 3 * closed / (through_i + through_j + through_k)
//! ```
//!
//! which is 0 exactly when all paths close and grows toward 1 as the
//! triangle disagrees with itself. Triangles with no two-hop paths at all
//! carry no evidence and are reported as `None` and left out of the
//! per-edge tables.

use crate::graph::ViewingGraph;
use crate::sparse::{trace_product3, PartialPermutation, SparseError};
use rayon::prelude::*;

/// Path and loop counts of one triangle, oriented `i -> j -> k -> i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStats {
    /// Two-hop paths routed through `i` (from `k` to `j`). Equals the
    /// nonzero count of `X_ki * X_ij`, and by transposition also of
    /// `X_ji * X_ik`.
    pub through_i: usize,
    /// Two-hop paths routed through `j` (from `i` to `k`).
    pub through_j: usize,
    /// Two-hop paths routed through `k` (from `j` to `i`).
    pub through_k: usize,
    /// Loops that close around the triangle.
    pub closed: usize,
}

impl CycleStats {
    pub fn total_paths(&self) -> usize {
        self.through_i + self.through_j + self.through_k
    }

    /// The normalized inconsistency in `[0, 1]`, or `None` when the
    /// triangle has no paths and therefore no evidence to offer.
    pub fn inconsistency(&self) -> Option<f64> {
        let total = self.total_paths();
        if total == 0 {
            None
        } else {
            Some(1.0 - 3.0 * self.closed as f64 / total as f64)
        }
    }
}

/// Counts paths and loops for the triangle `(x_ij, x_jk, x_ki)`.
///
/// Shapes must chain: `x_ij` maps `i` to `j`, `x_jk` maps `j` to `k`,
/// `x_ki` maps `k` back to `i`.
pub fn cycle_stats(
    x_ij: &PartialPermutation,
    x_jk: &PartialPermutation,
    x_ki: &PartialPermutation,
) -> Result<CycleStats, SparseError> {
    let stats = CycleStats {
        through_i: x_ki.compose_count(x_ij)?,
        through_j: x_ij.compose_count(x_jk)?,
        through_k: x_jk.compose_count(x_ki)?,
        closed: trace_product3(x_ij, x_jk, x_ki)?,
    };
    // Every closed loop is in particular a two-hop path through each node.
    debug_assert!(
        stats.closed <= stats.through_i.min(stats.through_j).min(stats.through_k)
    );
    Ok(stats)
}

/// One informative triangle hanging off an edge `{i, j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleTerm {
    /// The third node of the triangle.
    pub co_node: usize,
    /// Graph index of the edge `{i, co_node}`.
    pub edge_ik: usize,
    /// Graph index of the edge `{j, co_node}`.
    pub edge_jk: usize,
    /// Triangle inconsistency.
    pub value: f64,
}

/// All informative triangle inconsistencies, grouped per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleInconsistencies {
    per_edge: Vec<Vec<CycleTerm>>,
}

impl CycleInconsistencies {
    /// Terms for `edge`, ascending in `co_node`.
    pub fn terms(&self, edge: usize) -> &[CycleTerm] {
        &self.per_edge[edge]
    }

    pub fn edge_count(&self) -> usize {
        self.per_edge.len()
    }

    /// Inconsistency of the triangle `(edge, co_node)`, if informative.
    pub fn get(&self, edge: usize, co_node: usize) -> Option<f64> {
        self.per_edge[edge]
            .binary_search_by_key(&co_node, |t| t.co_node)
            .ok()
            .map(|idx| self.per_edge[edge][idx].value)
    }
}

/// Computes the inconsistency of every informative triangle in the graph.
///
/// Result entries are fully determined by the graph (edges are processed
/// independently, co-nodes in ascending order), so the parallel schedule
/// cannot change the output.
pub fn all_inconsistencies(graph: &ViewingGraph) -> CycleInconsistencies {
    let per_edge: Vec<Vec<CycleTerm>> = (0..graph.edge_count())
        .into_par_iter()
        .map(|e| {
            let (i, j) = graph.edges()[e];
            let x_ij = graph.block(e);
            let mut terms = Vec::new();
            for k in graph.co_neighbors_of_edge(e) {
                let edge_ik = graph
                    .edge_index(i, k)
                    .expect("co-neighbor shares an edge with both endpoints");
                let edge_jk = graph
                    .edge_index(j, k)
                    .expect("co-neighbor shares an edge with both endpoints");
                let x_jk = graph.block_from(edge_jk, j);
                let x_ki = graph.block_from(edge_ik, k);
                let stats = cycle_stats(x_ij, x_jk, x_ki)
                    .expect("blocks of a validated graph are shape-compatible");
                if let Some(value) = stats.inconsistency() {
                    terms.push(CycleTerm {
                        co_node: k,
                        edge_ik,
                        edge_jk,
                        value,
                    });
                }
            }
            terms
        })
        .collect();
    CycleInconsistencies { per_edge }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(rows: usize, cols: usize, e: &[(usize, usize)]) -> PartialPermutation {
        PartialPermutation::new(rows, cols, e.to_vec()).unwrap()
    }

    /// Images over a 4-point universe: i sees {0,1,2}, j sees {1,2,3},
    /// k sees {0,2,3}, each listed in row order. All blocks agree with
    /// that ground truth.
    fn consistent_triangle() -> (PartialPermutation, PartialPermutation, PartialPermutation) {
        (
            pp(3, 3, &[(1, 0), (2, 1)]), // x_ij
            pp(3, 3, &[(1, 1), (2, 2)]), // x_jk
            pp(3, 3, &[(0, 0), (1, 2)]), // x_ki
        )
    }

    #[test]
    fn consistent_triangle_has_zero_inconsistency() {
        let (x_ij, x_jk, x_ki) = consistent_triangle();
        let stats = cycle_stats(&x_ij, &x_jk, &x_ki).unwrap();
        assert_eq!(
            stats,
            CycleStats {
                through_i: 1,
                through_j: 1,
                through_k: 1,
                closed: 1
            }
        );
        assert_eq!(stats.inconsistency(), Some(0.0));
    }

    #[test]
    fn consistency_matches_the_dominance_characterization() {
        // d == 0 exactly when each two-hop composite is dominated by the
        // direct block, in all three rotations.
        let (x_ij, x_jk, x_ki) = consistent_triangle();
        let x_ik = x_ki.transpose();
        let x_ji = x_ij.transpose();
        let x_kj = x_jk.transpose();
        assert!(x_ij.compose(&x_jk).unwrap().is_dominated_by(&x_ik));
        assert!(x_jk.compose(&x_ki).unwrap().is_dominated_by(&x_ji));
        assert!(x_ki.compose(&x_ij).unwrap().is_dominated_by(&x_kj));
    }

    #[test]
    fn tampered_leg_hand_computed() {
        // Replace x_ki by a block with one extra wrong match: paths and
        // loops counted by hand give d = 1 - 3/5.
        let (x_ij, x_jk, _) = consistent_triangle();
        let x_ki = pp(3, 3, &[(0, 0), (1, 2), (2, 1)]);
        let stats = cycle_stats(&x_ij, &x_jk, &x_ki).unwrap();
        assert_eq!(
            stats,
            CycleStats {
                through_i: 2,
                through_j: 1,
                through_k: 2,
                closed: 1
            }
        );
        assert_eq!(stats.inconsistency(), Some(1.0 - 3.0 / 5.0));
        // The dominance characterization fails on the tampered rotation.
        let x_kj = x_jk.transpose();
        assert!(!x_ki.compose(&x_ij).unwrap().is_dominated_by(&x_kj));
    }

    #[test]
    fn fully_broken_triangle_scores_one() {
        let (_, x_jk, x_ki) = consistent_triangle();
        let x_ij = pp(3, 3, &[(1, 1), (2, 0)]);
        let stats = cycle_stats(&x_ij, &x_jk, &x_ki).unwrap();
        assert_eq!(stats.closed, 0);
        assert_eq!(stats.inconsistency(), Some(1.0));
    }

    #[test]
    fn rotation_and_reversal_leave_inconsistency_unchanged() {
        let (x_ij, x_jk, _) = consistent_triangle();
        let x_ki = pp(3, 3, &[(0, 0), (1, 2), (2, 1)]);
        let d = |a: &PartialPermutation, b: &PartialPermutation, c: &PartialPermutation| {
            cycle_stats(a, b, c).unwrap().inconsistency().unwrap()
        };
        let base = d(&x_ij, &x_jk, &x_ki);
        assert_eq!(base, d(&x_jk, &x_ki, &x_ij));
        assert_eq!(base, d(&x_ki, &x_ij, &x_jk));
        // Walking the triangle in the opposite direction transposes every
        // block but keeps all counts.
        let (x_ji, x_ik, x_kj) = (x_ij.transpose(), x_ki.transpose(), x_jk.transpose());
        assert_eq!(base, d(&x_ji, &x_ik, &x_kj));
    }

    #[test]
    fn empty_triangle_is_uninformative() {
        let e = PartialPermutation::empty(2, 2);
        let stats = cycle_stats(&e, &e, &e).unwrap();
        assert_eq!(stats.inconsistency(), None);
    }

    #[test]
    fn table_collects_informative_triangles_per_edge() {
        // K4 with 2-keypoint images, all blocks identity except the edge
        // (0, 1), which swaps. Triangles touching (0, 1) score 1, the
        // untouched triangle (0, 2, 3) scores 0.
        let id = || pp(2, 2, &[(0, 0), (1, 1)]);
        let swap = pp(2, 2, &[(0, 1), (1, 0)]);
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let block = if (i, j) == (0, 1) { swap.clone() } else { id() };
                edges.push((i, j, block));
            }
        }
        let g = ViewingGraph::new(vec![2; 4], edges).unwrap();
        let table = all_inconsistencies(&g);
        assert_eq!(table.edge_count(), 6);

        let e01 = g.edge_index(0, 1).unwrap();
        let co: Vec<usize> = table.terms(e01).iter().map(|t| t.co_node).collect();
        assert_eq!(co, vec![2, 3]);
        assert_eq!(table.get(e01, 2), Some(1.0));
        assert_eq!(table.get(e01, 3), Some(1.0));

        let e02 = g.edge_index(0, 2).unwrap();
        assert_eq!(table.get(e02, 1), Some(1.0));
        assert_eq!(table.get(e02, 3), Some(0.0));
        assert_eq!(table.get(e02, 0), None);

        // No triangle through (2, 3) contains the corrupted edge.
        let e23 = g.edge_index(2, 3).unwrap();
        assert_eq!(table.get(e23, 1), Some(0.0));
        assert_eq!(table.get(e23, 0), Some(0.0));

        // Term edge indices point back at the right edges.
        for t in table.terms(e01) {
            assert_eq!(t.edge_ik, g.edge_index(0, t.co_node).unwrap());
            assert_eq!(t.edge_jk, g.edge_index(1, t.co_node).unwrap());
        }
    }
}
