//! Projection of nonnegative score matrices onto partial permutations.

use crate::sparse::{PartialPermutation, SparseNonnegMatrix};

use super::SolverError;

/// Greedy projection: scan entries by descending value (ties by row,
/// then column) and accept each one whose row and column are still free
/// and whose value strictly exceeds `threshold`.
///
/// Projecting a 0/1 partial permutation with any `threshold < 1` returns
/// it unchanged: its entries never compete for a row or column.
pub fn project_partial(scores: &SparseNonnegMatrix, threshold: f64) -> PartialPermutation {
    let mut order: Vec<usize> = (0..scores.nnz()).collect();
    order.sort_unstable_by(|&a, &b| {
        let (ra, ca, va) = scores.entries()[a];
        let (rb, cb, vb) = scores.entries()[b];
        vb.total_cmp(&va).then_with(|| (ra, ca).cmp(&(rb, cb)))
    });
    let mut row_used = vec![false; scores.rows()];
    let mut col_used = vec![false; scores.cols()];
    let mut picked = Vec::new();
    for idx in order {
        let (r, c, v) = scores.entries()[idx];
        if v > threshold && !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            picked.push((r, c));
        }
    }
    picked.sort_unstable();
    PartialPermutation::from_sorted_unchecked(scores.rows(), scores.cols(), picked)
}

/// Full-permutation projection for square score matrices: returns the
/// permutation maximizing the total selected score, via the Hungarian
/// algorithm on potentials. Absent entries count as score zero. Among
/// equally good permutations the column scan order fixes the result, so
/// the projection is deterministic.
///
/// Partial synchronization always projects greedily; this operator serves
/// the full-permutation mode where every keypoint must be assigned.
pub fn hungarian_project(scores: &SparseNonnegMatrix) -> Result<PartialPermutation, SolverError> {
    if scores.rows() != scores.cols() {
        return Err(SolverError::NotSquare {
            rows: scores.rows(),
            cols: scores.cols(),
        });
    }
    let n = scores.rows();
    if n == 0 {
        return Ok(PartialPermutation::empty(0, 0));
    }
    let mut cost = vec![0.0f64; n * n];
    for &(r, c, v) in scores.entries() {
        cost[r * n + c] = -v;
    }

    // Assignment by successive shortest augmenting paths with potentials;
    // arrays are 1-based with index 0 as the virtual start column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut assigned_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        assigned_row[0] = r;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut entries: Vec<(usize, usize)> = (1..=n).map(|j| (assigned_row[j] - 1, j - 1)).collect();
    entries.sort_unstable();
    Ok(PartialPermutation::from_sorted_unchecked(n, n, entries))
}
