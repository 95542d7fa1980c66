//! Dense reference implementations shared by the integration tests.
//!
//! Everything here recomputes quantities from first principles on plain
//! `Vec<Vec<f64>>` matrices, touching only the raw accessors of the
//! public types (entry lists, edge lists, block storage). Agreement with
//! the sparse kernels is therefore evidence, not circularity.
#![allow(dead_code)]

use permsync_core::cemp::BetaSchedule;
use permsync_core::graph::ViewingGraph;
use permsync_core::sparse::PartialPermutation;
use permsync_core::synth::SynthInstance;

pub type Dense = Vec<Vec<f64>>;

pub fn dense(block: &PartialPermutation) -> Dense {
    let mut out = vec![vec![0.0; block.cols()]; block.rows()];
    for &(r, c) in block.entries() {
        out[r][c] = 1.0;
    }
    out
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k) = (a.len(), b.len());
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![0.0; m]; n];
    for r in 0..n {
        assert_eq!(a[r].len(), k, "inner dimensions must agree");
        for t in 0..k {
            let v = a[r][t];
            if v == 0.0 {
                continue;
            }
            for c in 0..m {
                out[r][c] += v * b[t][c];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    let mut out = vec![vec![0.0; n]; m];
    for r in 0..n {
        for c in 0..m {
            out[c][r] = a[r][c];
        }
    }
    out
}

pub fn trace(a: &Dense) -> f64 {
    a.iter().enumerate().map(|(i, row)| row[i]).sum()
}

/// Index pairs of entries above one half, row-major order.
pub fn support(a: &Dense) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (r, row) in a.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0.5 {
                out.push((r, c));
            }
        }
    }
    out
}

pub fn nnz(a: &Dense) -> usize {
    a.iter().flatten().filter(|&&v| v > 0.5).count()
}

/// Triangle inconsistency from dense products: path counts are nonzero
/// counts of the two-hop products, loops come from the triple-product
/// trace. `None` when no two-hop path exists in any rotation.
pub fn dense_inconsistency(x_ij: &Dense, x_jk: &Dense, x_ki: &Dense) -> Option<f64> {
    let through_j = nnz(&matmul(x_ij, x_jk));
    let through_k = nnz(&matmul(x_jk, x_ki));
    let through_i = nnz(&matmul(x_ki, x_ij));
    let closed = trace(&matmul(&matmul(x_ij, x_jk), x_ki));
    let total = (through_i + through_j + through_k) as f64;
    if total == 0.0 {
        None
    } else {
        Some(1.0 - 3.0 * closed / total)
    }
}

/// Block of the edge `{a, b}` oriented from `a` to `b`, transposing the
/// stored direction by hand when needed.
pub fn oriented(graph: &ViewingGraph, a: usize, b: usize) -> Dense {
    let e = graph.edge_index(a, b).expect("edge must exist");
    let (lo, _) = graph.edges()[e];
    let d = dense(graph.block(e));
    if a == lo {
        d
    } else {
        transpose(&d)
    }
}

/// Common neighbors of `i` and `j`, recomputed from the edge list alone.
pub fn co_nodes(graph: &ViewingGraph, i: usize, j: usize) -> Vec<usize> {
    let touches = |a: usize, k: usize| {
        graph.edge_index(a.min(k), a.max(k)).is_some() && a != k
    };
    (0..graph.node_count())
        .filter(|&k| k != i && k != j && touches(i, k) && touches(j, k))
        .collect()
}

/// All iterates `s^(0) ... s^(T)` of the corruption estimator, recomputed
/// densely with the textbook softmax (no max-shift). Edges without an
/// informative triangle are pinned at 1; `evidence` marks the rest.
pub struct DenseCempRun {
    pub history: Vec<Vec<f64>>,
    pub evidence: Vec<bool>,
}

pub fn dense_cemp_history(
    graph: &ViewingGraph,
    iterations: usize,
    schedule: &BetaSchedule,
) -> DenseCempRun {
    // Per edge: the informative triangles as (edge_ik, edge_jk, d).
    let mut table: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(graph.edge_count());
    for e in 0..graph.edge_count() {
        let (i, j) = graph.edges()[e];
        let x_ij = oriented(graph, i, j);
        let mut terms = Vec::new();
        for k in co_nodes(graph, i, j) {
            let x_jk = oriented(graph, j, k);
            let x_ki = oriented(graph, k, i);
            if let Some(d) = dense_inconsistency(&x_ij, &x_jk, &x_ki) {
                let e_ik = graph.edge_index(i.min(k), i.max(k)).unwrap();
                let e_jk = graph.edge_index(j.min(k), j.max(k)).unwrap();
                terms.push((e_ik, e_jk, d));
            }
        }
        table.push(terms);
    }

    let evidence: Vec<bool> = table.iter().map(|t| !t.is_empty()).collect();
    let init: Vec<f64> = table
        .iter()
        .map(|terms| {
            if terms.is_empty() {
                1.0
            } else {
                terms.iter().map(|&(_, _, d)| d).sum::<f64>() / terms.len() as f64
            }
        })
        .collect();

    let mut history = vec![init];
    for t in 0..iterations {
        let beta = schedule.value(t);
        let prev = history.last().unwrap().clone();
        let next: Vec<f64> = table
            .iter()
            .enumerate()
            .map(|(e, terms)| {
                if terms.is_empty() {
                    return prev[e];
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(e_ik, e_jk, d) in terms {
                    let w = (-beta * (prev[e_ik] + prev[e_jk])).exp();
                    num += w * d;
                    den += w;
                }
                num / den
            })
            .collect();
        history.push(next);
    }
    DenseCempRun { history, evidence }
}

/// Greedy projection reference: entries by descending score (row, column
/// break ties), keep those strictly above the threshold whose row and
/// column are both still free.
pub fn dense_greedy_projection(scores: &Dense, threshold: f64) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for (r, row) in scores.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v != 0.0 {
                cells.push((r, c, v));
            }
        }
    }
    cells.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (a.0, a.1).cmp(&(b.0, b.1))));
    let rows = scores.len();
    let cols = if rows == 0 { 0 } else { scores[0].len() };
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut picked = Vec::new();
    for (r, c, v) in cells {
        if v > threshold && !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            picked.push((r, c));
        }
    }
    picked.sort_unstable();
    picked
}

/// Exhaustive minimum spanning tree: tries every (n-1)-subset of edges,
/// keeps the connected ones, and returns the minimum total weight, the
/// best subset found, and how many subsets tie with it within `1e-9`.
pub fn brute_force_spanning_tree(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
) -> Option<(f64, Vec<usize>, usize)> {
    assert_eq!(edges.len(), weights.len());
    let need = n - 1;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut ties = 0usize;
    let mut chosen = Vec::with_capacity(need);

    fn spans(n: usize, edges: &[(usize, usize)], subset: &[usize]) -> bool {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut merged = 0;
        for &e in subset {
            let (a, b) = edges[e];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                merged += 1;
            }
        }
        merged == n - 1
    }

    fn walk(
        start: usize,
        need: usize,
        n: usize,
        edges: &[(usize, usize)],
        weights: &[f64],
        chosen: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
        ties: &mut usize,
    ) {
        if chosen.len() == need {
            if !spans(n, edges, chosen) {
                return;
            }
            let w: f64 = chosen.iter().map(|&e| weights[e]).sum();
            match best {
                Some((bw, bs)) => {
                    if w < *bw - 1e-9 {
                        *bw = w;
                        *bs = chosen.clone();
                        *ties = 1;
                    } else if (w - *bw).abs() <= 1e-9 {
                        *ties += 1;
                        if w < *bw {
                            *bw = w;
                            *bs = chosen.clone();
                        }
                    }
                }
                None => {
                    *best = Some((w, chosen.clone()));
                    *ties = 1;
                }
            }
        } else {
            let remaining = need - chosen.len();
            for e in start..=edges.len().saturating_sub(remaining) {
                chosen.push(e);
                walk(e + 1, need, n, edges, weights, chosen, best, ties);
                chosen.pop();
            }
        }
    }

    if need > edges.len() {
        return None;
    }
    walk(0, need, n, edges, weights, &mut chosen, &mut best, &mut ties);
    best.map(|(w, s)| (w, s, ties))
}

/// Ground-truth corruption level of every edge, recomputed densely from
/// the full truth and the sampled keypoint sets. For each universe point
/// seen by either endpoint, the observed block must reproduce exactly the
/// links the restricted truth dictates; the level is the misclassified
/// fraction. Edges whose endpoints share no universe points score 0.
pub fn dense_corruption_star(inst: &SynthInstance) -> Vec<f64> {
    let graph = &inst.graph;
    let n = graph.node_count();
    // row_of[i][u] = local row of universe point u at node i, if sampled.
    // Derived from the full truth plus the kept slots, not from the
    // restricted truth blocks the library classifies with.
    let mut row_of: Vec<Vec<Option<usize>>> = vec![vec![None; inst.universe_size]; n];
    for (i, slots) in inst.keypoint_ids.iter().enumerate() {
        let full = dense(&inst.full_truth[i]);
        for (row, &slot) in slots.iter().enumerate() {
            let u = full[slot]
                .iter()
                .position(|&v| v > 0.5)
                .expect("full truth rows each carry one point");
            row_of[i][u] = Some(row);
        }
    }
    let mut out = Vec::with_capacity(graph.edge_count());
    for e in 0..graph.edge_count() {
        let (i, j) = graph.edges()[e];
        let x = dense(graph.block(e));
        let mut relevant = 0usize;
        let mut bad = 0usize;
        for u in 0..inst.universe_size {
            match (row_of[i][u], row_of[j][u]) {
                (Some(r), Some(c)) => {
                    relevant += 1;
                    if x[r][c] < 0.5 {
                        bad += 1;
                    }
                }
                (Some(r), None) => {
                    relevant += 1;
                    if x[r].iter().any(|&v| v > 0.5) {
                        bad += 1;
                    }
                }
                (None, Some(c)) => {
                    relevant += 1;
                    if x.iter().any(|row| row[c] > 0.5) {
                        bad += 1;
                    }
                }
                (None, None) => {}
            }
        }
        out.push(if relevant == 0 {
            0.0
        } else {
            bad as f64 / relevant as f64
        });
    }
    out
}

/// Precision and recall of predicted matches on the corrupted edges,
/// recomputed densely: mask everything by the observation support, then
/// count dense inner products.
pub fn dense_precision_recall(
    inst: &SynthInstance,
    predicted: &[PartialPermutation],
) -> (f64, f64) {
    let graph = &inst.graph;
    let mut tp = 0.0;
    let mut pred_mass = 0.0;
    let mut truth_mass = 0.0;
    for e in 0..graph.edge_count() {
        if !inst.labels[e].is_bad() {
            continue;
        }
        let (i, j) = graph.edges()[e];
        let mask = dense(graph.block(e));
        let truth = dense(&inst.truth_relative(i, j));
        let z = dense(&predicted[e]);
        for r in 0..mask.len() {
            for c in 0..mask[r].len() {
                let m = mask[r][c];
                tp += truth[r][c] * m * z[r][c] * m;
                pred_mass += (z[r][c] * m) * (z[r][c] * m);
                truth_mass += (truth[r][c] * m) * (truth[r][c] * m);
            }
        }
    }
    let precision = if pred_mass == 0.0 { 1.0 } else { tp / pred_mass };
    let recall = if truth_mass == 0.0 { 1.0 } else { tp / truth_mass };
    (precision, recall)
}

/// One weighted vote-and-project refinement sweep computed densely: per
/// node, neighbor votes accumulate into an m_i x universe score table in
/// ascending neighbor order (matching the sparse kernel's summation
/// order), then the greedy projection keeps entries strictly above the
/// threshold.
pub fn dense_weighted_step(
    graph: &ViewingGraph,
    weights: &[f64],
    normalize: bool,
    threshold: f64,
    current: &[PartialPermutation],
    universe: usize,
) -> Vec<Vec<(usize, usize)>> {
    let n = graph.node_count();
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        incident[i].push((j, e));
        incident[j].push((i, e));
    }
    for list in &mut incident {
        list.sort_unstable();
    }
    (0..n)
        .map(|i| {
            if incident[i].is_empty() {
                return current[i].entries().to_vec();
            }
            let total: f64 = incident[i].iter().map(|&(_, e)| weights[e]).sum();
            let scale = if normalize && total > 0.0 {
                1.0 / total
            } else {
                1.0
            };
            let mut scores = vec![vec![0.0f64; universe]; graph.keypoint_count(i)];
            for &(j, e) in &incident[i] {
                let w = weights[e] * scale;
                if w == 0.0 {
                    continue;
                }
                let stored = dense(graph.block(e));
                let x_ij = if graph.edges()[e].0 == i {
                    stored
                } else {
                    transpose(&stored)
                };
                let p_j = dense(&current[j]);
                for (r, row) in x_ij.iter().enumerate() {
                    for (rj, &v) in row.iter().enumerate() {
                        if v > 0.5 {
                            for (c, &pv) in p_j[rj].iter().enumerate() {
                                if pv > 0.5 {
                                    scores[r][c] += w;
                                }
                            }
                        }
                    }
                }
            }
            dense_greedy_projection(&scores, threshold)
        })
        .collect()
}
