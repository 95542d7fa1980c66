//! The viewing graph: images as nodes, pairwise match blocks as edges.
//!
//! Node `i` carries `m_i` keypoints; the edge `{i, j}` carries the block
//! that matches keypoints of `i` to keypoints of `j`. Blocks are stored
//! once per edge together with their transpose, so either orientation can
//! be borrowed without allocating. Everything downstream (triangle
//! measures, the corruption estimator, the solvers) addresses edges by
//! their index in the sorted edge list, which makes results independent
//! of input order.

use crate::sparse::PartialPermutation;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("node {node} out of range for {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) given more than once")]
    DuplicateEdge(usize, usize),
    #[error("block on edge ({i}, {j}) has shape {got:?}, keypoint counts require {expected:?}")]
    BlockShape {
        i: usize,
        j: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("edge ({0}, {1}) is not present")]
    MissingEdge(usize, usize),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },
    #[error("expected {edges} edge weights, got {got}")]
    WeightCount { edges: usize, got: usize },
    #[error("weight {value} on edge ({i}, {j}) is not finite and nonnegative")]
    InvalidWeight { i: usize, j: usize, value: f64 },
}

/// Undirected graph of images with a partial permutation block per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewingGraph {
    keypoint_counts: Vec<usize>,
    edges: Vec<(usize, usize)>,
    forward: Vec<PartialPermutation>,
    backward: Vec<PartialPermutation>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl ViewingGraph {
    /// Builds the graph from per-node keypoint counts and `(i, j, block)`
    /// edges. A block for `(i, j)` must be `m_i x m_j`; orientation is
    /// normalized so edges may be given either way around, but each pair
    /// only once.
    pub fn new(
        keypoint_counts: Vec<usize>,
        edges: Vec<(usize, usize, PartialPermutation)>,
    ) -> Result<Self, GraphError> {
        let n = keypoint_counts.len();
        let mut normalized: Vec<(usize, usize, PartialPermutation)> = Vec::with_capacity(edges.len());
        for (i, j, block) in edges {
            for node in [i, j] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, nodes: n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            let expected = (keypoint_counts[i], keypoint_counts[j]);
            let got = (block.rows(), block.cols());
            if expected != got {
                return Err(GraphError::BlockShape {
                    i,
                    j,
                    expected,
                    got,
                });
            }
            if i < j {
                normalized.push((i, j, block));
            } else {
                normalized.push((j, i, block.transpose()));
            }
        }
        normalized.sort_by_key(|&(i, j, _)| (i, j));
        for w in normalized.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }

        let mut edges = Vec::with_capacity(normalized.len());
        let mut forward = Vec::with_capacity(normalized.len());
        let mut backward = Vec::with_capacity(normalized.len());
        let mut adjacency = vec![Vec::new(); n];
        for (e, (i, j, block)) in normalized.into_iter().enumerate() {
            edges.push((i, j));
            backward.push(block.transpose());
            forward.push(block);
            adjacency[i].push((j, e));
            adjacency[j].push((i, e));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            keypoint_counts,
            edges,
            forward,
            backward,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.keypoint_counts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn keypoint_count(&self, node: usize) -> usize {
        self.keypoint_counts[node]
    }

    pub fn keypoint_counts(&self) -> &[usize] {
        &self.keypoint_counts
    }

    /// Total keypoints across all images.
    pub fn total_keypoints(&self) -> usize {
        self.keypoint_counts.iter().sum()
    }

    /// Edges as `(i, j)` with `i < j`, sorted lexicographically. Edge
    /// indices used throughout the crate refer to positions in this slice.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    /// Block of `edge` oriented min-to-max node.
    pub fn block(&self, edge: usize) -> &PartialPermutation {
        &self.forward[edge]
    }

    /// Block of `edge` with rows on the `from` side.
    ///
    /// Panics if `from` is not an endpoint of `edge`; callers always hold
    /// an edge index obtained for that node.
    pub fn block_from(&self, edge: usize, from: usize) -> &PartialPermutation {
        let (i, j) = self.edges[edge];
        if from == i {
            &self.forward[edge]
        } else if from == j {
            &self.backward[edge]
        } else {
            panic!("node {from} is not an endpoint of edge ({i}, {j})");
        }
    }

    /// Neighbors of `node` as `(neighbor, edge index)`, sorted by neighbor.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// Nodes adjacent to both endpoints of the edge `{i, j}`, ascending.
    pub fn co_neighborhood(&self, i: usize, j: usize) -> Result<Vec<usize>, GraphError> {
        let edge = self
            .edge_index(i, j)
            .ok_or(GraphError::MissingEdge(i.min(j), i.max(j)))?;
        Ok(self.co_neighbors_of_edge(edge))
    }

    pub(crate) fn co_neighbors_of_edge(&self, edge: usize) -> Vec<usize> {
        let (i, j) = self.edges[edge];
        let (a, b) = (&self.adjacency[i], &self.adjacency[j]);
        let mut out = Vec::new();
        let (mut p, mut q) = (0, 0);
        while p < a.len() && q < b.len() {
            match a[p].0.cmp(&b[q].0) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[p].0);
                    p += 1;
                    q += 1;
                }
            }
        }
        out
    }
}

/// One nonnegative weight per graph edge, aligned to [`ViewingGraph::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    values: Vec<f64>,
}

impl EdgeWeights {
    pub fn new(graph: &ViewingGraph, values: Vec<f64>) -> Result<Self, GraphError> {
        if values.len() != graph.edge_count() {
            return Err(GraphError::WeightCount {
                edges: graph.edge_count(),
                got: values.len(),
            });
        }
        for (e, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                let (i, j) = graph.edges()[e];
                return Err(GraphError::InvalidWeight { i, j, value: v });
            }
        }
        Ok(Self { values })
    }

    /// Weight 1 on every edge.
    pub fn uniform(graph: &ViewingGraph) -> Self {
        Self {
            values: vec![1.0; graph.edge_count()],
        }
    }

    pub fn value(&self, edge: usize) -> f64 {
        self.values[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One parent-to-child propagation step of a spanning tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStep {
    pub parent: usize,
    pub child: usize,
    /// Graph edge index joining `parent` and `child`.
    pub edge: usize,
}

/// A rooted spanning tree in breadth-first propagation order: every
/// node's step appears after its parent's.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub root: usize,
    pub steps: Vec<TreeStep>,
    pub total_weight: f64,
}

/// Minimum spanning tree by Kruskal's algorithm.
///
/// Edges are taken in `(weight, i, j)` order, so equal weights break ties
/// toward the lexicographically smallest edge and the result does not
/// depend on input order. The root is the endpoint of the lightest tree
/// edge with the larger keypoint count (smaller index on a further tie).
/// A disconnected graph is an error naming its components.
pub fn minimum_spanning_tree(
    graph: &ViewingGraph,
    weights: &EdgeWeights,
) -> Result<SpanningTree, GraphError> {
    if weights.values().len() != graph.edge_count() {
        return Err(GraphError::WeightCount {
            edges: graph.edge_count(),
            got: weights.values().len(),
        });
    }
    let n = graph.node_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }

    let mut order: Vec<usize> = (0..graph.edge_count()).collect();
    order.sort_by(|&a, &b| {
        weights
            .value(a)
            .total_cmp(&weights.value(b))
            .then_with(|| graph.edges()[a].cmp(&graph.edges()[b]))
    });

    let mut uf = UnionFind::new(n);
    let mut accepted: Vec<usize> = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        let (i, j) = graph.edges()[e];
        if uf.union(i, j) {
            accepted.push(e);
            if accepted.len() == n - 1 {
                break;
            }
        }
    }
    if accepted.len() + 1 < n {
        return Err(GraphError::Disconnected {
            components: components(n, graph.edges()),
        });
    }

    let root = if accepted.is_empty() {
        0
    } else {
        // Kruskal accepts edges lightest-first, so the first accepted edge
        // is the lightest one in the tree.
        let (i, j) = graph.edges()[accepted[0]];
        if graph.keypoint_count(j) > graph.keypoint_count(i) {
            j
        } else {
            i
        }
    };

    let mut tree_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &e in &accepted {
        let (i, j) = graph.edges()[e];
        tree_adj[i].push((j, e));
        tree_adj[j].push((i, e));
    }
    for list in &mut tree_adj {
        list.sort_unstable();
    }

    let mut steps = Vec::with_capacity(accepted.len());
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(parent) = queue.pop_front() {
        for &(child, edge) in &tree_adj[parent] {
            if !seen[child] {
                seen[child] = true;
                steps.push(TreeStep {
                    parent,
                    child,
                    edge,
                });
                queue.push_back(child);
            }
        }
    }

    let total_weight = accepted.iter().map(|&e| weights.value(e)).sum();
    Ok(SpanningTree {
        root,
        steps,
        total_weight,
    })
}

/// Connected components as sorted node lists, ordered by smallest member.
pub(crate) fn components(n: usize, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for &(i, j) in pairs {
        uf.union(i, j);
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for node in 0..n {
        by_root.entry(uf.find(node)).or_default().push(node);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they already share one.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}
