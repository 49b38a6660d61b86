//! Neighbor graphs over a dissimilarity matrix and their shortest-path metric.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use ndarray::Array2;
use rayon::prelude::*;

use crate::divergence::{DissimilarityMatrix, Metric};
use crate::error::{FineError, Result};
use crate::io::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected weighted graph; each edge is stored once with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
    k: usize,
    connected: bool,
    bridged: usize,
    ids: Vec<String>,
    metric: Metric,
}

/// `max(3, ⌈log₂ N⌉)`, capped at `N − 1`.
pub fn default_k(n: usize) -> usize {
    let log = if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    };
    log.max(3).min(n.saturating_sub(1))
}

/// Symmetric-union k-nearest-neighbor graph. Row neighbors are ranked by
/// `(D(i, j), j)`, so ties go to the lower index.
pub fn build_neighbor_graph(d: &DissimilarityMatrix, k: usize) -> Result<NeighborGraph> {
    let n = d.len();
    if k < 1 || k + 1 > n {
        return Err(FineError::InvalidParameter(format!(
            "neighbor count {k} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let values = d.values();
    let mut pairs = BTreeSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| values[[i, a]].total_cmp(&values[[i, b]]).then(a.cmp(&b)));
        for &j in &order[..k] {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(i, j)| Edge {
            i,
            j,
            weight: values[[i, j]],
        })
        .collect();
    let connected = component_count(n, &edges) == 1;
    Ok(NeighborGraph {
        n_nodes: n,
        edges,
        k,
        connected,
        bridged: 0,
        ids: d.ids().to_vec(),
        metric: d.metric(),
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

fn component_count(n: usize, edges: &[Edge]) -> usize {
    let mut uf = UnionFind::new(n);
    let mut count = n;
    for e in edges {
        if uf.union(e.i, e.j) {
            count -= 1;
        }
    }
    count
}

/// Joins components with the globally cheapest inter-component edges, in
/// Kruskal order over `(weight, i, j)`, until the graph is connected.
pub fn ensure_connected(g: &NeighborGraph, d: &DissimilarityMatrix) -> NeighborGraph {
    let n = g.n_nodes;
    let mut uf = UnionFind::new(n);
    let mut components = n;
    for e in &g.edges {
        if uf.union(e.i, e.j) {
            components -= 1;
        }
    }
    let mut out = g.clone();
    if components <= 1 {
        out.connected = true;
        return out;
    }
    let values = d.values();
    let mut candidates: Vec<Edge> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if uf.find(i) != uf.find(j) {
                candidates.push(Edge {
                    i,
                    j,
                    weight: values[[i, j]],
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut added = 0;
    for e in candidates {
        if components == 1 {
            break;
        }
        if uf.union(e.i, e.j) {
            out.edges.push(e);
            components -= 1;
            added += 1;
        }
    }
    out.edges.sort_by(|a, b| a.i.cmp(&b.i).then(a.j.cmp(&b.j)));
    out.connected = true;
    out.bridged += added;
    log::warn!("neighbor graph was disconnected; added {added} bridging edges");
    out
}

impl NeighborGraph {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn connected(&self) -> bool {
        self.connected
    }

    /// Edges added by [`ensure_connected`].
    pub fn bridged(&self) -> usize {
        self.bridged
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn components(&self) -> usize {
        component_count(self.n_nodes, &self.edges)
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for e in &self.edges {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        adj
    }

    /// `i,j,weight` edge list.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,weight\n");
        for e in &self.edges {
            out.push_str(&format!("{},{},{}\n", e.i, e.j, fmt_f64(e.weight)));
        }
        out
    }
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path lengths with a binary-heap frontier.
pub fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut done = vec![false; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: du, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            let alt = du + w;
            if alt < dist[v] {
                dist[v] = alt;
                heap.push(Frontier { dist: alt, node: v });
            }
        }
    }
    dist
}

/// All-pairs shortest paths. Entry `(i, j)` comes from the run sourced at
/// `min(i, j)`, so the matrix is exactly symmetric.
pub fn geodesic_distances(g: &NeighborGraph) -> Result<DissimilarityMatrix> {
    let comps = g.components();
    if comps > 1 {
        return Err(FineError::DisconnectedGraph { components: comps });
    }
    let n = g.n_nodes;
    let adj = g.adjacency();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for j in i + 1..n {
            values[[i, j]] = row[j];
            values[[j, i]] = row[j];
        }
    }
    DissimilarityMatrix::new(values, g.metric, g.ids.clone())
}
