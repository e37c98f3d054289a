//! Shortest paths between defects over a decoding graph, with observable parity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dem::DecodingGraphInstance;
use crate::error::{Error, Result};

/// Compressed adjacency with the boundary as node `n_detectors`.
#[derive(Clone, Debug)]
pub struct Adjacency {
    pub n: usize,
    offsets: Vec<usize>,
    /// `(neighbour, weight, flips observable)`
    targets: Vec<(usize, f64, bool)>,
}

impl Adjacency {
    pub fn new(graph: &DecodingGraphInstance) -> Self {
        let n = graph.n_detectors();
        let boundary = n;
        let mut deg = vec![0usize; n + 1];
        for e in &graph.edges {
            deg[e.u] += 1;
            deg[e.v.unwrap_or(boundary)] += 1;
        }
        let mut offsets = vec![0; n + 2];
        for i in 0..=n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![(0, 0.0, false); offsets[n + 1]];
        for e in &graph.edges {
            let v = e.v.unwrap_or(boundary);
            targets[fill[e.u]] = (v, e.weight, e.flips_observable);
            fill[e.u] += 1;
            targets[fill[v]] = (e.u, e.weight, e.flips_observable);
            fill[v] += 1;
        }
        Adjacency { n, offsets, targets }
    }

    pub fn boundary(&self) -> usize {
        self.n
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, f64, bool)] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Single-source shortest paths. Paths never pass through the boundary.
pub fn dijkstra(adj: &Adjacency, src: usize) -> (Vec<f64>, Vec<bool>) {
    let mut dist = vec![f64::INFINITY; adj.n + 1];
    let mut par = vec![false; adj.n + 1];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Item(0.0, src));
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] || v == adj.boundary() {
            continue;
        }
        for &(u, w, f) in adj.neighbours(v) {
            let nd = d + w;
            if nd < dist[u] {
                dist[u] = nd;
                par[u] = par[v] ^ f;
                heap.push(Item(nd, u));
            }
        }
    }
    (dist, par)
}

/// Distances and observable parities among defects and from each defect to the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Distances {
    pub pair: Vec<Vec<f64>>,
    pub pair_obs: Vec<Vec<bool>>,
    pub boundary: Vec<f64>,
    pub boundary_obs: Vec<bool>,
}

pub fn pairwise_distances(adj: &Adjacency, defects: &[usize]) -> Result<Distances> {
    let k = defects.len();
    let mut out = Distances {
        pair: vec![vec![0.0; k]; k],
        pair_obs: vec![vec![false; k]; k],
        boundary: vec![0.0; k],
        boundary_obs: vec![false; k],
    };
    for (i, &d) in defects.iter().enumerate() {
        if d >= adj.n {
            return Err(Error::data(format!("defect {d} is not a detector of the graph")));
        }
        let (dist, par) = dijkstra(adj, d);
        out.boundary[i] = dist[adj.boundary()];
        out.boundary_obs[i] = par[adj.boundary()];
        for (j, &e) in defects.iter().enumerate() {
            out.pair[i][j] = dist[e];
            out.pair_obs[i][j] = par[e];
        }
        if !out.boundary[i].is_finite() && out.pair[i].iter().enumerate().any(|(j, x)| j != i && !x.is_finite()) {
            return Err(Error::data(format!("defect {d} is disconnected")));
        }
    }
    Ok(out)
}
