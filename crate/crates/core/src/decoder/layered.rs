//! Exact minimum-weight correction by dynamic programming over a vertex sweep.
//!
//! Vertices are visited in id order. The state is the residual parity of the open
//! vertices (visited, with edges still to come); an edge either toggles both of its
//! endpoints or is skipped, and a vertex must have residual zero once its last edge is
//! done. On a graph whose rows interact only with neighbouring rows the open set stays
//! a few rows wide. The minimum over states is the minimum-weight edge set with the
//! defects as odd vertices, which is the matching optimum with free boundary.

use crate::dem::DecodingGraphInstance;
use crate::error::{Error, Result};

/// Widest open set the plan accepts.
pub const MAX_SLOTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Open { slot: u8, vertex: u32 },
    Edge { mask: u32, weight: f64, flips: bool },
    Close { slot: u8 },
}

#[derive(Clone, Debug)]
pub struct LayeredPlan {
    ops: Vec<Op>,
    slots: usize,
    n: usize,
}

impl LayeredPlan {
    pub fn new(graph: &DecodingGraphInstance) -> Result<Self> {
        let n = graph.n_detectors();
        let key = |e: &crate::dem::GraphEdge| match e.v {
            Some(v) => (e.u.max(v), e.u.min(v)),
            None => (e.u, e.u),
        };
        let mut order: Vec<usize> = (0..graph.edges.len()).collect();
        order.sort_by_key(|&i| (key(&graph.edges[i]), i));
        // vertex closes after the sweep step of its latest neighbour
        let mut closes_at: Vec<usize> = (0..n).collect();
        for e in &graph.edges {
            let (hi, _) = key(e);
            closes_at[e.u] = closes_at[e.u].max(hi);
            if let Some(v) = e.v {
                closes_at[v] = closes_at[v].max(hi);
            }
        }
        let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, &c) in closes_at.iter().enumerate() {
            closing[c].push(v);
        }
        let mut free: Vec<u8> = (0..MAX_SLOTS as u8).rev().collect();
        let mut slot_of = vec![u8::MAX; n];
        let mut ops = Vec::with_capacity(graph.edges.len() + 2 * n);
        let mut used = 0usize;
        let mut next = 0usize;
        for v in 0..n {
            let s = free.pop().ok_or_else(|| {
                Error::numerical(format!("open set exceeds {MAX_SLOTS} detectors at detector {v}"))
            })?;
            used = used.max(s as usize + 1);
            slot_of[v] = s;
            ops.push(Op::Open { slot: s, vertex: v as u32 });
            while next < order.len() && key(&graph.edges[order[next]]).0 == v {
                let e = &graph.edges[order[next]];
                let mut mask = 1u32 << slot_of[e.u];
                if let Some(w) = e.v {
                    mask ^= 1u32 << slot_of[w];
                }
                ops.push(Op::Edge { mask, weight: e.weight, flips: e.flips_observable });
                next += 1;
            }
            for &u in &closing[v] {
                ops.push(Op::Close { slot: slot_of[u] });
                free.push(slot_of[u]);
            }
        }
        Ok(LayeredPlan { ops, slots: used, n })
    }

    pub fn width(&self) -> usize {
        self.slots
    }

    /// Weight and observable parity of a minimum-weight correction for `defects`.
    pub fn solve(&self, defects: &[usize], scratch: &mut Vec<(f64, bool)>) -> Result<(f64, bool)> {
        let size = 1usize << self.slots;
        scratch.clear();
        scratch.resize(size, (f64::INFINITY, false));
        scratch[0] = (0.0, false);
        let mut is_defect = vec![false; self.n];
        for &d in defects {
            if d >= self.n {
                return Err(Error::data(format!("defect {d} is not a detector of the graph")));
            }
            is_defect[d] ^= true;
        }
        let dp = scratch.as_mut_slice();
        for op in &self.ops {
            match *op {
                Op::Open { slot, vertex } => {
                    if is_defect[vertex as usize] {
                        let bit = 1usize << slot;
                        for x in 0..size {
                            if x & bit == 0 {
                                dp.swap(x, x | bit);
                            }
                        }
                    }
                }
                Op::Edge { mask, weight, flips } => {
                    let m = mask as usize;
                    let low = 1usize << m.trailing_zeros();
                    for x in 0..size {
                        if x & low == 0 {
                            let y = x ^ m;
                            let (a, b) = (dp[x], dp[y]);
                            if b.0 + weight < a.0 {
                                dp[x] = (b.0 + weight, b.1 ^ flips);
                            }
                            if a.0 + weight < b.0 {
                                dp[y] = (a.0 + weight, a.1 ^ flips);
                            }
                        }
                    }
                }
                Op::Close { slot } => {
                    let bit = 1usize << slot;
                    for (x, v) in dp.iter_mut().enumerate() {
                        if x & bit != 0 {
                            *v = (f64::INFINITY, false);
                        }
                    }
                }
            }
        }
        let (w, obs) = dp[0];
        if !w.is_finite() {
            return Err(Error::data("defects cannot be explained by the graph"));
        }
        Ok((w, obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::GraphEdge;
    use crate::oracles::brute_min_weight_correction;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layered(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> DecodingGraphInstance {
        let mut edges = Vec::new();
        let w = |rng: &mut ChaCha8Rng| (1 + rng.next_u32() % 64) as f64 / 16.0;
        for r in 0..rows {
            for a in 0..d {
                let v = r * d + a;
                if a == 0 || a == d - 1 {
                    edges.push(GraphEdge { u: v, v: None, p: 0.1, weight: w(rng), flips_observable: a == 0 });
                }
                if a + 1 < d {
                    edges.push(GraphEdge { u: v, v: Some(v + 1), p: 0.1, weight: w(rng), flips_observable: false });
                }
                if r + 1 < rows {
                    edges.push(GraphEdge { u: v, v: Some(v + d), p: 0.1, weight: w(rng), flips_observable: false });
                    if a + 1 < d && rng.next_u32() % 2 == 0 {
                        edges.push(GraphEdge { u: v + 1, v: Some(v + d), p: 0.1, weight: w(rng), flips_observable: false });
                    }
                }
            }
        }
        DecodingGraphInstance { cycles: rows - 1, detectors_per_row: d, edges }
    }

    #[test]
    fn matches_subset_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scratch = Vec::new();
        for _ in 0..60 {
            let g = random_layered(&mut rng, 3, 2);
            if g.edges.len() > crate::oracles::MAX_BRUTE_EDGES {
                continue;
            }
            let plan = LayeredPlan::new(&g).unwrap();
            assert!(plan.width() <= 4);
            let n = g.n_detectors();
            let defects: Vec<usize> = (0..n).filter(|_| rng.next_u32() % 3 == 0).collect();
            let (w, _) = plan.solve(&defects, &mut scratch).unwrap();
            let (bw, _) = brute_min_weight_correction(&g, &defects).unwrap();
            assert_eq!(w, bw);
        }
    }

    #[test]
    fn empty_and_single() {
        let g = DecodingGraphInstance {
            cycles: 0,
            detectors_per_row: 2,
            edges: vec![
                GraphEdge { u: 0, v: None, p: 0.1, weight: 2.0, flips_observable: true },
                GraphEdge { u: 0, v: Some(1), p: 0.1, weight: 0.5, flips_observable: false },
                GraphEdge { u: 1, v: None, p: 0.1, weight: 2.0, flips_observable: false },
            ],
        };
        let plan = LayeredPlan::new(&g).unwrap();
        let mut s = Vec::new();
        assert_eq!(plan.solve(&[], &mut s).unwrap(), (0.0, false));
        assert_eq!(plan.solve(&[0, 1], &mut s).unwrap(), (0.5, false));
        assert_eq!(plan.solve(&[0], &mut s).unwrap(), (2.0, true));
        assert!(plan.solve(&[5], &mut s).is_err());
    }

    #[test]
    fn wide_graph_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_layered(&mut rng, 3, 20);
        assert!(LayeredPlan::new(&g).is_err());
    }
}
