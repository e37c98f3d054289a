//! Brute-force reference implementations used to cross-check the fast paths.
//!
//! Nothing in the production code calls into this module; the `check_*` harnesses
//! back the command-line `verify` command and the acceptance run.

use rustfft::num_complex::Complex;

use crate::code_models::{Basis, CodeLayout, NoiseModel};
use serde::Serialize;

use crate::decoder::paths::Distances;
use crate::decoder::{match_distances, Decoder, Engine};
use crate::dem::{DecodingGraphInstance, GraphEdge};
use crate::error::{Error, Result};
use crate::estimator::{temporal_average, window_sigma};
use crate::noise::{FaultLocation, NoiseAssignment};
use crate::rng::ShotRng;

pub const MAX_ENUMERATED_WINDOW: usize = 12;
pub const MAX_BRUTE_DEFECTS: usize = 8;
pub const MAX_BRUTE_EDGES: usize = 24;

/// Mean and variance of `n / W`, where `n` counts successes of independent Bernoulli
/// trials with probabilities `p`, by summing over all `2^W` outcomes.
pub fn enumerate_window(p: &[f64]) -> Result<(f64, f64)> {
    let w = p.len();
    if w == 0 || w > MAX_ENUMERATED_WINDOW {
        return Err(Error::config("window", format!("enumeration needs 1..={MAX_ENUMERATED_WINDOW} cycles")));
    }
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::config("p", "probabilities must lie in [0, 1]"));
    }
    let (mut e1, mut e2) = (0.0, 0.0);
    for bits in 0u32..(1 << w) {
        let mut prob = 1.0;
        for (k, &pk) in p.iter().enumerate() {
            prob *= if (bits >> k) & 1 == 1 { pk } else { 1.0 - pk };
        }
        let n = f64::from(bits.count_ones());
        e1 += prob * n;
        e2 += prob * n * n;
    }
    let wf = w as f64;
    Ok((e1 / wf, (e2 - e1 * e1) / (wf * wf)))
}

/// `X_m = sum_n x_n exp(-2 pi i m n / N)` by direct summation.
pub fn direct_dft(xs: &[f64]) -> Vec<Complex<f64>> {
    let n = xs.len();
    (0..n)
        .map(|m| {
            xs.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (k, &x)| {
                let ang = -2.0 * std::f64::consts::PI * (m * k % n) as f64 / n as f64;
                acc + Complex::from_polar(x, ang)
            })
        })
        .collect()
}

/// Minimum-weight perfect pairing by exhaustive search. With `boundary`, each defect may
/// instead be matched to the boundary at the given cost. Returns the weight and, per defect,
/// its partner (`None` for the boundary).
pub fn brute_matching(dist: &[Vec<f64>], boundary: Option<&[f64]>) -> Result<(f64, Vec<Option<usize>>)> {
    let n = dist.len();
    if n > MAX_BRUTE_DEFECTS {
        return Err(Error::config("defects", format!("at most {MAX_BRUTE_DEFECTS} defects")));
    }
    if boundary.is_none() && n % 2 == 1 {
        return Err(Error::data("odd number of defects and no boundary"));
    }
    fn rec(
        dist: &[Vec<f64>],
        boundary: Option<&[f64]>,
        mate: &mut Vec<Option<Option<usize>>>,
        acc: f64,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        let Some(i) = mate.iter().position(|m| m.is_none()) else {
            if acc < best.0 {
                *best = (acc, mate.iter().map(|m| m.unwrap()).collect());
            }
            return;
        };
        if let Some(b) = boundary {
            mate[i] = Some(None);
            rec(dist, boundary, mate, acc + b[i], best);
            mate[i] = None;
        }
        for j in i + 1..dist.len() {
            if mate[j].is_none() {
                mate[i] = Some(Some(j));
                mate[j] = Some(Some(i));
                rec(dist, boundary, mate, acc + dist[i][j], best);
                mate[i] = None;
                mate[j] = None;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(dist, boundary, &mut vec![None; n], 0.0, &mut best);
    Ok(best)
}

fn subsets_matching(graph: &DecodingGraphInstance, defects: &[usize]) -> Result<Vec<(u64, f64, f64, bool)>> {
    let e = graph.edges.len();
    if e > MAX_BRUTE_EDGES {
        return Err(Error::config("edges", format!("at most {MAX_BRUTE_EDGES} edges")));
    }
    let n = graph.n_detectors();
    let mut target = vec![false; n];
    for &d in defects {
        target[d] ^= true;
    }
    let mut out = Vec::new();
    for mask in 0u64..(1 << e) {
        let mut par = vec![false; n];
        let (mut w, mut lp, mut obs) = (0.0, 0.0, false);
        for (k, edge) in graph.edges.iter().enumerate() {
            if (mask >> k) & 1 == 1 {
                par[edge.u] ^= true;
                if let Some(v) = edge.v {
                    par[v] ^= true;
                }
                w += edge.weight;
                lp += edge.p.ln();
                obs ^= edge.flips_observable;
            } else {
                lp += (1.0 - edge.p).ln();
            }
        }
        if par == target {
            out.push((mask, w, lp, obs));
        }
    }
    Ok(out)
}

/// Minimum total weight of an edge set reproducing the defects, and its observable parity.
pub fn brute_min_weight_correction(graph: &DecodingGraphInstance, defects: &[usize]) -> Result<(f64, bool)> {
    subsets_matching(graph, defects)?
        .into_iter()
        .map(|(_, w, _, o)| (w, o))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::data("defects cannot be explained by any edge set"))
}

/// Maximum-likelihood observable prediction: the observable class with larger total probability.
pub fn exhaustive_ml_decode(graph: &DecodingGraphInstance, defects: &[usize]) -> Result<bool> {
    let sets = subsets_matching(graph, defects)?;
    let (mut p0, mut p1) = (0.0, 0.0);
    for (_, _, lp, obs) in sets {
        if obs {
            p1 += lp.exp();
        } else {
            p0 += lp.exp();
        }
    }
    Ok(p1 > p0)
}

/// Exact firing probability of detector `ancilla` in cycle `cycle >= 1` for a static
/// phenomenological model, with its own propagation rule: a data flip at the start of cycle
/// `c` flips every later measurement of the checks containing it, an ancilla flip flips only
/// that cycle's measurement.
pub fn detector_fire_probability(
    layout: &CodeLayout,
    assignment: &NoiseAssignment,
    ancilla: usize,
    cycle: u64,
) -> Result<f64> {
    if cycle == 0 {
        return Err(Error::config("cycle", "use cycle >= 1"));
    }
    // flipping components of X, Z, Y for the memory basis
    let flips = |code: u8| match layout.basis {
        Basis::Z => code & 1 == 1,
        Basis::X => code & 2 == 2,
    };
    // (flip probability) of each relevant event
    let mut events = Vec::new();
    for loc in layout.fault_locations(NoiseModel::Phenomenological) {
        let g_at = |c: u64| assignment.get(loc).map(|e| e.profile.sample_rate(c)).unwrap_or(0.0);
        let p_flip = |c: u64| (1..=3u8).filter(|&t| flips(t)).count() as f64 * g_at(c) / 3.0;
        match loc {
            FaultLocation::Data(q) if layout.stabilizers[ancilla].contains(&q) => {
                events.push(p_flip(cycle));
            }
            FaultLocation::Ancilla(a) if a == ancilla => {
                events.push(p_flip(cycle));
                events.push(p_flip(cycle - 1));
            }
            _ => {}
        }
    }
    let mut total = 0.0;
    for bits in 0u32..(1 << events.len()) {
        if bits.count_ones() % 2 == 1 {
            let mut prob = 1.0;
            for (k, &p) in events.iter().enumerate() {
                prob *= if (bits >> k) & 1 == 1 { p } else { 1.0 - p };
            }
            total += prob;
        }
    }
    Ok(total)
}

/// Outcome of one randomized cross-check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub max_error: f64,
}

impl CrossCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn unit(rng: &mut ShotRng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Dyadic weight in `[1/16, 16)`, so sums and the decoder's fixed-point scale are exact.
fn dyadic(rng: &mut ShotRng) -> f64 {
    (1 + rng.next_u64() % 255) as f64 / 16.0
}

/// Closed-form window mean and spread against `enumerate_window` on random windows.
pub fn check_window_moments(instances: usize, seed: u64, tol: f64) -> CrossCheck {
    let mut failures = 0;
    let mut max_error: f64 = 0.0;
    for i in 0..instances {
        let mut rng = ShotRng::new(seed, i as u64);
        let w = 1 + (rng.next_u64() % MAX_ENUMERATED_WINDOW as u64) as usize;
        let p: Vec<f64> = (0..w).map(|_| 0.5 * unit(&mut rng)).collect();
        let (mean, var) = enumerate_window(&p).expect("window within the enumeration bound");
        let e = (temporal_average(&p, w, w) - mean).abs().max((window_sigma(&p).powi(2) - var).abs());
        max_error = max_error.max(e);
        failures += usize::from(!(e <= tol));
    }
    CrossCheck { name: "window moments".into(), instances, failures, max_error }
}

/// Decoder matching weight against `brute_matching` on random distance tables.
pub fn check_matching(instances: usize, seed: u64) -> CrossCheck {
    let mut failures = 0;
    let mut max_error: f64 = 0.0;
    for i in 0..instances {
        let mut rng = ShotRng::new(seed, i as u64);
        let with_boundary = rng.next_u64() % 2 == 0;
        let k = if with_boundary {
            1 + (rng.next_u64() % MAX_BRUTE_DEFECTS as u64) as usize
        } else {
            2 * (1 + (rng.next_u64() % (MAX_BRUTE_DEFECTS as u64 / 2)) as usize)
        };
        let mut pair = vec![vec![0.0; k]; k];
        let mut pair_obs = vec![vec![false; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                let w = dyadic(&mut rng);
                let o = rng.next_u64() % 2 == 0;
                pair[a][b] = w;
                pair[b][a] = w;
                pair_obs[a][b] = o;
                pair_obs[b][a] = o;
            }
        }
        let boundary: Vec<f64> = (0..k)
            .map(|_| if with_boundary { dyadic(&mut rng) } else { f64::INFINITY })
            .collect();
        let boundary_obs = (0..k).map(|_| rng.next_u64() % 2 == 0).collect();
        let (want, _) = brute_matching(&pair, with_boundary.then_some(&boundary[..])).expect("small instance");
        let dist = Distances { pair, pair_obs, boundary, boundary_obs };
        match match_distances(&dist) {
            Ok(got) => {
                let e = (got.weight - want).abs();
                max_error = max_error.max(e);
                failures += usize::from(e != 0.0);
            }
            Err(_) => failures += 1,
        }
    }
    CrossCheck { name: "matching weight".into(), instances, failures, max_error }
}

/// A repetition-style graph over `rows` detector rows with random dyadic weights.
fn random_graph(rng: &mut ShotRng, rows: usize) -> DecodingGraphInstance {
    let mut edges = Vec::new();
    let mut edge = |u, v, o, rng: &mut ShotRng| {
        let weight = dyadic(rng);
        edges.push(GraphEdge { u, v, p: 1.0 / (1.0 + weight.exp()), weight, flips_observable: o });
    };
    for r in 0..rows {
        edge(2 * r, None, true, rng);
        edge(2 * r + 1, None, false, rng);
        edge(2 * r, Some(2 * r + 1), false, rng);
        if r + 1 < rows {
            edge(2 * r, Some(2 * r + 2), false, rng);
            edge(2 * r + 1, Some(2 * r + 3), false, rng);
        }
    }
    DecodingGraphInstance { cycles: rows - 1, detectors_per_row: 2, edges }
}

/// Multiplying every weight by a power of two must scale the matched weight by the same
/// factor and leave every prediction unchanged, for both engines.
pub fn check_weight_scaling(graphs: usize, seed: u64) -> CrossCheck {
    const SHOTS: usize = 20;
    let mut failures = 0;
    let mut max_error: f64 = 0.0;
    let mut scratch = Vec::new();
    for i in 0..graphs {
        let mut rng = ShotRng::new(seed, i as u64);
        let rows = 2 + (rng.next_u64() % 7) as usize;
        let g = random_graph(&mut rng, rows);
        let scale = [0.25, 2.0, 8.0][i % 3];
        let mut h = g.clone();
        h.edges.iter_mut().for_each(|e| e.weight *= scale);
        let mut ok = true;
        for engine in [Engine::Layered, Engine::Blossom] {
            let (Ok(a), Ok(b)) = (Decoder::new(g.clone(), engine, 64), Decoder::new(h.clone(), engine, 64)) else {
                ok = false;
                continue;
            };
            for _ in 0..SHOTS {
                let defects: Vec<usize> = (0..2 * rows).filter(|_| rng.next_u64() % 4 == 0).collect();
                match (a.decode(&defects, &mut scratch), b.decode(&defects, &mut scratch)) {
                    (Ok(Some(x)), Ok(Some(y))) => {
                        let e = (y.weight - scale * x.weight).abs();
                        max_error = max_error.max(e);
                        ok &= e == 0.0 && x.flip == y.flip;
                    }
                    _ => ok = false,
                }
            }
        }
        failures += usize::from(!ok);
    }
    CrossCheck { name: "weight scaling".into(), instances: graphs, failures, max_error }
}
