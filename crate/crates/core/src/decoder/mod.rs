//! Exact minimum-weight decoding of memory experiments and logical error rates.
//!
//! Two exact engines share one interface. The layered sweep handles graphs whose open
//! set fits in [`layered::MAX_SLOTS`] detectors for any number of defects; the blossom
//! engine matches defects and boundary images on shortest-path distances and is
//! limited to `max_defects` per shot.

pub mod blossom;
pub mod layered;
pub mod paths;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dem::{instantiate, DecodingGraphInstance, Interp, Provenance, TimeVaryingDem};
use crate::error::{Error, Result};
use crate::sim::DetectionData;

pub use blossom::{max_weight_matching, min_weight_perfect_matching, WeightedEdge};
pub use layered::LayeredPlan;
pub use paths::{dijkstra, pairwise_distances, Adjacency, Distances};

pub const DEFAULT_MAX_DEFECTS: usize = 120;
/// Fixed-point scale for blossom weights.
pub const WEIGHT_SCALE: f64 = (1u64 << 28) as f64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Auto,
    Blossom,
    Layered,
}

/// Conversion from the failure probability of an `n`-cycle run to a per-cycle rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// `1/2 (1 - (1 - 2P)^(1/n))`: each cycle flips the observable with probability `eps`.
    #[default]
    Symmetric,
    /// `1 - (1 - P)^(1/n)`: stays finite as `P` approaches 1/2.
    Survival,
}

impl RateConvention {
    pub fn rate(self, p_fail: f64, cycles: usize) -> f64 {
        match self {
            RateConvention::Symmetric => per_cycle_rate(p_fail, cycles),
            RateConvention::Survival => 1.0 - (1.0 - p_fail).powf(1.0 / cycles as f64),
        }
    }

    fn slope(self, p_fail: f64, cycles: usize) -> f64 {
        let n = cycles as f64;
        match self {
            RateConvention::Symmetric => (1.0 - 2.0 * p_fail).max(1e-300).powf(1.0 / n - 1.0) / n,
            RateConvention::Survival => (1.0 - p_fail).max(1e-300).powf(1.0 / n - 1.0) / n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeOptions {
    pub engine: Engine,
    pub max_defects: usize,
    pub interp: Interp,
    pub threads: Option<usize>,
    pub convention: RateConvention,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            engine: Engine::Auto,
            max_defects: DEFAULT_MAX_DEFECTS,
            interp: Interp::Hold,
            threads: None,
            convention: RateConvention::Symmetric,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decoded {
    pub flip: bool,
    pub weight: f64,
}

/// Minimum-weight perfect matching of `defects` plus one boundary image each.
pub fn match_distances(dist: &Distances) -> Result<Decoded> {
    let k = dist.boundary.len();
    if k == 0 {
        return Ok(Decoded { flip: false, weight: 0.0 });
    }
    let q = |w: f64| (w * WEIGHT_SCALE).round() as i64;
    let mut edges = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in i + 1..k {
            if dist.pair[i][j].is_finite() {
                edges.push(WeightedEdge { i, j, w: q(dist.pair[i][j]) });
            }
            edges.push(WeightedEdge { i: k + i, j: k + j, w: 0 });
        }
        if dist.boundary[i].is_finite() {
            edges.push(WeightedEdge { i, j: k + i, w: q(dist.boundary[i]) });
        }
    }
    let mate = min_weight_perfect_matching(2 * k, &edges)
        .ok_or_else(|| Error::data("defects admit no perfect matching"))?;
    let (mut flip, mut weight) = (false, 0.0);
    for i in 0..k {
        let j = mate[i];
        if j == k + i {
            flip ^= dist.boundary_obs[i];
            weight += dist.boundary[i];
        } else if j > i && j < k {
            flip ^= dist.pair_obs[i][j];
            weight += dist.pair[i][j];
        }
    }
    Ok(Decoded { flip, weight })
}

/// Decoder bound to one graph instance.
pub struct Decoder {
    pub graph: DecodingGraphInstance,
    adjacency: Adjacency,
    plan: Option<LayeredPlan>,
    engine: Engine,
    max_defects: usize,
}

impl Decoder {
    pub fn new(graph: DecodingGraphInstance, engine: Engine, max_defects: usize) -> Result<Self> {
        let adjacency = Adjacency::new(&graph);
        let plan = match engine {
            Engine::Blossom => None,
            Engine::Layered => Some(LayeredPlan::new(&graph)?),
            Engine::Auto => LayeredPlan::new(&graph).ok(),
        };
        let engine = match (engine, &plan) {
            (Engine::Auto, Some(_)) => Engine::Layered,
            (Engine::Auto, None) => Engine::Blossom,
            (e, _) => e,
        };
        Ok(Decoder { graph, adjacency, plan, engine, max_defects })
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    /// `Ok(None)` when the blossom engine's defect bound is exceeded.
    pub fn decode(&self, defects: &[usize], scratch: &mut Vec<(f64, bool)>) -> Result<Option<Decoded>> {
        match &self.plan {
            Some(plan) if self.engine == Engine::Layered => {
                let (weight, flip) = plan.solve(defects, scratch)?;
                Ok(Some(Decoded { flip, weight }))
            }
            _ => {
                if defects.len() > self.max_defects {
                    return Ok(None);
                }
                let d = pairwise_distances(&self.adjacency, defects)?;
                match_distances(&d).map(Some)
            }
        }
    }
}

/// Predicted observable flip by matching over shortest paths.
pub fn mwpm_decode(graph: &DecodingGraphInstance, defects: &[usize]) -> Result<bool> {
    let adj = Adjacency::new(graph);
    Ok(match_distances(&pairwise_distances(&adj, defects)?)?.flip)
}

/// Fired detectors of shot `s` as graph node ids.
pub fn shot_defects(data: &DetectionData, s: usize, out: &mut Vec<usize>) {
    out.clear();
    for r in 0..=data.cycles {
        let mut bits = data.row(s, r);
        while bits != 0 {
            let a = bits.trailing_zeros() as usize;
            out.push(r * data.detectors + a);
            bits &= bits - 1;
        }
    }
}

/// `1/2 (1 - (1 - 2P)^(1/n))`, or 1/2 once `P >= 1/2`.
pub fn per_cycle_rate(p_fail: f64, cycles: usize) -> f64 {
    if p_fail >= 0.5 {
        return 0.5;
    }
    0.5 * (1.0 - (1.0 - 2.0 * p_fail).powf(1.0 / cycles as f64))
}

pub fn relative_delta(eps_est: f64, eps_ref: f64) -> Result<f64> {
    if eps_ref == 0.0 || !eps_ref.is_finite() {
        return Err(Error::numerical("reference logical error rate is zero"));
    }
    Ok(eps_est / eps_ref - 1.0)
}

mod bits_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let mut out = String::with_capacity(v.len().div_ceil(4));
        for chunk in v.chunks(4) {
            let nib = chunk.iter().enumerate().fold(0u8, |a, (i, &b)| a | (u8::from(b) << i));
            out.push(char::from_digit(u32::from(nib), 16).unwrap());
        }
        s.serialize_str(&out)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        let mut v = Vec::with_capacity(4 * s.len());
        for c in s.chars() {
            let nib = c.to_digit(16).ok_or_else(|| serde::de::Error::custom("bad hex digit"))?;
            v.extend((0..4).map(|i| nib >> i & 1 == 1));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub provenance: Provenance,
    pub engine: Engine,
    pub convention: RateConvention,
    pub shots: usize,
    pub cycles: usize,
    /// Shots left out because some compared DEM could not decode them.
    pub excluded: usize,
    pub failures: usize,
    pub p_fail: f64,
    pub eps_per_cycle: f64,
    pub eps_sigma: f64,
    /// `P_fail >= 1/2`: the symmetric per-cycle rate carries no information.
    pub saturated: bool,
    /// Per-shot predicted flip, packed four shots per hex digit (excluded shots are 0).
    #[serde(with = "bits_hex")]
    pub predictions: Vec<bool>,
    #[serde(with = "bits_hex")]
    pub failed: Vec<bool>,
    #[serde(skip)]
    pub seconds: f64,
}

impl DecodeReport {
    pub fn decoded(&self) -> usize {
        self.shots - self.excluded
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut r: DecodeReport = serde_json::from_str(&s).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        r.predictions.truncate(r.shots);
        r.failed.truncate(r.shots);
        Ok(r)
    }
}

fn finish(
    provenance: Provenance,
    engine: Engine,
    convention: RateConvention,
    cycles: usize,
    preds: &[Option<bool>],
    data: &DetectionData,
    keep: &[bool],
) -> DecodeReport {
    let shots = preds.len();
    let predictions: Vec<bool> = preds.iter().zip(keep).map(|(p, &k)| k && p.unwrap_or(false)).collect();
    let failed: Vec<bool> = (0..shots).map(|s| keep[s] && predictions[s] != data.observable(s)).collect();
    let decoded = keep.iter().filter(|&&k| k).count();
    let failures = failed.iter().filter(|&&f| f).count();
    let p_fail = if decoded > 0 { failures as f64 / decoded as f64 } else { f64::NAN };
    let sigma_p = (p_fail * (1.0 - p_fail) / decoded.max(1) as f64).sqrt();
    DecodeReport {
        provenance,
        engine,
        convention,
        shots,
        cycles,
        excluded: shots - decoded,
        failures,
        p_fail,
        eps_per_cycle: convention.rate(p_fail, cycles),
        eps_sigma: sigma_p * convention.slope(p_fail, cycles),
        saturated: p_fail >= 0.5,
        predictions,
        failed,
        seconds: 0.0,
    }
}

fn run_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Decodes every shot against each DEM. Shots any DEM cannot decode are excluded from
/// all reports.
pub fn logical_error_rates(data: &DetectionData, dems: &[&TimeVaryingDem], opts: &DecodeOptions) -> Result<Vec<DecodeReport>> {
    if data.shots == 0 {
        return Err(Error::data("no shots to decode"));
    }
    let mut per_dem = Vec::with_capacity(dems.len());
    for dem in dems {
        let t0 = std::time::Instant::now();
        if dem.layout_hash != crate::dem::hex(&data.meta.layout_hash) {
            return Err(Error::data("DEM and detection data come from different layouts"));
        }
        let graph = instantiate(dem, data.meta.start_cycle, data.cycles, opts.interp)?;
        if graph.detectors_per_row > data.detectors {
            return Err(Error::data("DEM has more detectors per cycle than the data"));
        }
        let dec = Decoder::new(graph, opts.engine, opts.max_defects)?;
        let preds: Vec<Option<bool>> = run_pool(opts.threads, || {
            (0..data.shots)
                .into_par_iter()
                .map_init(
                    || (Vec::new(), Vec::new()),
                    |(defects, scratch), s| {
                        shot_defects(data, s, defects);
                        dec.decode(defects, scratch).map(|d| d.map(|x| x.flip))
                    },
                )
                .collect::<Result<Vec<_>>>()
        })??;
        per_dem.push((dem.provenance, dec.engine(), preds, t0.elapsed().as_secs_f64()));
    }
    let keep: Vec<bool> = (0..data.shots).map(|s| per_dem.iter().all(|(_, _, p, _)| p[s].is_some())).collect();
    Ok(per_dem
        .into_iter()
        .map(|(prov, engine, preds, secs)| {
            let mut r = finish(prov, engine, opts.convention, data.cycles, &preds, data, &keep);
            r.seconds = secs;
            r
        })
        .collect())
}

pub fn logical_error_rate(data: &DetectionData, dem: &TimeVaryingDem, opts: &DecodeOptions) -> Result<DecodeReport> {
    Ok(logical_error_rates(data, &[dem], opts)?.remove(0))
}

/// Difference of two reports on the same shots, with its paired Monte-Carlo deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    /// `eps_a - eps_b` per cycle.
    pub eps_diff: f64,
    pub eps_sigma: f64,
    /// Shots failing under only `a` and only `b`.
    pub only_a: usize,
    pub only_b: usize,
}

pub fn paired_difference(a: &DecodeReport, b: &DecodeReport) -> Result<PairedDifference> {
    if a.shots != b.shots || a.cycles != b.cycles || a.excluded != b.excluded || a.convention != b.convention {
        return Err(Error::data("reports do not cover the same shots"));
    }
    let only_a = a.failed.iter().zip(&b.failed).filter(|(x, y)| **x && !**y).count();
    let only_b = a.failed.iter().zip(&b.failed).filter(|(x, y)| !**x && **y).count();
    let s = a.decoded().max(1) as f64;
    let d = (only_a as f64 - only_b as f64) / s;
    let var = ((only_a + only_b) as f64 / s - d * d) / s;
    let pm = 0.5 * (a.p_fail + b.p_fail);
    Ok(PairedDifference {
        eps_diff: a.eps_per_cycle - b.eps_per_cycle,
        eps_sigma: var.max(0.0).sqrt() * a.convention.slope(pm, a.cycles),
        only_a,
        only_b,
    })
}
