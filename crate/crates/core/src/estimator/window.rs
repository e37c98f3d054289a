//! Window statistics and the correlator inversion for bulk and boundary edges.
//!
//! Class instances are grouped by anchor (the earliest detector row). A window
//! `[t - W, t)` holds the instances anchored at cycles `t - W .. t`, pooled over
//! all shots, so each window mean averages `M = S * W` samples.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::code_models::{EdgeClass, EdgeKind};
use crate::dem::{Grid, Provenance, TimeVaryingDem};
use crate::error::{Error, Result};
use crate::sim::DetectionData;

/// The radicand of the bulk formula was negative and clamped to zero.
pub const FLAG_RADICAND: u8 = 1;
/// Precondition failure; the point is dropped from exported series.
pub const FLAG_DEGENERATE: u8 = 2;

/// Prefix sums of detector firings per row and of coincidences per class instance.
#[derive(Clone, Debug)]
pub struct Counts {
    pub shots: usize,
    pub cycles: usize,
    pub start_cycle: u64,
    /// `fires[d][r]` = firings of detector `d` over rows `< r`, summed over shots.
    fires: Vec<Vec<u64>>,
    /// `both[c][k]` = coincidences of two-detector class `c` over anchors `< k`.
    both: Vec<Vec<u64>>,
}

impl Counts {
    pub fn from_data(data: &DetectionData, classes: &[EdgeClass]) -> Result<Self> {
        let n_rows = data.cycles + 1;
        let dets = data.detectors;
        for c in classes {
            if c.signature.iter().any(|s| s.ancilla >= dets) {
                return Err(Error::data("class refers to a detector missing from the data"));
            }
        }
        let pairs: Vec<(usize, usize, usize, usize)> = classes
            .iter()
            .map(|c| match c.signature.as_slice() {
                [a, b] => (a.ancilla, a.offset, b.ancilla, b.offset),
                [a] => (a.ancilla, a.offset, a.ancilla, a.offset),
                _ => unreachable!("classes have one or two detectors"),
            })
            .collect();
        let n_anchor: Vec<usize> = classes.iter().map(|c| n_rows - c.max_offset()).collect();

        let zero = || (vec![vec![0u64; n_rows]; dets], n_anchor.iter().map(|&k| vec![0u64; k]).collect::<Vec<_>>());
        let (fires, both) = (0..data.shots)
            .into_par_iter()
            .fold(zero, |(mut f, mut b), s| {
                let rows: Vec<u64> = (0..n_rows).map(|r| data.row(s, r)).collect();
                for (r, &bits) in rows.iter().enumerate() {
                    let mut x = bits;
                    while x != 0 {
                        let d = x.trailing_zeros() as usize;
                        f[d][r] += 1;
                        x &= x - 1;
                    }
                }
                for (ci, &(a, oa, bq, ob)) in pairs.iter().enumerate() {
                    if classes[ci].signature.len() != 2 {
                        continue;
                    }
                    for (k, slot) in b[ci].iter_mut().enumerate() {
                        *slot += (rows[k + oa] >> a) & (rows[k + ob] >> bq) & 1;
                    }
                }
                (f, b)
            })
            .reduce(zero, |(mut f1, mut b1), (f2, b2)| {
                for (x, y) in f1.iter_mut().zip(&f2) {
                    x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                }
                for (x, y) in b1.iter_mut().zip(&b2) {
                    x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                }
                (f1, b1)
            });
        let prefix = |v: Vec<u64>| {
            let mut out = Vec::with_capacity(v.len() + 1);
            out.push(0);
            let mut acc = 0;
            for x in v {
                acc += x;
                out.push(acc);
            }
            out
        };
        Ok(Counts {
            shots: data.shots,
            cycles: data.cycles,
            start_cycle: data.meta.start_cycle,
            fires: fires.into_iter().map(prefix).collect(),
            both: both.into_iter().map(prefix).collect(),
        })
    }

    fn fire_sum(&self, d: usize, lo: usize, hi: usize) -> u64 {
        self.fires[d][hi] - self.fires[d][lo]
    }

    fn both_sum(&self, c: usize, lo: usize, hi: usize) -> u64 {
        self.both[c][hi] - self.both[c][lo]
    }
}

/// Detector means of one class over one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    pub class: usize,
    pub samples: u64,
    pub vi: f64,
    /// Second detector and coincidence means, for two-detector classes.
    pub vj: Option<f64>,
    pub vij: Option<f64>,
}

fn class_stats(counts: &Counts, class: &EdgeClass, ci: usize, t: usize, w: usize) -> Result<WindowStats> {
    if w < 2 {
        return Err(Error::config("window", "window must hold at least 2 cycles"));
    }
    if t < w {
        return Err(Error::data(format!("window [{}, {t}) starts before cycle 0", t as i64 - w as i64)));
    }
    if t + class.max_offset() > counts.cycles + 1 {
        return Err(Error::data(format!("window ending at {t} exceeds the recorded cycles")));
    }
    let m = (counts.shots * w) as u64;
    let mean = |x: u64| x as f64 / m as f64;
    let a = class.signature[0];
    let vi = mean(counts.fire_sum(a.ancilla, t - w + a.offset, t + a.offset));
    let (vj, vij) = match class.signature.get(1) {
        Some(b) => (
            Some(mean(counts.fire_sum(b.ancilla, t - w + b.offset, t + b.offset))),
            Some(mean(counts.both_sum(ci, t - w, t))),
        ),
        None => (None, None),
    };
    Ok(WindowStats { class: ci, samples: m, vi, vj, vij })
}

/// Statistics of every class over anchors `[t - w, t)`.
pub fn window_counts(counts: &Counts, classes: &[EdgeClass], t: usize, w: usize) -> Result<Vec<WindowStats>> {
    classes
        .iter()
        .enumerate()
        .map(|(ci, c)| class_stats(counts, c, ci, t, w))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimate {
    pub p: f64,
    pub flags: u8,
}

impl PointEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.flags & FLAG_DEGENERATE != 0
    }
}

/// Bulk edge probability from two detector means and their coincidence mean.
pub fn bulk_probability(vi: f64, vj: f64, vij: f64) -> PointEstimate {
    let den = 1.0 - 2.0 * (vi + vj) + 4.0 * vij;
    if !(den > 0.0) {
        return PointEstimate { p: f64::NAN, flags: FLAG_DEGENERATE };
    }
    let rad = 0.25 - (vij - vi * vj) / den;
    if rad < 0.0 {
        PointEstimate { p: 0.5, flags: FLAG_RADICAND }
    } else {
        PointEstimate { p: 0.5 - rad.sqrt(), flags: 0 }
    }
}

pub fn bulk_from_stats(s: &WindowStats) -> PointEstimate {
    match (s.vj, s.vij) {
        (Some(vj), Some(vij)) => bulk_probability(s.vi, vj, vij),
        _ => PointEstimate { p: f64::NAN, flags: FLAG_DEGENERATE },
    }
}

/// Boundary edge probability from the detector mean and all incident bulk probabilities.
pub fn boundary_probability(vi: f64, incident: &[f64]) -> PointEstimate {
    let prod: f64 = incident.iter().map(|p| 1.0 - 2.0 * p).product();
    if !(prod > 0.0) || incident.iter().any(|p| !(*p < 0.5)) {
        return PointEstimate { p: f64::NAN, flags: FLAG_DEGENERATE };
    }
    PointEstimate { p: 0.5 + (vi - 0.5) / prod, flags: 0 }
}

/// Eq-style standard deviation of a window average: `(1/W) sqrt(sum p (1 - p))`.
pub fn window_sigma(p: &[f64]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.iter().map(|&x| x * (1.0 - x)).sum::<f64>().sqrt() / p.len() as f64
}

/// Standard deviation of one pooled estimate over `samples` Bernoulli trials.
pub fn estimate_sigma(p: f64, samples: u64) -> f64 {
    let q = if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.0 };
    (q * (1.0 - q) / samples as f64).sqrt()
}

/// First-order propagated deviation of a boundary estimate: the detector rate and each
/// incident bulk estimate treated as independent.
pub fn boundary_sigma(vi: f64, samples: u64, incident: &[(f64, f64)]) -> f64 {
    let prod: f64 = incident.iter().map(|(p, _)| 1.0 - 2.0 * p).product();
    let var_vi = estimate_sigma(vi, samples).powi(2) / (prod * prod);
    let var_inc: f64 = incident
        .iter()
        .map(|(p, s)| ((vi - 0.5) / prod * 2.0 / (1.0 - 2.0 * p) * s).powi(2))
        .sum();
    (var_vi + var_inc).sqrt()
}

/// Windowed average of a known per-cycle series: mean of `p[t - w .. t]`.
pub fn temporal_average(p: &[f64], t: usize, w: usize) -> f64 {
    p[t - w..t].iter().sum::<f64>() / w as f64
}

/// For each boundary class, the two-detector classes touching its detector and the
/// offset of that detector within them.
pub fn boundary_incidence(classes: &[EdgeClass]) -> Vec<Vec<(usize, usize)>> {
    classes
        .iter()
        .map(|c| {
            if c.kind != EdgeKind::BoundarySpace {
                return Vec::new();
            }
            let a = c.signature[0].ancilla;
            classes
                .iter()
                .enumerate()
                .filter(|(_, b)| b.signature.len() == 2)
                .flat_map(|(bi, b)| {
                    b.signature
                        .iter()
                        .filter(move |s| s.ancilla == a)
                        .map(move |s| (bi, s.offset))
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedSeries {
    pub class: usize,
    /// Raw estimates; degenerate points are NaN.
    pub p: Vec<f64>,
    pub sigma: Vec<f64>,
    pub flags: Vec<u8>,
}

/// Estimates of all classes on a common grid of window end points.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSet {
    pub window: usize,
    /// Window end points in local cycles.
    pub t: Vec<usize>,
    pub start_cycle: u64,
    pub series: Vec<EstimatedSeries>,
}

impl SeriesSet {
    pub fn flagged(&self) -> usize {
        self.series.iter().flat_map(|s| &s.flags).filter(|&&f| f & FLAG_DEGENERATE != 0).count()
    }

    pub fn radicand_clamps(&self) -> usize {
        self.series.iter().flat_map(|s| &s.flags).filter(|&&f| f & FLAG_RADICAND != 0).count()
    }

    pub fn stride(&self) -> usize {
        if self.t.len() > 1 {
            self.t[1] - self.t[0]
        } else {
            1
        }
    }

    /// Writes `class,t_l,p_est,sigma,W,flags` rows, omitting degenerate points.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "class,t_l,p_est,sigma,W,flags").map_err(io)?;
        for s in &self.series {
            for (i, &t) in self.t.iter().enumerate() {
                if s.flags[i] & FLAG_DEGENERATE != 0 {
                    continue;
                }
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    s.class,
                    self.start_cycle + t as u64,
                    s.p[i],
                    s.sigma[i],
                    self.window,
                    s.flags[i]
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    /// Converts to a DEM. Degenerate points take the nearest earlier valid value
    /// (or the first valid one at the start of the grid).
    pub fn to_dem(&self, classes: &[EdgeClass], provenance: Provenance, hashes: ([u8; 32], [u8; 32])) -> Result<TimeVaryingDem> {
        if self.t.is_empty() {
            return Err(Error::data("empty series"));
        }
        let mut series = Vec::with_capacity(self.series.len());
        let mut sigma = Vec::with_capacity(self.series.len());
        for s in &self.series {
            let first = s
                .p
                .iter()
                .position(|p| p.is_finite())
                .ok_or_else(|| Error::numerical(format!("class {} has no valid estimate", s.class)))?;
            let mut last = s.p[first];
            let mut last_sig = s.sigma[first];
            let mut vals = Vec::with_capacity(s.p.len());
            let mut sigs = Vec::with_capacity(s.p.len());
            for (p, sg) in s.p.iter().zip(&s.sigma) {
                if p.is_finite() {
                    last = *p;
                    last_sig = *sg;
                }
                vals.push(last);
                sigs.push(last_sig);
            }
            series.push(vals);
            sigma.push(sigs);
        }
        TimeVaryingDem::new(
            classes.to_vec(),
            Grid {
                start: self.start_cycle + self.t[0] as u64,
                stride: self.stride() as u64,
                count: self.t.len(),
            },
            series,
            Some(sigma),
            provenance,
            hashes,
            crate::dem::DEFAULT_P_MIN,
        )
    }
}

fn bulk_at(counts: &Counts, classes: &[EdgeClass], c: usize, t: usize, w: usize) -> Result<(PointEstimate, u64)> {
    let st = class_stats(counts, &classes[c], c, t, w)?;
    Ok((bulk_from_stats(&st), st.samples))
}

/// First and last valid window end points for window `w` across all classes.
pub fn grid_bounds(classes: &[EdgeClass], cycles: usize, w: usize) -> Result<(usize, usize)> {
    let maxo = classes.iter().map(EdgeClass::max_offset).max().unwrap_or(0);
    let lo = w + maxo;
    let hi = (cycles + 1).checked_sub(maxo).unwrap_or(0);
    if w < 2 {
        return Err(Error::config("window", "window must hold at least 2 cycles"));
    }
    if lo > hi {
        return Err(Error::config(
            "window",
            format!("window {w} does not fit in {cycles} recorded cycles"),
        ));
    }
    Ok((lo, hi))
}

/// Point estimate of every class at window end `t`.
pub fn estimate_at(
    counts: &Counts,
    classes: &[EdgeClass],
    incidence: &[Vec<(usize, usize)>],
    t: usize,
    w: usize,
) -> Result<Vec<(PointEstimate, f64)>> {
    classes
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let (est, m) = if c.signature.len() == 2 {
                bulk_at(counts, classes, ci, t, w)?
            } else {
                let st = class_stats(counts, c, ci, t, w)?;
                let (vi, m) = (st.vi, st.samples);
                let mut inc = Vec::with_capacity(incidence[ci].len());
                let mut flags = 0;
                for &(bi, o) in &incidence[ci] {
                    let (b, bm) = bulk_at(counts, classes, bi, t - o, w)?;
                    flags |= b.flags;
                    inc.push((b.p, estimate_sigma(b.p, bm)));
                }
                let mut e = if flags & FLAG_DEGENERATE != 0 {
                    PointEstimate { p: f64::NAN, flags: FLAG_DEGENERATE }
                } else {
                    let ps: Vec<f64> = inc.iter().map(|x| x.0).collect();
                    boundary_probability(vi, &ps)
                };
                e.flags |= flags & FLAG_RADICAND;
                let sigma = if e.is_degenerate() { f64::NAN } else { boundary_sigma(vi, m, &inc) };
                return Ok((e, sigma));
            };
            Ok((est, estimate_sigma(est.p, m)))
        })
        .collect()
}

/// Sliding-window estimates of every class at `t = lo, lo + stride, ..., <= hi`.
pub fn sliding_series(counts: &Counts, classes: &[EdgeClass], w: usize, stride: usize) -> Result<SeriesSet> {
    if stride == 0 {
        return Err(Error::config("stride", "must be positive"));
    }
    let (lo, hi) = grid_bounds(classes, counts.cycles, w)?;
    let incidence = boundary_incidence(classes);
    let t: Vec<usize> = (lo..=hi).step_by(stride).collect();
    let points: Vec<Vec<(PointEstimate, f64)>> = t
        .par_iter()
        .map(|&tl| estimate_at(counts, classes, &incidence, tl, w))
        .collect::<Result<_>>()?;
    let series = (0..classes.len())
        .map(|c| EstimatedSeries {
            class: c,
            p: points.iter().map(|pt| pt[c].0.p).collect(),
            sigma: points.iter().map(|pt| pt[c].1).collect(),
            flags: points.iter().map(|pt| pt[c].0.flags).collect(),
        })
        .collect();
    Ok(SeriesSet { window: w, t, start_cycle: counts.start_cycle, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_models::{build_repetition, derive_edge_classes, NoiseModel};
    use crate::noise::{DriftProfile, NoiseAssignment};
    use crate::sim::{run_memory, DataMeta, MemoryConfig};
    use proptest::prelude::*;

    fn rep_classes() -> Vec<EdgeClass> {
        let l = build_repetition(3).unwrap();
        let mut a = NoiseAssignment::new();
        for loc in l.fault_locations(NoiseModel::Phenomenological) {
            a.set(loc, DriftProfile::constant(0.05).unwrap());
        }
        derive_edge_classes(&l, &a, NoiseModel::Phenomenological).unwrap()
    }

    fn meta() -> DataMeta {
        DataMeta { seed: 0, start_cycle: 0, layout_hash: [0; 32], assignment_hash: [0; 32] }
    }

    #[test]
    fn bulk_formula_cases() {
        assert_eq!(bulk_probability(0.0, 0.0, 0.0).p, 0.0);
        assert!(bulk_probability(0.2, 0.3, 0.06).p.abs() < 1e-15);
        assert!((bulk_probability(0.1, 0.1, 0.1).p - 0.1).abs() < 1e-15);
        assert!(bulk_probability(0.5, 0.5, 0.0).is_degenerate());
        let clamped = bulk_probability(0.2, 0.6, 0.2);
        assert_eq!(clamped.flags, FLAG_RADICAND);
    }

    #[test]
    fn boundary_formula_cases() {
        assert!((boundary_probability(0.07, &[]).p - 0.07).abs() < 1e-15);
        assert!(boundary_probability(0.1, &[0.1]).p.abs() < 1e-15);
        assert!((boundary_probability(0.18, &[0.1]).p - 0.1).abs() < 1e-15);
        assert!(boundary_probability(0.1, &[0.5]).is_degenerate());
    }

    #[test]
    fn sigma_cases() {
        assert!((window_sigma(&[0.1; 8]) - (0.09f64 / 8.0).sqrt()).abs() < 1e-15);
        assert_eq!(window_sigma(&[0.0; 5]), 0.0);
        assert!((window_sigma(&[0.1, 0.2]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn all_zero_data() {
        let classes = rep_classes();
        let rows = vec![vec![0u64; 11]; 3];
        let d = DetectionData::from_rows(2, &rows, &[false; 3], meta()).unwrap();
        let counts = Counts::from_data(&d, &classes).unwrap();
        for s in window_counts(&counts, &classes, 6, 4).unwrap() {
            assert_eq!(s.vi, 0.0);
            assert!(s.vj.unwrap_or(0.0) == 0.0 && s.vij.unwrap_or(0.0) == 0.0);
        }
    }

    #[test]
    fn always_firing_class() {
        let classes = rep_classes();
        let bulk = classes.iter().position(|c| c.kind == EdgeKind::BulkSpace).unwrap();
        let rows = vec![vec![0b11u64; 9]];
        let d = DetectionData::from_rows(2, &rows, &[false], meta()).unwrap();
        let counts = Counts::from_data(&d, &classes).unwrap();
        let s = window_counts(&counts, &classes, 8, 8).unwrap()[bulk];
        assert_eq!((s.vi, s.vj, s.vij), (1.0, Some(1.0), Some(1.0)));
        assert_eq!(s.samples, 8);
    }

    #[test]
    fn hand_counted_toy() {
        // two shots, four cycles plus final row; detector bits per row
        let classes = rep_classes();
        let tl = classes
            .iter()
            .position(|c| c.kind == EdgeKind::TimeLike && c.signature[0].ancilla == 0)
            .unwrap();
        let rows = vec![vec![0b01, 0b01, 0b00, 0b11, 0b01], vec![0b00, 0b01, 0b01, 0b10, 0b00]];
        let d = DetectionData::from_rows(2, &rows, &[false, false], meta()).unwrap();
        let counts = Counts::from_data(&d, &classes).unwrap();
        let s = window_counts(&counts, &classes, 4, 4).unwrap()[tl];
        // anchors 0..4: first detector rows 0..4, second rows 1..5
        // a1 rows 0..4: shot0 1,1,0,1 shot1 0,1,1,0 -> 5 of 8
        // a1 rows 1..5: shot0 1,0,1,1 shot1 1,1,0,0 -> 5 of 8
        // coincident (k, k+1): shot0 k=0 and k=3, shot1 k=1 -> 3 of 8
        assert_eq!((s.vi, s.vj, s.vij), (5.0 / 8.0, Some(5.0 / 8.0), Some(3.0 / 8.0)));
        assert!(window_counts(&counts, &classes, 5, 4).is_err());
        assert!(window_counts(&counts, &classes, 3, 4).is_err());
    }

    #[test]
    fn static_noise_recovers_truth() {
        let l = build_repetition(3).unwrap();
        let mut a = NoiseAssignment::new();
        for loc in l.fault_locations(NoiseModel::Phenomenological) {
            a.set(loc, DriftProfile::constant(0.06).unwrap());
        }
        let classes = derive_edge_classes(&l, &a, NoiseModel::Phenomenological).unwrap();
        let (d, _) = run_memory(&l, &a, NoiseModel::Phenomenological, &MemoryConfig::new(2000, 500, 5)).unwrap();
        let counts = Counts::from_data(&d, &classes).unwrap();
        let set = sliding_series(&counts, &classes, 1000, 250).unwrap();
        for (c, s) in classes.iter().zip(&set.series) {
            let truth = crate::code_models::ground_truth_edge_series(std::slice::from_ref(c), &a, 500)[0];
            for (p, sg) in s.p.iter().zip(&s.sigma) {
                assert!((p - truth).abs() < 3.0 * sg, "{:?} {p} {truth} {sg}", c.kind);
            }
        }
    }

    proptest! {
        #[test]
        fn bulk_inverts_single_class(p in 0.0f64..0.499) {
            prop_assert!((bulk_probability(p, p, p).p - p).abs() < 1e-9);
        }

        #[test]
        fn sigma_scales_with_inverse_sqrt_window(p in 0.0f64..1.0, w in 1usize..200) {
            let a = window_sigma(&vec![p; w]);
            let b = window_sigma(&vec![p; 4 * w]);
            prop_assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }
}
