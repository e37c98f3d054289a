//! Detector error models: per-class probability series on a cycle grid, and
//! their instantiation as weighted decoding graphs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code_models::{ground_truth_series, EdgeClass};
use crate::error::{Error, Result};
use crate::noise::NoiseAssignment;

pub const DEM_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_P_MIN: f64 = 1e-6;

/// `w = ln((1 - p) / p)`.
pub fn edge_weight(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::numerical(format!("edge probability {p} outside (0, 1)")));
    }
    Ok(((1.0 - p) / p).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    GroundTruth,
    Sliding,
    Iterative,
    Relative,
    Static,
}

/// Grid points `start + i * stride` for `i < count`, in absolute cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub start: u64,
    pub stride: u64,
    pub count: usize,
}

impl Grid {
    pub fn point(&self, i: usize) -> u64 {
        self.start + i as u64 * self.stride
    }

    pub fn last(&self) -> u64 {
        self.point(self.count - 1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    #[default]
    Hold,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeVaryingDem {
    pub version: u32,
    pub layout_hash: String,
    pub assignment_hash: String,
    pub provenance: Provenance,
    pub classes: Vec<EdgeClass>,
    pub grid: Grid,
    /// `[class][grid index]`
    pub series: Vec<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    pub p_min: f64,
    pub clip_events: u64,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl TimeVaryingDem {
    /// Builds a DEM, clipping every value into `[p_min, 1/2 - p_min]`.
    pub fn new(
        classes: Vec<EdgeClass>,
        grid: Grid,
        mut series: Vec<Vec<f64>>,
        sigma: Option<Vec<Vec<f64>>>,
        provenance: Provenance,
        hashes: ([u8; 32], [u8; 32]),
        p_min: f64,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::data("a DEM needs at least one class"));
        }
        if grid.count == 0 || grid.stride == 0 {
            return Err(Error::data("DEM grid must be nonempty with a positive stride"));
        }
        if series.len() != classes.len() || series.iter().any(|s| s.len() != grid.count) {
            return Err(Error::data("every class series must cover the whole grid"));
        }
        if let Some(sig) = &sigma {
            if sig.len() != classes.len() || sig.iter().any(|s| s.len() != grid.count) {
                return Err(Error::data("sigma must match the series shape"));
            }
        }
        if !(p_min > 0.0 && p_min < 0.25) {
            return Err(Error::config("p_min", "must lie in (0, 1/4)"));
        }
        let mut clip_events = 0;
        for v in series.iter_mut().flatten() {
            if !v.is_finite() {
                return Err(Error::numerical("non-finite probability in DEM series"));
            }
            let c = v.clamp(p_min, 0.5 - p_min);
            if c != *v {
                clip_events += 1;
                *v = c;
            }
        }
        Ok(TimeVaryingDem {
            version: DEM_FORMAT_VERSION,
            layout_hash: hex(&hashes.0),
            assignment_hash: hex(&hashes.1),
            provenance,
            classes,
            grid,
            series,
            sigma,
            p_min,
            clip_events,
        })
    }

    /// Exact per-cycle ground truth of an experiment whose noisy cycles are the
    /// absolute cycles `start..start + cycles`. No faults precede `start`.
    pub fn ground_truth(
        classes: Vec<EdgeClass>,
        assignment: &NoiseAssignment,
        start: u64,
        cycles: usize,
        layout_hash: [u8; 32],
    ) -> Result<Self> {
        let series = ground_truth_series(&classes, assignment, start, cycles);
        TimeVaryingDem::new(
            classes,
            Grid { start, stride: 1, count: cycles },
            series,
            None,
            Provenance::GroundTruth,
            (layout_hash, assignment.hash()),
            DEFAULT_P_MIN,
        )
    }

    /// Value of class `c` at absolute cycle `t`.
    pub fn value_at(&self, c: usize, t: u64, interp: Interp) -> Result<f64> {
        let g = &self.grid;
        if t < g.start || t > g.last() {
            return Err(Error::data(format!(
                "cycle {t} outside DEM grid [{}, {}]",
                g.start,
                g.last()
            )));
        }
        let off = t - g.start;
        let i = (off / g.stride) as usize;
        let s = &self.series[c];
        Ok(match interp {
            Interp::Hold => s[i],
            Interp::Linear => {
                let r = off % g.stride;
                if r == 0 {
                    s[i]
                } else {
                    let f = r as f64 / g.stride as f64;
                    s[i] * (1.0 - f) + s[i + 1] * f
                }
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dem: TimeVaryingDem =
            serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if dem.version != DEM_FORMAT_VERSION {
            return Err(Error::data(format!("unsupported DEM version {}", dem.version)));
        }
        Ok(dem)
    }
}

/// Replaces each class series by its time mean.
pub fn static_collapse(dem: &TimeVaryingDem) -> TimeVaryingDem {
    let mut out = dem.clone();
    for s in out.series.iter_mut() {
        let mean = if s.iter().all(|&v| v == s[0]) {
            s[0]
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        };
        s.iter_mut().for_each(|v| *v = mean);
    }
    out.sigma = None;
    out.provenance = Provenance::Static;
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphEdge {
    pub u: usize,
    /// `None` for the boundary.
    pub v: Option<usize>,
    pub p: f64,
    pub weight: f64,
    pub flips_observable: bool,
}

/// Concrete decoding graph for one experiment. Detector `(row, a)` has id `row * D + a`
/// for rows `0..=cycles`; the last row is the final readout.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodingGraphInstance {
    pub cycles: usize,
    pub detectors_per_row: usize,
    pub edges: Vec<GraphEdge>,
}

impl DecodingGraphInstance {
    pub fn n_detectors(&self) -> usize {
        (self.cycles + 1) * self.detectors_per_row
    }

    /// Checks every detector can reach the boundary.
    pub fn check_connected(&self) -> Result<()> {
        let n = self.n_detectors();
        let mut adj = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        for e in &self.edges {
            match e.v {
                Some(v) => {
                    adj[e.u].push(v);
                    adj[v].push(e.u);
                }
                None => {
                    if !seen[e.u] {
                        seen[e.u] = true;
                        stack.push(e.u);
                    }
                }
            }
        }
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(d) => Err(Error::data(format!("detector {d} cannot reach the boundary"))),
            None => Ok(()),
        }
    }
}

/// Instantiates `dem` for an experiment of `cycles` cycles whose first cycle is the
/// absolute cycle `start`. Class instances are anchored at local cycles `k` with all
/// detectors inside rows `0..=cycles`.
pub fn instantiate(dem: &TimeVaryingDem, start: u64, cycles: usize, interp: Interp) -> Result<DecodingGraphInstance> {
    let d = dem
        .classes
        .iter()
        .flat_map(|c| c.signature.iter().map(|s| s.ancilla + 1))
        .max()
        .unwrap_or(0);
    let mut edges = Vec::new();
    for (ci, class) in dem.classes.iter().enumerate() {
        let span = class.max_offset();
        for k in 0..cycles {
            if k + span > cycles {
                break;
            }
            let p = dem.value_at(ci, start + k as u64, interp)?;
            let weight = edge_weight(p)?;
            let id = |s: &crate::code_models::DetectorOffset| (k + s.offset) * d + s.ancilla;
            let u = id(&class.signature[0]);
            let v = class.signature.get(1).map(id);
            edges.push(GraphEdge { u, v, p, weight, flips_observable: class.flips_observable });
        }
    }
    let g = DecodingGraphInstance { cycles, detectors_per_row: d, edges };
    g.check_connected()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_models::{build_repetition, derive_edge_classes, EdgeKind, NoiseModel};
    use crate::noise::{Component, DriftProfile, FaultLocation};
    use proptest::prelude::*;

    fn table1() -> (Vec<EdgeClass>, NoiseAssignment) {
        let l = build_repetition(3).unwrap();
        let mut a = NoiseAssignment::new();
        let prof = |g0, g1, period| DriftProfile::new(g0, vec![Component::with_period(g1, period, 0.0)]).unwrap();
        a.set(FaultLocation::Data(0), prof(0.07, 0.035, 1e4));
        a.set(FaultLocation::Data(1), prof(0.07, 0.035, 8e3));
        a.set(FaultLocation::Data(2), prof(0.06, 0.03, 9e3));
        a.set(FaultLocation::Ancilla(0), prof(0.04, 0.025, 9e3));
        a.set(FaultLocation::Ancilla(1), prof(0.04, 0.03, 6e3));
        for g in 0..2 {
            a.set(FaultLocation::Gate(g), prof(0.045, 0.03, 9e3));
        }
        for g in 2..4 {
            a.set(FaultLocation::Gate(g), prof(0.045, 0.03, 1e4));
        }
        (derive_edge_classes(&l, &a, NoiseModel::CircuitLevel).unwrap(), a)
    }

    #[test]
    fn weights() {
        assert_eq!(edge_weight(0.5).unwrap(), 0.0);
        assert!((edge_weight(0.1).unwrap() - 2.197_224_577_336_219).abs() < 1e-12);
        assert!(edge_weight(0.0).is_err());
        assert!(edge_weight(1.0).is_err());
        assert!(edge_weight(DEFAULT_P_MIN).unwrap().is_finite());
    }

    #[test]
    fn clipping_is_counted() {
        let (classes, a) = table1();
        let n = classes.len();
        let series = vec![vec![0.0, 0.6, 0.1]; n];
        let dem = TimeVaryingDem::new(
            classes,
            Grid { start: 0, stride: 1, count: 3 },
            series,
            None,
            Provenance::Sliding,
            ([0; 32], a.hash()),
            DEFAULT_P_MIN,
        )
        .unwrap();
        assert_eq!(dem.clip_events, 2 * n as u64);
        assert_eq!(dem.series[0], [1e-6, 0.5 - 1e-6, 0.1]);
    }

    #[test]
    fn ground_truth_drifts() {
        let (classes, a) = table1();
        let diag = classes.iter().position(|c| c.kind == EdgeKind::Diagonal).unwrap();
        let dem = TimeVaryingDem::ground_truth(classes, &a, 0, 5000, [0; 32]).unwrap();
        let p0 = dem.value_at(diag, 0, Interp::Hold).unwrap();
        let p1 = dem.value_at(diag, 4500, Interp::Hold).unwrap();
        assert!((p0 - p1).abs() > 1e-3);
    }

    #[test]
    fn static_dem_has_uniform_weights() {
        let (classes, a) = table1();
        let dem = TimeVaryingDem::ground_truth(classes, &a, 100, 300, [0; 32]).unwrap();
        let st = static_collapse(&dem);
        assert_eq!(st.provenance, Provenance::Static);
        assert_eq!(static_collapse(&st).series, st.series);
        let g = instantiate(&st, 100, 50, Interp::Hold).unwrap();
        for c in 0..st.classes.len() {
            let ws: Vec<f64> = g
                .edges
                .iter()
                .filter(|e| e.p == st.series[c][0])
                .map(|e| e.weight)
                .collect();
            assert!(ws.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn mean_of_two_points() {
        let (classes, a) = table1();
        let n = classes.len();
        let dem = TimeVaryingDem::new(
            classes,
            Grid { start: 0, stride: 1, count: 2 },
            vec![vec![0.1, 0.2]; n],
            None,
            Provenance::Sliding,
            ([0; 32], a.hash()),
            DEFAULT_P_MIN,
        )
        .unwrap();
        assert!(static_collapse(&dem).series.iter().all(|s| s.iter().all(|v| (v - 0.15).abs() < 1e-15)));
    }

    #[test]
    fn grid_lookup() {
        let (classes, a) = table1();
        let n = classes.len();
        let dem = TimeVaryingDem::new(
            classes,
            Grid { start: 10, stride: 4, count: 3 },
            vec![vec![0.1, 0.2, 0.3]; n],
            None,
            Provenance::Sliding,
            ([0; 32], a.hash()),
            DEFAULT_P_MIN,
        )
        .unwrap();
        assert_eq!(dem.value_at(0, 13, Interp::Hold).unwrap(), 0.1);
        assert!((dem.value_at(0, 13, Interp::Linear).unwrap() - 0.175).abs() < 1e-15);
        assert_eq!(dem.value_at(0, 18, Interp::Linear).unwrap(), 0.3);
        assert!(dem.value_at(0, 9, Interp::Hold).is_err());
        assert!(dem.value_at(0, 19, Interp::Hold).is_err());
        assert!(instantiate(&dem, 0, 5, Interp::Hold).is_err());
    }

    #[test]
    fn instance_structure() {
        let (classes, a) = table1();
        let dem = TimeVaryingDem::ground_truth(classes, &a, 0, 20, [0; 32]).unwrap();
        let g = instantiate(&dem, 0, 20, Interp::Hold).unwrap();
        assert_eq!(g.detectors_per_row, 2);
        // 2 time-like + bulk + 2 boundary + diagonal per cycle; offset-1 classes stop one short
        assert_eq!(g.edges.len(), 6 * 20);
        assert!(g.edges.iter().all(|e| e.weight.is_finite() && e.weight > 0.0));
    }

    #[test]
    fn file_round_trip() {
        let (classes, a) = table1();
        let dem = TimeVaryingDem::ground_truth(classes, &a, 7, 30, [1; 32]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dem.json");
        dem.save(&p).unwrap();
        assert_eq!(TimeVaryingDem::load(&p).unwrap(), dem);
    }

    proptest! {
        #[test]
        fn weight_is_odd_and_decreasing(p in 1e-9f64..0.999_999_999, q in 1e-9f64..0.999_999_999) {
            let wp = edge_weight(p).unwrap();
            prop_assert!((wp + edge_weight(1.0 - p).unwrap()).abs() < 1e-9 * (1.0 + wp.abs()));
            if p < q {
                prop_assert!(wp > edge_weight(q).unwrap());
            }
        }
    }
}
