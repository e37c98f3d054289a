//! Multi-frequency recovery by fitting window-damped Fourier series over a shrinking
//! sequence of window sizes.
//!
//! A window of size `W` passes bins `0..=m_c(W)`. The first window fixes the lowest
//! bins; each smaller window either refines them (same cutoff, results averaged) or
//! holds them fixed and solves for the newly passed bins.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code_models::EdgeClass;
use crate::dem::{Grid, Provenance, TimeVaryingDem, DEFAULT_P_MIN};
use crate::error::{Error, Result};
use crate::estimator::{dirichlet_gain, dirichlet_signed, grid_bounds, sliding_series, solve_least_squares, window_lag, Counts};

pub const DEFAULT_MU: f64 = 0.22;
pub const DEFAULT_W_MIN: usize = 1000;
pub const FOURIER_FORMAT_VERSION: u32 = 1;

/// Strictly decreasing window sizes with threshold `mu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSchedule {
    pub windows: Vec<usize>,
    pub mu: f64,
    pub w_min: usize,
    /// Windows whose end points span less than this fraction of `n` are skipped. A DC
    /// or low bin frozen from a short span absorbs the unresolved bins above it.
    #[serde(default)]
    pub min_span: f64,
}

impl WindowSchedule {
    pub fn new(windows: Vec<usize>, mu: f64, w_min: usize) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::config("schedule", "needs at least one window"));
        }
        if windows.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::config("schedule", "window sizes must strictly decrease"));
        }
        if *windows.last().unwrap() < w_min.max(2) {
            return Err(Error::config("schedule", format!("smallest window is below W_min = {w_min}")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::config("mu", "must lie in (0, 1)"));
        }
        Ok(WindowSchedule { windows, mu, w_min, min_span: 0.0 })
    }

    pub fn with_min_span(mut self, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::config("min_span", "must lie in [0, 1)"));
        }
        self.min_span = fraction;
        Ok(self)
    }

    /// `from, from - step, ..., to`.
    pub fn linear(from: usize, to: usize, step: usize, mu: f64) -> Result<Self> {
        if step == 0 || to > from {
            return Err(Error::config("schedule", "need from >= to and a positive step"));
        }
        let windows: Vec<usize> = (0..=(from - to) / step).map(|k| from - k * step).collect();
        Self::new(windows, mu, to)
    }
}

/// Largest bin in the first lobe of the window response whose gain is at least `mu`.
pub fn cutoff_index(w: usize, mu: f64, n: usize) -> usize {
    let cap = (n.saturating_sub(1)) / 2;
    let mut m = 0;
    while m < cap && (m + 1) * w < n && dirichlet_gain(w, m + 1, n) >= mu {
        m += 1;
    }
    m
}

pub fn bin_omega(m: usize, n: usize) -> f64 {
    2.0 * PI * m as f64 / n as f64
}

/// Fourier coefficients of one class: `p(t) = dc + sum a_m sin(w_m t) + b_m cos(w_m t)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub dc: Option<f64>,
    /// `m -> (p_a, p_b)`, `m >= 1`.
    pub ac: BTreeMap<usize, (f64, f64)>,
}

impl Coefficients {
    pub fn contains(&self, m: usize) -> bool {
        if m == 0 {
            self.dc.is_some()
        } else {
            self.ac.contains_key(&m)
        }
    }

    fn merge(&mut self, other: &Coefficients) {
        if other.dc.is_some() {
            self.dc = other.dc;
        }
        self.ac.extend(other.ac.iter().map(|(&m, &v)| (m, v)));
    }

    /// Plain synthesis, no window damping.
    pub fn eval(&self, t: f64, n: usize) -> f64 {
        self.dc.unwrap_or(0.0)
            + self
                .ac
                .iter()
                .map(|(&m, &(a, b))| {
                    let x = bin_omega(m, n) * t;
                    a * x.sin() + b * x.cos()
                })
                .sum::<f64>()
    }

    /// What a window of size `w` ending at `t` reports for this series.
    pub fn windowed(&self, t: f64, w: usize, n: usize) -> f64 {
        let c = t - window_lag(w);
        self.dc.unwrap_or(0.0)
            + self
                .ac
                .iter()
                .map(|(&m, &(a, b))| {
                    let d = dirichlet_signed(w, m as f64, n);
                    let x = bin_omega(m, n) * c;
                    d * (a * x.sin() + b * x.cos())
                })
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowFit {
    pub coefficients: Coefficients,
    pub condition: f64,
}

/// Least-squares fit of bins `0..=m_c` not already in `known` to a window-`w` series
/// sampled at window end points `t`. Known terms are subtracted from the target first.
pub fn fit_window(t: &[f64], y: &[f64], w: usize, m_c: usize, n: usize, known: &Coefficients) -> Result<WindowFit> {
    if t.len() != y.len() {
        return Err(Error::data("fit needs equal-length t and y"));
    }
    let unknown: Vec<usize> = (0..=m_c).filter(|&m| !known.contains(m)).collect();
    if unknown.is_empty() {
        return Ok(WindowFit { coefficients: Coefficients::default(), condition: 1.0 });
    }
    let cols: usize = unknown.iter().map(|&m| if m == 0 { 1 } else { 2 }).sum();
    let ok: Vec<usize> = (0..t.len()).filter(|&i| y[i].is_finite()).collect();
    if ok.len() < cols {
        return Err(Error::numerical(format!(
            "window {w}: {} usable points for {cols} unknowns up to bin {}",
            ok.len(),
            unknown.last().unwrap()
        )));
    }
    for &m in &unknown {
        if dirichlet_signed(w, m as f64, n).abs() < 1e-12 {
            return Err(Error::numerical(format!("window {w} has zero response at bin {m}")));
        }
    }
    let lag = window_lag(w);
    let mut a = DMatrix::zeros(ok.len(), cols);
    let mut b = DVector::zeros(ok.len());
    for (r, &i) in ok.iter().enumerate() {
        let c = t[i] - lag;
        let mut j = 0;
        for &m in &unknown {
            if m == 0 {
                a[(r, j)] = 1.0;
                j += 1;
            } else {
                let d = dirichlet_signed(w, m as f64, n);
                let x = bin_omega(m, n) * c;
                a[(r, j)] = d * x.sin();
                a[(r, j + 1)] = d * x.cos();
                j += 2;
            }
        }
        b[r] = y[i] - known.windowed(t[i], w, n);
    }
    let (x, condition) = solve_least_squares(&a, &b).map_err(|_| {
        Error::numerical(format!(
            "window {w}: design rank deficient; cannot resolve bin {} over {} points",
            unknown.last().unwrap(),
            ok.len()
        ))
    })?;
    let mut coefficients = Coefficients::default();
    let mut j = 0;
    for &m in &unknown {
        if m == 0 {
            coefficients.dc = Some(x[j]);
            j += 1;
        } else {
            coefficients.ac.insert(m, (x[j], x[j + 1]));
            j += 2;
        }
    }
    Ok(WindowFit { coefficients, condition })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Solve,
    Average,
    Extend,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub window: usize,
    pub cutoff: usize,
    pub action: StepAction,
    pub points: usize,
    /// Largest condition number over classes.
    pub condition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class: usize,
    pub dc: f64,
    /// `(m, p_a, p_b)`
    pub terms: Vec<(usize, f64, f64)>,
}

impl ClassModel {
    fn from_coefficients(class: usize, c: &Coefficients) -> Self {
        ClassModel {
            class,
            dc: c.dc.unwrap_or(0.0),
            terms: c.ac.iter().map(|(&m, &(a, b))| (m, a, b)).collect(),
        }
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients { dc: Some(self.dc), ac: self.terms.iter().map(|&(m, a, b)| (m, (a, b))).collect() }
    }

    /// Amplitude of bin `m`, zero if absent.
    pub fn amplitude(&self, m: usize) -> f64 {
        self.terms.iter().find(|t| t.0 == m).map_or(0.0, |&(_, a, b)| a.hypot(b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierModel {
    pub version: u32,
    /// Length of the frequency grid: bin `m` has angular frequency `2 pi m / n`.
    pub n: usize,
    pub dt: f64,
    pub mu: f64,
    pub classes: Vec<ClassModel>,
    pub steps: Vec<StepRecord>,
}

/// Reconstructed class probability at absolute cycle `t`, clipped into `[0, 1/2)`.
pub fn reconstruct(model: &ClassModel, t: &[f64], n: usize) -> Vec<f64> {
    let c = model.coefficients();
    t.iter().map(|&x| c.eval(x, n).clamp(0.0, 0.5 - f64::EPSILON)).collect()
}

impl FourierModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: FourierModel = serde_json::from_str(&s).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if m.version != FOURIER_FORMAT_VERSION {
            return Err(Error::data(format!("unsupported Fourier model version {}", m.version)));
        }
        Ok(m)
    }

    /// Samples the model on `start, start + stride, ...` (`count` points).
    pub fn to_dem(&self, classes: &[EdgeClass], grid: Grid, hashes: ([u8; 32], [u8; 32])) -> Result<TimeVaryingDem> {
        if self.classes.len() != classes.len() {
            return Err(Error::data("model and class list differ in length"));
        }
        let t: Vec<f64> = (0..grid.count).map(|i| grid.point(i) as f64).collect();
        let series = self.classes.iter().map(|c| reconstruct(c, &t, self.n)).collect();
        TimeVaryingDem::new(classes.to_vec(), grid, series, None, Provenance::Iterative, hashes, DEFAULT_P_MIN)
    }
}

/// One window's series for every class, sampled at absolute window end points.
pub struct WindowSeries {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
struct ClassState {
    frozen: Coefficients,
    sum: Coefficients,
    runs: usize,
}

impl ClassState {
    fn level_mean(&self) -> Coefficients {
        let k = self.runs.max(1) as f64;
        Coefficients {
            dc: self.sum.dc.map(|v| v / k),
            ac: self.sum.ac.iter().map(|(&m, &(a, b))| (m, (a / k, b / k))).collect(),
        }
    }

    fn add(&mut self, c: &Coefficients) {
        if let Some(v) = c.dc {
            *self.sum.dc.get_or_insert(0.0) += v;
        }
        for (&m, &(a, b)) in &c.ac {
            let e = self.sum.ac.entry(m).or_insert((0.0, 0.0));
            e.0 += a;
            e.1 += b;
        }
        self.runs += 1;
    }

    fn freeze(&mut self) {
        let mean = self.level_mean();
        self.frozen.merge(&mean);
        self.sum = Coefficients::default();
        self.runs = 0;
    }
}

/// Runs the schedule over series from `source`, which returns `None` when a window has
/// no valid end points. `priors` seeds the frozen coefficients of each class.
pub fn decompose_with<F>(
    schedule: &WindowSchedule,
    n: usize,
    n_classes: usize,
    priors: Option<&[Coefficients]>,
    mut source: F,
) -> Result<FourierModel>
where
    F: FnMut(usize) -> Result<Option<WindowSeries>>,
{
    if priors.is_some_and(|p| p.len() != n_classes) {
        return Err(Error::config("priors", "one entry per class required"));
    }
    let mut state: Vec<ClassState> = (0..n_classes)
        .map(|c| ClassState { frozen: priors.map(|p| p[c].clone()).unwrap_or_default(), ..Default::default() })
        .collect();
    let mut level: Option<usize> = None;
    let mut steps = Vec::new();
    for &w in &schedule.windows {
        let m_c = cutoff_index(w, schedule.mu, n);
        let skip = |steps: &mut Vec<StepRecord>| {
            steps.push(StepRecord { window: w, cutoff: m_c, action: StepAction::Skipped, points: 0, condition: 0.0 })
        };
        if (n.saturating_sub(w) as f64) < schedule.min_span * n as f64 {
            skip(&mut steps);
            continue;
        }
        let series = match source(w)? {
            Some(s) if !s.t.is_empty() => s,
            _ => {
                skip(&mut steps);
                continue;
            }
        };
        if series.y.len() != n_classes {
            return Err(Error::data("window series has the wrong number of classes"));
        }
        let action = match level {
            None => StepAction::Solve,
            Some(prev) if m_c == prev => StepAction::Average,
            Some(prev) if m_c > prev => StepAction::Extend,
            Some(prev) => {
                return Err(Error::numerical(format!("cutoff fell from {prev} to {m_c} at window {w}")));
            }
        };
        if action == StepAction::Extend {
            state.iter_mut().for_each(ClassState::freeze);
        }
        let fits: Vec<WindowFit> = state
            .par_iter()
            .zip(&series.y)
            .map(|(st, y)| fit_window(&series.t, y, w, m_c, n, &st.frozen))
            .collect::<Result<_>>()?;
        let condition = fits.iter().map(|f| f.condition).fold(0.0, f64::max);
        for (st, f) in state.iter_mut().zip(&fits) {
            st.add(&f.coefficients);
        }
        steps.push(StepRecord { window: w, cutoff: m_c, action, points: series.t.len(), condition });
        level = Some(m_c);
    }
    if level.is_none() {
        return Err(Error::data("no window in the schedule produced any estimate"));
    }
    let classes = state
        .iter_mut()
        .enumerate()
        .map(|(c, st)| {
            st.freeze();
            ClassModel::from_coefficients(c, &st.frozen)
        })
        .collect();
    Ok(FourierModel { version: FOURIER_FORMAT_VERSION, n, dt: 1.0, mu: schedule.mu, classes, steps })
}

/// Iterative decomposition of detection data, bins spaced `2 pi / n`.
pub fn decompose(counts: &Counts, classes: &[EdgeClass], schedule: &WindowSchedule, n: usize, stride: usize) -> Result<FourierModel> {
    decompose_with(schedule, n, classes.len(), None, |w| {
        // Windows too long for the record (W = N with timelike edges) are skipped.
        if w >= 2 && grid_bounds(classes, counts.cycles, w).is_err() {
            return Ok(None);
        }
        let set = match sliding_series(counts, classes, w, stride) {
            Ok(s) => s,
            Err(Error::Data(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(Some(WindowSeries {
            t: set.t.iter().map(|&t| (set.start_cycle + t as u64) as f64).collect(),
            y: set.series.into_iter().map(|s| s.p).collect(),
        }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::temporal_average;
    use proptest::prelude::*;

    const N: usize = 10_000;

    fn truth() -> Coefficients {
        Coefficients { dc: Some(0.04), ac: [(1, (0.01, 0.004)), (2, (-0.006, 0.003))].into_iter().collect() }
    }

    /// Exact window averages of the `truth` series at window ends `w..=n`.
    fn exact_source(c: &Coefficients, stride: usize) -> impl FnMut(usize) -> Result<Option<WindowSeries>> + '_ {
        let per_cycle: Vec<f64> = (0..N).map(|k| c.eval(k as f64, N)).collect();
        move |w| {
            let t: Vec<usize> = (w..=N).step_by(stride).collect();
            let y = vec![t.iter().map(|&tl| temporal_average(&per_cycle, tl, w)).collect()];
            Ok(Some(WindowSeries { t: t.iter().map(|&x| x as f64).collect(), y }))
        }
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_index(1, 0.22, N), (N - 1) / 2);
        assert_eq!(cutoff_index(N, 0.22, N), 0);
        assert!(cutoff_index(5000, 0.22, N) >= 1);
        assert!(dirichlet_gain(5000, 1, N) >= 0.22);
        assert_eq!(cutoff_index(9000, 0.22, N), 0);
        assert_eq!(cutoff_index(3000, 0.22, N), 2);
        assert_eq!(cutoff_index(2000, 0.22, N), 4);
    }

    #[test]
    fn forward_model_matches_window_average() {
        let c = truth();
        let per_cycle: Vec<f64> = (0..N).map(|k| c.eval(k as f64, N)).collect();
        for &(w, t) in &[(777usize, 2000usize), (3000, 9999), (1, 10)] {
            let direct = temporal_average(&per_cycle, t, w);
            assert!((direct - c.windowed(t as f64, w, N)).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_single_window_fit() {
        let c = Coefficients { dc: Some(0.05), ac: [(1, (0.02, -0.01))].into_iter().collect() };
        let t: Vec<f64> = (5001..=N).step_by(7).map(|x| x as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| c.windowed(x, 5000, N)).collect();
        let f = fit_window(&t, &y, 5000, 1, N, &Coefficients::default()).unwrap();
        assert!((f.coefficients.dc.unwrap() - 0.05).abs() < 1e-6 * 0.05);
        let (a, b) = f.coefficients.ac[&1];
        assert!((a - 0.02).abs() < 1e-6 * 0.02 && (b + 0.01).abs() < 1e-6 * 0.01);
        assert!(f.condition >= 1.0);
    }

    #[test]
    fn constant_series_gives_dc_only() {
        let t: Vec<f64> = (100..200).map(f64::from).collect();
        let f = fit_window(&t, &[0.03; 100], 50, 0, N, &Coefficients::default()).unwrap();
        assert!((f.coefficients.dc.unwrap() - 0.03).abs() < 1e-15);
        assert!(f.coefficients.ac.is_empty());
    }

    #[test]
    fn known_dc_left_untouched() {
        let c = Coefficients { dc: Some(0.05), ac: [(1, (0.02, 0.0))].into_iter().collect() };
        let t: Vec<f64> = (3001..=N).step_by(5).map(|x| x as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| c.windowed(x, 3000, N)).collect();
        let known = Coefficients { dc: Some(0.05), ..Default::default() };
        let f = fit_window(&t, &y, 3000, 1, N, &known).unwrap();
        assert!(f.coefficients.dc.is_none());
        assert!((f.coefficients.ac[&1].0 - 0.02).abs() < 1e-8);
    }

    #[test]
    fn too_short_series_names_the_bin() {
        let t = [10.0, 11.0];
        let err = fit_window(&t, &[0.1, 0.1], 5, 3, N, &Coefficients::default()).unwrap_err();
        assert!(err.to_string().contains('3'), "{err}");
    }

    #[test]
    fn decompose_round_trip_noiseless() {
        let c = truth();
        let schedule = WindowSchedule::linear(3000, 1000, 1000, DEFAULT_MU).unwrap();
        let model = decompose_with(&schedule, N, 1, None, exact_source(&c, 3)).unwrap();
        let actions: Vec<StepAction> = model.steps.iter().map(|s| s.action).collect();
        assert_eq!(actions, [StepAction::Solve, StepAction::Extend, StepAction::Extend]);
        let t: Vec<f64> = (0..N).map(|x| x as f64).collect();
        let rec = reconstruct(&model.classes[0], &t, N);
        let err = t.iter().zip(&rec).map(|(&x, r)| (c.eval(x, N) - r).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn short_spans_are_skipped() {
        let c = truth();
        let full = WindowSchedule::linear(9000, 1000, 1000, DEFAULT_MU).unwrap();
        let guarded = full.clone().with_min_span(0.6).unwrap();
        let t: Vec<f64> = (0..N).map(|x| x as f64).collect();
        let err = |m: &FourierModel| {
            let rec = reconstruct(&m.classes[0], &t, N);
            t.iter().zip(&rec).map(|(&x, r)| (c.eval(x, N) - r).abs()).fold(0.0, f64::max)
        };
        let skipped = decompose_with(&guarded, N, 1, None, exact_source(&c, 3)).unwrap();
        assert!(skipped.steps[..5].iter().all(|s| s.action == StepAction::Skipped));
        assert!(err(&skipped) <= 1e-4);
        let literal = decompose_with(&full, N, 1, None, exact_source(&c, 3)).unwrap();
        assert!(err(&literal) > 1e-3);
        assert!(full.with_min_span(1.0).is_err());
    }

    #[test]
    fn equal_cutoffs_are_averaged() {
        let c = truth();
        let schedule = WindowSchedule::new(vec![2000, 1950], DEFAULT_MU, 1000).unwrap();
        assert_eq!(cutoff_index(2000, DEFAULT_MU, N), cutoff_index(1950, DEFAULT_MU, N));
        let model = decompose_with(&schedule, N, 1, None, exact_source(&c, 4)).unwrap();
        assert_eq!(model.steps[1].action, StepAction::Average);
        assert!((model.classes[0].amplitude(1) - 0.01f64.hypot(0.004)).abs() < 1e-8);
    }

    #[test]
    fn seeded_priors_leave_no_residual() {
        let c = truth();
        let schedule = WindowSchedule::linear(3000, 1000, 1000, DEFAULT_MU).unwrap();
        let prior = Coefficients { dc: c.dc, ac: [(1, c.ac[&1])].into_iter().collect() };
        let model = decompose_with(&schedule, N, 1, Some(std::slice::from_ref(&prior)), exact_source(&c, 3)).unwrap();
        let got = model.classes[0].coefficients();
        assert_eq!(got.dc, c.dc);
        assert_eq!(got.ac[&1], c.ac[&1]);
        for m in 3..=cutoff_index(1000, DEFAULT_MU, N) {
            assert!(model.classes[0].amplitude(m) <= 1e-6);
        }
        assert!((model.classes[0].amplitude(2) - 0.006f64.hypot(0.003)).abs() <= 1e-6);
    }

    #[test]
    fn static_source_is_dc_only() {
        let c = Coefficients { dc: Some(0.07), ..Default::default() };
        let schedule = WindowSchedule::linear(N, 1000, 1000, DEFAULT_MU).unwrap();
        let model = decompose_with(&schedule, N, 1, None, exact_source(&c, 10)).unwrap();
        assert!((model.classes[0].dc - 0.07).abs() < 1e-12);
        assert!(model.classes[0].terms.iter().all(|t| t.1.abs() < 1e-9 && t.2.abs() < 1e-9));
    }

    #[test]
    fn skipped_windows_are_logged() {
        let schedule = WindowSchedule::new(vec![4000, 2000], DEFAULT_MU, 1000).unwrap();
        let mut calls = 0;
        let model = decompose_with(&schedule, N, 1, None, |_| {
            calls += 1;
            if calls == 1 {
                Ok(None)
            } else {
                Ok(Some(WindowSeries { t: (2001..4000).map(f64::from).collect(), y: vec![vec![0.1; 1999]] }))
            }
        })
        .unwrap();
        assert_eq!(model.steps[0].action, StepAction::Skipped);
        assert_eq!(model.steps[1].action, StepAction::Solve);
    }

    #[test]
    fn schedules_validate() {
        assert!(WindowSchedule::new(vec![1000, 1000], 0.2, 500).is_err());
        assert!(WindowSchedule::new(vec![1000, 400], 0.2, 500).is_err());
        assert!(WindowSchedule::new(vec![1000], 1.0, 500).is_err());
        assert_eq!(WindowSchedule::linear(10_000, 1000, 1000, 0.22).unwrap().windows.len(), 10);
    }

    #[test]
    fn reconstruct_examples() {
        let m = ClassModel { class: 0, dc: 0.05, terms: vec![] };
        assert_eq!(reconstruct(&m, &[0.0, 123.0], N), [0.05, 0.05]);
        let m = ClassModel { class: 0, dc: 0.05, terms: vec![(1, 0.02, 0.0)] };
        assert!((reconstruct(&m, &[2500.0], N)[0] - 0.07).abs() < 1e-15);
        let m = ClassModel { class: 0, dc: 0.45, terms: vec![(1, 0.2, 0.0)] };
        assert!(reconstruct(&m, &[2500.0], N)[0] < 0.5);
    }

    #[test]
    fn model_file_round_trip() {
        let model = FourierModel {
            version: FOURIER_FORMAT_VERSION,
            n: N,
            dt: 1.0,
            mu: 0.22,
            classes: vec![ClassModel { class: 0, dc: 0.1 / 3.0, terms: vec![(2, 1e-3, -2e-3)] }],
            steps: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        model.save(&p).unwrap();
        assert_eq!(FourierModel::load(&p).unwrap(), model);
    }

    proptest! {
        #[test]
        fn cutoff_monotone_in_window(w in 2usize..N, dw in 1usize..2000, mu in 0.05f64..0.95) {
            let w2 = w.saturating_sub(dw).max(1);
            prop_assert!(cutoff_index(w2, mu, N) >= cutoff_index(w, mu, N));
        }

        #[test]
        fn averaging_is_order_independent(x in proptest::collection::vec(-1.0f64..1.0, 2..6)) {
            let mut fwd = ClassState::default();
            let mut rev = ClassState::default();
            for v in &x {
                fwd.add(&Coefficients { dc: Some(*v), ..Default::default() });
            }
            for v in x.iter().rev() {
                rev.add(&Coefficients { dc: Some(*v), ..Default::default() });
            }
            let (a, b) = (fwd.level_mean().dc.unwrap(), rev.level_mean().dc.unwrap());
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
