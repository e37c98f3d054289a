//! End-to-end experiments: simulate, estimate, decode and compare, driven by recipes.
//!
//! Every artifact is a pure function of the recipe, the seed and the scale; wall
//! time is never written, so reruns are byte-identical at any thread count.

pub mod recipe;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::code_models::{class_probability, derive_edge_classes, ground_truth_edge_series, CodeLayout, EdgeClass, EdgeKind};
use crate::decoder::{logical_error_rates, paired_difference, relative_delta, DecodeOptions, DecodeReport};
use crate::dem::{hex, Grid, Provenance, TimeVaryingDem};
use crate::error::{Error, Result};
use crate::estimator::{dirichlet_signed, fit_sinusoid, sliding_series, solve_least_squares, Counts};
use crate::iterative::{decompose, reconstruct, FourierModel};
use crate::noise::NoiseAssignment;
use crate::relative::relative_estimate;
use crate::sim::{run_memory, DetectionData, MemoryConfig};

pub use recipe::{Analysis, DecodeSpec, EstimateSpec, Mode, Recipe, ScheduleSpec};

/// Caps applied to a recipe for quick reruns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scale {
    pub shots: usize,
    pub decode_shots: usize,
    /// Longest sweep (windows, rates or cases) kept.
    pub sweep_points: usize,
}

impl Scale {
    pub const SMOKE: Scale = Scale { shots: 20, decode_shots: 200, sweep_points: 2 };
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub scale: Option<Scale>,
    /// Directory that `sweep.cases` paths are relative to.
    pub base_dir: Option<PathBuf>,
}

impl RunOptions {
    /// Applies seed, trial and scale overrides to a copy of `recipe`.
    pub fn apply(&self, recipe: &Recipe) -> Recipe {
        let mut r = recipe.clone();
        if let Some(s) = self.seed {
            r.simulate.seed = s;
            if let Some(d) = r.decode.as_mut() {
                d.seed = s.wrapping_add(1_000_003);
            }
        }
        if let Some(t) = self.trials {
            r.simulate.trials = t;
        }
        if let Some(sc) = self.scale {
            r.simulate.shots = r.simulate.shots.min(sc.shots);
            r.simulate.trials = 1;
            if let Some(d) = r.decode.as_mut() {
                d.shots = d.shots.min(sc.decode_shots);
            }
            r.sweep.windows.truncate(sc.sweep_points);
            r.sweep.g_star.truncate(sc.sweep_points);
            r.sweep.cases.truncate(sc.sweep_points);
        }
        r
    }
}

/// Layout, noise and edge classes of one configuration.
#[derive(Clone, Debug)]
pub struct Context {
    pub layout: CodeLayout,
    pub assignment: NoiseAssignment,
    pub classes: Vec<EdgeClass>,
    pub model: crate::code_models::NoiseModel,
}

impl Context {
    pub fn new(recipe: &Recipe, g_star: Option<f64>) -> Result<Self> {
        let layout = recipe.code.layout()?;
        let assignment = recipe.assignment(g_star)?;
        let classes = derive_edge_classes(&layout, &assignment, recipe.code.model)?;
        Ok(Context { layout, assignment, classes, model: recipe.code.model })
    }

    pub fn hashes(&self) -> ([u8; 32], [u8; 32]) {
        (self.layout.hash(), self.assignment.hash())
    }

    pub fn simulate(&self, cycles: usize, shots: usize, seed: u64, start_cycle: u64) -> Result<DetectionData> {
        let mut cfg = MemoryConfig::new(cycles, shots, seed);
        cfg.start_cycle = start_cycle;
        Ok(run_memory(&self.layout, &self.assignment, self.model, &cfg)?.0)
    }

    /// Checks that `data` was produced by this configuration.
    pub fn check_data(&self, data: &DetectionData) -> Result<()> {
        let (l, a) = self.hashes();
        if data.meta.layout_hash != l {
            return Err(Error::data("detection data come from a different layout"));
        }
        if data.meta.assignment_hash != a {
            return Err(Error::data("detection data come from a different noise assignment"));
        }
        Ok(())
    }

    pub fn ground_truth(&self, start: u64, cycles: usize) -> Result<TimeVaryingDem> {
        TimeVaryingDem::ground_truth(self.classes.clone(), &self.assignment, start, cycles, self.layout.hash())
    }

    /// Ground truth with every drift component removed.
    pub fn static_dem(&self, start: u64, cycles: usize) -> Result<TimeVaryingDem> {
        let mut d = TimeVaryingDem::ground_truth(
            self.classes.clone(),
            &self.assignment.static_part(),
            start,
            cycles,
            self.layout.hash(),
        )?;
        d.provenance = Provenance::Static;
        Ok(d)
    }

    /// Instantaneous ground truth of every class at absolute cycle `t`.
    pub fn truth_at(&self, t: u64) -> Vec<f64> {
        ground_truth_edge_series(&self.classes, &self.assignment, t)
    }

    fn of_kind(&self, kind: EdgeKind) -> Vec<usize> {
        self.classes.iter().filter(|c| c.kind == kind).map(|c| c.id).collect()
    }
}

/// Estimated DEM of `counts` under the recipe's estimation mode. Iterative models
/// are sampled on every cycle of the data.
pub fn estimate_dem(ctx: &Context, counts: &Counts, spec: &EstimateSpec) -> Result<TimeVaryingDem> {
    let hashes = ctx.hashes();
    match spec.mode {
        Mode::Sliding => {
            let w = *spec
                .windows
                .first()
                .ok_or_else(|| Error::config("estimate.windows", "sliding mode needs a window"))?;
            sliding_series(counts, &ctx.classes, w, spec.stride)?.to_dem(&ctx.classes, Provenance::Sliding, hashes)
        }
        Mode::Iterative => {
            let model = decompose(counts, &ctx.classes, &spec.schedule()?, counts.cycles, spec.stride)?;
            let grid = Grid { start: counts.start_cycle, stride: 1, count: counts.cycles };
            model.to_dem(&ctx.classes, grid, hashes)
        }
        Mode::Relative => relative_estimate(counts, &ctx.classes, spec.relative_window()?, spec.smoothing()?)?
            .to_dem(&ctx.classes, Provenance::Relative, hashes),
    }
}

fn covers(dem: &TimeVaryingDem, d: &DecodeSpec) -> Result<()> {
    let end = d.start_cycle + d.cycles as u64 - 1;
    if dem.grid.start > d.start_cycle || dem.grid.last() < end {
        return Err(Error::config(
            "decode.start_cycle",
            format!(
                "decoded cycles [{}, {end}] fall outside the {:?} DEM grid [{}, {}]",
                d.start_cycle,
                dem.provenance,
                dem.grid.start,
                dem.grid.last()
            ),
        ));
    }
    Ok(())
}

fn decode_opts(d: &DecodeSpec) -> DecodeOptions {
    DecodeOptions { engine: d.engine, convention: d.convention, ..DecodeOptions::default() }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Mean over `idx` of `series[c][i]` for every point.
fn average(series: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let len = series[idx[0]].len();
    (0..len).map(|i| idx.iter().map(|&c| series[c][i]).sum::<f64>() / idx.len() as f64).collect()
}

/// Amplitude and phase of `A sin(omega t + phi)` fitted to the finite points.
fn sinusoid(t: &[f64], y: &[f64], omega: f64) -> Result<(f64, f64)> {
    let (ts, ys): (Vec<f64>, Vec<f64>) = t.iter().zip(y).filter(|(_, v)| v.is_finite()).map(|(a, b)| (*a, *b)).unzip();
    let (_, b, c) = fit_sinusoid(&ts, &ys, omega)?;
    Ok((b.hypot(c), c.atan2(b)))
}

/// Per-cycle rate summary of one decoded DEM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub provenance: Provenance,
    pub p_fail: f64,
    pub eps: f64,
    pub sigma: f64,
    pub saturated: bool,
    pub excluded: usize,
}

impl From<&DecodeReport> for RateSummary {
    fn from(r: &DecodeReport) -> Self {
        RateSummary {
            provenance: r.provenance,
            p_fail: r.p_fail,
            eps: r.eps_per_cycle,
            sigma: r.eps_sigma,
            saturated: r.saturated,
            excluded: r.excluded,
        }
    }
}

/// Comparison of two DEMs decoded on the same shots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `eps_a - eps_b`.
    pub diff: f64,
    pub sigma_paired: f64,
    /// `sqrt(sigma_a^2 + sigma_b^2)`.
    pub sigma_combined: f64,
    /// `eps_a / eps_b - 1`, when `eps_b > 0`.
    pub delta: Option<f64>,
}

fn compare(a: &DecodeReport, b: &DecodeReport) -> Result<Comparison> {
    let pd = paired_difference(a, b)?;
    Ok(Comparison {
        diff: pd.eps_diff,
        sigma_paired: pd.eps_sigma,
        sigma_combined: a.eps_sigma.hypot(b.eps_sigma),
        delta: relative_delta(a.eps_per_cycle, b.eps_per_cycle).ok(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletRow {
    pub window: usize,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub ratio_pred: f64,
    pub lag_mean: f64,
    pub lag_std: f64,
    pub lag_pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletOutcome {
    pub period: f64,
    pub omega: f64,
    pub rows: Vec<DirichletRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinCheck {
    pub bin: usize,
    pub true_amplitude: f64,
    /// Smallest recovered amplitude over the trials.
    pub min_recovered: f64,
    pub present: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterativeOutcome {
    pub n: usize,
    /// AC amplitudes of the ground-truth bulk series, summed over the drift components.
    pub ac_amplitude_sum: f64,
    /// RMSE of the trial-averaged reconstruction.
    pub rmse: f64,
    pub rel_rmse: f64,
    pub rmse_trials: Vec<f64>,
    pub bins: Vec<BinCheck>,
    /// AC bins of each trial's bulk model.
    pub model_bins: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassError {
    pub label: String,
    pub kind: Option<EdgeKind>,
    pub rmse: f64,
    pub mean_truth: f64,
    pub rel_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeOutcome {
    pub window: usize,
    pub points: usize,
    pub classes: Vec<ClassError>,
    /// Class-averaged bulk-space series.
    pub bulk: ClassError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window: usize,
    pub estimated: RateSummary,
    pub vs_truth: Comparison,
    /// Mean `|Delta|` over the trials.
    pub abs_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSweepOutcome {
    pub truth: RateSummary,
    pub rows: Vec<SweepRow>,
    pub best_window: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub case: String,
    pub model: crate::code_models::NoiseModel,
    pub truth: RateSummary,
    pub estimated: RateSummary,
    pub vs_truth: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaOutcome {
    pub rows: Vec<DeltaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub g_star: f64,
    pub truth: RateSummary,
    pub estimated: RateSummary,
    pub static_dem: RateSummary,
    pub est_vs_static: Comparison,
    pub est_vs_truth: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSweepOutcome {
    pub rows: Vec<RateRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "snake_case")]
pub enum Outcome {
    Dirichlet(DirichletOutcome),
    Iterative(IterativeOutcome),
    Relative(RelativeOutcome),
    WindowSweep(WindowSweepOutcome),
    Delta(DeltaOutcome),
    RateSweep(RateSweepOutcome),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub recipe: String,
    pub seed: u64,
    pub trials: usize,
    pub layout_hash: String,
    pub assignment_hash: String,
    pub outcome: Outcome,
}

/// Named CSV tables written next to the summary.
type Tables = Vec<(String, String)>;

/// Runs `recipe` and, when `out` is given, writes `summary.json` and the CSV tables there.
pub fn run_recipe(recipe: &Recipe, opts: &RunOptions, out: Option<&Path>) -> Result<Summary> {
    let r = opts.apply(recipe);
    r.validate()?;
    let go = || run_inner(&r, opts);
    let (summary, tables) = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(go)?,
        None => go()?,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
        for (name, body) in &tables {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(summary)
}

pub fn run_recipe_file(path: &Path, opts: &RunOptions, out: Option<&Path>) -> Result<Summary> {
    let recipe = Recipe::load(path)?;
    let mut o = opts.clone();
    if o.base_dir.is_none() {
        o.base_dir = path.parent().map(Path::to_path_buf);
    }
    run_recipe(&recipe, &o, out)
}

fn run_inner(r: &Recipe, opts: &RunOptions) -> Result<(Summary, Tables)> {
    let (outcome, tables, hashes) = match r.analysis {
        Analysis::Dirichlet => run_dirichlet(r)?,
        Analysis::Iterative => run_iterative(r)?,
        Analysis::Relative => run_relative(r)?,
        Analysis::WindowSweep => run_window_sweep(r)?,
        Analysis::Delta => run_delta(r, opts)?,
        Analysis::RateSweep => run_rate_sweep(r)?,
    };
    Ok((
        Summary {
            recipe: r.name.clone(),
            seed: r.simulate.seed,
            trials: r.simulate.trials,
            layout_hash: hex(&hashes.0),
            assignment_hash: hex(&hashes.1),
            outcome,
        },
        tables,
    ))
}

type Run = (Outcome, Tables, ([u8; 32], [u8; 32]));

fn trial_counts(ctx: &Context, r: &Recipe, trial: usize) -> Result<Counts> {
    let s = &r.simulate;
    let data = ctx.simulate(s.cycles, s.shots, s.seed.wrapping_add(trial as u64), s.start_cycle)?;
    Counts::from_data(&data, &ctx.classes)
}

fn bulk_classes(ctx: &Context) -> Result<Vec<usize>> {
    let b = ctx.of_kind(EdgeKind::BulkSpace);
    if b.is_empty() {
        return Err(Error::data("the layout has no bulk-space class"));
    }
    Ok(b)
}

fn run_dirichlet(r: &Recipe) -> Result<Run> {
    let ctx = Context::new(r, None)?;
    let bulk = bulk_classes(&ctx)?;
    let (period, _) = *r
        .drift_components()
        .first()
        .ok_or_else(|| Error::config("noise", "the gain analysis needs a drift component"))?;
    let omega = 2.0 * PI / period;
    let n = r.simulate.cycles;
    let windows = &r.estimate.windows;
    // per window: (ratios, lags, t, per-trial series)
    let mut acc: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> = vec![Default::default(); windows.len()];
    for trial in 0..r.simulate.trials {
        let counts = trial_counts(&ctx, r, trial)?;
        for (wi, &w) in windows.iter().enumerate() {
            let set = sliding_series(&counts, &ctx.classes, w, r.estimate.stride)?;
            let p: Vec<Vec<f64>> = set.series.iter().map(|s| s.p.clone()).collect();
            let est = average(&p, &bulk);
            let t: Vec<f64> = set.t.iter().map(|&x| (set.start_cycle + x as u64) as f64).collect();
            let truth: Vec<f64> = t.iter().map(|&x| {
                let v = ctx.truth_at(x as u64);
                bulk.iter().map(|&c| v[c]).sum::<f64>() / bulk.len() as f64
            }).collect();
            let (ae, pe) = sinusoid(&t, &est, omega)?;
            let (at, pt) = sinusoid(&t, &truth, omega)?;
            let a = &mut acc[wi];
            a.0.push(ae / at);
            a.1.push(wrap(pt - pe));
            if trial == 0 {
                a.2 = t;
                a.3.push(truth);
            }
            a.3.push(est);
        }
    }
    let mut rows = Vec::new();
    let mut tables = Vec::new();
    for (wi, &w) in windows.iter().enumerate() {
        let (ratios, lags, t, series) = &acc[wi];
        let d = dirichlet_signed(w, n as f64 / period, n);
        let (ratio_mean, ratio_std) = mean_std(ratios);
        let (lag_mean, lag_std) = mean_std(lags);
        rows.push(DirichletRow {
            window: w,
            ratio_mean,
            ratio_std,
            ratio_pred: d.abs(),
            lag_mean,
            lag_std,
            lag_pred: wrap(omega * (w as f64 + 1.0) / 2.0 + if d < 0.0 { PI } else { 0.0 }),
        });
        let mut csv = String::from("t_l,truth,est_mean,est_std\n");
        for (i, tl) in t.iter().enumerate() {
            let v: Vec<f64> = series[1..].iter().map(|s| s[i]).collect();
            let (m, s) = mean_std(&v);
            writeln!(csv, "{tl},{},{m},{s}", series[0][i]).unwrap();
        }
        tables.push((format!("series_w{w}.csv"), csv));
    }
    let mut csv = String::from("window,ratio_mean,ratio_std,ratio_pred,lag_mean,lag_std,lag_pred\n");
    for x in &rows {
        writeln!(csv, "{},{},{},{},{},{},{}", x.window, x.ratio_mean, x.ratio_std, x.ratio_pred, x.lag_mean, x.lag_std, x.lag_pred).unwrap();
    }
    tables.push(("gain.csv".into(), csv));
    Ok((Outcome::Dirichlet(DirichletOutcome { period, omega, rows }), tables, ctx.hashes()))
}

/// Sum of the AC amplitudes of `y` at the given periods (joint least squares).
fn ac_amplitude_sum(t: &[f64], y: &[f64], periods: &[f64]) -> Result<f64> {
    let cols = 1 + 2 * periods.len();
    let a = DMatrix::from_fn(t.len(), cols, |i, j| {
        if j == 0 {
            return 1.0;
        }
        let w = 2.0 * PI / periods[(j - 1) / 2];
        if j % 2 == 1 { (w * t[i]).sin() } else { (w * t[i]).cos() }
    });
    let x = solve_least_squares(&a, &DVector::from_column_slice(y))?.0;
    Ok((0..periods.len()).map(|k| x[1 + 2 * k].hypot(x[2 + 2 * k])).sum())
}

/// Magnitude of DFT bin `m` of `y`, scaled to a sinusoid amplitude.
fn bin_amplitude(y: &[f64], m: usize) -> f64 {
    let n = y.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, v) in y.iter().enumerate() {
        let a = 2.0 * PI * (m * k) as f64 / n;
        re += v * a.cos();
        im -= v * a.sin();
    }
    let s = if m == 0 { 1.0 } else { 2.0 };
    s * re.hypot(im) / n
}

fn run_iterative(r: &Recipe) -> Result<Run> {
    let ctx = Context::new(r, None)?;
    let bulk = bulk_classes(&ctx)?;
    let n = r.simulate.cycles;
    let start = r.simulate.start_cycle;
    let schedule = r.estimate.schedule()?;
    let t: Vec<f64> = (0..n).map(|k| (start + k as u64) as f64).collect();
    let truth_all: Vec<Vec<f64>> = {
        let rows: Vec<Vec<f64>> = t.iter().map(|&x| ctx.truth_at(x as u64)).collect();
        (0..ctx.classes.len()).map(|c| rows.iter().map(|v| v[c]).collect()).collect()
    };
    let truth = average(&truth_all, &bulk);
    let periods: Vec<f64> = r.drift_components().iter().map(|c| c.0).collect();
    let ac_sum = if periods.is_empty() { 0.0 } else { ac_amplitude_sum(&t, &truth, &periods)? };
    let mut true_bins: Vec<usize> = periods.iter().map(|p| (n as f64 / p).round() as usize).collect();
    true_bins.sort_unstable();
    true_bins.dedup();

    let mut recon_sum = vec![0.0; n];
    let mut rmse_trials = Vec::new();
    let mut model_bins = Vec::new();
    let mut min_rec = vec![f64::INFINITY; true_bins.len()];
    let mut first: Option<FourierModel> = None;
    for trial in 0..r.simulate.trials {
        let counts = trial_counts(&ctx, r, trial)?;
        let model = decompose(&counts, &ctx.classes, &schedule, n, r.estimate.stride)?;
        let per: Vec<Vec<f64>> = model.classes.iter().map(|cm| reconstruct(cm, &t, n)).collect();
        let rec = average(&per, &bulk);
        rmse_trials.push(rmse(&rec, &truth));
        recon_sum.iter_mut().zip(&rec).for_each(|(s, v)| *s += v);
        let mut bins: Vec<usize> = model.classes[bulk[0]].terms.iter().map(|x| x.0).collect();
        bins.sort_unstable();
        model_bins.push(bins);
        for (bi, &m) in true_bins.iter().enumerate() {
            let amp = bulk
                .iter()
                .map(|&c| if m == 0 { model.classes[c].dc } else { model.classes[c].amplitude(m) })
                .sum::<f64>()
                / bulk.len() as f64;
            min_rec[bi] = min_rec[bi].min(amp);
        }
        if first.is_none() {
            first = Some(model);
        }
    }
    let trials = r.simulate.trials as f64;
    let recon: Vec<f64> = recon_sum.iter().map(|s| s / trials).collect();
    let e = rmse(&recon, &truth);
    let bins = true_bins
        .iter()
        .zip(&min_rec)
        .map(|(&m, &rec)| {
            let true_amplitude = bin_amplitude(&truth, m);
            BinCheck { bin: m, true_amplitude, min_recovered: rec, present: rec >= 0.25 * true_amplitude }
        })
        .collect();
    let mut csv = String::from("t,truth,reconstructed\n");
    for i in 0..n {
        writeln!(csv, "{},{},{}", t[i], truth[i], recon[i]).unwrap();
    }
    let model_json = serde_json::to_string_pretty(first.as_ref().unwrap()).map_err(|e| Error::data(e.to_string()))?;
    let outcome = IterativeOutcome {
        n,
        ac_amplitude_sum: ac_sum,
        rmse: e,
        rel_rmse: if ac_sum > 0.0 { e / ac_sum } else { f64::NAN },
        rmse_trials,
        bins,
        model_bins,
    };
    Ok((
        Outcome::Iterative(outcome),
        vec![("reconstruction.csv".into(), csv), ("model_trial0.json".into(), model_json + "\n")],
        ctx.hashes(),
    ))
}

fn class_error(label: String, kind: Option<EdgeKind>, est: &[f64], truth: &[f64]) -> ClassError {
    let e = rmse(est, truth);
    let mean_truth = truth.iter().sum::<f64>() / truth.len() as f64;
    ClassError { label, kind, rmse: e, mean_truth, rel_rmse: e / mean_truth }
}

fn run_relative(r: &Recipe) -> Result<Run> {
    let ctx = Context::new(r, None)?;
    let bulk = bulk_classes(&ctx)?;
    let s = &r.simulate;
    let w = r.estimate.relative_window()?;
    let smoothing = r.estimate.smoothing()?;
    let mut sum: Vec<Vec<f64>> = Vec::new();
    let mut grid: Vec<usize> = Vec::new();
    for trial in 0..s.trials {
        let counts = trial_counts(&ctx, r, trial)?;
        let set = relative_estimate(&counts, &ctx.classes, w, smoothing)?;
        if trial == 0 {
            grid = set.t.clone();
            sum = vec![vec![0.0; grid.len()]; ctx.classes.len()];
        }
        for (c, es) in set.series.iter().enumerate() {
            sum[c].iter_mut().zip(&es.p).for_each(|(a, v)| *a += v);
        }
    }
    let est: Vec<Vec<f64>> = sum.iter().map(|v| v.iter().map(|x| x / s.trials as f64).collect()).collect();
    // class instances touching the noiseless final readout row are left out
    let maxo = ctx.classes.iter().map(EdgeClass::max_offset).max().unwrap_or(0);
    let keep: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] + maxo < s.cycles).collect();
    if keep.is_empty() {
        return Err(Error::data("no relative estimate away from the final readout"));
    }
    let truth: Vec<Vec<f64>> = ctx
        .classes
        .iter()
        .map(|c| keep.iter().map(|&i| class_probability(c, &ctx.assignment, s.start_cycle, s.cycles, grid[i])).collect())
        .collect();
    let kept: Vec<Vec<f64>> = est.iter().map(|v| keep.iter().map(|&i| v[i]).collect()).collect();
    let classes = ctx
        .classes
        .iter()
        .map(|c| class_error(c.label(), Some(c.kind), &kept[c.id], &truth[c.id]))
        .collect();
    let bulk_err = class_error("bulk_average".into(), None, &average(&kept, &bulk), &average(&truth, &bulk));
    let mut csv = String::from("class,t,truth,estimate\n");
    for c in &ctx.classes {
        for (j, &i) in keep.iter().enumerate() {
            writeln!(csv, "{},{},{},{}", c.id, s.start_cycle + grid[i] as u64, truth[c.id][j], kept[c.id][j]).unwrap();
        }
    }
    let outcome = RelativeOutcome { window: w, points: keep.len(), classes, bulk: bulk_err };
    Ok((Outcome::Relative(outcome), vec![("series.csv".into(), csv)], ctx.hashes()))
}

fn decode_spec(r: &Recipe) -> Result<&DecodeSpec> {
    r.decode.as_ref().ok_or_else(|| Error::config("decode", "missing [decode] table"))
}

fn run_window_sweep(r: &Recipe) -> Result<Run> {
    let ctx = Context::new(r, None)?;
    let d = decode_spec(r)?;
    let data = ctx.simulate(d.cycles, d.shots, d.seed, d.start_cycle)?;
    let gt = ctx.ground_truth(d.start_cycle, d.cycles)?;
    let opts = decode_opts(d);
    let windows = &r.sweep.windows;
    let mut first: Vec<(RateSummary, Comparison)> = Vec::new();
    let mut abs: Vec<Vec<f64>> = vec![Vec::new(); windows.len()];
    let mut truth = None;
    for trial in 0..r.simulate.trials {
        let counts = trial_counts(&ctx, r, trial)?;
        let mut dems = vec![gt.clone()];
        for &w in windows {
            let dem = sliding_series(&counts, &ctx.classes, w, r.estimate.stride)?.to_dem(&ctx.classes, Provenance::Sliding, ctx.hashes())?;
            covers(&dem, d)?;
            dems.push(dem);
        }
        let refs: Vec<&TimeVaryingDem> = dems.iter().collect();
        let reps = logical_error_rates(&data, &refs, &opts)?;
        for (wi, rep) in reps[1..].iter().enumerate() {
            let cmp = compare(rep, &reps[0])?;
            abs[wi].push(cmp.delta.map_or(f64::NAN, f64::abs));
            if trial == 0 {
                first.push((RateSummary::from(rep), cmp));
            }
        }
        truth.get_or_insert_with(|| RateSummary::from(&reps[0]));
    }
    let rows: Vec<SweepRow> = windows
        .iter()
        .zip(first)
        .zip(&abs)
        .map(|((&window, (estimated, vs_truth)), a)| SweepRow { window, estimated, vs_truth, abs_delta: mean_std(a).0 })
        .collect();
    let best_window = rows
        .iter()
        .filter(|x| x.abs_delta.is_finite())
        .min_by(|a, b| a.abs_delta.total_cmp(&b.abs_delta))
        .map_or(0, |x| x.window);
    let mut csv = String::from("window,eps_est,eps_sigma,delta,delta_sigma,abs_delta\n");
    let truth = truth.unwrap();
    for x in &rows {
        let ds = x.vs_truth.sigma_paired / truth.eps;
        writeln!(
            csv,
            "{},{},{},{},{ds},{}",
            x.window,
            x.estimated.eps,
            x.estimated.sigma,
            x.vs_truth.delta.unwrap_or(f64::NAN),
            x.abs_delta
        )
        .unwrap();
    }
    Ok((Outcome::WindowSweep(WindowSweepOutcome { truth, rows, best_window }), vec![("sweep.csv".into(), csv)], ctx.hashes()))
}

fn run_delta(r: &Recipe, opts: &RunOptions) -> Result<Run> {
    let d = decode_spec(r)?;
    let base = opts.base_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut rows = Vec::new();
    let mut hashes = ([0u8; 32], [0u8; 32]);
    for case in &r.sweep.cases {
        let mut cr = Recipe::load(&base.join(case))?;
        cr.simulate.seed = r.simulate.seed.wrapping_add(cr.simulate.seed);
        cr.simulate.shots = cr.simulate.shots.min(r.simulate.shots);
        cr.estimate.mode = Mode::Relative;
        let ctx = Context::new(&cr, None)?;
        if rows.is_empty() {
            hashes = ctx.hashes();
        }
        let counts = trial_counts(&ctx, &cr, 0)?;
        let est = estimate_dem(&ctx, &counts, &cr.estimate)?;
        covers(&est, d)?;
        let gt = ctx.ground_truth(d.start_cycle, d.cycles)?;
        let data = ctx.simulate(d.cycles, d.shots, d.seed, d.start_cycle)?;
        let reps = logical_error_rates(&data, &[&gt, &est], &decode_opts(d))?;
        rows.push(DeltaRow {
            case: cr.name.clone(),
            model: cr.code.model,
            truth: RateSummary::from(&reps[0]),
            estimated: RateSummary::from(&reps[1]),
            vs_truth: compare(&reps[1], &reps[0])?,
        });
    }
    let mut csv = String::from("case,eps_truth,eps_est,delta,delta_sigma\n");
    for x in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            x.case,
            x.truth.eps,
            x.estimated.eps,
            x.vs_truth.delta.unwrap_or(f64::NAN),
            x.vs_truth.sigma_paired / x.truth.eps
        )
        .unwrap();
    }
    Ok((Outcome::Delta(DeltaOutcome { rows }), vec![("delta.csv".into(), csv)], hashes))
}

fn run_rate_sweep(r: &Recipe) -> Result<Run> {
    let d = decode_spec(r)?;
    let mut rows = Vec::new();
    let mut hashes = ([0u8; 32], [0u8; 32]);
    for (i, &g) in r.sweep.g_star.iter().enumerate() {
        let ctx = Context::new(r, Some(g))?;
        if i == 0 {
            hashes = ctx.hashes();
        }
        let mut cr = r.clone();
        cr.simulate.seed = r.simulate.seed.wrapping_add(1000 * i as u64);
        let counts = trial_counts(&ctx, &cr, 0)?;
        let est = estimate_dem(&ctx, &counts, &r.estimate)?;
        covers(&est, d)?;
        let gt = ctx.ground_truth(d.start_cycle, d.cycles)?;
        let st = ctx.static_dem(d.start_cycle, d.cycles)?;
        let data = ctx.simulate(d.cycles, d.shots, d.seed.wrapping_add(i as u64), d.start_cycle)?;
        let reps = logical_error_rates(&data, &[&gt, &est, &st], &decode_opts(d))?;
        rows.push(RateRow {
            g_star: g,
            truth: RateSummary::from(&reps[0]),
            estimated: RateSummary::from(&reps[1]),
            static_dem: RateSummary::from(&reps[2]),
            est_vs_static: compare(&reps[1], &reps[2])?,
            est_vs_truth: compare(&reps[1], &reps[0])?,
        });
    }
    let mut csv = String::from("g_star,eps_truth,sigma_truth,eps_est,sigma_est,eps_static,sigma_static\n");
    for x in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            x.g_star, x.truth.eps, x.truth.sigma, x.estimated.eps, x.estimated.sigma, x.static_dem.eps, x.static_dem.sigma
        )
        .unwrap();
    }
    Ok((Outcome::RateSweep(RateSweepOutcome { rows }), vec![("rates.csv".into(), csv)], hashes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(-PI) - PI).abs() < 1e-12);
        assert!((wrap(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap(-2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bin_amplitude_of_sinusoid() {
        let n = 1000;
        let y: Vec<f64> = (0..n).map(|k| 0.1 + 0.03 * (2.0 * PI * 3.0 * k as f64 / n as f64 + 0.4).sin()).collect();
        assert!((bin_amplitude(&y, 3) - 0.03).abs() < 1e-12);
        assert!((bin_amplitude(&y, 0) - 0.1).abs() < 1e-12);
        assert!(bin_amplitude(&y, 5).abs() < 1e-12);
        let t: Vec<f64> = (0..n).map(|k| k as f64).collect();
        assert!((ac_amplitude_sum(&t, &y, &[n as f64 / 3.0]).unwrap() - 0.03).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_phase_convention() {
        let t: Vec<f64> = (0..500).map(f64::from).collect();
        let w = 2.0 * PI / 250.0;
        let y: Vec<f64> = t.iter().map(|&x| 1.0 + 0.5 * (w * x + 0.7).sin()).collect();
        let (a, p) = sinusoid(&t, &y, w).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && (p - 0.7).abs() < 1e-12);
    }
}
