use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use driftqec::decoder::{logical_error_rates, paired_difference, relative_delta, DecodeReport};
use driftqec::dem::{hex, TimeVaryingDem};
use driftqec::estimator::{sliding_series, Counts};
use driftqec::experiment::{estimate_dem, run_recipe_file, Analysis, Context, Mode, Recipe, RunOptions, Scale, ScheduleSpec};
use driftqec::iterative::decompose;
use driftqec::oracles::{check_matching, check_weight_scaling, check_window_moments};
use driftqec::relative::relative_estimate;
use driftqec::sim::{read_detections, write_detections};
use driftqec::{Error, Result};

#[derive(Parser)]
#[command(name = "driftqec", version, about = "Drifting detector-error-model estimation from syndrome data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Recipe file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct EstimateFlags {
    /// sliding | iterative | relative
    #[arg(long)]
    mode: Option<String>,
    /// Window size(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    window: Vec<usize>,
    /// Iterative schedule `from:to:step`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "sg-window")]
    sg_window: Option<usize>,
    #[arg(long = "sg-order")]
    sg_order: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct SimFlags {
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    /// Absolute cycle of the first simulated cycle.
    #[arg(long = "start-cycle")]
    start_cycle: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the recipe's memory experiment and write a detection file.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        size: SimFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate class series (and a DEM) from a detection file.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimateFlags,
        /// Detection file written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a detection file with one or more DEMs; Delta is reported against the first.
    Decode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, required = true)]
        dem: Vec<PathBuf>,
        /// Absolute start cycle of the data, `START` or `START:CYCLES`; checked against the file.
        #[arg(long)]
        range: Option<String>,
        /// Report file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Sliding-window |Delta| over window sizes.
    SweepWindow {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        window: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a recipe end to end.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimateFlags,
        #[arg(long)]
        trials: Option<usize>,
        /// Reduced shots and sweeps, for quick checks.
        #[arg(long)]
        smoke: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomized cross-checks of the estimator and decoder against brute force.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn apply_estimate(r: &mut Recipe, f: &EstimateFlags) -> Result<()> {
    let e = &mut r.estimate;
    if let Some(m) = &f.mode {
        e.mode = m.parse()?;
    }
    if !f.window.is_empty() {
        e.windows = f.window.clone();
        e.window = Some(f.window[0]);
    }
    if let Some(s) = &f.schedule {
        e.schedule = Some(s.parse::<ScheduleSpec>()?);
    }
    if let Some(mu) = f.mu {
        e.mu = mu;
    }
    if let Some(w) = f.sg_window {
        e.sg_window = w;
    }
    if let Some(o) = f.sg_order {
        e.sg_order = o;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    recipe: &'a str,
    cycles: usize,
    shots: usize,
    seed: u64,
    start_cycle: u64,
    detectors: usize,
    layout_hash: String,
    assignment_hash: String,
}

fn simulate(common: &Common, size: &SimFlags, out: &Path) -> Result<()> {
    let mut r = Recipe::load(&common.config)?;
    let s = &mut r.simulate;
    s.seed = common.seed.unwrap_or(s.seed);
    s.cycles = size.cycles.unwrap_or(s.cycles);
    s.shots = size.shots.unwrap_or(s.shots);
    s.start_cycle = size.start_cycle.unwrap_or(s.start_cycle);
    let ctx = Context::new(&r, None)?;
    let s = &r.simulate;
    let data = with_threads(common.threads, || ctx.simulate(s.cycles, s.shots, s.seed, s.start_cycle))?;
    write_detections(&data, out)?;
    let (l, a) = ctx.hashes();
    write_json(
        &sidecar_path(out),
        &Sidecar {
            recipe: &r.name,
            cycles: data.cycles,
            shots: data.shots,
            seed: s.seed,
            start_cycle: s.start_cycle,
            detectors: data.detectors,
            layout_hash: hex(&l),
            assignment_hash: hex(&a),
        },
    )
}

fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn estimate(common: &Common, flags: &EstimateFlags, data: &Path, out: &Path) -> Result<()> {
    let mut r = Recipe::load(&common.config)?;
    apply_estimate(&mut r, flags)?;
    let ctx = Context::new(&r, None)?;
    let det = read_detections(data)?;
    ctx.check_data(&det)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    with_threads(common.threads, || {
        let counts = Counts::from_data(&det, &ctx.classes)?;
        let e = &r.estimate;
        match e.mode {
            Mode::Sliding => {
                let w = *e.windows.first().ok_or_else(|| Error::config("window", "sliding mode needs --window"))?;
                sliding_series(&counts, &ctx.classes, w, e.stride)?.write_csv(&out.join("series.csv"))?;
            }
            Mode::Relative => {
                relative_estimate(&counts, &ctx.classes, e.relative_window()?, e.smoothing()?)?
                    .write_csv(&out.join("series.csv"))?;
            }
            Mode::Iterative => {
                decompose(&counts, &ctx.classes, &e.schedule()?, counts.cycles, e.stride)?.save(&out.join("model.json"))?;
            }
        }
        estimate_dem(&ctx, &counts, e)?.save(&out.join("dem.json"))
    })
}

#[derive(Serialize)]
struct DecodeEntry {
    dem: String,
    report: DecodeReport,
    delta: Option<f64>,
    delta_sigma: Option<f64>,
}

fn decode(common: &Common, data: &Path, dems: &[PathBuf], range: Option<&str>, out: &Path) -> Result<()> {
    let det = read_detections(data)?;
    if let Some(rg) = range {
        let mut it = rg.split(':');
        let bad = || Error::config("range", format!("expected START or START:CYCLES, got {rg:?}"));
        let start: u64 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let cycles: Option<usize> = it.next().map(|x| x.parse().map_err(|_| bad())).transpose()?;
        if start != det.meta.start_cycle || cycles.is_some_and(|c| c != det.cycles) {
            return Err(Error::config(
                "range",
                format!("the detection file covers {} cycles from cycle {}", det.cycles, det.meta.start_cycle),
            ));
        }
    }
    let loaded: Vec<TimeVaryingDem> = dems.iter().map(|p| TimeVaryingDem::load(p)).collect::<Result<_>>()?;
    let refs: Vec<&TimeVaryingDem> = loaded.iter().collect();
    let mut opts = driftqec::decoder::DecodeOptions::default();
    if let Ok(r) = Recipe::load(&common.config) {
        if let Some(d) = &r.decode {
            opts.convention = d.convention;
            opts.engine = d.engine;
        }
    }
    let reports = with_threads(common.threads, || logical_error_rates(&det, &refs, &opts))?;
    let mut entries = Vec::new();
    for (i, rep) in reports.iter().enumerate() {
        let (delta, delta_sigma) = if i == 0 {
            (None, None)
        } else {
            let pd = paired_difference(rep, &reports[0])?;
            (relative_delta(rep.eps_per_cycle, reports[0].eps_per_cycle).ok(), Some(pd.eps_sigma / reports[0].eps_per_cycle))
        };
        entries.push(DecodeEntry { dem: dems[i].display().to_string(), report: rep.clone(), delta, delta_sigma });
        eprintln!(
            "{}: eps = {:.6e} +- {:.2e}{}",
            dems[i].display(),
            rep.eps_per_cycle,
            rep.eps_sigma,
            delta.map_or(String::new(), |d| format!(", delta = {d:+.4e}"))
        );
    }
    write_json(out, &entries)
}

fn sweep_window(common: &Common, windows: &[usize], trials: Option<usize>, out: &Path) -> Result<()> {
    let mut r = Recipe::load(&common.config)?;
    r.analysis = Analysis::WindowSweep;
    r.estimate.mode = Mode::Sliding;
    if !windows.is_empty() {
        r.sweep.windows = windows.to_vec();
    }
    run_loaded(r, common, trials, None, out)
}

fn run_loaded(r: Recipe, common: &Common, trials: Option<usize>, scale: Option<Scale>, out: &Path) -> Result<()> {
    let dir = std::env::temp_dir().join(format!("driftqec-{}.toml", std::process::id()));
    let text = toml::to_string(&r).map_err(|e| Error::config("recipe", e.to_string()))?;
    std::fs::write(&dir, text).map_err(|e| Error::io(&dir, e))?;
    let opts = RunOptions {
        threads: common.threads,
        seed: common.seed,
        trials,
        scale,
        base_dir: common.config.parent().map(Path::to_path_buf),
    };
    let res = run_recipe_file(&dir, &opts, Some(out));
    let _ = std::fs::remove_file(&dir);
    let s = res?;
    println!("{}", serde_json::to_string_pretty(&s.outcome).map_err(|e| Error::data(e.to_string()))?);
    Ok(())
}

fn verify(trials: usize, seed: u64) -> Result<()> {
    let checks = [
        check_window_moments(trials, seed, 1e-12),
        check_matching(trials, seed),
        check_weight_scaling(trials.div_ceil(10), seed),
    ];
    let mut failed = false;
    for c in &checks {
        println!(
            "{} {}: {} instances, {} failures, max error {:e}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.instances,
            c.failures,
            c.max_error
        );
        failed |= !c.passed();
    }
    if failed {
        return Err(Error::numerical("cross-check failures"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let res = match &cli.cmd {
        Cmd::Simulate { common, size, out } => simulate(common, size, out),
        Cmd::Estimate { common, est, data, out } => estimate(common, est, data, out),
        Cmd::Decode { common, data, dem, range, out } => decode(common, data, dem, range.as_deref(), out),
        Cmd::SweepWindow { common, window, trials, out } => sweep_window(common, window, *trials, out),
        Cmd::Run { common, est, trials, smoke, out } => Recipe::load(&common.config).and_then(|mut r| {
            apply_estimate(&mut r, est)?;
            run_loaded(r, common, *trials, smoke.then_some(Scale::SMOKE), out)
        }),
        Cmd::Verify { trials, seed } => verify(*trials, *seed),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
