//! Declarative experiment recipes (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code_models::{build_repetition, build_rotated_surface_x, CodeFamily, CodeLayout, NoiseModel};
use crate::decoder::{Engine, RateConvention};
use crate::error::{Error, Result};
use crate::iterative::{WindowSchedule, DEFAULT_MU};
use crate::noise::{Component, DriftProfile, FaultLocation, NoiseAssignment};
use crate::relative::{Smoothing, DEFAULT_SG_ORDER, DEFAULT_SG_WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Sliding-window gain and lag of the dominant drift component.
    Dirichlet,
    /// Iterative Fourier decomposition against the ground truth.
    Iterative,
    /// Relative-window tracking error per class.
    Relative,
    /// `|Delta|` of sliding-window DEMs over a list of window sizes.
    WindowSweep,
    /// `|Delta|` of relative-window DEMs over a list of other recipes.
    Delta,
    /// Estimated, ground-truth and static logical error rates over a list of `g*`.
    RateSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sliding,
    Iterative,
    Relative,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sliding" => Ok(Mode::Sliding),
            "iterative" => Ok(Mode::Iterative),
            "relative" => Ok(Mode::Relative),
            _ => Err(Error::config("mode", format!("expected sliding, iterative or relative, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub family: CodeFamily,
    pub distance: usize,
    pub model: NoiseModel,
}

impl CodeSpec {
    pub fn layout(&self) -> Result<CodeLayout> {
        match self.family {
            CodeFamily::Repetition => build_repetition(self.distance),
            CodeFamily::RotatedSurfaceX => build_rotated_surface_x(self.distance),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub amplitude: f64,
    /// Period in cycles.
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Drift profile applied to every location matching `locations`.
///
/// Patterns: `*` (all), `d*`, `a*`, `g*`, or a comma-separated list such as `g1,g2`.
/// Later entries override earlier ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub locations: String,
    pub g0: f64,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    /// Multiply `g0` and every amplitude by the sweep's `g*`.
    #[serde(default)]
    pub scale_with_g_star: bool,
}

fn matches(pattern: &str, loc: FaultLocation) -> Result<bool> {
    for item in pattern.split(',').map(str::trim) {
        let hit = match item {
            "*" => true,
            "d*" => matches!(loc, FaultLocation::Data(_)),
            "a*" => matches!(loc, FaultLocation::Ancilla(_)),
            "g*" => matches!(loc, FaultLocation::Gate(_)),
            name => name.parse::<FaultLocation>()? == loc,
        };
        if hit {
            return Ok(true);
        }
    }
    Ok(false)
}

fn default_trials() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub cycles: usize,
    pub shots: usize,
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub start_cycle: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub from: usize,
    pub to: usize,
    pub step: usize,
}

impl std::str::FromStr for ScheduleSpec {
    type Err = Error;

    /// `from:to:step`, e.g. `10000:1000:1000`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(':')
            .map(|x| x.parse().map_err(|_| Error::config("schedule", format!("cannot parse {s:?}"))))
            .collect::<Result<_>>()?;
        match parts[..] {
            [from, to, step] => Ok(ScheduleSpec { from, to, step }),
            _ => Err(Error::config("schedule", "expected from:to:step")),
        }
    }
}

fn default_stride() -> usize {
    1
}
fn default_mu() -> f64 {
    DEFAULT_MU
}
fn default_sg_window() -> usize {
    DEFAULT_SG_WINDOW
}
fn default_sg_order() -> usize {
    DEFAULT_SG_ORDER
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub mode: Mode,
    /// Sliding windows.
    #[serde(default)]
    pub windows: Vec<usize>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    pub schedule: Option<ScheduleSpec>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Iterative windows whose end points span less than this fraction of the record are skipped.
    #[serde(default)]
    pub min_span: f64,
    /// Relative window `W` (paired with `W + 1`).
    pub window: Option<usize>,
    #[serde(default = "default_true")]
    pub smooth: bool,
    #[serde(default = "default_sg_window")]
    pub sg_window: usize,
    #[serde(default = "default_sg_order")]
    pub sg_order: usize,
}

impl EstimateSpec {
    pub fn schedule(&self) -> Result<WindowSchedule> {
        let s = self
            .schedule
            .as_ref()
            .ok_or_else(|| Error::config("estimate.schedule", "iterative mode needs a schedule"))?;
        WindowSchedule::linear(s.from, s.to, s.step, self.mu)?.with_min_span(self.min_span)
    }

    pub fn relative_window(&self) -> Result<usize> {
        self.window
            .ok_or_else(|| Error::config("estimate.window", "relative mode needs a window"))
    }

    pub fn smoothing(&self) -> Result<Option<Smoothing>> {
        if !self.smooth {
            return Ok(None);
        }
        let s = Smoothing { window: self.sg_window, order: self.sg_order };
        s.validate()?;
        Ok(Some(s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSpec {
    pub cycles: usize,
    pub shots: usize,
    /// Absolute cycle at which the decoded experiment starts.
    pub start_cycle: u64,
    pub seed: u64,
    #[serde(default)]
    pub convention: RateConvention,
    #[serde(default)]
    pub engine: Engine,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub windows: Vec<usize>,
    #[serde(default)]
    pub g_star: Vec<f64>,
    /// Other recipes, relative to this file.
    #[serde(default)]
    pub cases: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    pub analysis: Analysis,
    pub code: CodeSpec,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    pub simulate: SimulateSpec,
    pub estimate: EstimateSpec,
    pub decode: Option<DecodeSpec>,
    #[serde(default)]
    pub sweep: SweepSpec,
}

impl Recipe {
    pub fn parse(text: &str) -> Result<Recipe> {
        let r: Recipe = toml::from_str(text).map_err(|e| Error::config("recipe", e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Recipe> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Recipe::parse(&text).map_err(|e| match e {
            Error::Config { field, reason } => Error::config(field, format!("{}: {reason}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.code.layout()?;
        if self.simulate.trials == 0 {
            return Err(Error::config("simulate.trials", "at least one trial is required"));
        }
        if self.simulate.shots == 0 {
            return Err(Error::config("simulate.shots", "at least 1 shot is required"));
        }
        if self.estimate.stride == 0 {
            return Err(Error::config("estimate.stride", "must be positive"));
        }
        match self.analysis {
            Analysis::Dirichlet | Analysis::WindowSweep if self.estimate.mode != Mode::Sliding => {
                return Err(Error::config("estimate.mode", "this analysis uses sliding windows"));
            }
            Analysis::Iterative if self.estimate.mode != Mode::Iterative => {
                return Err(Error::config("estimate.mode", "this analysis uses the iterative mode"));
            }
            _ => {}
        }
        match self.analysis {
            Analysis::Dirichlet if self.estimate.windows.is_empty() => {
                return Err(Error::config("estimate.windows", "at least one window is required"));
            }
            Analysis::WindowSweep if self.sweep.windows.is_empty() => {
                return Err(Error::config("sweep.windows", "at least one window is required"));
            }
            Analysis::RateSweep if self.sweep.g_star.is_empty() => {
                return Err(Error::config("sweep.g_star", "at least one rate is required"));
            }
            Analysis::Delta if self.sweep.cases.is_empty() => {
                return Err(Error::config("sweep.cases", "at least one case is required"));
            }
            _ => {}
        }
        if matches!(self.analysis, Analysis::WindowSweep | Analysis::Delta | Analysis::RateSweep) {
            let d = self
                .decode
                .as_ref()
                .ok_or_else(|| Error::config("decode", "this analysis decodes and needs a [decode] table"))?;
            if d.shots == 0 || d.cycles < 2 {
                return Err(Error::config("decode", "need at least 1 shot and 2 cycles"));
            }
        }
        if self.analysis != Analysis::Delta {
            if self.noise.is_empty() {
                return Err(Error::config("noise", "at least one [[noise]] entry is required"));
            }
            self.assignment(None)?;
        }
        match self.estimate.mode {
            Mode::Iterative => {
                self.estimate.schedule()?;
            }
            Mode::Relative => {
                self.estimate.relative_window()?;
                self.estimate.smoothing()?;
            }
            Mode::Sliding => {}
        }
        Ok(())
    }

    /// Noise assignment over the layout's fault locations; `g_star` scales flagged entries.
    pub fn assignment(&self, g_star: Option<f64>) -> Result<NoiseAssignment> {
        let layout = self.code.layout()?;
        let locations = layout.fault_locations(self.code.model);
        let mut a = NoiseAssignment::new();
        for (i, spec) in self.noise.iter().enumerate() {
            let scale = match (spec.scale_with_g_star, g_star) {
                (true, Some(g)) => g,
                (true, None) if self.analysis == Analysis::RateSweep => {
                    *self.sweep.g_star.first().ok_or_else(|| Error::config("sweep.g_star", "empty"))?
                }
                _ => 1.0,
            };
            let components = spec
                .components
                .iter()
                .map(|c| {
                    if !(c.period > 0.0) {
                        return Err(Error::config(format!("noise[{i}].components.period"), "must be positive"));
                    }
                    Ok(Component::with_period(scale * c.amplitude, c.period, c.phase))
                })
                .collect::<Result<_>>()?;
            let profile = DriftProfile::new(scale * spec.g0, components)
                .map_err(|e| Error::config(format!("noise[{i}]"), e.to_string()))?;
            let mut hit = false;
            for &loc in &locations {
                if matches(&spec.locations, loc)? {
                    a.set(loc, profile.clone());
                    hit = true;
                }
            }
            if !hit {
                return Err(Error::config(
                    format!("noise[{i}].locations"),
                    format!("{:?} matches no fault location", spec.locations),
                ));
            }
        }
        a.check_covers(&locations)?;
        Ok(a)
    }

    /// Period and amplitude of every drift component, largest amplitude first (duplicates merged).
    pub fn drift_components(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for spec in &self.noise {
            for c in &spec.components {
                match out.iter_mut().find(|(p, _)| *p == c.period) {
                    Some(e) => e.1 = e.1.max(c.amplitude.abs()),
                    None => out.push((c.period, c.amplitude.abs())),
                }
            }
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"
name = "t"
analysis = "dirichlet"
[code]
family = "repetition"
distance = 3
model = "phenomenological"
[[noise]]
locations = "*"
g0 = 0.1
components = [{ amplitude = 0.05, period = 10000 }]
[simulate]
cycles = 50000
shots = 10
seed = 1
[estimate]
mode = "sliding"
windows = [1500]
"#;

    #[test]
    fn parses_and_assigns() {
        let r = Recipe::parse(FIG3).unwrap();
        let a = r.assignment(None).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(r.drift_components(), vec![(10000.0, 0.05)]);
        assert_eq!(r.estimate.stride, 1);
    }

    #[test]
    fn field_errors() {
        let bad = FIG3.replace("distance = 3", "distance = 4");
        assert!(matches!(Recipe::parse(&bad), Err(Error::Config { field, .. }) if field == "code.distance"));
        let bad = FIG3.replace("shots = 10", "shots = 0");
        assert!(matches!(Recipe::parse(&bad), Err(Error::Config { field, .. }) if field == "simulate.shots"));
        let bad = FIG3.replace("locations = \"*\"", "locations = \"d*\"");
        assert!(Recipe::parse(&bad).is_err());
        let bad = FIG3.replace("mode = \"sliding\"", "mode = \"relative\"");
        assert!(Recipe::parse(&bad).is_err());
    }

    #[test]
    fn patterns_override() {
        let text = FIG3.replace(
            "[simulate]",
            "[[noise]]\nlocations = \"d2, a1\"\ng0 = 0.2\n[simulate]",
        );
        let r = Recipe::parse(&text).unwrap();
        let a = r.assignment(None).unwrap();
        assert_eq!(a.get(FaultLocation::Data(1)).unwrap().profile.g0(), 0.2);
        assert_eq!(a.get(FaultLocation::Ancilla(0)).unwrap().profile.g0(), 0.2);
        assert_eq!(a.get(FaultLocation::Data(0)).unwrap().profile.g0(), 0.1);
    }

    #[test]
    fn schedule_strings() {
        let s: ScheduleSpec = "10000:1000:1000".parse().unwrap();
        assert_eq!(s, ScheduleSpec { from: 10000, to: 1000, step: 1000 });
        assert!("10000:1000".parse::<ScheduleSpec>().is_err());
    }
}
