//! Sliding-window estimation of a d=3 repetition code with one drift frequency.
//! The fitted amplitude ratio and phase lag of the bulk class follow the Dirichlet kernel.

use std::f64::consts::PI;

use driftqec::code_models::{build_repetition, derive_edge_classes, ground_truth_edge_series, EdgeKind, NoiseModel};
use driftqec::estimator::{dirichlet_signed, fit_sinusoid, sliding_series, window_lag, Counts};
use driftqec::noise::{Component, DriftProfile, NoiseAssignment};
use driftqec::sim::{run_memory, MemoryConfig};

const PERIOD: f64 = 10_000.0;

fn main() -> driftqec::Result<()> {
    let layout = build_repetition(3)?;
    let model = NoiseModel::Phenomenological;
    let profile = DriftProfile::new(0.1, vec![Component::with_period(0.05, PERIOD, 0.0)])?;
    let mut noise = NoiseAssignment::new();
    for loc in layout.fault_locations(model) {
        noise.set(loc, profile.clone());
    }
    let classes = derive_edge_classes(&layout, &noise, model)?;
    let bulk = classes.iter().position(|c| c.kind == EdgeKind::BulkSpace).unwrap();
    let n = 30_000;
    let (data, _) = run_memory(&layout, &noise, model, &MemoryConfig::new(n, 500, 5))?;
    let counts = Counts::from_data(&data, &classes)?;

    let omega = 2.0 * PI / PERIOD;
    let all_t: Vec<f64> = (0..n as u64).map(|t| t as f64).collect();
    let truth: Vec<f64> = (0..n as u64).map(|t| ground_truth_edge_series(&classes, &noise, t)[bulk]).collect();
    let (_, tb, tc) = fit_sinusoid(&all_t, &truth, omega)?;

    for w in [1500, 5000, 12_000] {
        let set = sliding_series(&counts, &classes, w, 10)?;
        let (t, y): (Vec<f64>, Vec<f64>) = set
            .t
            .iter()
            .zip(&set.series[bulk].p)
            .filter(|(_, p)| p.is_finite())
            .map(|(&t, &p)| (t as f64, p))
            .unzip();
        let (_, b, c) = fit_sinusoid(&t, &y, omega)?;
        let ratio = b.hypot(c) / tb.hypot(tc);
        let lag = (tc.atan2(tb) - c.atan2(b)).rem_euclid(2.0 * PI);
        let gain = dirichlet_signed(w, n as f64 / PERIOD, n);
        // a negative kernel value flips the sign of the filtered sinusoid
        let predicted = (omega * window_lag(w) + if gain < 0.0 { PI } else { 0.0 }).rem_euclid(2.0 * PI);
        println!("W={w:6}: ratio {ratio:.3} (kernel {:.3}), lag {lag:.3} rad (predicted {predicted:.3})", gain.abs());
    }
    Ok(())
}
