//! Relative-window estimation (windows W and W+1) of a fast three-frequency drift.

use driftqec::code_models::{build_repetition, derive_edge_classes, ground_truth_edge_series, NoiseModel};
use driftqec::estimator::Counts;
use driftqec::noise::{Component, DriftProfile, NoiseAssignment};
use driftqec::relative::{relative_estimate, Smoothing};
use driftqec::sim::{run_memory, MemoryConfig};

fn main() -> driftqec::Result<()> {
    let layout = build_repetition(3)?;
    let model = NoiseModel::Phenomenological;
    let profile = DriftProfile::new(
        0.06,
        vec![
            Component::with_period(0.02, 3000.0, 0.0),
            Component::with_period(0.025, 2000.0, 0.0),
            Component::with_period(0.015, 1000.0, 0.0),
        ],
    )?;
    let mut noise = NoiseAssignment::new();
    for loc in layout.fault_locations(model) {
        noise.set(loc, profile.clone());
    }
    let classes = derive_edge_classes(&layout, &noise, model)?;
    let (data, _) = run_memory(&layout, &noise, model, &MemoryConfig::new(10_000, 1000, 31))?;
    let counts = Counts::from_data(&data, &classes)?;
    let set = relative_estimate(&counts, &classes, 2000, Some(Smoothing { window: 301, order: 3 }))?;

    for (c, s) in classes.iter().zip(&set.series) {
        let (mut se, mut k) = (0.0, 0usize);
        for (&t, &p) in set.t.iter().zip(&s.p) {
            if p.is_finite() && t + 2 < counts.cycles {
                se += (p - ground_truth_edge_series(&classes, &noise, t as u64)[c.id]).powi(2);
                k += 1;
            }
        }
        println!("{:28} RMSE {:.5} over {k} points", c.label(), (se / k as f64).sqrt());
    }
    Ok(())
}
