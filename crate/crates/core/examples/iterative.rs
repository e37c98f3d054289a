//! Iterative sliding-window decomposition of a two-frequency drift into Fourier bins.

use driftqec::code_models::{build_repetition, derive_edge_classes, ground_truth_edge_series, EdgeKind, NoiseModel};
use driftqec::estimator::Counts;
use driftqec::iterative::{decompose, reconstruct, WindowSchedule};
use driftqec::noise::{Component, DriftProfile, NoiseAssignment};
use driftqec::sim::{run_memory, MemoryConfig};

fn main() -> driftqec::Result<()> {
    let n = 10_000;
    let layout = build_repetition(3)?;
    let model = NoiseModel::Phenomenological;
    let profile = DriftProfile::new(
        0.06,
        vec![Component::with_period(0.02, 10_000.0, 0.0), Component::with_period(0.025, 5_000.0, 0.0)],
    )?;
    let mut noise = NoiseAssignment::new();
    for loc in layout.fault_locations(model) {
        noise.set(loc, profile.clone());
    }
    let classes = derive_edge_classes(&layout, &noise, model)?;
    let (data, _) = run_memory(&layout, &noise, model, &MemoryConfig::new(n, 1000, 21))?;
    let counts = Counts::from_data(&data, &classes)?;

    let schedule = WindowSchedule::linear(10_000, 1_000, 1_000, 0.22)?.with_min_span(0.6)?;
    let fourier = decompose(&counts, &classes, &schedule, n, 1)?;
    for s in &fourier.steps {
        println!("W={:6} m_c={} {:?}", s.window, s.cutoff, s.action);
    }

    let bulk = classes.iter().position(|c| c.kind == EdgeKind::BulkSpace).unwrap();
    let m = &fourier.classes[bulk];
    println!("bulk class: dc {:.4}, |bin 1| {:.4}, |bin 2| {:.4}", m.dc, m.amplitude(1), m.amplitude(2));
    let t: Vec<f64> = (0..n).step_by(1000).map(|x| x as f64).collect();
    for (x, r) in t.iter().zip(reconstruct(m, &t, n)) {
        println!("t={x:6}: model {r:.4}  truth {:.4}", ground_truth_edge_series(&classes, &noise, *x as u64)[bulk]);
    }
    Ok(())
}
