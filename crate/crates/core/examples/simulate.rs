//! Simulates a drifting d=3 repetition-code memory experiment and compares the
//! measured detector firing rate with the exact single-cycle prediction.

use driftqec::code_models::{build_repetition, NoiseModel};
use driftqec::noise::{Component, DriftProfile, NoiseAssignment};
use driftqec::oracles::detector_fire_probability;
use driftqec::sim::{run_memory, MemoryConfig};

fn main() -> driftqec::Result<()> {
    let layout = build_repetition(3)?;
    let mut noise = NoiseAssignment::new();
    let profile = DriftProfile::new(0.05, vec![Component::with_period(0.03, 2000.0, 0.0)])?;
    for loc in layout.fault_locations(NoiseModel::Phenomenological) {
        noise.set(loc, profile.clone());
    }
    let cfg = MemoryConfig::new(2000, 2000, 11);
    let (data, report) = run_memory(&layout, &noise, NoiseModel::Phenomenological, &cfg)?;
    println!("{} shots x {} cycles x {} detectors, {:?}", data.shots, data.cycles, data.detectors, report);

    let per_cycle = layout.detectors_per_cycle();
    for cycle in [250u64, 500, 1000, 1500] {
        let mut fired = 0usize;
        for s in 0..data.shots {
            fired += (0..per_cycle).filter(|&a| data.bit(s, cycle as usize, a)).count();
        }
        let measured = fired as f64 / (data.shots * per_cycle) as f64;
        let exact: f64 = (0..per_cycle)
            .map(|a| detector_fire_probability(&layout, &noise, a, cycle))
            .sum::<driftqec::Result<f64>>()?
            / per_cycle as f64;
        println!("cycle {cycle:5}: measured {measured:.4}  exact {exact:.4}");
    }
    Ok(())
}
