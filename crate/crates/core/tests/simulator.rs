use driftqec::code_models::{build_repetition, build_rotated_surface_x, NoiseModel};
use driftqec::noise::{Component, DriftProfile, NoiseAssignment};
use driftqec::oracles::detector_fire_probability;
use driftqec::sim::{read_detections, run_memory, write_detections, MemoryConfig};

fn drifting(layout: &driftqec::code_models::CodeLayout, model: NoiseModel) -> NoiseAssignment {
    let profile = DriftProfile::new(0.06, vec![Component::with_period(0.03, 400.0, 0.3)]).unwrap();
    let mut a = NoiseAssignment::new();
    for loc in layout.fault_locations(model) {
        a.set(loc, profile.clone());
    }
    a
}

#[test]
fn firing_rates_match_exact_probabilities() {
    for layout in [build_repetition(3).unwrap(), build_rotated_surface_x(3).unwrap()] {
        let noise = drifting(&layout, NoiseModel::Phenomenological);
        let shots = 20_000;
        let (data, _) =
            run_memory(&layout, &noise, NoiseModel::Phenomenological, &MemoryConfig::new(400, shots, 3)).unwrap();
        for cycle in [1usize, 100, 250, 399] {
            for a in 0..layout.detectors_per_cycle() {
                let p = detector_fire_probability(&layout, &noise, a, cycle as u64).unwrap();
                let hits = (0..shots).filter(|&s| data.bit(s, cycle, a)).count() as f64;
                let sigma = (p * (1.0 - p) / shots as f64).sqrt();
                assert!((hits / shots as f64 - p).abs() < 5.0 * sigma, "cycle {cycle} ancilla {a}: {} vs {p}", hits / shots as f64);
            }
        }
    }
}

#[test]
fn thread_count_does_not_change_the_record() {
    let layout = build_repetition(3).unwrap();
    let noise = drifting(&layout, NoiseModel::CircuitLevel);
    let run = |threads| {
        let mut cfg = MemoryConfig::new(300, 777, 9);
        cfg.threads = threads;
        run_memory(&layout, &noise, NoiseModel::CircuitLevel, &cfg).unwrap().0
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn detection_file_round_trip() {
    let layout = build_rotated_surface_x(3).unwrap();
    let noise = drifting(&layout, NoiseModel::Phenomenological);
    let mut cfg = MemoryConfig::new(50, 129, 1);
    cfg.start_cycle = 1234;
    let (data, _) = run_memory(&layout, &noise, NoiseModel::Phenomenological, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.det");
    write_detections(&data, &path).unwrap();
    let back = read_detections(&path).unwrap();
    assert_eq!(back, data);
    assert_eq!(back.meta.start_cycle, 1234);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, bytes).unwrap();
    assert_eq!(read_detections(&path).unwrap_err().exit_code(), 3);
}
