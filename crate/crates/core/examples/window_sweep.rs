//! Sweeps the sliding window size and reports |Delta| of each estimated DEM against the
//! ground truth, all decoded on the same detection record.

use driftqec::experiment::{run_recipe, Outcome, Recipe, RunOptions};

const RECIPE: &str = r#"
name = "sweep-example"
analysis = "window_sweep"

[code]
family = "repetition"
distance = 3
model = "phenomenological"

[[noise]]
locations = "d1"
g0 = 0.03
components = [{ amplitude = 0.02, period = 10000 }]

[[noise]]
locations = "d2"
g0 = 0.03
components = [{ amplitude = 0.02, period = 6000, phase = 1.0 }]

[[noise]]
locations = "d3"
g0 = 0.03
components = [{ amplitude = 0.02, period = 8000, phase = 2.0 }]

[[noise]]
locations = "a*"
g0 = 0.03
components = [{ amplitude = 0.02, period = 7000, phase = 3.0 }]

[simulate]
cycles = 20000
shots = 500
seed = 51

[estimate]
mode = "sliding"
stride = 1

[decode]
cycles = 200
shots = 20000
start_cycle = 10000
seed = 52

[sweep]
windows = [500, 1000, 1500, 2500, 4000]
"#;

fn main() -> driftqec::Result<()> {
    let summary = run_recipe(&Recipe::parse(RECIPE)?, &RunOptions::default(), None)?;
    if let Outcome::WindowSweep(s) = summary.outcome {
        for row in &s.rows {
            println!("W={:5}: |Delta| = {:.2e}", row.window, row.abs_delta);
        }
        println!("best window {}", s.best_window);
    }
    Ok(())
}
