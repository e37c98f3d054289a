//! Decodes one detection record with the ground-truth, estimated and static DEMs and
//! reports the paired difference of the per-cycle logical error rates.

use driftqec::decoder::{logical_error_rates, paired_difference, relative_delta, DecodeOptions};
use driftqec::estimator::Counts;
use driftqec::experiment::{estimate_dem, Context, Recipe};

const RECIPE: &str = r#"
name = "decode-example"
analysis = "relative"

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
cycles = 10000
shots = 1000
seed = 41

[estimate]
mode = "relative"
window = 2000
"#;

fn main() -> driftqec::Result<()> {
    let recipe = Recipe::parse(RECIPE)?;
    let ctx = Context::new(&recipe, None)?;
    let sim = &recipe.simulate;
    let est_data = ctx.simulate(sim.cycles, sim.shots, sim.seed, 0)?;
    let estimated = estimate_dem(&ctx, &Counts::from_data(&est_data, &ctx.classes)?, &recipe.estimate)?;

    let (start, cycles) = (5000, 100);
    let data = ctx.simulate(cycles, 50_000, 42, start)?;
    let truth = ctx.ground_truth(start, cycles)?;
    let fixed = ctx.static_dem(start, cycles)?;
    let reports = logical_error_rates(&data, &[&truth, &estimated, &fixed], &DecodeOptions::default())?;
    for r in &reports {
        println!("{:?}: eps_L = {:.5e} +- {:.1e}", r.provenance, r.eps_per_cycle, r.eps_sigma);
    }
    for r in &reports[1..] {
        let d = paired_difference(r, &reports[0])?;
        println!(
            "{:?} vs ground truth: Delta = {:+.4}, paired sigma {:.1e}",
            r.provenance,
            relative_delta(r.eps_per_cycle, reports[0].eps_per_cycle)?,
            d.eps_sigma
        );
    }
    Ok(())
}
