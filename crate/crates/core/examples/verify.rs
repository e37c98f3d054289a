//! Randomized cross-checks of the window moments and the matching decoder against
//! brute-force oracles.

use driftqec::oracles::{check_matching, check_weight_scaling, check_window_moments};

fn main() {
    for c in [check_window_moments(200, 7, 1e-12), check_matching(500, 7), check_weight_scaling(50, 7)] {
        println!("{:18} {:4} instances  {} failures  max error {:.1e}", c.name, c.instances, c.failures, c.max_error);
    }
}
