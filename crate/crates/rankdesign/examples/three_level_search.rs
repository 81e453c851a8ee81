//! Search for a three-level policy that beats non-randomized admission on
//! private utility when skills are heavy tailed.
//!
//! Run with `cargo run --release --example three_level_search`.

use rankdesign::design::{find_three_level_improvement, three_level_counterexample_check};
use rankdesign::{FunctionSpec, PopulationSpec};

fn main() -> rankdesign::Result<()> {
    let capacity = 0.2;
    let population = PopulationSpec::new(
        FunctionSpec::power(1.0, 8.0),
        FunctionSpec::power(1.0, 0.5),
        FunctionSpec::power(1.0, 2.0),
        0.0,
    )?;

    match find_three_level_improvement(&population, capacity, 20_000, 1)? {
        Some(found) => {
            println!(
                "levels {:?} at cutpoints {:?}",
                found.policy.levels, found.policy.cutpoints
            );
            println!(
                "private utility {:.6} vs {:.6} without randomization (+{:.6})",
                found.private_utility, found.baseline, found.improvement
            );
            let check = three_level_counterexample_check(&population, found.x, found.c1, found.c2, capacity)?;
            println!(
                "sufficient inequality: lhs {:.6} > rhs {:.6} is {}",
                check.lhs, check.rhs, check.simplified_holds
            );
        }
        None => println!("no improving three-level policy found"),
    }
    Ok(())
}
