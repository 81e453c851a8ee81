//! Best two-level cutpoint for each objective.
//!
//! Run with `cargo run --release --example optimize_policy`.

use rankdesign::design::{optimize_two_level, Objective};
use rankdesign::PopulationSpec;

fn main() -> rankdesign::Result<()> {
    let population = PopulationSpec::linear_sqrt_quadratic(2.0);
    let capacity = 0.2;
    for objective in [Objective::ApplicantWelfare, Objective::SocietalUtility, Objective::PrivateUtility] {
        let best = optimize_two_level(&population, capacity, objective)?;
        println!("{objective:?}: c = {:.5}, value = {:.5}", best.c, best.value);
    }
    println!("(the societal optimum sits at c = 4/7 = {:.5})", 4.0 / 7.0);
    Ok(())
}
