//! Function families beyond pure powers: a piecewise-linear skill quantile
//! and a transfer with positive baseline, which creates switch points where
//! strong applicants stop exerting extra effort.
//!
//! Run with `cargo run --example custom_functions`.

use rankdesign::{solve, two_level, welfare, FunctionSpec, PopulationSpec};

fn main() -> rankdesign::Result<()> {
    let f = FunctionSpec::piecewise(vec![(0.0, 0.0), (0.5, 0.5), (0.9, 1.0), (1.0, 3.0)]);
    let g = FunctionSpec::affine_power(1.0, 0.5, 1.0);
    let p = FunctionSpec::power(1.0, 2.0);
    let population = PopulationSpec::new(f, g, p, 0.0)?;

    let schedule = solve(&population, &two_level(0.5, 0.2)?)?;
    let top = &schedule.bands[1];
    println!(
        "entry score {:.4}; switch point {:?}",
        top.threshold_score.unwrap_or(f64::NAN),
        top.switch_point
    );
    for row in schedule.sample(11)? {
        println!("theta {:.3}: effort {:.4}, score {:.4}", row.theta, row.effort, row.score);
    }
    let report = welfare::evaluate(&schedule)?;
    println!(
        "welfare {:.5}, societal {:.5}, private {:.5}",
        report.applicant_welfare, report.societal_utility, report.private_utility
    );
    let d = population.f.derivative(0.7)?;
    println!("f'(0.7) = {:.4} (approximate: {})", d.value, d.approximate);
    Ok(())
}
