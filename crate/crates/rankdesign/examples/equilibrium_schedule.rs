//! Closed-form equilibrium for a four-level reward function.
//!
//! Run with `cargo run --example equilibrium_schedule`.

use rankdesign::equilibrium::check_rank_preservation;
use rankdesign::{solve, PopulationSpec, RewardPolicy};

fn main() -> rankdesign::Result<()> {
    let population = PopulationSpec::linear_sqrt_quadratic(2.0);
    let policy = RewardPolicy::new(vec![0.0, 0.25, 0.5, 1.0], vec![0.4, 0.6, 0.8], 0.35)?;
    let schedule = solve(&population, &policy)?;

    for band in &schedule.bands {
        match (band.threshold_effort, band.threshold_score) {
            (Some(e), Some(t)) => println!(
                "band {} [{:.2}, {:.2}) level {:.2}: threshold effort {e:.4}, entry score {t:.4}",
                band.k, band.lo, band.hi, band.level
            ),
            _ => println!("band {} [{:.2}, {:.2}) level {:.2}: minimum effort", band.k, band.lo, band.hi, band.level),
        }
    }

    println!("\ntheta  band  effort  score");
    for row in schedule.sample(21)? {
        println!("{:.3}  {:>4}  {:.4}  {:.4}", row.theta, row.band, row.effort, row.score);
    }

    let report = check_rank_preservation(&schedule, 10_000)?;
    println!(
        "\nrank preservation on {} points: {} violations, smallest margin {:.4}",
        report.grid_size,
        report.violations.len(),
        report.min_margin
    );
    Ok(())
}
