//! Check the closed form against a population of discrete agents.
//!
//! Run with `cargo run --release --example oracle_certify`.

use rankdesign::oracle::{best_response_dynamics, default_epsilon, DeviationRule, DiscreteInstance, EffortGrid};
use rankdesign::{solve, two_level, welfare, PopulationSpec};

fn main() -> rankdesign::Result<()> {
    let population = PopulationSpec::linear_sqrt_quadratic(2.0);
    let policy = two_level(0.8, 0.2)?;
    let schedule = solve(&population, &policy)?;

    let n = 500;
    let seeded = DiscreteInstance::from_schedule(&schedule, n, 1e-3)?;
    let cert = seeded.certify(default_epsilon(n))?;
    println!(
        "closed form with {n} agents: certified {} (worst gain {:.2e}, agent {})",
        cert.certified, cert.worst_gain, cert.worst_agent
    );
    let empirical = seeded.empirical_welfare()?;
    let exact = welfare::evaluate(&schedule)?;
    println!(
        "private utility: discrete {:.5}, continuum {:.5}",
        empirical.private_utility, exact.private_utility
    );

    let resort = seeded.clone().with_rule(DeviationRule::Resort).certify(default_epsilon(n))?;
    println!(
        "plain re-sorting rule: certified {} (worst gain {:.3} from dropping into the score gap)",
        resort.certified, resort.worst_gain
    );

    let n = 200;
    let grid = EffortGrid::for_population(&population, &policy, 1e-3)?;
    let start = DiscreteInstance::new(&population, &policy, n, grid)?;
    let out = best_response_dynamics(&start, 2_000, 1e-9)?;
    let mut worst: f64 = 0.0;
    for (e, t) in out.instance.efforts.iter().zip(&out.instance.ranks) {
        worst = worst.max((e - schedule.effort_at(*t)?).abs());
    }
    println!(
        "dynamics from minimum effort ({n} agents): converged {} in {} sweeps, max effort gap {worst:.4}",
        out.converged, out.rounds
    );
    Ok(())
}
