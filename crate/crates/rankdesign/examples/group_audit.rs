//! Disparate-impact audit: two groups whose scores are scaled by different
//! environment factors compete under one two-level policy.
//!
//! Run with `cargo run --example group_audit`.

use rankdesign::groups::{audit_row, region_table, welfare_gap_derivative, GroupSpec};
use rankdesign::{PopulationSpec, TwoLevelPolicy};

fn main() -> rankdesign::Result<()> {
    let population = PopulationSpec::linear_sqrt_quadratic(1.0);
    let groups = GroupSpec::new(2.0, 1.0)?;
    let capacity = 0.2;

    println!("c     tau_A   tau_B   access   gap@0.25 gap@0.50 gap@0.75");
    for i in 1..8 {
        let c = 0.1 * i as f64;
        let row = audit_row(&population, &groups, &TwoLevelPolicy::new(c, capacity)?)?;
        println!(
            "{:.1}  {:.4}  {:.4}  {:.5}  {:.5}  {:.5}  {:.5}",
            row.c, row.tau_a, row.tau_b, row.access, row.gap_at_q25, row.gap_at_q50, row.gap_at_q75
        );
    }

    println!("\nregions at c = 0.3:");
    for r in region_table(&population, &groups, 0.3)? {
        println!("  {:?}: true ranks [{:.3}, {:.3})", r.region, r.theta_lo, r.theta_hi);
    }

    let d = welfare_gap_derivative(&population, &groups, capacity, 0.3, 0.9)?;
    println!("\nd gap / dc at c = 0.3, true rank 0.9: {:.5}", d.value);
    Ok(())
}
