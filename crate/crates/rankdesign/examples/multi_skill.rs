//! Multi-skill ranking: index-based rank preservation and the weight on a
//! measurable skill that makes a cutpoint optimal.
//!
//! Run with `cargo run --release --example multi_skill`.

use rankdesign::multidim::{
    beta_for_interior_optimum, check_multidim_rank_preservation, pre_index, weighted_utility_slope, IndexKind,
    MultiSkillSpec, UnmeasurableSpec,
};
use rankdesign::{two_level, FunctionSpec};

fn main() -> rankdesign::Result<()> {
    let skills = MultiSkillSpec::new(vec![FunctionSpec::identity(), FunctionSpec::identity()], vec![0.5, 0.5], 1.0)?;
    let (v, skill) = pre_index(&skills, &[0.6, 0.8])?;
    println!("ranks (0.6, 0.8): index {v:.3}, all effort on skill {skill}");

    let policy = two_level(0.8, 0.2)?;
    for kind in [IndexKind::Max, IndexKind::Min] {
        let report = check_multidim_rank_preservation(&skills, 500, &policy, 1e-3, 11, kind)?;
        println!(
            "oracle ranking on {kind:?} index: converged {} after {} sweeps, {} order violations",
            report.converged, report.rounds, report.violations
        );
    }

    let spec = UnmeasurableSpec {
        f: FunctionSpec::identity(),
        g: FunctionSpec::power(1.0, 0.5),
        p: FunctionSpec::power(1.0, 2.0),
        e0: 0.0,
        budget: 2.0,
        capacity: 0.2,
    };
    for c in [0.2, 0.4, 0.6] {
        let w = beta_for_interior_optimum(&spec, c)?;
        let slope = weighted_utility_slope(&spec, w.beta, c)?;
        println!("c = {c:.1}: beta = {:.5}, weighted utility slope {slope:.2e}", w.beta);
    }
    Ok(())
}
