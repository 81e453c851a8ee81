//! Property checks shared by the proptest suite and the acceptance runner.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rankdesign::{solve, welfare, FunctionSpec, PopulationSpec, RewardPolicy};

pub fn close(a: f64, b: f64, tol: f64) -> std::result::Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    Ok(())
}

/// Any supported family with a strictly increasing shape.
pub fn function_spec() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        (0.2f64..4.0, 0.2f64..4.0).prop_map(|(s, e)| FunctionSpec::power(s, e)),
        (0.2f64..4.0, 0.2f64..4.0, -2.0f64..2.0).prop_map(|(s, e, o)| FunctionSpec::affine_power(s, e, o)),
        proptest::collection::vec((0.05f64..1.0, 0.05f64..1.0), 1..6).prop_map(|steps| {
            let mut knots = vec![(0.0, 0.0)];
            for (dx, dy) in steps {
                let (x, y) = *knots.last().unwrap();
                knots.push((x + dx, y + dy));
            }
            FunctionSpec::piecewise(knots)
        }),
    ]
}

/// Inverse undoes evaluation and evaluation is strictly increasing.
pub fn round_trip_and_monotone(spec: &FunctionSpec, u: f64, v: f64) -> std::result::Result<(), TestCaseError> {
    let (lo, hi) = spec.domain();
    let hi = if hi.is_finite() { hi } else { lo + 10.0 };
    let x = lo + (hi - lo) * u.min(v);
    let y = lo + (hi - lo) * u.max(v);
    let fx = spec.evaluate(x).unwrap();
    let back = spec.invert(fx).unwrap();
    close(spec.evaluate(back).unwrap(), fx, 1e-12 * fx.abs().max(1.0))?;
    close(back, x, 1e-7 * x.abs().max(1.0))?;
    if y - x > 1e-9 {
        prop_assert!(spec.evaluate(y).unwrap() > fx);
    }
    Ok(())
}

/// Transfer functions are midpoint concave and costs midpoint convex.
pub fn curvature(g_exp: f64, p_exp: f64, x: f64, y: f64) -> std::result::Result<(), TestCaseError> {
    let g = FunctionSpec::power(1.0, g_exp);
    let p = FunctionSpec::power(1.0, p_exp);
    let m = 0.5 * (x + y);
    prop_assert!(g.evaluate(m).unwrap() >= 0.5 * (g.evaluate(x).unwrap() + g.evaluate(y).unwrap()) - 1e-12);
    prop_assert!(p.evaluate(m).unwrap() <= 0.5 * (p.evaluate(x).unwrap() + p.evaluate(y).unwrap()) + 1e-12);
    Ok(())
}

/// A valid K-level policy: sorted levels and cutpoints, capacity set to the
/// expected reward.
pub fn policy() -> impl Strategy<Value = RewardPolicy> {
    (1usize..5)
        .prop_flat_map(|k| {
            (
                proptest::collection::vec(0.0f64..1.0, k),
                proptest::collection::vec(0.05f64..1.0, k),
            )
        })
        .prop_filter_map("degenerate policy", |(mut levels, widths)| {
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            if levels.len() != widths.len() {
                return None;
            }
            let total: f64 = widths.iter().sum();
            let mut cut = 0.0;
            let mut cutpoints = Vec::new();
            for w in &widths[..widths.len() - 1] {
                cut += w / total;
                cutpoints.push(cut);
            }
            let mut capacity = 0.0;
            let mut lo = 0.0;
            for (k, l) in levels.iter().enumerate() {
                let hi = cutpoints.get(k).copied().unwrap_or(1.0);
                capacity += l * (hi - lo);
                lo = hi;
            }
            if !(capacity > 1e-3 && capacity < 1.0 - 1e-3) {
                return None;
            }
            RewardPolicy::new(levels, cutpoints, capacity).ok()
        })
}

pub fn capacity_identity(policy: &RewardPolicy) -> std::result::Result<(), TestCaseError> {
    prop_assert!(policy.validate().is_empty());
    close(policy.expected_reward(), policy.capacity, 1e-12)?;
    let manual: f64 = (0..policy.num_bands())
        .map(|k| {
            let (lo, hi) = policy.band_interval(k);
            policy.levels[k] * (hi - lo)
        })
        .sum();
    close(manual, policy.capacity, 1e-12)
}

/// A power-family population with `e0 = 0`.
pub fn power_population() -> impl Strategy<Value = (PopulationSpec, [f64; 6])> {
    (0.5f64..3.0, 0.5f64..3.0, 0.3f64..1.0, 0.5f64..2.0, 1.2f64..3.0, 0.5f64..2.0).prop_map(
        |(fa, falpha, gexp, gscale, pexp, pscale)| {
            let pop = PopulationSpec::new(
                FunctionSpec::power(fa, falpha),
                FunctionSpec::power(gscale, gexp),
                FunctionSpec::power(pscale, pexp),
                0.0,
            )
            .unwrap();
            (pop, [fa, falpha, gexp, gscale, pexp, pscale])
        },
    )
}

/// The marginal agent at each cutpoint is indifferent between its own band
/// and matching the entry score of the band above.
pub fn second_price_indifference(pop: &PopulationSpec, policy: &RewardPolicy) -> std::result::Result<(), TestCaseError> {
    let s = solve(pop, policy).unwrap();
    for k in 1..s.bands.len() {
        let c = s.bands[k].lo;
        let below = s.effort_in_band(k - 1, c).unwrap();
        let stay = policy.levels[k - 1] - pop.p(below).unwrap();
        let tilde = s.bands[k].threshold_effort.unwrap();
        let climb = policy.levels[k] - pop.p(tilde).unwrap();
        close(stay, climb, 1e-10)?;
        close(pop.g(tilde).unwrap() * pop.f(c).unwrap(), s.bands[k].threshold_score.unwrap(), 1e-12)?;
    }
    Ok(())
}

/// Two-level welfare functionals in closed form for power families with
/// `e0 = 0`, derived independently of the solver.
pub fn power_two_level_closed_form(params: [f64; 6], c: f64, rho: f64) -> (f64, f64, f64) {
    let [fa, falpha, gexp, gscale, pexp, pscale] = params;
    let l1 = rho / (1.0 - c);
    let e_tilde = (l1 / pscale).powf(1.0 / pexp);
    let t = gscale * e_tilde.powf(gexp) * fa * c.powf(falpha);
    // Band-1 effort is ẽ·(c/θ)^(α/γ); its cost integrates to ℓ1·(c^m − c)/(1 − m).
    let m = falpha * pexp / gexp;
    let cost = if (m - 1.0).abs() < 1e-9 {
        -l1 * c * c.ln()
    } else {
        l1 * (c.powf(m) - c) / (1.0 - m)
    };
    (rho - cost, t * (1.0 - c), rho * t)
}

pub fn quadrature_matches_closed_form(
    pop: &PopulationSpec,
    params: [f64; 6],
    c: f64,
    rho: f64,
) -> std::result::Result<(), TestCaseError> {
    let policy = rankdesign::two_level(c, rho).unwrap();
    let r = welfare::evaluate(&solve(pop, &policy).unwrap()).unwrap();
    let (w, soc, pri) = power_two_level_closed_form(params, c, rho);
    close(r.applicant_welfare, w, 1e-7)?;
    close(r.societal_utility, soc, 1e-7)?;
    close(r.private_utility, pri, 1e-7)
}
