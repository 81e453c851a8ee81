//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use rankdesign::cli::sweep_rows;
use rankdesign::design::{find_three_level_improvement, optimize_two_level, three_level_counterexample_check, Objective};
use rankdesign::equilibrium::check_rank_preservation;
use rankdesign::groups::{access, welfare_gap, welfare_gap_derivative, GroupSpec};
use rankdesign::multidim::{
    beta_for_interior_optimum, check_multidim_rank_preservation, weighted_utility_slope, IndexKind, MultiSkillSpec,
    UnmeasurableSpec,
};
use rankdesign::oracle::DiscreteInstance;
use rankdesign::{solve, two_level, welfare, FunctionSpec, PopulationSpec, RewardPolicy, TwoLevelPolicy};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn baseline() -> PopulationSpec {
    PopulationSpec::linear_sqrt_quadratic(2.0)
}

fn linear() -> PopulationSpec {
    PopulationSpec::linear_sqrt_quadratic(1.0)
}

/// Admitted applicants all post `T = ℓ1^{1/4}·f(c)` when `g(0) = 0`, so the
/// private utility of the two-level policy is `ρ·T`.
fn baseline_private(c: f64, rho: f64) -> f64 {
    let l1: f64 = rho / (1.0 - c);
    rho * l1.powf(0.25) * 2.0 * c
}

fn baseline_societal(c: f64, rho: f64) -> f64 {
    2.0 * c * (1.0 - c).powf(0.75) * rho.powf(0.25)
}

fn closed_form_vs_oracle() -> Outcome {
    let start = Instant::now();
    let n = 500;
    let s = solve(&baseline(), &two_level(0.8, 0.2).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let inst = DiscreteInstance::from_schedule(&s, n, 1e-3).map_err(|e| e.to_string())?;
    let eps = 5.0 / n as f64;
    let cert = inst.certify(eps).map_err(|e| e.to_string())?;
    let pri = inst.empirical_welfare().map_err(|e| e.to_string())?.private_utility;
    let secs = start.elapsed().as_secs_f64();
    ensure(cert.certified && cert.worst_gain <= eps, format!("worst gain {} > {eps}", cert.worst_gain))?;
    let want = baseline_private(0.8, 0.2);
    ensure((want - 0.32).abs() < 1e-12, "reference value")?;
    ensure((pri - want).abs() <= 0.01, format!("empirical private utility {pri}"))?;
    ensure(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!("worst_gain={:.3e} private={pri:.5} in {secs:.2}s", cert.worst_gain))
}

fn tradeoff_profile() -> Outcome {
    let rho = 0.2;
    let cs: Vec<f64> = (0..100).map(|i| 0.01 + 0.78 * i as f64 / 99.0).collect();
    let rows = sweep_rows(&baseline(), rho, &cs);
    let mut w = Vec::new();
    let mut soc = Vec::new();
    let mut pri = Vec::new();
    for (row, err) in &rows {
        ensure(err.is_none(), format!("c={} failed: {:?}", row.c, row.error))?;
        w.push(row.applicant_welfare.unwrap());
        soc.push(row.societal_utility.unwrap());
        pri.push(row.private_utility.unwrap());
    }
    for i in 1..cs.len() {
        ensure(w[i] <= w[i - 1] + 1e-9, format!("welfare rises at c={}", cs[i]))?;
        ensure(pri[i] >= pri[i - 1] - 1e-9, format!("private utility falls at c={}", cs[i]))?;
        ensure((soc[i] - baseline_societal(cs[i], rho)).abs() < 1e-7, format!("societal off at c={}", cs[i]))?;
    }
    let argmax = (0..soc.len()).max_by(|&a, &b| soc[a].total_cmp(&soc[b])).unwrap();
    ensure(argmax > 0 && argmax < soc.len() - 1, "societal maximum on the sweep boundary")?;
    let opt = optimize_two_level(&baseline(), rho, Objective::SocietalUtility).map_err(|e| e.to_string())?;
    // Stationarity of 2c(1−c)^{3/4}: 2(1−c) = 3c/2.
    let c_star = 4.0 / 7.0;
    ensure((opt.c - c_star).abs() <= 1e-3, format!("optimum at c={}", opt.c))?;
    ensure((opt.value - 0.40476).abs() <= 1e-3, format!("optimum value {}", opt.value))?;
    ensure((opt.value - baseline_societal(c_star, rho)).abs() <= 1e-6, "optimum value vs closed form")?;
    Ok(format!("c*={:.5} soc*={:.5}", opt.c, opt.value))
}

fn pure_randomization() -> Outcome {
    let rho = 0.2;
    let s = solve(&baseline(), &two_level(0.0, rho).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let w = welfare::applicant_welfare(&s).map_err(|e| e.to_string())?;
    ensure(w == rho, format!("applicant welfare {w}"))?;
    let groups = GroupSpec::new(2.0, 1.0).map_err(|e| e.to_string())?;
    let policy = TwoLevelPolicy::new(0.0, rho).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..2000 {
        let t = i as f64 / 1999.0;
        let gap = welfare_gap(&linear(), &groups, &policy, t).map_err(|e| e.to_string())?;
        worst = worst.max(gap.abs());
    }
    ensure(worst <= 1e-12, format!("largest gap {worst}"))?;
    Ok(format!("welfare={w} max|gap|={worst:e}"))
}

fn band_structure() -> Outcome {
    let policy = RewardPolicy::new(vec![0.0, 0.25, 0.5, 1.0], vec![0.4, 0.6, 0.8], 0.35).map_err(|e| e.to_string())?;
    let s = solve(&baseline(), &policy).map_err(|e| e.to_string())?;
    for k in 1..4 {
        let c = policy.cutpoints[k - 1];
        let below = s.effort_in_band(k - 1, c).map_err(|e| e.to_string())?;
        let above = s.effort_in_band(k, c).map_err(|e| e.to_string())?;
        ensure(above > below, format!("no effort jump at c={c}"))?;
    }
    let n = 10_000;
    let mut prev: Option<(usize, f64, f64)> = None;
    let mut band_max = [f64::NEG_INFINITY; 4];
    let mut band_min = [f64::INFINITY; 4];
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let k = s.band_of(t);
        let e = s.effort_at(t).map_err(|e| e.to_string())?;
        let v = s.score_at(t).map_err(|e| e.to_string())?;
        band_max[k] = band_max[k].max(v);
        band_min[k] = band_min[k].min(v);
        if let Some((pk, pe, _)) = prev {
            if pk == k && k > 0 {
                ensure(e < pe, format!("effort not decreasing in band {k} at {t}"))?;
            }
        }
        prev = Some((k, e, v));
    }
    for k in 1..4 {
        ensure(band_max[k - 1] < band_min[k], format!("bands {} and {k} overlap", k - 1))?;
    }
    let report = check_rank_preservation(&s, n).map_err(|e| e.to_string())?;
    ensure(report.ok(), format!("{} rank violations", report.violations.len()))?;
    Ok(format!("3 jumps, min separation margin {:.4}", report.min_margin))
}

/// Mixed threshold for identity `f` and factors (2, 1): scores below 1 come
/// from both groups, so `F_mix(x) = x/4 + x/2` and the group-B threshold is
/// `4c/3` while that stays below 1.
fn identity_access(c: f64, rho: f64) -> f64 {
    let tau_b = (4.0 * c / 3.0).min(1.0);
    rho / (1.0 - c) * (1.0 - tau_b)
}

fn disparate_impact() -> Outcome {
    let rho = 0.2;
    let groups = GroupSpec::new(2.0, 1.0).map_err(|e| e.to_string())?;
    let acc = |c: f64| -> Result<f64, String> {
        let p = TwoLevelPolicy::new(c, rho).map_err(|e| e.to_string())?;
        access(&linear(), &groups, &p).map_err(|e| e.to_string())
    };
    let a3 = acc(0.3)?;
    let a6 = acc(0.6)?;
    ensure((a3 - 0.171429).abs() <= 1e-6 && (a3 - identity_access(0.3, rho)).abs() <= 1e-9, format!("access(0.3)={a3}"))?;
    ensure((a6 - 0.1).abs() <= 1e-6 && (a6 - identity_access(0.6, rho)).abs() <= 1e-9, format!("access(0.6)={a6}"))?;
    let mut prev = f64::INFINITY;
    for i in 0..20 {
        let c = 0.01 + 0.78 * i as f64 / 19.0;
        let a = acc(c)?;
        ensure(a <= prev + 1e-12, format!("access rises at c={c}"))?;
        prev = a;
    }
    let d = welfare_gap_derivative(&linear(), &groups, rho, 0.3, 0.9).map_err(|e| e.to_string())?;
    ensure(d.value > 0.0, format!("gap derivative {}", d.value))?;
    Ok(format!("access(0.3)={a3:.6} access(0.6)={a6:.6} dgap/dc={:.4}", d.value))
}

fn three_level_improvement() -> Outcome {
    let start = Instant::now();
    let rho = 0.2;
    let pop = PopulationSpec::new(
        FunctionSpec::power(1.0, 8.0),
        FunctionSpec::power(1.0, 0.5),
        FunctionSpec::power(1.0, 2.0),
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let found = find_three_level_improvement(&pop, rho, 20_000, 1)
        .map_err(|e| e.to_string())?
        .ok_or("no improving three-level policy found")?;
    // Non-randomized admission: everyone admitted posts g(ẽ0)·f(1−ρ) with ẽ0 = 1.
    let baseline = rho * 0.8f64.powi(8);
    ensure((found.baseline - baseline).abs() < 1e-9, format!("baseline {}", found.baseline))?;
    ensure(found.private_utility - baseline > 1e-6, format!("improvement {}", found.improvement))?;
    // Midpoint rule over the candidate's schedule as an independent integral.
    let s = solve(&pop, &found.policy).map_err(|e| e.to_string())?;
    let n = 200_000;
    let mut riemann = 0.0;
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        riemann += s.score_at(t).map_err(|e| e.to_string())? * found.policy.reward_at(t).map_err(|e| e.to_string())? / n as f64;
    }
    ensure((riemann - found.private_utility).abs() < 1e-5, format!("midpoint {riemann} vs {}", found.private_utility))?;
    let check = three_level_counterexample_check(&pop, found.x, found.c1, found.c2, rho).map_err(|e| e.to_string())?;
    ensure(check.simplified_holds && check.holds, format!("inequality disagrees: {check:?}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "c1={:.4} c2={:.4} x={:.4} pri={:.6} > {:.6} in {secs:.2}s",
        found.c1, found.c2, found.x, found.private_utility, baseline
    ))
}

fn multidim() -> Outcome {
    let spec = UnmeasurableSpec {
        f: FunctionSpec::identity(),
        g: FunctionSpec::power(1.0, 0.5),
        p: FunctionSpec::power(1.0, 2.0),
        e0: 0.0,
        budget: 2.0,
        capacity: 0.2,
    };
    let w = beta_for_interior_optimum(&spec, 0.4).map_err(|e| e.to_string())?;
    ensure(w.beta > 0.0 && w.beta < 1.0, format!("beta {}", w.beta))?;
    // dE[v^M]/dc = ℓ1^{1/4}·(1 + c/(4(1−c))) for this population.
    let l1: f64 = 0.2 / 0.6;
    let dm = l1.powf(0.25) * (1.0 + 0.4 / (4.0 * 0.6));
    ensure((w.d_measured - dm).abs() < 1e-6, format!("dE[v^M]/dc {} vs {dm}", w.d_measured))?;
    let slope = weighted_utility_slope(&spec, w.beta, 0.4).map_err(|e| e.to_string())?;
    ensure(slope.abs() < 1e-4, format!("slope {slope}"))?;
    let skills = MultiSkillSpec::new(vec![FunctionSpec::identity(), FunctionSpec::identity()], vec![0.5, 0.5], 1.0)
        .map_err(|e| e.to_string())?;
    let policy = two_level(0.8, 0.2).map_err(|e| e.to_string())?;
    let r = check_multidim_rank_preservation(&skills, 500, &policy, 1e-3, 11, IndexKind::Max).map_err(|e| e.to_string())?;
    ensure(r.converged, "multi-skill dynamics did not converge")?;
    ensure(r.violations == 0, format!("{} order violations", r.violations))?;
    Ok(format!("beta={:.5} slope={slope:.2e} violations=0", w.beta))
}

fn suite<S>(
    runner: &mut TestRunner,
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn property_suites() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    suite(
        &mut runner,
        "round trip",
        (common::function_spec(), 0.0f64..1.0, 0.0f64..1.0),
        |(s, u, v)| common::round_trip_and_monotone(&s, u, v),
    )?;
    suite(
        &mut runner,
        "curvature",
        (0.1f64..1.0, 1.01f64..4.0, 0.0f64..5.0, 0.0f64..5.0),
        |(g, p, x, y)| common::curvature(g, p, x, y),
    )?;
    suite(&mut runner, "capacity", common::policy(), |p| common::capacity_identity(&p))?;
    suite(
        &mut runner,
        "indifference",
        (common::power_population(), common::policy()),
        |((pop, _), p)| common::second_price_indifference(&pop, &p),
    )?;
    suite(
        &mut runner,
        "quadrature",
        (common::power_population(), 0.05f64..0.5, 0.05f64..1.0),
        |((pop, params), rho, frac)| common::quadrature_matches_closed_form(&pop, params, frac * (1.0 - rho), rho),
    )?;
    let baseline_params = [2.0, 1.0, 0.5, 1.0, 2.0, 1.0];
    common::quadrature_matches_closed_form(&baseline(), baseline_params, 0.8, 0.2).map_err(|e| e.to_string())?;
    Ok("5 suites x 256 cases".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("closed form vs discrete oracle", closed_form_vs_oracle),
        ("two-level tradeoff sweep", tradeoff_profile),
        ("pure randomization extremes", pure_randomization),
        ("four-level schedule structure", band_structure),
        ("disparate impact", disparate_impact),
        ("three-level improvement", three_level_improvement),
        ("multi-skill extensions", multidim),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
