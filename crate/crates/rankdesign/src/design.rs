//! Policy search over the two-level class and three-level improvements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::solve;
use crate::error::{Error, Result};
use crate::policy::{two_level, RewardPolicy};
use crate::primitives::{FunctionSpec, PopulationSpec};
use crate::welfare;

const PROFILE_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-6;
const IMPROVEMENT_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    ApplicantWelfare,
    SocietalUtility,
    PrivateUtility,
}

/// Value of `objective` under the two-level policy with cutpoint `c`.
pub fn objective_value(population: &PopulationSpec, capacity: f64, c: f64, objective: Objective) -> Result<f64> {
    let schedule = solve(population, &two_level(c, capacity)?)?;
    match objective {
        Objective::ApplicantWelfare => welfare::applicant_welfare(&schedule),
        Objective::SocietalUtility => welfare::societal_utility(&schedule),
        Objective::PrivateUtility => welfare::private_utility(&schedule),
    }
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search until
/// the bracket is narrower than `tol`. Returns the best point seen.
pub fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoLevelOptimum {
    pub objective: Objective,
    pub c: f64,
    pub value: f64,
    /// `(c, value)` on the coarse grid over `(0, 1 − ρ]`.
    pub profile: Vec<(f64, f64)>,
}

/// Grid search over `(0, 1 − ρ]` followed by golden-section refinement in the
/// best grid cell. The cell next to zero is closed at `c = 0`, so pure
/// randomization is reachable.
pub fn optimize_two_level(population: &PopulationSpec, capacity: f64, objective: Objective) -> Result<TwoLevelOptimum> {
    population.validate()?;
    if !(capacity > 0.0 && capacity < 1.0) {
        return Err(Error::Capacity(format!("capacity must lie in (0, 1), got {capacity}")));
    }
    let top = 1.0 - capacity;
    let grid: Vec<f64> = (1..=PROFILE_POINTS)
        .map(|i| top * i as f64 / PROFILE_POINTS as f64)
        .collect();
    let values = grid
        .par_iter()
        .map(|&c| objective_value(population, capacity, c, objective))
        .collect::<Result<Vec<f64>>>()?;
    let profile: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();
    let best = (0..grid.len())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]).then(j.cmp(&i)))
        .expect("non-empty grid");

    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = grid.get(best + 1).copied().unwrap_or(top).min(top);
    let eval = |c: f64| objective_value(population, capacity, c, objective);
    let (gc, gv) = golden_section_max(eval, lo, hi, GOLDEN_TOL)?;

    let mut candidates = vec![(grid[best], values[best]), (gc, gv)];
    for c in [lo, hi] {
        candidates.push((c, eval(c)?));
    }
    let (c, value) = candidates
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .expect("candidates");
    Ok(TwoLevelOptimum {
        objective,
        c,
        value,
        profile,
    })
}

/// Both sides of the simplified three-level inequality together with the
/// exact private-utility comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThreeLevelCheck {
    /// Exact comparison: the three-level policy strictly beats the
    /// non-randomized two-level policy.
    pub holds: bool,
    /// `lhs > rhs` in the simplified inequality.
    pub simplified_holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub three_level_utility: f64,
    pub two_level_utility: f64,
}

/// Left and right sides of
/// `x²·f(c1)(c2−c1) + ((1−x)f(c2) + x·f(c1))(1−c2)  >  f(1−ρ)·ρ`.
pub fn simplified_three_level_sides(f: &FunctionSpec, x: f64, c1: f64, c2: f64, capacity: f64) -> Result<(f64, f64)> {
    let (f1, f2) = (f.evaluate(c1)?, f.evaluate(c2)?);
    let lhs = x * x * f1 * (c2 - c1) + ((1.0 - x) * f2 + x * f1) * (1.0 - c2);
    let rhs = f.evaluate(1.0 - capacity)? * capacity;
    Ok((lhs, rhs))
}

/// Smallest `f(c2)` for which the simplified inequality holds.
pub fn three_level_lower_bound(f: &FunctionSpec, x: f64, c1: f64, c2: f64, capacity: f64) -> Result<f64> {
    let f1 = f.evaluate(c1)?;
    let rhs = f.evaluate(1.0 - capacity)? * capacity;
    Ok((rhs - x * x * f1 * (c2 - c1) - x * f1 * (1.0 - c2)) / ((1.0 - x) * (1.0 - c2)))
}

fn non_randomized_private_utility(population: &PopulationSpec, capacity: f64) -> Result<f64> {
    welfare::private_utility(&solve(population, &two_level(1.0 - capacity, capacity)?)?)
}

/// Evaluates the three-level policy `(0, x, 1)` with cutpoints `(c1, c2)`
/// against non-randomized admissions.
pub fn three_level_counterexample_check(
    population: &PopulationSpec,
    x: f64,
    c1: f64,
    c2: f64,
    capacity: f64,
) -> Result<ThreeLevelCheck> {
    if !(0.0 < c1 && c1 <= c2 && c2 < 1.0) {
        return Err(Error::InvalidPolicy(format!("need 0 < c1 <= c2 < 1, got c1 = {c1}, c2 = {c2}")));
    }
    if !(0.0 < x && x < 1.0) {
        return Err(Error::InvalidPolicy(format!("middle level must lie in (0, 1), got {x}")));
    }
    let used = x * (c2 - c1) + (1.0 - c2);
    if (used - capacity).abs() > 1e-9 {
        return Err(Error::Capacity(format!(
            "x(c2 - c1) + (1 - c2) = {used} does not equal capacity {capacity}"
        )));
    }
    let (lhs, rhs) = simplified_three_level_sides(&population.f, x, c1, c2, capacity)?;
    let two = non_randomized_private_utility(population, capacity)?;
    let three = if c2 - c1 < 1e-12 {
        two
    } else {
        let policy = RewardPolicy::new(vec![0.0, x, 1.0], vec![c1, c2], capacity)?;
        welfare::private_utility(&solve(population, &policy)?)?
    };
    Ok(ThreeLevelCheck {
        holds: three > two,
        simplified_holds: lhs > rhs,
        lhs,
        rhs,
        three_level_utility: three,
        two_level_utility: two,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThreeLevelCandidate {
    pub x: f64,
    pub c1: f64,
    pub c2: f64,
    pub policy: RewardPolicy,
    pub private_utility: f64,
    pub baseline: f64,
    pub improvement: f64,
}

/// Middle level forced by capacity for cutpoints `c1 < 1 − ρ < c2`.
pub fn capacity_middle_level(c1: f64, c2: f64, capacity: f64) -> f64 {
    (capacity - (1.0 - c2)) / (c2 - c1)
}

/// Searches `(c1, c2)` with `c1 ∈ (0, 1−ρ)`, `c2 ∈ (1−ρ, 1)` and the
/// capacity-implied middle level. Half the budget goes to a regular grid,
/// half to seeded uniform draws. Returns the best policy if it beats
/// non-randomized admissions by more than 1e-6; ties go to the
/// lexicographically smallest `(c1, c2)`.
pub fn find_three_level_improvement(
    population: &PopulationSpec,
    capacity: f64,
    search_budget: usize,
    seed: u64,
) -> Result<Option<ThreeLevelCandidate>> {
    if search_budget == 0 {
        return Ok(None);
    }
    population.validate()?;
    let split = 1.0 - capacity;
    let side = ((search_budget / 2) as f64).sqrt().floor() as usize;
    let mut points = Vec::with_capacity(search_budget);
    for i in 0..side {
        for j in 0..side {
            let c1 = split * (i as f64 + 0.5) / side as f64;
            let c2 = split + capacity * (j as f64 + 0.5) / side as f64;
            points.push((c1, c2));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while points.len() < search_budget {
        let c1 = split * rng.gen_range(f64::EPSILON..1.0);
        let c2 = split + capacity * rng.gen_range(f64::EPSILON..1.0);
        points.push((c1, c2));
    }

    let baseline = non_randomized_private_utility(population, capacity)?;
    let evaluated: Vec<ThreeLevelCandidate> = points
        .par_iter()
        .filter_map(|&(c1, c2)| {
            let x = capacity_middle_level(c1, c2, capacity);
            let policy = RewardPolicy::new(vec![0.0, x, 1.0], vec![c1, c2], capacity).ok()?;
            let value = welfare::private_utility(&solve(population, &policy).ok()?).ok()?;
            Some(ThreeLevelCandidate {
                x,
                c1,
                c2,
                policy,
                private_utility: value,
                baseline,
                improvement: value - baseline,
            })
        })
        .collect();
    let best = evaluated.into_iter().max_by(|a, b| {
        a.improvement
            .total_cmp(&b.improvement)
            .then(b.c1.total_cmp(&a.c1))
            .then(b.c2.total_cmp(&a.c2))
    });
    Ok(best.filter(|b| b.improvement > IMPROVEMENT_MARGIN))
}
