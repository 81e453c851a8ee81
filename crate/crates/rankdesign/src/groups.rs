//! Two groups with different environment factors.
//!
//! An applicant of group `G` with latent rank `θ_true` has scaled skill
//! `f(θ_true)·γ_G`. Ranks are taken in the mixed population, whose scaled
//! skill CDF is
//!
//! ```text
//! f_mix⁻¹(x) = ½·f⁻¹(x/γ_A) + ½·f⁻¹(x/γ_B)
//! ```
//!
//! with `f⁻¹` clamped to `[0, 1]`. Everything here concerns two-level
//! policies with `g(e0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::TwoLevelPolicy;
use crate::primitives::{Family, FunctionSpec, PopulationSpec};

/// Share of group A in the population. Only equal shares are supported.
pub const GROUP_SHARE: f64 = 0.5;
/// Finite-difference step for the welfare-gap derivative.
pub const GAP_DERIVATIVE_STEP: f64 = 1e-5;

fn default_share() -> f64 {
    GROUP_SHARE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub gamma_a: f64,
    pub gamma_b: f64,
    #[serde(default = "default_share")]
    pub group_share: f64,
}

impl GroupSpec {
    pub fn new(gamma_a: f64, gamma_b: f64) -> Result<Self> {
        let spec = Self {
            gamma_a,
            gamma_b,
            group_share: GROUP_SHARE,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Requires positive finite factors with `γ_A ≥ γ_B`. Equality is the
    /// symmetric case and is accepted.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma_a", self.gamma_a), ("gamma_b", self.gamma_b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.gamma_a < self.gamma_b {
            return Err(Error::Config(format!(
                "group A must have the larger environment factor, got gamma_a = {} < gamma_b = {}",
                self.gamma_a, self.gamma_b
            )));
        }
        if self.group_share != GROUP_SHARE {
            return Err(Error::Config(format!(
                "only group_share = {GROUP_SHARE} is supported, got {}",
                self.group_share
            )));
        }
        Ok(())
    }

    pub fn gamma(&self, group: Group) -> f64 {
        match group {
            Group::A => self.gamma_a,
            Group::B => self.gamma_b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

/// Position of `θ_true` relative to the two group thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Below `τ^A`: nobody admitted.
    Low,
    /// `[τ^A, τ^B)`: only group A admitted.
    Middle,
    /// From `τ^B`: both groups admitted.
    High,
}

/// `f⁻¹` extended as a CDF: 0 below `f(0)`, 1 above `f(1)`.
fn clamped_inverse(f: &FunctionSpec, y: f64) -> Result<f64> {
    let (f0, f1) = (f.evaluate(0.0)?, f.evaluate(1.0)?);
    if y <= f0 {
        Ok(0.0)
    } else if y >= f1 {
        Ok(1.0)
    } else {
        Ok(f.invert(y)?.clamp(0.0, 1.0))
    }
}

pub fn f_mix_inverse(population: &PopulationSpec, groups: &GroupSpec, x: f64) -> Result<f64> {
    let f = &population.f;
    Ok(GROUP_SHARE * clamped_inverse(f, x / groups.gamma_a)?
        + (1.0 - GROUP_SHARE) * clamped_inverse(f, x / groups.gamma_b)?)
}

/// Scaled-skill quantile of the mixed population: the smallest `x` with
/// `f_mix⁻¹(x) ≥ q`, found by bisection on `[0, f(1)·γ_A]`.
pub fn f_mix(population: &PopulationSpec, groups: &GroupSpec, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain {
            what: "q",
            value: q,
            domain: "[0, 1]".into(),
        });
    }
    let (mut lo, mut hi) = (0.0, population.f(1.0)? * groups.gamma_a);
    if q <= 0.0 {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_mix_inverse(population, groups, mid)? >= q {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(hi)
}

/// Rank in the mixed population of a group-`group` applicant at `θ_true`.
pub fn pre_rank(population: &PopulationSpec, groups: &GroupSpec, theta_true: f64, group: Group) -> Result<f64> {
    let scaled = population.f(theta_true)? * groups.gamma(group);
    f_mix_inverse(population, groups, scaled)
}

/// `(τ^A, τ^B)`: latent rank each group needs to reach mixed rank `c`.
pub fn group_thresholds(population: &PopulationSpec, groups: &GroupSpec, c: f64) -> Result<(f64, f64)> {
    let m = f_mix(population, groups, c)?;
    Ok((
        clamped_inverse(&population.f, m / groups.gamma_a)?,
        clamped_inverse(&population.f, m / groups.gamma_b)?,
    ))
}

pub fn region(population: &PopulationSpec, groups: &GroupSpec, c: f64, theta_true: f64) -> Result<Region> {
    let (ta, tb) = group_thresholds(population, groups, c)?;
    Ok(if theta_true >= tb {
        Region::High
    } else if theta_true >= ta {
        Region::Middle
    } else {
        Region::Low
    })
}

fn require_zero_baseline(population: &PopulationSpec) -> Result<()> {
    let g0 = population.g_e0();
    if g0 != 0.0 {
        return Err(Error::Assumption(format!("group analysis needs g(e0) = 0, got {g0}")));
    }
    Ok(())
}

/// Equilibrium welfare `λ − p(e)` of a group member at `θ_true`.
pub fn group_welfare(
    population: &PopulationSpec,
    groups: &GroupSpec,
    policy: &TwoLevelPolicy,
    theta_true: f64,
    group: Group,
) -> Result<f64> {
    require_zero_baseline(population)?;
    if policy.is_pure_randomization() {
        return Ok(policy.capacity - population.p(population.e0)?);
    }
    let c = policy.c;
    let (ta, tb) = group_thresholds(population, groups, c)?;
    let tau = match group {
        Group::A => ta,
        Group::B => tb,
    };
    if theta_true < tau {
        return Ok(-population.p(population.e0)?);
    }
    let level = policy.level1();
    let threshold_effort = population.p.invert(population.p(population.e0)? + level)?;
    let skill = population.f(theta_true)? * groups.gamma(group);
    let needed = population.g(threshold_effort)? * f_mix(population, groups, c)? / skill;
    let effort = population.g.invert(needed)?.max(population.e0);
    Ok(level - population.p(effort)?)
}

/// `𝒢(θ_true) = 𝒲^A(θ_true) − 𝒲^B(θ_true)`.
pub fn welfare_gap(population: &PopulationSpec, groups: &GroupSpec, policy: &TwoLevelPolicy, theta_true: f64) -> Result<f64> {
    Ok(group_welfare(population, groups, policy, theta_true, Group::A)?
        - group_welfare(population, groups, policy, theta_true, Group::B)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapDerivative {
    /// Central difference with step `h`.
    pub value: f64,
    /// Central difference with step `h/2`.
    pub half_step: f64,
    /// Richardson extrapolation of the two.
    pub richardson: f64,
    /// `|value − half_step|`, an estimate of the truncation error.
    pub truncation_estimate: f64,
}

/// `∂𝒢(θ_true)/∂c` by central differences.
///
/// `θ_true` must lie in the High region at `c` and at both evaluation points,
/// which in particular requires the High region to be non-empty.
pub fn welfare_gap_derivative(
    population: &PopulationSpec,
    groups: &GroupSpec,
    capacity: f64,
    c: f64,
    theta_true: f64,
) -> Result<GapDerivative> {
    let h = GAP_DERIVATIVE_STEP;
    if c - h <= 0.0 || c + h > 1.0 - capacity {
        return Err(Error::Region(format!(
            "c ± h = [{}, {}] must stay inside (0, {}]",
            c - h,
            c + h,
            1.0 - capacity
        )));
    }
    for at in [c - h, c, c + h] {
        let r = region(population, groups, at, theta_true)?;
        if r != Region::High {
            let (_, tb) = group_thresholds(population, groups, at)?;
            return Err(Error::Region(format!(
                "theta_true = {theta_true} is in the {r:?} region at c = {at} (tau_B = {tb})"
            )));
        }
    }
    let gap = |cc: f64| welfare_gap(population, groups, &TwoLevelPolicy::new(cc, capacity)?, theta_true);
    let central = |step: f64| -> Result<f64> { Ok((gap(c + step)? - gap(c - step)?) / (2.0 * step)) };
    let value = central(h)?;
    let half_step = central(0.5 * h)?;
    Ok(GapDerivative {
        value,
        half_step,
        richardson: (4.0 * half_step - value) / 3.0,
        truncation_estimate: (value - half_step).abs(),
    })
}

/// Admission probability of group B, `ℓ_1·(1 − τ^B(c))`; `ρ` without a cutpoint.
pub fn access(population: &PopulationSpec, groups: &GroupSpec, policy: &TwoLevelPolicy) -> Result<f64> {
    if policy.is_pure_randomization() {
        return Ok(policy.capacity);
    }
    let (_, tb) = group_thresholds(population, groups, policy.c)?;
    Ok(policy.level1() * (1.0 - tb))
}

/// Whether `f⁻¹` is convex on the image of `[0, 1]`, i.e. `f` is concave.
pub fn f_inverse_is_convex(f: &FunctionSpec) -> bool {
    match &f.family {
        Family::Power { exponent, .. } | Family::AffinePower { exponent, .. } => *exponent <= 1.0,
        Family::PiecewiseMonotone { knots } => knots
            .windows(3)
            .all(|w| (w[2].1 - w[1].1) / (w[2].0 - w[1].0) <= (w[1].1 - w[0].1) / (w[1].0 - w[0].0)),
    }
}

/// One row of the region table for a fixed cutpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionRow {
    pub region: Region,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub admitted_a: bool,
    pub admitted_b: bool,
    pub gap_positive: bool,
}

pub fn region_table(population: &PopulationSpec, groups: &GroupSpec, c: f64) -> Result<Vec<RegionRow>> {
    let (ta, tb) = group_thresholds(population, groups, c)?;
    Ok(vec![
        RegionRow {
            region: Region::Low,
            theta_lo: 0.0,
            theta_hi: ta,
            admitted_a: false,
            admitted_b: false,
            gap_positive: false,
        },
        RegionRow {
            region: Region::Middle,
            theta_lo: ta,
            theta_hi: tb,
            admitted_a: true,
            admitted_b: false,
            gap_positive: ta < tb,
        },
        RegionRow {
            region: Region::High,
            theta_lo: tb,
            theta_hi: 1.0,
            admitted_a: true,
            admitted_b: true,
            gap_positive: ta < tb,
        },
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub c: f64,
    pub tau_a: f64,
    pub tau_b: f64,
    pub access: f64,
    pub gap_at_q25: f64,
    pub gap_at_q50: f64,
    pub gap_at_q75: f64,
}

pub fn audit_row(population: &PopulationSpec, groups: &GroupSpec, policy: &TwoLevelPolicy) -> Result<AuditRow> {
    let (tau_a, tau_b) = if policy.is_pure_randomization() {
        (0.0, 0.0)
    } else {
        group_thresholds(population, groups, policy.c)?
    };
    let gap = |q| welfare_gap(population, groups, policy, q);
    Ok(AuditRow {
        c: policy.c,
        tau_a,
        tau_b,
        access: access(population, groups, policy)?,
        gap_at_q25: gap(0.25)?,
        gap_at_q50: gap(0.5)?,
        gap_at_q75: gap(0.75)?,
    })
}
