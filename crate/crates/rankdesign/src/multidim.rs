//! Multi-skill extensions.
//!
//! With `m` skills, linear transfer `g(e) = h·e` and announced weights `α`,
//! an applicant puts all effort on the skill maximizing `α_i f_i(θ_i)`, so
//! their combined score is `h·e·v_pre` with pre-effort index
//! `v_pre = max_i α_i f_i(θ_i)`. The multi-skill game is therefore the
//! single-skill discrete game with skill factor `v_pre`, which is how
//! [`check_multidim_rank_preservation`] runs it.
//!
//! The second half covers a measurable skill `M` and an unmeasurable skill
//! `U` sharing one effort budget `B`: whatever effort is not spent on `M`
//! goes to `U`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{best_response_dynamics, DiscreteInstance, EffortGrid};
use crate::policy::RewardPolicy;
use crate::primitives::FunctionSpec;
use crate::quadrature::integrate;

/// Finite-difference step for derivatives in `c`.
pub const C_DERIVATIVE_STEP: f64 = 1e-5;

/// Quadrature tolerance for quantities that get differenced in `c`.
const TIGHT_TOL: f64 = 1e-12;

fn default_cost() -> FunctionSpec {
    FunctionSpec::power(1.0, 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSkillSpec {
    pub quantiles: Vec<FunctionSpec>,
    pub weights: Vec<f64>,
    pub transfer_slope: f64,
    /// Cost of total effort. Minimum effort is 0.
    #[serde(default = "default_cost")]
    pub cost: FunctionSpec,
}

impl MultiSkillSpec {
    pub fn new(quantiles: Vec<FunctionSpec>, weights: Vec<f64>, transfer_slope: f64) -> Result<Self> {
        let spec = Self {
            quantiles,
            weights,
            transfer_slope,
            cost: default_cost(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles.is_empty() || self.quantiles.len() != self.weights.len() {
            return Err(Error::InvalidFunction(format!(
                "{} quantile functions but {} weights",
                self.quantiles.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights {:?} are not on the simplex", self.weights)));
        }
        if !(self.transfer_slope.is_finite() && self.transfer_slope > 0.0) {
            return Err(Error::Config(format!("transfer slope must be positive, got {}", self.transfer_slope)));
        }
        for f in &self.quantiles {
            f.validate()?;
        }
        self.cost.validate()?;
        if self.cost.evaluate(0.0)? != 0.0 {
            return Err(Error::InvalidFunction("cost must vanish at zero effort".into()));
        }
        Ok(())
    }

    pub fn num_skills(&self) -> usize {
        self.quantiles.len()
    }
}

/// `max_i α_i f_i(θ_i)` and the maximizing skill (0-based, lowest on ties).
pub fn pre_index(spec: &MultiSkillSpec, ranks: &[f64]) -> Result<(f64, usize)> {
    combined_index(spec, ranks, IndexKind::Max)
}

/// How per-skill values combine into the index the oracle ranks on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    /// The index applicants actually optimize.
    #[default]
    Max,
    /// A deliberately wrong index, for negative controls.
    Min,
}

fn combined_index(spec: &MultiSkillSpec, ranks: &[f64], kind: IndexKind) -> Result<(f64, usize)> {
    if ranks.len() != spec.num_skills() {
        return Err(Error::Config(format!("expected {} ranks, got {}", spec.num_skills(), ranks.len())));
    }
    let mut best = (0.0, 0);
    for (i, (&t, f)) in ranks.iter().zip(&spec.quantiles).enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                what: "rank",
                value: t,
                domain: "[0, 1]".into(),
            });
        }
        let v = spec.weights[i] * f.evaluate(t)?;
        let better = match kind {
            IndexKind::Max => v > best.0,
            IndexKind::Min => v < best.0,
        };
        if i == 0 || better {
            best = (v, i);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultiAgentRow {
    pub agent: usize,
    pub v_pre: f64,
    pub reward_band: usize,
    pub violation_flag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiRankReport {
    pub converged: bool,
    pub rounds: usize,
    pub violations: usize,
    pub rows: Vec<MultiAgentRow>,
}

impl MultiRankReport {
    pub fn ok(&self) -> bool {
        self.converged && self.violations == 0
    }
}

/// Agents flagged because someone with a strictly lower index holds a
/// strictly higher band, or the reverse.
fn order_violations(v_pre: &[f64], bands: &[usize]) -> Vec<bool> {
    let n = v_pre.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v_pre[a].total_cmp(&v_pre[b]));
    let mut flags = vec![false; n];
    // Walk groups of equal v_pre so ties never count as violations.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for q in 1..=n {
        if q == n || v_pre[order[q]] != v_pre[order[start]] {
            groups.push((start, q));
            start = q;
        }
    }
    let mut max_below = None::<usize>;
    for &(s, e) in &groups {
        for &i in &order[s..e] {
            if max_below.is_some_and(|m| bands[i] < m) {
                flags[i] = true;
            }
        }
        let here = order[s..e].iter().map(|&i| bands[i]).max();
        max_below = max_below.max(here);
    }
    let mut min_above = None::<usize>;
    for &(s, e) in groups.iter().rev() {
        for &i in &order[s..e] {
            if min_above.is_some_and(|m| bands[i] > m) {
                flags[i] = true;
            }
        }
        let here = order[s..e].iter().map(|&i| bands[i]).min();
        min_above = match (min_above, here) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    flags
}

/// Samples agents, runs best-response dynamics on the combined index and
/// checks that realized bands are ordered by `v_pre`.
///
/// `kind` selects the index the oracle ranks on. With [`IndexKind::Min`] the
/// realized order follows the wrong index, so violations against `v_pre`
/// are expected.
pub fn check_multidim_rank_preservation(
    spec: &MultiSkillSpec,
    sample_size: usize,
    policy: &RewardPolicy,
    effort_step: f64,
    seed: u64,
    kind: IndexKind,
) -> Result<MultiRankReport> {
    spec.validate()?;
    if sample_size < 2 {
        return Err(Error::Config(format!("sample size must be at least 2, got {sample_size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v_pre = Vec::with_capacity(sample_size);
    let mut ranked_on = Vec::with_capacity(sample_size);
    for _ in 0..sample_size {
        let ranks: Vec<f64> = (0..spec.num_skills()).map(|_| rng.gen::<f64>()).collect();
        v_pre.push(pre_index(spec, &ranks)?.0);
        ranked_on.push(combined_index(spec, &ranks, kind)?.0);
    }
    let g = FunctionSpec::power(spec.transfer_slope, 1.0);
    let spread = policy.max_level() - policy.levels[0];
    let cap = spec.cost.invert(spread)?;
    let grid = EffortGrid::new(0.0, effort_step, cap + 2.0 * effort_step)?;
    let inst = DiscreteInstance::with_skills(ranked_on, g, spec.cost.clone(), 0.0, policy, grid)?;
    let out = best_response_dynamics(&inst, 10_000, 1e-12)?;
    let bands = out.instance.bands()?;
    let flags = order_violations(&v_pre, &bands);
    let rows: Vec<MultiAgentRow> = (0..sample_size)
        .map(|i| MultiAgentRow {
            agent: i,
            v_pre: v_pre[i],
            reward_band: bands[i],
            violation_flag: flags[i],
        })
        .collect();
    Ok(MultiRankReport {
        converged: out.converged,
        rounds: out.rounds,
        violations: flags.iter().filter(|&&f| f).count(),
        rows,
    })
}

/// Measurable and unmeasurable skills sharing quantile `f` and budget `B`,
/// under a two-level policy with capacity ρ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnmeasurableSpec {
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub p: FunctionSpec,
    #[serde(default)]
    pub e0: f64,
    pub budget: f64,
    pub capacity: f64,
}

impl UnmeasurableSpec {
    pub fn validate(&self) -> Result<()> {
        for s in [&self.f, &self.g, &self.p] {
            s.validate()?;
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::Config(format!("budget must be positive, got {}", self.budget)));
        }
        if !(self.capacity > 0.0 && self.capacity < 1.0) {
            return Err(Error::Config(format!("capacity must lie in (0,1), got {}", self.capacity)));
        }
        if self.g.evaluate(self.e0)? != 0.0 {
            return Err(Error::Assumption(format!(
                "the measurable/unmeasurable analysis needs g(e0) = 0, got {}",
                self.g.evaluate(self.e0)?
            )));
        }
        Ok(())
    }

    fn check_cutpoint(&self, c: f64) -> Result<()> {
        if !(c > 0.0 && c < 1.0 - self.capacity) {
            return Err(Error::Domain {
                what: "cutpoint",
                value: c,
                domain: format!("(0, {})", 1.0 - self.capacity),
            });
        }
        Ok(())
    }

    /// Admitted score `g(ẽ0)·f(c)`, common to every admitted applicant.
    fn threshold_score(&self, c: f64) -> Result<f64> {
        let level = self.capacity / (1.0 - c);
        let e_tilde = self.p.invert(self.p.evaluate(self.e0)? + level)?;
        Ok(self.g.evaluate(e_tilde)? * self.f.evaluate(c)?)
    }
}

/// `E[v^M | admitted]`.
pub fn expected_measured(spec: &UnmeasurableSpec, c: f64) -> Result<f64> {
    spec.validate()?;
    spec.check_cutpoint(c)?;
    spec.threshold_score(c)
}

/// `E[v^U | admitted]`: mean unmeasurable quantile times the mean transfer
/// of leftover budget over the admitted ranks.
pub fn expected_unmeasured(spec: &UnmeasurableSpec, c: f64) -> Result<f64> {
    spec.validate()?;
    spec.check_cutpoint(c)?;
    unmeasured_unchecked(spec, c)
}

fn unmeasured_unchecked(spec: &UnmeasurableSpec, c: f64) -> Result<f64> {
    let t = spec.threshold_score(c)?;
    let top_effort = spec.g.invert(t / spec.f.evaluate(c)?)?;
    if top_effort > spec.budget {
        return Err(Error::Model(format!(
            "budget {} is below the measurable effort {top_effort} at the cutpoint",
            spec.budget
        )));
    }
    let mean_f = integrate(|x| spec.f.evaluate(x), 0.0, 1.0, TIGHT_TOL)?;
    let leftover = integrate(
        |theta| {
            let e_m = spec.g.invert(t / spec.f.evaluate(theta)?)?;
            spec.g.evaluate((spec.budget - e_m).max(0.0))
        },
        c,
        1.0,
        TIGHT_TOL,
    )?;
    Ok(mean_f.value * leftover.value / (1.0 - c))
}

fn measured_unchecked(spec: &UnmeasurableSpec, c: f64) -> Result<f64> {
    spec.threshold_score(c)
}

fn central_difference<F: Fn(f64) -> Result<f64>>(f: F, c: f64) -> Result<f64> {
    let h = C_DERIVATIVE_STEP;
    Ok((f(c + h)? - f(c - h)?) / (2.0 * h))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InteriorWeight {
    pub beta: f64,
    pub d_measured: f64,
    pub d_unmeasured: f64,
}

/// Weight `β` that makes `c` a stationary point of the weighted private
/// utility: `β = −∂U / (∂M − ∂U)`.
pub fn beta_for_interior_optimum(spec: &UnmeasurableSpec, c: f64) -> Result<InteriorWeight> {
    spec.validate()?;
    spec.check_cutpoint(c)?;
    let d_m = central_difference(|x| measured_unchecked(spec, x), c)?;
    let d_u = central_difference(|x| unmeasured_unchecked(spec, x), c)?;
    if !(d_m > 0.0 && d_u < 0.0) {
        return Err(Error::Assumption(format!(
            "need dE[v^M]/dc > 0 and dE[v^U]/dc < 0, measured {d_m} and {d_u}"
        )));
    }
    Ok(InteriorWeight {
        beta: -d_u / (d_m - d_u),
        d_measured: d_m,
        d_unmeasured: d_u,
    })
}

/// `β·E[v^M | admitted] + (1 − β)·E[v^U | admitted]`.
pub fn weighted_private_utility(spec: &UnmeasurableSpec, beta: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: "[0, 1]".into(),
        });
    }
    let m = expected_measured(spec, c)?;
    let u = expected_unmeasured(spec, c)?;
    Ok(beta * m + (1.0 - beta) * u)
}

/// Slope of [`weighted_private_utility`] in `c`.
///
/// Uses a five-point stencil with its own step, so checking the weight from
/// [`beta_for_interior_optimum`] does not just replay the same differences.
pub fn weighted_utility_slope(spec: &UnmeasurableSpec, beta: f64, c: f64) -> Result<f64> {
    const H: f64 = 1e-3;
    let u = |x| weighted_private_utility(spec, beta, x);
    Ok((u(c - 2.0 * H)? - 8.0 * u(c - H)? + 8.0 * u(c + H)? - u(c + 2.0 * H)?) / (12.0 * H))
}
