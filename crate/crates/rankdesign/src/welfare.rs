//! Aggregate welfare functionals of an equilibrium schedule.
//!
//! * applicant welfare `𝒲 = ρ − ∫ p(e(θ)) dθ`
//! * societal utility `𝒰^soc = ∫ v(θ) dθ`
//! * private utility `𝒰^pri = ∫ v(θ)·λ(θ) dθ`
//!
//! Integrals run band by band, split at switch points and at kinks of `f`.

use serde::Serialize;

use crate::equilibrium::EquilibriumSchedule;
use crate::error::Result;
use crate::quadrature::{integrate_piecewise, Integral, DEFAULT_REL_TOL};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WelfareReport {
    pub applicant_welfare: f64,
    pub societal_utility: f64,
    pub private_utility: f64,
    pub per_band_effort_cost: Vec<f64>,
    pub quadrature_error_estimate: f64,
}

impl WelfareReport {
    /// Mean score among admitted applicants, `𝒰^pri / ρ`.
    pub fn mean_admitted_score(&self, capacity: f64) -> f64 {
        self.private_utility / capacity
    }
}

fn band_breaks(schedule: &EquilibriumSchedule, k: usize) -> Vec<f64> {
    let band = &schedule.bands[k];
    let mut breaks = schedule.population.f.kinks();
    breaks.extend(band.switch_point);
    // Effort ∝ 1/f(θ) varies on the scale of `lo` itself; geometric nodes keep
    // the panel count bounded when `lo` is tiny.
    if band.lo > 0.0 {
        let mut x = 2.0 * band.lo;
        while x < band.hi {
            breaks.push(x);
            x *= 2.0;
        }
    }
    breaks
}

fn per_band<F>(schedule: &EquilibriumSchedule, integrand: F) -> Result<Vec<Integral>>
where
    F: Fn(usize, f64) -> Result<f64>,
{
    schedule
        .bands
        .iter()
        .map(|band| {
            integrate_piecewise(
                |theta| integrand(band.k, theta),
                band.lo,
                band.hi,
                &band_breaks(schedule, band.k),
                DEFAULT_REL_TOL,
            )
        })
        .collect()
}

fn effort_costs(schedule: &EquilibriumSchedule) -> Result<Vec<Integral>> {
    let pop = &schedule.population;
    per_band(schedule, |k, theta| pop.p(schedule.effort_in_band(k, theta)?))
}

fn scores(schedule: &EquilibriumSchedule) -> Result<Vec<Integral>> {
    per_band(schedule, |k, theta| schedule.score_in_band(k, theta))
}

fn sum(parts: &[Integral]) -> Integral {
    parts.iter().fold(Integral::default(), |acc, &x| acc + x)
}

pub fn applicant_welfare(schedule: &EquilibriumSchedule) -> Result<f64> {
    Ok(schedule.policy.capacity - sum(&effort_costs(schedule)?).value)
}

pub fn societal_utility(schedule: &EquilibriumSchedule) -> Result<f64> {
    Ok(sum(&scores(schedule)?).value)
}

pub fn private_utility(schedule: &EquilibriumSchedule) -> Result<f64> {
    let parts = scores(schedule)?;
    Ok(parts
        .iter()
        .zip(&schedule.policy.levels)
        .map(|(i, l)| i.value * l)
        .sum())
}

/// All three functionals from one pass over the bands.
pub fn evaluate(schedule: &EquilibriumSchedule) -> Result<WelfareReport> {
    let costs = effort_costs(schedule)?;
    let score_parts = scores(schedule)?;
    let levels = &schedule.policy.levels;
    let private = score_parts
        .iter()
        .zip(levels)
        .map(|(i, l)| i.value * l)
        .sum();
    let error = costs.iter().map(|i| i.error).sum::<f64>()
        + score_parts
            .iter()
            .zip(levels)
            .map(|(i, l)| i.error * (1.0 + l))
            .sum::<f64>();
    Ok(WelfareReport {
        applicant_welfare: schedule.policy.capacity - sum(&costs).value,
        societal_utility: sum(&score_parts).value,
        private_utility: private,
        per_band_effort_cost: costs.iter().map(|i| i.value).collect(),
        quadrature_error_estimate: error,
    })
}
