//! Closed-form equilibrium effort and score schedules.
//!
//! Band 0 exerts the baseline effort `e0`. For every higher band `k` the
//! threshold effort `ẽ_{k−1}` makes the top applicant of band `k−1`
//! indifferent between staying and matching the entry score
//! `T_k = g(ẽ_{k−1})·f(c_k)`:
//!
//! ```text
//! p(ẽ_{k−1}) = p(e_{k−1}(c_k)) + ℓ_k − ℓ_{k−1}
//! e_k(θ)     = max(g⁻¹(T_k / f(θ)), e0)
//! v_k(θ)     = max(T_k, g(e0)·f(θ))
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::RewardPolicy;
use crate::primitives::PopulationSpec;

/// Closed-form solution for one reward band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandSolution {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// `ẽ_{k−1}`; `None` for band 0.
    pub threshold_effort: Option<f64>,
    /// Entry score `T_k`; `None` for band 0.
    pub threshold_score: Option<f64>,
    /// Rank where the baseline branch `g(e0)·f(θ)` overtakes `T_k`, if that
    /// happens strictly inside the band.
    pub switch_point: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumSchedule {
    pub bands: Vec<BandSolution>,
    pub policy: RewardPolicy,
    pub population: PopulationSpec,
}

/// Solves the equilibrium schedule for a population and policy.
pub fn solve(population: &PopulationSpec, policy: &RewardPolicy) -> Result<EquilibriumSchedule> {
    population.validate()?;
    policy.ensure_valid()?;
    let mut schedule = EquilibriumSchedule {
        bands: Vec::with_capacity(policy.num_bands()),
        policy: policy.clone(),
        population: population.clone(),
    };
    let (lo, hi) = policy.band_interval(0);
    schedule.bands.push(BandSolution {
        k: 0,
        lo,
        hi,
        level: policy.levels[0],
        threshold_effort: None,
        threshold_score: None,
        switch_point: None,
    });
    for k in 1..policy.num_bands() {
        let lo = policy.band_interval(k).0;
        let below = schedule.effort_in_band(k - 1, lo)?;
        let target = population.p(below)? + policy.levels[k] - policy.levels[k - 1];
        let threshold_effort = population.p.invert(target).map_err(|e| {
            Error::Model(format!("cost {target} needed to enter band {k} is outside the image of p ({e})"))
        })?;
        let band = schedule.band_with_threshold(k, threshold_effort)?;
        schedule.bands.push(band);
    }
    Ok(schedule)
}

impl EquilibriumSchedule {
    fn band_with_threshold(&self, k: usize, threshold_effort: f64) -> Result<BandSolution> {
        let pop = &self.population;
        let (lo, hi) = self.policy.band_interval(k);
        let transfer = pop.g(threshold_effort).map_err(|e| {
            Error::Model(format!(
                "threshold effort {threshold_effort} of band {k} is outside the domain of g ({e})"
            ))
        })?;
        let threshold_score = transfer * pop.f(lo)?;
        let g0 = pop.g_e0();
        let switch_point = if g0 > 0.0 {
            let y = threshold_score / g0;
            let (_, fmax) = pop.f.image();
            if y < fmax {
                pop.f.invert(y).ok().filter(|&t| t > lo && t < hi)
            } else {
                None
            }
        } else {
            None
        };
        Ok(BandSolution {
            k,
            lo,
            hi,
            level: self.policy.levels[k],
            threshold_effort: Some(threshold_effort),
            threshold_score: Some(threshold_score),
            switch_point,
        })
    }

    /// Copy with band `k`'s threshold effort multiplied by `factor` and its
    /// entry score recomputed; other bands are left untouched. The result is
    /// generally not an equilibrium; it exists to exercise the checks.
    pub fn with_scaled_threshold(&self, k: usize, factor: f64) -> Result<Self> {
        let band = self
            .bands
            .get(k)
            .ok_or_else(|| Error::Model(format!("no band {k}")))?;
        let e = band
            .threshold_effort
            .ok_or_else(|| Error::Model("band 0 has no threshold effort".into()))?;
        let mut out = self.clone();
        out.bands[k] = self.band_with_threshold(k, e * factor)?;
        Ok(out)
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    /// Effort of band `k`'s formula at `theta`, without checking that
    /// `theta` lies in the band.
    pub fn effort_in_band(&self, k: usize, theta: f64) -> Result<f64> {
        let pop = &self.population;
        let Some(t) = self.bands[k].threshold_score else {
            return Ok(pop.e0);
        };
        let ft = pop.f(theta)?;
        let g0 = pop.g_e0();
        if ft <= 0.0 || t <= g0 * ft {
            return Ok(pop.e0);
        }
        let y = t / ft;
        match pop.g.invert(y) {
            Ok(e) => Ok(e.max(pop.e0)),
            Err(_) => Err(Error::Model(format!(
                "required transfer {y} at theta = {theta} is outside the image of g"
            ))),
        }
    }

    /// Score of band `k`'s formula at `theta`.
    pub fn score_in_band(&self, k: usize, theta: f64) -> Result<f64> {
        let pop = &self.population;
        let base = pop.g_e0() * pop.f(theta)?;
        Ok(match self.bands[k].threshold_score {
            Some(t) => t.max(base),
            None => base,
        })
    }

    fn check_theta(theta: f64) -> Result<()> {
        if (0.0..=1.0).contains(&theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "theta",
                value: theta,
                domain: "[0, 1]".into(),
            })
        }
    }

    pub fn band_of(&self, theta: f64) -> usize {
        self.policy.band_of(theta)
    }

    pub fn effort_at(&self, theta: f64) -> Result<f64> {
        Self::check_theta(theta)?;
        self.effort_in_band(self.band_of(theta), theta)
    }

    pub fn score_at(&self, theta: f64) -> Result<f64> {
        Self::check_theta(theta)?;
        self.score_in_band(self.band_of(theta), theta)
    }

    /// Applicant welfare `ℓ_k − p(e)` of the equilibrium action at `theta`.
    pub fn welfare_at(&self, theta: f64) -> Result<f64> {
        let k = self.band_of(theta);
        Ok(self.policy.levels[k] - self.population.p(self.effort_at(theta)?)?)
    }

    /// Best welfare gain available at `theta` by matching the entry score of
    /// another band instead of following the schedule.
    pub fn best_deviation_gain(&self, theta: f64) -> Result<f64> {
        let pop = &self.population;
        let own = self.welfare_at(theta)?;
        let ft = pop.f(theta)?;
        let mut best = f64::NEG_INFINITY;
        for band in &self.bands {
            if band.k == self.band_of(theta) {
                continue;
            }
            let effort = match band.threshold_score {
                None => pop.e0,
                Some(t) if ft > 0.0 => match pop.g.invert(t / ft) {
                    Ok(e) => e.max(pop.e0),
                    Err(_) => continue,
                },
                Some(_) => continue,
            };
            best = best.max(band.level - pop.p(effort)? - own);
        }
        Ok(best)
    }

    /// Sample rows `(theta, band, effort, score)` on a uniform grid of
    /// `grid` points with every band boundary added.
    pub fn sample(&self, grid: usize) -> Result<Vec<ScheduleRow>> {
        let grid = grid.max(2);
        let mut thetas: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
        thetas.extend(self.policy.cutpoints.iter().copied());
        thetas.sort_by(f64::total_cmp);
        thetas.dedup();
        thetas
            .into_iter()
            .map(|theta| {
                Ok(ScheduleRow {
                    theta,
                    band: self.band_of(theta),
                    effort: self.effort_at(theta)?,
                    score: self.score_at(theta)?,
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub theta: f64,
    pub band: usize,
    pub effort: f64,
    pub score: f64,
}

/// A place where band `k` fails to outscore band `k − 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankViolation {
    pub theta: f64,
    pub band: usize,
    pub implied_band: usize,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub grid_size: usize,
    /// Smallest `T_k − sup v_{k−1}` over `k ≥ 1`; infinite for one band.
    pub min_margin: f64,
    pub violations: Vec<RankViolation>,
}

impl RankReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that ranking by equilibrium score reproduces the reward bands.
///
/// Two tests are combined. Analytically, each band's entry score must
/// strictly exceed the supremum score of the band below. Empirically, the
/// grid points are sorted by score (ties by rank) and each sorted position's
/// band is compared with the band of the point occupying it.
pub fn check_rank_preservation(schedule: &EquilibriumSchedule, grid_size: usize) -> Result<RankReport> {
    let grid_size = grid_size.max(2);
    let mut violations = Vec::new();
    let mut min_margin = f64::INFINITY;
    for band in schedule.bands.iter().skip(1) {
        let sup_below = schedule.score_in_band(band.k - 1, band.lo)?;
        let entry = schedule.score_in_band(band.k, band.lo)?;
        let margin = entry - sup_below;
        min_margin = min_margin.min(margin);
        if margin <= 0.0 {
            violations.push(RankViolation {
                theta: band.lo,
                band: band.k,
                implied_band: band.k - 1,
                margin,
            });
        }
    }

    let thetas: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let scores = thetas
        .iter()
        .map(|&t| schedule.score_at(t))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..grid_size).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    for (pos, &i) in order.iter().enumerate() {
        let band = schedule.band_of(thetas[i]);
        let implied_band = schedule.band_of(thetas[pos]);
        if band != implied_band {
            violations.push(RankViolation {
                theta: thetas[i],
                band,
                implied_band,
                margin: scores[i] - scores[order[pos.saturating_sub(1)]],
            });
        }
    }
    Ok(RankReport {
        grid_size,
        min_margin,
        violations,
    })
}

/// Outcome of a level-shift comparative statics check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticsReport {
    pub perturbed_levels: Vec<f64>,
    /// Bands below `k` unchanged within 1e-12.
    pub lower_unchanged: bool,
    /// Band `k` efforts weakly higher pointwise.
    pub band_k_increased: bool,
    /// Bands `k+1..=j` efforts weakly lower pointwise.
    pub upper_decreased: bool,
    pub max_abs_change: f64,
}

impl StaticsReport {
    pub fn ok(&self) -> bool {
        self.lower_unchanged && self.band_k_increased && self.upper_decreased
    }
}

/// Raises `ℓ_k` by `delta`, lowers `ℓ_j` to keep capacity, and compares the
/// two equilibrium effort schedules on a grid.
pub fn comparative_statics_check(
    population: &PopulationSpec,
    policy: &RewardPolicy,
    k: usize,
    j: usize,
    delta: f64,
    grid_size: usize,
) -> Result<StaticsReport> {
    if j <= k || j >= policy.num_bands() {
        return Err(Error::Perturbation(format!(
            "need k < j < {}, got k = {k}, j = {j}",
            policy.num_bands()
        )));
    }
    let (klo, khi) = policy.band_interval(k);
    let (jlo, jhi) = policy.band_interval(j);
    let mut perturbed = policy.clone();
    perturbed.levels[k] += delta;
    perturbed.levels[j] -= delta * (khi - klo) / (jhi - jlo);
    perturbed
        .ensure_valid()
        .map_err(|e| Error::Perturbation(e.to_string()))?;

    let base = solve(population, policy)?;
    let moved = solve(population, &perturbed)?;
    let slack = 1e-12;
    let mut report = StaticsReport {
        perturbed_levels: perturbed.levels.clone(),
        lower_unchanged: true,
        band_k_increased: true,
        upper_decreased: true,
        max_abs_change: 0.0,
    };
    let grid_size = grid_size.max(2);
    for i in 0..grid_size {
        let theta = i as f64 / (grid_size - 1) as f64;
        let band = policy.band_of(theta);
        let (a, b) = (base.effort_at(theta)?, moved.effort_at(theta)?);
        report.max_abs_change = report.max_abs_change.max((b - a).abs());
        if band < k && (b - a).abs() > slack {
            report.lower_unchanged = false;
        } else if band == k && b < a - slack {
            report.band_k_increased = false;
        } else if band > k && band <= j && b > a + slack {
            report.upper_decreased = false;
        }
    }
    Ok(report)
}
