//! Discrete-agent oracle.
//!
//! `N` agents sit at midpoint ranks `θ_i = (i + 0.5)/N`. Scores are
//! `g(e_i)·s_i` where `s_i` is the agent's skill factor (`f(θ_i)` in the
//! one-dimensional model). Rewards come from sorting scores ascending with
//! ties broken by agent index (higher index ranks higher) and giving sorted
//! position `q` the band of rank `(q + 0.5)/N`.
//!
//! Two rules decide the band a deviating agent lands in:
//!
//! * [`DeviationRule::Resort`]: re-sort with the deviation and read the band
//!   of the new position. This is the plain finite game. It has no pure
//!   equilibrium once the bands are separated by a score gap: a member of a
//!   band can always drop into the gap and keep its slot.
//! * [`DeviationRule::EntryScore`] (default): as `Resort`, but an agent can
//!   only hold band `k` if its score reaches the band's entry score, the
//!   lowest score among the agents currently holding band `k`. One agent
//!   cannot move a band's entry score by deviating alone, which is the
//!   finite counterpart of a measure-zero deviation in the continuum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::equilibrium::EquilibriumSchedule;
use crate::error::{Error, Result};
use crate::policy::RewardPolicy;
use crate::primitives::{FunctionSpec, PopulationSpec};
use crate::welfare::WelfareReport;

/// Welfare differences below this are treated as ties.
const WELFARE_TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationRule {
    #[default]
    EntryScore,
    Resort,
}

/// Effort grid `min, min + step, …` up to `max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffortGrid {
    pub min: f64,
    pub step: f64,
    pub max: f64,
}

impl EffortGrid {
    pub fn new(min: f64, step: f64, max: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!("effort step must be positive, got {step}")));
        }
        if !(max.is_finite() && max >= min) {
            return Err(Error::Config(format!("effort cap {max} is below the minimum effort {min}")));
        }
        Ok(Self { min, step, max })
    }

    /// Grid from `e0` with a cap no rational agent would exceed: the effort
    /// whose cost equals the full spread of reward levels, plus two steps.
    pub fn for_population(population: &PopulationSpec, policy: &RewardPolicy, step: f64) -> Result<Self> {
        let spread = policy.max_level() - policy.levels[0];
        let cap = population.p.invert(population.p(population.e0)? + spread)?;
        Self::new(population.e0, step, cap + 2.0 * step)
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    /// Nearest grid point to `e`.
    pub fn round(&self, e: f64) -> f64 {
        let i = ((e - self.min) / self.step).round().clamp(0.0, (self.len() - 1) as f64);
        self.point(i as usize)
    }
}

/// A population of discrete agents and their current efforts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteInstance {
    pub ranks: Vec<f64>,
    pub skills: Vec<f64>,
    pub efforts: Vec<f64>,
    pub grid: EffortGrid,
    pub rule: DeviationRule,
    pub policy: RewardPolicy,
    pub g: FunctionSpec,
    pub p: FunctionSpec,
    pub e0: f64,
}

/// Sorted view of an instance: agents ordered by `(score, index)`.
struct Ranking {
    scores: Vec<f64>,
    order: Vec<usize>,
    slot_band: Vec<usize>,
    /// First sorted position of each band.
    slot_start: Vec<usize>,
}

fn key_cmp(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl Ranking {
    fn position(&self, i: usize) -> usize {
        let key = (self.scores[i], i);
        self.order
            .binary_search_by(|&j| key_cmp((self.scores[j], j), key))
            .expect("agent present in ranking")
    }

    fn band(&self, i: usize) -> usize {
        self.slot_band[self.position(i)]
    }

    /// Band agent `i` would hold with score `v`, others fixed.
    fn deviation_band(&self, i: usize, v: f64, rule: DeviationRule) -> usize {
        let key = (v, i);
        let below = self
            .order
            .partition_point(|&j| key_cmp((self.scores[j], j), key) == Ordering::Less);
        let own_below = key_cmp((self.scores[i], i), key) == Ordering::Less;
        let q = below - usize::from(own_below);
        let mut b = self.slot_band[q];
        if rule == DeviationRule::EntryScore {
            while b > 0 && v < self.scores[self.order[self.slot_start[b]]] {
                b -= 1;
            }
        }
        b
    }

    fn remove(&mut self, i: usize) {
        let pos = self.position(i);
        self.order.remove(pos);
    }

    fn insert(&mut self, i: usize, score: f64) {
        self.scores[i] = score;
        let key = (score, i);
        let pos = self
            .order
            .partition_point(|&j| key_cmp((self.scores[j], j), key) == Ordering::Less);
        self.order.insert(pos, i);
    }
}

impl DiscreteInstance {
    /// `n` agents at midpoint ranks, all exerting `e0`.
    pub fn new(population: &PopulationSpec, policy: &RewardPolicy, n: usize, grid: EffortGrid) -> Result<Self> {
        population.validate()?;
        policy.ensure_valid()?;
        if n == 0 {
            return Err(Error::Config("need at least one agent".into()));
        }
        let ranks: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let skills = ranks.iter().map(|&t| population.f(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            efforts: vec![population.e0; n],
            ranks,
            skills,
            grid,
            rule: DeviationRule::default(),
            policy: policy.clone(),
            g: population.g.clone(),
            p: population.p.clone(),
            e0: population.e0,
        })
    }

    /// `n` agents with uniformly drawn ranks (sorted), all exerting `e0`.
    pub fn sampled(population: &PopulationSpec, policy: &RewardPolicy, n: usize, grid: EffortGrid, seed: u64) -> Result<Self> {
        let mut inst = Self::new(population, policy, n, grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ranks: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        ranks.sort_by(f64::total_cmp);
        inst.skills = ranks.iter().map(|&t| population.f(t)).collect::<Result<Vec<_>>>()?;
        inst.ranks = ranks;
        Ok(inst)
    }

    /// Agents with arbitrary skill factors, e.g. a multi-skill index.
    pub fn with_skills(
        skills: Vec<f64>,
        g: FunctionSpec,
        p: FunctionSpec,
        e0: f64,
        policy: &RewardPolicy,
        grid: EffortGrid,
    ) -> Result<Self> {
        policy.ensure_valid()?;
        let n = skills.len();
        if n == 0 {
            return Err(Error::Config("need at least one agent".into()));
        }
        Ok(Self {
            ranks: (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(),
            efforts: vec![e0; n],
            skills,
            grid,
            rule: DeviationRule::default(),
            policy: policy.clone(),
            g,
            p,
            e0,
        })
    }

    /// Instance whose efforts follow the closed-form schedule at each rank.
    pub fn from_schedule(schedule: &EquilibriumSchedule, n: usize, step: f64) -> Result<Self> {
        let grid = EffortGrid::for_population(&schedule.population, &schedule.policy, step)?;
        let mut inst = Self::new(&schedule.population, &schedule.policy, n, grid)?;
        inst.efforts = inst
            .ranks
            .iter()
            .map(|&t| schedule.effort_at(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(inst)
    }

    pub fn with_rule(mut self, rule: DeviationRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    fn score_of(&self, i: usize, effort: f64) -> Result<f64> {
        Ok(self.g.evaluate(effort)? * self.skills[i])
    }

    pub fn scores(&self) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.score_of(i, self.efforts[i])).collect()
    }

    fn ranking(&self) -> Result<Ranking> {
        let n = self.len();
        let scores = self.scores()?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key_cmp((scores[a], a), (scores[b], b)));
        let slot_band: Vec<usize> = (0..n)
            .map(|q| self.policy.band_of((q as f64 + 0.5) / n as f64))
            .collect();
        let mut slot_start = vec![usize::MAX; self.policy.num_bands()];
        for (q, &b) in slot_band.iter().enumerate().rev() {
            slot_start[b] = q;
        }
        // Bands without slots (possible for small N) can never be entered.
        for b in 0..slot_start.len() {
            if slot_start[b] == usize::MAX {
                slot_start[b] = n - 1;
            }
        }
        Ok(Ranking {
            scores,
            order,
            slot_band,
            slot_start,
        })
    }

    /// Realized band of every agent.
    pub fn bands(&self) -> Result<Vec<usize>> {
        let r = self.ranking()?;
        Ok((0..self.len()).map(|i| r.band(i)).collect())
    }

    pub fn rewards(&self) -> Result<Vec<f64>> {
        Ok(self.bands()?.into_iter().map(|b| self.policy.levels[b]).collect())
    }

    /// Realized welfare `λ − p(e)` of every agent.
    pub fn welfare(&self) -> Result<Vec<f64>> {
        let bands = self.bands()?;
        (0..self.len())
            .map(|i| Ok(self.policy.levels[bands[i]] - self.p.evaluate(self.efforts[i])?))
            .collect()
    }

    fn welfare_with(&self, ranking: &Ranking, i: usize, effort: f64) -> Result<(f64, usize)> {
        let v = self.score_of(i, effort)?;
        let b = ranking.deviation_band(i, v, self.rule);
        Ok((self.policy.levels[b] - self.p.evaluate(effort)?, b))
    }

    /// Best grid response of agent `i`, or its current effort if nothing
    /// beats staying by more than `eps`. Relies on the band being monotone
    /// in effort, so only the cheapest effort reaching each band matters.
    fn best_response(&self, ranking: &Ranking, i: usize, eps: f64) -> Result<f64> {
        let current = self.efforts[i];
        let (stay, _) = self.welfare_with(ranking, i, current)?;
        let len = self.grid.len();
        let band_at = |idx: usize| -> Result<usize> { Ok(self.welfare_with(ranking, i, self.grid.point(idx))?.1) };
        let mut best = (stay, current);
        let mut start = 0usize;
        let top = band_at(len - 1)?;
        let mut target = band_at(0)?;
        while start < len {
            let (w, _) = self.welfare_with(ranking, i, self.grid.point(start))?;
            if w > best.0 + eps.max(WELFARE_TIE) || (w > best.0 + WELFARE_TIE && best.1 != current) {
                best = (w, self.grid.point(start));
            }
            if target >= top {
                break;
            }
            target += 1;
            // Smallest index whose band reaches `target`.
            let (mut lo, mut hi) = (start, len - 1);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if band_at(mid)? >= target {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            target = band_at(lo)?;
            start = lo;
        }
        Ok(best.1)
    }

    /// Largest welfare gain any agent can obtain by a single grid deviation.
    pub fn certify(&self, epsilon: f64) -> Result<Certification> {
        let ranking = self.ranking()?;
        let realized: Vec<usize> = (0..self.len()).map(|i| ranking.band(i)).collect();
        let per_agent: Vec<(f64, f64)> = (0..self.len())
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let own = self.policy.levels[realized[i]] - self.p.evaluate(self.efforts[i])?;
                let mut best = (f64::NEG_INFINITY, self.efforts[i]);
                for idx in 0..self.grid.len() {
                    let e = self.grid.point(idx);
                    let (w, _) = self.welfare_with(&ranking, i, e)?;
                    if w - own > best.0 {
                        best = (w - own, e);
                    }
                }
                Ok(best)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut per_band = vec![f64::NEG_INFINITY; self.policy.num_bands()];
        let (mut worst_gain, mut worst_agent, mut worst_effort) = (f64::NEG_INFINITY, 0, f64::NAN);
        for (i, &(gain, e)) in per_agent.iter().enumerate() {
            per_band[realized[i]] = per_band[realized[i]].max(gain);
            if gain > worst_gain {
                (worst_gain, worst_agent, worst_effort) = (gain, i, e);
            }
        }
        Ok(Certification {
            certified: worst_gain <= epsilon,
            epsilon,
            worst_gain,
            worst_agent,
            worst_deviation_effort: worst_effort,
            per_band_max_gain: per_band.into_iter().map(|g| if g.is_finite() { Some(g) } else { None }).collect(),
            rule: self.rule,
        })
    }

    /// Sample means of reward minus cost, score, and score times reward.
    pub fn empirical_welfare(&self) -> Result<WelfareReport> {
        let n = self.len() as f64;
        let bands = self.bands()?;
        let scores = self.scores()?;
        let mut per_band = vec![0.0; self.policy.num_bands()];
        let (mut w, mut soc, mut pri) = (0.0, 0.0, 0.0);
        for i in 0..self.len() {
            let level = self.policy.levels[bands[i]];
            let cost = self.p.evaluate(self.efforts[i])?;
            per_band[bands[i]] += cost / n;
            w += (level - cost) / n;
            soc += scores[i] / n;
            pri += scores[i] * level / n;
        }
        Ok(WelfareReport {
            applicant_welfare: w,
            societal_utility: soc,
            private_utility: pri,
            per_band_effort_cost: per_band,
            quadrature_error_estimate: 0.0,
        })
    }

    /// Agents whose realized band differs from the band of their rank,
    /// excluding the `⌈εN⌉` agents nearest each cutpoint.
    pub fn rank_preservation_violations(&self, epsilon: f64) -> Result<Vec<usize>> {
        let n = self.len();
        let slack = (epsilon * n as f64).ceil() as usize;
        let bands = self.bands()?;
        let near_cut = |i: usize| {
            self.policy.cutpoints.iter().any(|&c| {
                let boundary = (c * n as f64).round() as isize;
                let d = if (i as isize) < boundary {
                    boundary - i as isize
                } else {
                    i as isize - boundary + 1
                };
                d as usize <= slack
            })
        };
        Ok((0..n)
            .filter(|&i| bands[i] != self.policy.band_of(self.ranks[i]) && !near_cut(i))
            .collect())
    }

    /// Pairs of agents with equal scores holding different bands.
    pub fn cross_band_ties(&self) -> Result<Vec<(usize, usize)>> {
        let r = self.ranking()?;
        Ok(r.order
            .windows(2)
            .enumerate()
            .filter(|(q, w)| r.scores[w[0]] == r.scores[w[1]] && r.slot_band[*q] != r.slot_band[q + 1])
            .map(|(_, w)| (w[0], w[1]))
            .collect())
    }

    /// One row per agent: `agent, rank, effort, score, band, welfare`.
    pub fn dump(&self) -> Result<Vec<AgentRow>> {
        let bands = self.bands()?;
        let scores = self.scores()?;
        let welfare = self.welfare()?;
        Ok((0..self.len())
            .map(|i| AgentRow {
                agent: i,
                rank: self.ranks[i],
                effort: self.efforts[i],
                score: scores[i],
                band: bands[i],
                welfare: welfare[i],
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certification {
    pub certified: bool,
    pub epsilon: f64,
    pub worst_gain: f64,
    pub worst_agent: usize,
    pub worst_deviation_effort: f64,
    /// Largest gain among agents currently in each band; `None` for empty bands.
    pub per_band_max_gain: Vec<Option<f64>>,
    pub rule: DeviationRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AgentRow {
    pub agent: usize,
    pub rank: f64,
    pub effort: f64,
    pub score: f64,
    pub band: usize,
    pub welfare: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsOutcome {
    pub converged: bool,
    pub rounds: usize,
    pub instance: DiscreteInstance,
    /// Agents whose effort changed in the last sweep.
    pub cycling_agents: Vec<usize>,
}

/// Sequential round-robin best response.
///
/// In each sweep agents `0..N` in turn switch to their best grid effort when
/// it beats their current welfare by more than `epsilon`. The run has
/// converged once a full sweep leaves every effort unchanged. Stopping on
/// moves of at most one grid step instead would halt an ascending bidding
/// war in its first sweeps, since outbidding takes a single step.
pub fn best_response_dynamics(instance: &DiscreteInstance, max_rounds: usize, epsilon: f64) -> Result<DynamicsOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut inst = instance.clone();
    let mut ranking = inst.ranking()?;
    let mut moved = Vec::new();
    for round in 1..=max_rounds {
        moved.clear();
        for i in 0..inst.len() {
            let next = inst.best_response(&ranking, i, epsilon)?;
            let prev = inst.efforts[i];
            if next != prev {
                moved.push(i);
                inst.efforts[i] = next;
                ranking.remove(i);
                let score = inst.score_of(i, next)?;
                ranking.insert(i, score);
            }
        }
        if moved.is_empty() {
            return Ok(DynamicsOutcome {
                converged: true,
                rounds: round,
                instance: inst,
                cycling_agents: Vec::new(),
            });
        }
    }
    Ok(DynamicsOutcome {
        converged: false,
        rounds: max_rounds,
        instance: inst,
        cycling_agents: moved,
    })
}

/// Every effort profile on the grid that is an `epsilon`-equilibrium.
/// Exhaustive, so only usable for a handful of agents and a coarse grid.
pub fn enumerate_equilibria(instance: &DiscreteInstance, epsilon: f64) -> Result<Vec<Vec<f64>>> {
    let n = instance.len();
    let len = instance.grid.len();
    let total = (len as f64).powi(n as i32);
    if total > 1e7 {
        return Err(Error::Config(format!("{total} profiles is too many to enumerate")));
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let mut probe = instance.clone();
        probe.efforts = idx.iter().map(|&k| instance.grid.point(k)).collect();
        if probe.certify(epsilon)?.certified {
            out.push(probe.efforts);
        }
        let mut d = 0;
        loop {
            if d == n {
                return Ok(out);
            }
            idx[d] += 1;
            if idx[d] < len {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Default certification tolerance `5/N`.
pub fn default_epsilon(n: usize) -> f64 {
    5.0 / n as f64
}
