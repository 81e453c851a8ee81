//! Step reward functions over post-effort rank.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CAPACITY_TOL: f64 = 1e-12;

/// A K-level step function: rank band `[c_k, c_{k+1})` earns `levels[k]`.
///
/// `cutpoints` holds `c_1..c_{K-1}`; `c_0 = 0` and `c_K = 1` are implicit and
/// the top band is closed at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardPolicy {
    pub levels: Vec<f64>,
    pub cutpoints: Vec<f64>,
    pub capacity: f64,
}

/// One violated invariant found by [`RewardPolicy::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    LevelCount { levels: usize, cutpoints: usize },
    LevelOutOfRange { index: usize, value: f64 },
    LevelsNotIncreasing { index: usize, previous: f64, value: f64 },
    CutpointOutOfRange { index: usize, value: f64 },
    CutpointsNotIncreasing { index: usize, previous: f64, value: f64 },
    CapacityOutOfRange { value: f64 },
    CapacityMismatch { expected: f64, actual: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LevelCount { levels, cutpoints } => write!(
                f,
                "{levels} levels need {} cutpoints, got {cutpoints}",
                levels.saturating_sub(1)
            ),
            Violation::LevelOutOfRange { index, value } => {
                write!(f, "level {index} = {value} is outside [0, 1]")
            }
            Violation::LevelsNotIncreasing {
                index,
                previous,
                value,
            } => write!(
                f,
                "levels not increasing: level {index} = {value} <= {previous}"
            ),
            Violation::CutpointOutOfRange { index, value } => {
                write!(f, "cutpoint {index} = {value} is outside (0, 1)")
            }
            Violation::CutpointsNotIncreasing {
                index,
                previous,
                value,
            } => write!(
                f,
                "cutpoints not increasing: cutpoint {index} = {value} <= {previous}"
            ),
            Violation::CapacityOutOfRange { value } => {
                write!(f, "capacity {value} is outside (0, 1)")
            }
            Violation::CapacityMismatch { expected, actual } => write!(
                f,
                "expected reward {actual} does not match capacity {expected}"
            ),
        }
    }
}

impl RewardPolicy {
    /// Builds a policy and rejects it if any invariant fails.
    pub fn new(levels: Vec<f64>, cutpoints: Vec<f64>, capacity: f64) -> Result<Self> {
        let policy = Self {
            levels,
            cutpoints,
            capacity,
        };
        policy.ensure_valid()?;
        Ok(policy)
    }

    /// Every violated invariant, in a fixed order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.levels.is_empty() || self.cutpoints.len() + 1 != self.levels.len() {
            out.push(Violation::LevelCount {
                levels: self.levels.len(),
                cutpoints: self.cutpoints.len(),
            });
        }
        for (index, &value) in self.levels.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                out.push(Violation::LevelOutOfRange { index, value });
            }
            if index > 0 && value <= self.levels[index - 1] {
                out.push(Violation::LevelsNotIncreasing {
                    index,
                    previous: self.levels[index - 1],
                    value,
                });
            }
        }
        for (i, &value) in self.cutpoints.iter().enumerate() {
            let index = i + 1;
            if !(value > 0.0 && value < 1.0) {
                out.push(Violation::CutpointOutOfRange { index, value });
            }
            if i > 0 && value <= self.cutpoints[i - 1] {
                out.push(Violation::CutpointsNotIncreasing {
                    index,
                    previous: self.cutpoints[i - 1],
                    value,
                });
            }
        }
        if !(self.capacity > 0.0 && self.capacity < 1.0) {
            out.push(Violation::CapacityOutOfRange {
                value: self.capacity,
            });
        }
        if out.is_empty() {
            let actual = self.expected_reward();
            if (actual - self.capacity).abs() > CAPACITY_TOL {
                out.push(Violation::CapacityMismatch {
                    expected: self.capacity,
                    actual,
                });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidPolicy(msg.join("; ")))
        }
    }

    /// Σ ℓ_k (c_{k+1} − c_k).
    pub fn expected_reward(&self) -> f64 {
        (0..self.num_bands())
            .map(|k| {
                let (lo, hi) = self.band_interval(k);
                self.levels[k] * (hi - lo)
            })
            .sum()
    }

    pub fn num_bands(&self) -> usize {
        self.levels.len()
    }

    /// `[c_k, c_{k+1})` for band `k`.
    pub fn band_interval(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { self.cutpoints[k - 1] };
        let hi = self.cutpoints.get(k).copied().unwrap_or(1.0);
        (lo, hi)
    }

    /// Band containing rank `theta`; callers must pass `theta` in `[0, 1]`.
    pub fn band_of(&self, theta: f64) -> usize {
        self.cutpoints.partition_point(|&c| c <= theta)
    }

    pub fn reward_at(&self, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
                domain: "[0, 1]".into(),
            });
        }
        Ok(self.levels[self.band_of(theta)])
    }

    pub fn max_level(&self) -> f64 {
        self.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Two-level policy: reward 0 below `c`, `ρ/(1−c)` from `c` on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelPolicy {
    pub c: f64,
    pub capacity: f64,
}

impl TwoLevelPolicy {
    pub fn new(c: f64, capacity: f64) -> Result<Self> {
        if !(capacity > 0.0 && capacity < 1.0) {
            return Err(Error::Capacity(format!(
                "capacity must lie in (0, 1), got {capacity}"
            )));
        }
        if !(0.0..1.0).contains(&c) {
            return Err(Error::Capacity(format!("cutpoint must lie in [0, 1), got {c}")));
        }
        if c > 1.0 - capacity + CAPACITY_TOL {
            return Err(Error::Capacity(format!(
                "cutpoint {c} exceeds 1 - capacity = {}; the admitted level would exceed 1",
                1.0 - capacity
            )));
        }
        Ok(Self { c, capacity })
    }

    /// Admitted level `ℓ_1`, clamped to 1 against rounding at `c = 1 − ρ`.
    pub fn level1(&self) -> f64 {
        if self.c == 0.0 {
            self.capacity
        } else {
            (self.capacity / (1.0 - self.c)).min(1.0)
        }
    }

    pub fn is_pure_randomization(&self) -> bool {
        self.c == 0.0
    }

    pub fn to_policy(&self) -> RewardPolicy {
        if self.is_pure_randomization() {
            RewardPolicy {
                levels: vec![self.capacity],
                cutpoints: vec![],
                capacity: self.capacity,
            }
        } else {
            RewardPolicy {
                levels: vec![0.0, self.level1()],
                cutpoints: vec![self.c],
                capacity: self.capacity,
            }
        }
    }
}

/// Two-level shorthand constructor; `c = 0` collapses to one level.
pub fn two_level(c: f64, capacity: f64) -> Result<RewardPolicy> {
    Ok(TwoLevelPolicy::new(c, capacity)?.to_policy())
}

/// JSON form of a policy: either explicit levels and cutpoints or the
/// `{"two_level": {"c": .., "capacity": ..}}` shorthand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    TwoLevel { two_level: TwoLevelPolicy },
    Explicit(RewardPolicy),
}

impl PolicySpec {
    pub fn resolve(&self) -> Result<RewardPolicy> {
        match self {
            PolicySpec::TwoLevel { two_level: t } => two_level(t.c, t.capacity),
            PolicySpec::Explicit(p) => {
                p.ensure_valid()?;
                Ok(p.clone())
            }
        }
    }

    pub fn as_two_level(&self) -> Option<TwoLevelPolicy> {
        match self {
            PolicySpec::TwoLevel { two_level } => Some(*two_level),
            PolicySpec::Explicit(p) => match (p.levels.as_slice(), p.cutpoints.as_slice()) {
                ([_], []) => Some(TwoLevelPolicy {
                    c: 0.0,
                    capacity: p.capacity,
                }),
                ([l0, _], [c]) if *l0 == 0.0 => Some(TwoLevelPolicy {
                    c: *c,
                    capacity: p.capacity,
                }),
                _ => None,
            },
        }
    }
}
