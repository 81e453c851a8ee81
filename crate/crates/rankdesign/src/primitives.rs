//! Parametric monotone scalar functions.
//!
//! A [`FunctionSpec`] stands for one of the three model functions: the skill
//! quantile `f`, the effort transfer `g` or the effort cost `p`. Every family
//! is strictly increasing on its domain, so each has a well defined inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when a caller evaluates just outside a closed domain.
const DOMAIN_SLACK: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

/// Which model function a spec plays. Roles carry shape requirements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SkillQuantile,
    EffortTransfer,
    CostFunction,
}

/// Function families.
///
/// * `Power`: `scale * x^exponent` on `[0, inf)`.
/// * `AffinePower`: `scale * x^exponent + offset` on `[0, inf)`.
/// * `PiecewiseMonotone`: linear interpolation through the knots, defined on
///   `[x_first, x_last]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Power {
        scale: f64,
        exponent: f64,
    },
    AffinePower {
        scale: f64,
        exponent: f64,
        offset: f64,
    },
    PiecewiseMonotone {
        knots: Vec<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

/// A derivative value, flagged when it came from a finite difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub approximate: bool,
}

impl FunctionSpec {
    pub fn power(scale: f64, exponent: f64) -> Self {
        Self {
            family: Family::Power { scale, exponent },
            role: None,
        }
    }

    pub fn affine_power(scale: f64, exponent: f64, offset: f64) -> Self {
        Self {
            family: Family::AffinePower {
                scale,
                exponent,
                offset,
            },
            role: None,
        }
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Self {
        Self {
            family: Family::PiecewiseMonotone { knots },
            role: None,
        }
    }

    /// `f(x) = x` on `[0, 1]`.
    pub fn identity() -> Self {
        Self::power(1.0, 1.0)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    /// Checks parameter ranges and the shape implied by the role.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFunction(msg));
        match &self.family {
            Family::Power { scale, exponent }
            | Family::AffinePower {
                scale, exponent, ..
            } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return bad(format!("scale must be positive and finite, got {scale}"));
                }
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return bad(format!(
                        "exponent must be positive and finite, got {exponent}"
                    ));
                }
                if let Family::AffinePower { offset, .. } = &self.family {
                    if !offset.is_finite() {
                        return bad(format!("offset must be finite, got {offset}"));
                    }
                }
                match self.role {
                    Some(Role::EffortTransfer) if *exponent > 1.0 => {
                        return bad(format!(
                            "effort transfer must be concave (exponent <= 1), got {exponent}"
                        ))
                    }
                    Some(Role::CostFunction) if *exponent <= 1.0 => {
                        return bad(format!(
                            "cost function must be strictly convex (exponent > 1), got {exponent}"
                        ))
                    }
                    _ => {}
                }
            }
            Family::PiecewiseMonotone { knots } => {
                if knots.len() < 2 {
                    return bad("piecewise function needs at least two knots".into());
                }
                for (i, w) in knots.windows(2).enumerate() {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
                        return bad(format!("knot {i} is not finite"));
                    }
                    if x1 <= x0 {
                        return bad(format!("knot x values must increase strictly at knot {}", i + 1));
                    }
                    if y1 <= y0 {
                        return bad(format!("knot y values must increase strictly at knot {}", i + 1));
                    }
                }
                let slopes = piecewise_slopes(knots);
                for (i, w) in slopes.windows(2).enumerate() {
                    match self.role {
                        Some(Role::EffortTransfer) if w[1] > w[0] => {
                            return bad(format!(
                                "effort transfer must be concave; slope increases after knot {}",
                                i + 1
                            ))
                        }
                        Some(Role::CostFunction) if w[1] <= w[0] => {
                            return bad(format!(
                                "cost function must be strictly convex; slope does not increase after knot {}",
                                i + 1
                            ))
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Closed domain `(lo, hi)`; `hi` may be infinite.
    pub fn domain(&self) -> (f64, f64) {
        match &self.family {
            Family::Power { .. } | Family::AffinePower { .. } => (0.0, f64::INFINITY),
            Family::PiecewiseMonotone { knots } => (knots[0].0, knots[knots.len() - 1].0),
        }
    }

    /// Image of the domain, `(f(lo), f(hi))`.
    pub fn image(&self) -> (f64, f64) {
        match &self.family {
            Family::Power { .. } => (0.0, f64::INFINITY),
            Family::AffinePower { offset, .. } => (*offset, f64::INFINITY),
            Family::PiecewiseMonotone { knots } => (knots[0].1, knots[knots.len() - 1].1),
        }
    }

    /// Interior points where the function has a kink.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.family {
            Family::PiecewiseMonotone { knots } if knots.len() > 2 => {
                knots[1..knots.len() - 1].iter().map(|k| k.0).collect()
            }
            _ => Vec::new(),
        }
    }

    fn check_domain(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if x.is_nan() || x < lo - DOMAIN_SLACK || x > hi + DOMAIN_SLACK {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: format!("[{lo}, {hi}]"),
            });
        }
        Ok(x.clamp(lo, hi))
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let x = self.check_domain(x)?;
        Ok(self.eval_in_domain(x))
    }

    fn eval_in_domain(&self, x: f64) -> f64 {
        match &self.family {
            Family::Power { scale, exponent } => scale * x.powf(*exponent),
            Family::AffinePower {
                scale,
                exponent,
                offset,
            } => scale * x.powf(*exponent) + offset,
            Family::PiecewiseMonotone { knots } => {
                let j = knots.partition_point(|k| k.0 <= x).clamp(1, knots.len() - 1);
                let ((x0, y0), (x1, y1)) = (knots[j - 1], knots[j]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Inverse function. Analytic for the power families, bisection otherwise.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.image();
        let slack = DOMAIN_SLACK * y.abs().max(1.0);
        if y.is_nan() || y < lo - slack || y > hi + slack {
            return Err(Error::Range { value: y, lo, hi });
        }
        let y = y.clamp(lo, hi);
        Ok(match &self.family {
            Family::Power { scale, exponent } => (y / scale).powf(exponent.recip()),
            Family::AffinePower {
                scale,
                exponent,
                offset,
            } => ((y - offset) / scale).max(0.0).powf(exponent.recip()),
            Family::PiecewiseMonotone { .. } => {
                // Bisect down to adjacent floats, then keep the better end.
                let (mut a, mut b) = self.domain();
                for _ in 0..BISECTION_MAX_ITER {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if self.eval_in_domain(m) < y {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                if (self.eval_in_domain(a) - y).abs() <= (self.eval_in_domain(b) - y).abs() {
                    a
                } else {
                    b
                }
            }
        })
    }

    pub fn derivative(&self, x: f64) -> Result<Derivative> {
        let x = self.check_domain(x)?;
        let (lo, hi) = self.domain();
        let analytic = |scale: f64, exponent: f64| {
            if x > lo || exponent >= 1.0 {
                Some(scale * exponent * x.powf(exponent - 1.0))
            } else {
                None
            }
        };
        let exact = match &self.family {
            Family::Power { scale, exponent }
            | Family::AffinePower {
                scale, exponent, ..
            } => analytic(*scale, *exponent),
            Family::PiecewiseMonotone { .. } => None,
        };
        if let Some(value) = exact {
            return Ok(Derivative {
                value,
                approximate: false,
            });
        }
        let h = 1e-6 * x.abs().max(1.0);
        let value = if x - h < lo {
            (self.eval_in_domain(x + h) - self.eval_in_domain(x)) / h
        } else if x + h > hi {
            (self.eval_in_domain(x) - self.eval_in_domain(x - h)) / h
        } else {
            (self.eval_in_domain(x + h) - self.eval_in_domain(x - h)) / (2.0 * h)
        };
        Ok(Derivative {
            value,
            approximate: true,
        })
    }
}

fn piecewise_slopes(knots: &[(f64, f64)]) -> Vec<f64> {
    knots
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect()
}

/// The model functions of one applicant population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub p: FunctionSpec,
    #[serde(default)]
    pub e0: f64,
}

impl PopulationSpec {
    /// Builds and validates a population, assigning roles to the functions.
    pub fn new(f: FunctionSpec, g: FunctionSpec, p: FunctionSpec, e0: f64) -> Result<Self> {
        let pop = Self { f, g, p, e0 };
        pop.validate()?;
        Ok(pop)
    }

    pub fn validate(&self) -> Result<()> {
        let roles = [
            (&self.f, Role::SkillQuantile, "f"),
            (&self.g, Role::EffortTransfer, "g"),
            (&self.p, Role::CostFunction, "p"),
        ];
        for (spec, role, name) in roles {
            if let Some(r) = spec.role {
                if r != role {
                    return Err(Error::InvalidFunction(format!(
                        "{name} has role {r:?}, expected {role:?}"
                    )));
                }
            }
            spec.clone()
                .with_role(role)
                .validate()
                .map_err(|e| Error::InvalidFunction(format!("{name}: {e}")))?;
        }
        if !(self.e0.is_finite() && self.e0 >= 0.0) {
            return Err(Error::InvalidFunction(format!(
                "e0 must be a nonnegative real, got {}",
                self.e0
            )));
        }
        let (flo, fhi) = self.f.domain();
        if flo > 0.0 || fhi < 1.0 {
            return Err(Error::InvalidFunction(format!(
                "f must be defined on [0, 1], domain is [{flo}, {fhi}]"
            )));
        }
        if self.f.evaluate(0.0)? < 0.0 {
            return Err(Error::InvalidFunction("f(0) must be nonnegative".into()));
        }
        let p0 = self.p.evaluate(self.e0)?;
        if p0.abs() > 1e-12 {
            return Err(Error::InvalidFunction(format!(
                "cost must vanish at e0, got p({}) = {p0}",
                self.e0
            )));
        }
        self.g.evaluate(self.e0)?;
        Ok(())
    }

    /// Quadratic-cost, square-root-transfer population with a linear quantile
    /// `f(x) = slope * x`.
    pub fn linear_sqrt_quadratic(slope: f64) -> Self {
        Self {
            f: FunctionSpec::power(slope, 1.0),
            g: FunctionSpec::power(1.0, 0.5),
            p: FunctionSpec::power(1.0, 2.0),
            e0: 0.0,
        }
    }

    pub fn f(&self, theta: f64) -> Result<f64> {
        self.f.evaluate(theta)
    }

    pub fn g(&self, e: f64) -> Result<f64> {
        self.g.evaluate(e)
    }

    pub fn p(&self, e: f64) -> Result<f64> {
        self.p.evaluate(e)
    }

    /// Baseline score factor `g(e0)`.
    pub fn g_e0(&self) -> f64 {
        self.g.evaluate(self.e0).unwrap_or(0.0)
    }
}
