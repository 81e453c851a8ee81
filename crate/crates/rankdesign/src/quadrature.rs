//! Adaptive Simpson quadrature over piecewise-smooth integrands.

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const MAX_DEPTH: usize = 20;
const ABS_FLOOR: f64 = 1e-15;

/// An integral estimate and its Richardson error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// Fails with [`Error::Quadrature`] if some panel still misses its tolerance
/// after [`MAX_DEPTH`] bisections; the error carries the partial estimate.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> Result<f64>,
{
    if b <= a {
        return Ok(Integral::default());
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Scale the tolerance with a composite estimate so that a lucky coarse
    // panel cannot shrink it to nothing.
    let mut probe = 0.0;
    for i in 0..8 {
        let x = a + (b - a) * (i as f64 + 0.5) / 8.0;
        probe += f(x)?.abs();
    }
    let scale = (probe / 8.0 * (b - a)).max(whole.abs());
    let eps = (rel_tol * scale).max(ABS_FLOOR);
    let mut converged = true;
    let panel = Panel { a, b, fa, fm, fb, whole };
    let out = refine(&f, panel, eps, MAX_DEPTH, &mut converged)?;
    if converged {
        Ok(out)
    } else {
        Err(Error::Quadrature {
            lo: a,
            hi: b,
            partial: out.value,
            error_estimate: out.error,
        })
    }
}

fn refine<F>(f: &F, p: Panel, eps: f64, depth: usize, converged: &mut bool) -> Result<Integral>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (p.a + p.b);
    let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let h = p.b - p.a;
    let left = h / 12.0 * (p.fa + 4.0 * flm + p.fm);
    let right = h / 12.0 * (p.fm + 4.0 * frm + p.fb);
    let diff = left + right - p.whole;
    if diff.abs() <= 15.0 * eps {
        return Ok(Integral {
            value: left + right + diff / 15.0,
            error: diff.abs() / 15.0,
        });
    }
    if depth == 0 {
        *converged = false;
        return Ok(Integral {
            value: left + right + diff / 15.0,
            error: diff.abs() / 15.0,
        });
    }
    let l = Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left };
    let r = Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right };
    Ok(refine(f, l, 0.5 * eps, depth - 1, converged)? + refine(f, r, 0.5 * eps, depth - 1, converged)?)
}

/// Integrates over `[a, b]` split at every breakpoint strictly inside it.
pub fn integrate_piecewise<F>(f: F, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut nodes = vec![a];
    nodes.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    nodes.push(b);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut total = Integral::default();
    for w in nodes.windows(2) {
        total = total + integrate(&f, w[0], w[1], rel_tol)?;
    }
    Ok(total)
}
