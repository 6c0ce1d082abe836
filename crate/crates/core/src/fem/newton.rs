//! Damped Newton iteration on assembled residual/Jacobian pairs.

use super::field::max_abs;
use super::sparse::{LuCache, SparseOp};
use crate::error::{FsiError, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Absolute tolerance on the max-norm of the residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Step halvings tried before accepting a non-decreasing step.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iters: 25, max_halvings: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `R(x) = 0` starting from `x`. `eval(x, with_jacobian)` returns the residual and,
/// when requested, the Jacobian. The iterate is updated in place; `cache` keeps the symbolic
/// factorization across calls with an unchanged Jacobian pattern.
pub fn newton_solve<F>(x: &mut [f64], opts: &NewtonOptions, cache: &mut LuCache, mut eval: F) -> Result<NewtonReport>
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<SparseOp>)>,
{
    let (mut r, mut jac) = eval(x, true)?;
    let mut rn = checked_norm(&r)?;
    for it in 0..opts.max_iters {
        if rn <= opts.tol {
            return Ok(NewtonReport { iterations: it, residual: rn });
        }
        let j = jac.take().ok_or_else(|| FsiError::Invalid("residual callback returned no Jacobian".into()))?;
        let lu = cache.factor(&j)?;
        let dx = lu.solve(&r)?;
        let base = x.to_vec();
        let mut s = 1.0;
        let mut accepted = None;
        for h in 0..=opts.max_halvings {
            for i in 0..x.len() {
                x[i] = base[i] - s * dx[i];
            }
            let (rt, _) = eval(x, false)?;
            let tn = max_abs(&rt);
            if tn.is_finite() && (tn < rn || h == opts.max_halvings) {
                accepted = Some(tn);
                break;
            }
            s *= 0.5;
        }
        if accepted.is_none_or(|t| !t.is_finite()) {
            return Err(FsiError::NonFinite);
        }
        let (r2, j2) = eval(x, true)?;
        r = r2;
        jac = j2;
        rn = checked_norm(&r)?;
    }
    if rn <= opts.tol {
        return Ok(NewtonReport { iterations: opts.max_iters, residual: rn });
    }
    Err(FsiError::NewtonFailed { iterations: opts.max_iters, residual: rn })
}

fn checked_norm(r: &[f64]) -> Result<f64> {
    let n = max_abs(r);
    if !n.is_finite() || r.iter().any(|v| !v.is_finite()) {
        return Err(FsiError::NonFinite);
    }
    Ok(n)
}
