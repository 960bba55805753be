//! Preconditioned conjugate gradients for symmetric positive (semi)definite
//! operators on grid vectors.

use crate::error::{Error, Result};
use crate::reduce;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// With `zero_mean` set, the operator is assumed to annihilate constants
/// (pure periodic or pure Neumann); `b` must then have zero mean and every
/// iterate is kept in the zero-mean subspace.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    settings: CgSettings,
    zero_mean: bool,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = reduce::norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, rel_residual: 0.0 });
    }
    if zero_mean {
        reduce::subtract_mean(x);
    }
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    if zero_mean {
        reduce::subtract_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    if zero_mean {
        reduce::subtract_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = reduce::dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = reduce::norm2(&r) / bnorm;
    if rel <= settings.tol {
        return Ok(CgOutcome { iterations: 0, rel_residual: rel });
    }
    for it in 1..=settings.max_iter {
        apply(&p, &mut ap);
        let pap = reduce::dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::InnerSolveDiverged(format!(
                "non-positive curvature p·Ap = {pap:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = reduce::norm2(&r) / bnorm;
        if rel <= settings.tol {
            if zero_mean {
                reduce::subtract_mean(x);
            }
            return Ok(CgOutcome { iterations: it, rel_residual: rel });
        }
        precond(&r, &mut z);
        if zero_mean {
            reduce::subtract_mean(&mut z);
        }
        let rz_new = reduce::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: settings.max_iter, residual: rel })
}

pub fn identity(r: &[f64], z: &mut [f64]) {
    z.copy_from_slice(r);
}
