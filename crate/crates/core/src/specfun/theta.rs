//! Jacobi `theta_3(z | q) = 1 + 2 sum q^{n^2} cos(2 n z)` for real `z` and
//! `0 <= q < 1`.
//!
//! The q-series converges fast for small nome. For `q` close to one the
//! Poisson-summed (wrapped Gaussian) form
//! `sqrt(pi/tau) sum_m exp(-(z + m pi)^2 / tau)`, `q = e^{-tau}`, is used instead.

use std::f64::consts::PI;

use super::Tolerance;
use crate::error::{domain, Error, Result};

/// Nome above which the dual representation is used.
pub const THETA_DUAL_SWITCH: f64 = 0.9;

pub fn theta3(z: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check(z, q)?;
    if q > THETA_DUAL_SWITCH {
        theta3_dual(z, q, tol)
    } else {
        theta3_series(z, q, tol)
    }
}

/// The defining q-series.
pub fn theta3_series(z: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check(z, q)?;
    if q == 0.0 {
        return Ok(1.0);
    }
    let ln_q = q.ln();
    let mut sum = 1.0;
    for n in 1..tol.max_terms {
        let nf = n as f64;
        let weight = (ln_q * nf * nf).exp();
        sum += 2.0 * weight * (2.0 * nf * z).cos();
        // remaining weights are bounded by a geometric tail with ratio q^{2n+1}
        let ratio = (ln_q * (2.0 * nf + 1.0)).exp();
        let tail = 2.0 * weight * ratio / (1.0 - ratio);
        if tol.converged(2.0 * weight, tail, sum) {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        what: "theta_3 q-series",
        terms: tol.max_terms,
    })
}

/// Wrapped-Gaussian (Poisson dual) form; fast for `q` near one.
pub fn theta3_dual(z: f64, q: f64, tol: &Tolerance) -> Result<f64> {
    check(z, q)?;
    if q == 0.0 {
        return Ok(1.0);
    }
    let tau = -q.ln();
    // theta_3 has period pi in z
    let z0 = z - PI * (z / PI).round();
    let gauss = |m: f64| (-(z0 + m * PI).powi(2) / tau).exp();
    let mut sum = gauss(0.0);
    for m in 1..tol.max_terms {
        let mf = m as f64;
        let pair = gauss(mf) + gauss(-mf);
        sum += pair;
        // |z0| <= pi/2, so the terms beyond m decay at least like a Gaussian
        let tail = 2.0 * (-((mf + 0.5) * PI).powi(2) / tau).exp();
        if tol.converged(pair, tail, sum) {
            return Ok((PI / tau).sqrt() * sum);
        }
    }
    Err(Error::NonConvergence {
        what: "theta_3 dual sum",
        terms: tol.max_terms,
    })
}

fn check(z: f64, q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(domain(format!("theta_3 nome must lie in [0, 1), got {q}")));
    }
    if !z.is_finite() {
        return Err(domain("theta_3 argument must be finite"));
    }
    Ok(())
}
