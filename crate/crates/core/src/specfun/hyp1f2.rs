//! `1F2(a; b1, b2; -x^2)` for the two parameter families of the FBM
//! Wigner-Ville spectra, with `a = H + 1/2`:
//!
//! * instantaneous: `(a; a + 1/2, a + 1)`
//! * time-averaged: `(a; a + 1, a + 3/2)`
//!
//! Below the crossover the Taylor series is summed. Its terms grow like
//! `e^{2x}` before they decay, so outside a small neighbourhood of the origin
//! the sum is carried out in binary fixed point on big integers with enough
//! guard bits to absorb the cancellation. Above the crossover the large
//! argument expansion is used: an algebraic part (a terminating `3F0` for both
//! families) plus an oscillatory part `x^{2X} cos(2x + pi X - k pi/2)` series.

use std::f64::consts::{LOG2_E, PI};

use num_bigint::BigInt;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use super::gamma::gamma_real;
use super::Tolerance;
use crate::error::{domain, Error, Result};

/// `sqrt(-x)` above which the asymptotic branch is used.
pub const DEFAULT_CROSSOVER: f64 = 30.0;

// Plain f64 summation is used only while the largest term stays O(e^4).
const F64_SERIES_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Series,
    Asymptotic,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Series => "series",
            Branch::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyp1f2 {
    pub value: f64,
    pub branch: Branch,
    /// Set when the asymptotic expansion started diverging before its terms
    /// dropped below tolerance (only possible with a lowered crossover).
    pub accuracy_degraded: bool,
}

/// `1F2(a; b1, b2; x)` for `x <= 0` with the default crossover.
pub fn hyp1f2(a: f64, b1: f64, b2: f64, x: f64, tol: &Tolerance) -> Result<Hyp1f2> {
    hyp1f2_with_crossover(a, b1, b2, x, tol, DEFAULT_CROSSOVER)
}

pub fn hyp1f2_with_crossover(
    a: f64,
    b1: f64,
    b2: f64,
    x: f64,
    tol: &Tolerance,
    crossover: f64,
) -> Result<Hyp1f2> {
    check_family(a, b1, b2, x)?;
    if !(crossover > 0.0) {
        return Err(domain(format!(
            "crossover must be positive, got {crossover}"
        )));
    }
    let r = (-x).sqrt();
    if r > crossover {
        let (value, degraded) = asymptotic(a, b1, b2, r, tol)?;
        Ok(Hyp1f2 {
            value,
            branch: Branch::Asymptotic,
            accuracy_degraded: degraded,
        })
    } else {
        Ok(Hyp1f2 {
            value: series(a, b1, b2, x, tol)?,
            branch: Branch::Series,
            accuracy_degraded: false,
        })
    }
}

/// Series branch regardless of the argument size.
pub fn hyp1f2_series(a: f64, b1: f64, b2: f64, x: f64, tol: &Tolerance) -> Result<f64> {
    check_family(a, b1, b2, x)?;
    series(a, b1, b2, x, tol)
}

/// Large-argument branch regardless of the argument size. The flag reports
/// whether the expansion was cut at its smallest term before reaching
/// tolerance.
pub fn hyp1f2_asymptotic(a: f64, b1: f64, b2: f64, x: f64, tol: &Tolerance) -> Result<(f64, bool)> {
    check_family(a, b1, b2, x)?;
    if x == 0.0 {
        return Err(domain("asymptotic 1F2 branch needs a nonzero argument"));
    }
    asymptotic(a, b1, b2, (-x).sqrt(), tol)
}

fn check_family(a: f64, b1: f64, b2: f64, x: f64) -> Result<()> {
    if !(x <= 0.0) || !x.is_finite() {
        return Err(domain(format!(
            "1F2 argument must be finite and <= 0, got {x}"
        )));
    }
    let h = a - 0.5;
    if !(h > 0.0 && h < 1.5) {
        return Err(domain(format!(
            "1F2 numerator parameter {a} gives H outside (0, 3/2)"
        )));
    }
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-12 * (1.0 + v.abs());
    let instantaneous = close(b1, a + 0.5) && close(b2, a + 1.0);
    let averaged = close(b1, a + 1.0) && close(b2, a + 1.5);
    if instantaneous || averaged {
        Ok(())
    } else {
        Err(domain(format!(
            "1F2({a}; {b1}, {b2}) is outside the supported spectral families"
        )))
    }
}

fn series(a: f64, b1: f64, b2: f64, x: f64, tol: &Tolerance) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    if (-x).sqrt() <= F64_SERIES_LIMIT {
        f64_series(a, b1, b2, x, tol)
    } else {
        fixed_point_series(a, b1, b2, x, tol)
    }
}

fn f64_series(a: f64, b1: f64, b2: f64, x: f64, tol: &Tolerance) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..tol.max_terms {
        let nf = n as f64;
        let ratio = (a + nf) * x / ((nf + 1.0) * (b1 + nf) * (b2 + nf));
        term *= ratio;
        sum += term;
        let r = ratio.abs();
        let tail = if r < 1.0 {
            term.abs() * r / (1.0 - r)
        } else {
            f64::INFINITY
        };
        if term == 0.0 || tol.converged(term, tail, sum) {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        what: "1F2 series",
        terms: tol.max_terms,
    })
}

/// Exact dyadic decomposition `v = m * 2^e`.
fn dyadic(v: f64) -> (BigInt, i32) {
    let (mantissa, exponent, sign) = v.integer_decode();
    let m = BigInt::from(mantissa) * BigInt::from(sign);
    (m, exponent as i32)
}

fn fixed_point_series(a: f64, b1: f64, b2: f64, x: f64, tol: &Tolerance) -> Result<f64> {
    let r = (-x).sqrt();
    // Largest term ~ e^{2r}; the result can be as small as r^{-2a}. Keep
    // 64 guard bits beyond both.
    let guard = 2.0 * r * LOG2_E + 2.0 * a * r.log2().max(0.0) + 64.0;
    let bits = guard.ceil() as usize;

    let parts = [dyadic(a), dyadic(b1), dyadic(b2), dyadic(x)];
    let shift = parts.iter().map(|(_, e)| -e).max().unwrap_or(0).max(0);
    let scaled: Vec<BigInt> = parts
        .iter()
        .map(|(m, e)| {
            if m.is_zero() {
                BigInt::zero()
            } else {
                m << ((e + shift) as usize)
            }
        })
        .collect();
    let (ai, b1i, b2i, xi) = (&scaled[0], &scaled[1], &scaled[2], &scaled[3]);
    let unit = BigInt::one() << (shift as usize);

    let mut term = BigInt::one() << bits;
    let mut sum = term.clone();
    for n in 0..tol.max_terms {
        let nb = &unit * BigInt::from(n);
        let num = (ai + &nb) * xi;
        let den = (b1i + &nb) * (b2i + &nb) * BigInt::from(n + 1);
        term = term * num / den;
        if term.is_zero() {
            return Ok(to_f64_scaled(&sum, bits));
        }
        sum += &term;
        let nf = n as f64 + 1.0;
        let ratio = (a + nf) * r * r / ((nf + 1.0) * (b1 + nf) * (b2 + nf));
        // below 2^-bits the remaining tail cannot affect the f64 result
        if ratio < 0.5 && term.abs().bits() <= 1 {
            return Ok(to_f64_scaled(&sum, bits));
        }
    }
    Err(Error::NonConvergence {
        what: "1F2 fixed-point series",
        terms: tol.max_terms,
    })
}

fn to_f64_scaled(v: &BigInt, bits: usize) -> f64 {
    // Shift down to ~64 significant bits first so the conversion never
    // overflows, then apply the remaining power of two.
    let excess = (v.bits() as i64 - 64).max(0) as usize;
    let head = (v >> excess).to_f64().unwrap_or(f64::NAN);
    head * 2f64.powi(excess as i32 - bits as i32)
}

/// Returns `(value, degraded)`.
fn asymptotic(a: f64, b1: f64, b2: f64, r: f64, tol: &Tolerance) -> Result<(f64, bool)> {
    let chi = 0.5 * (a - b1 - b2 + 0.5);

    // Algebraic part: Gamma(b1)Gamma(b2)/(Gamma(b1-a)Gamma(b2-a)) r^{-2a}
    // * 3F0(a, a-b1+1, a-b2+1;; -1/r^2). The 3F0 terminates for both families.
    let alg_pref = gamma_real(b1) * gamma_real(b2) / (gamma_real(b1 - a) * gamma_real(b2 - a));
    let (p, q, s) = (a, a - b1 + 1.0, a - b2 + 1.0);
    let mut term = 1.0;
    let mut alg_sum = 1.0;
    let inv = -1.0 / (r * r);
    let mut degraded = false;
    for k in 0..tol.max_terms {
        let kf = k as f64;
        let next = term * (p + kf) * (q + kf) * (s + kf) / (kf + 1.0) * inv;
        if next == 0.0 {
            break;
        }
        if next.abs() >= term.abs() {
            degraded = true;
            break;
        }
        term = next;
        alg_sum += term;
        if term.abs() < tol.rel_tol * alg_sum.abs() {
            break;
        }
    }
    let algebraic = alg_pref * r.powf(-2.0 * a) * alg_sum;

    // Oscillatory part.
    let osc_pref =
        gamma_real(b1) * gamma_real(b2) / (gamma_real(a) * PI.sqrt()) * r.powf(2.0 * chi);
    let theta = PI * chi + 2.0 * r;
    let mut c_prev2 = 0.0;
    let mut c_prev = 1.0;
    let mut osc_sum = theta.cos();
    let c1 = 2.0 * (0.25 * (3.0 * a + b1 + b2 - 2.0) * (a - b1 - b2) + b1 * b2 - 3.0 / 16.0);
    let c2 = 2.0
        * (b1 * b2 + 0.25 * (a - b1 - b2) * (3.0 * a + b1 + b2 - 2.0) - 3.0 / 16.0).powi(2)
        + (-16.0 * (2.0 * a - 3.0) * b1 * b2
            + 4.0 * (a - b1 - b2) * (-8.0 * a * a + 11.0 * a + b1 + b2 - 2.0)
            - 3.0)
            / 16.0;
    let mut prev_mag = f64::INFINITY;
    let mut scale = 1.0;
    let mut converged = false;
    for k in 1..tol.max_terms {
        let kf = k as f64;
        let ck = match k {
            1 => c1,
            2 => c2,
            _ => {
                let u1 = 3.0 * kf * kf + (-6.0 * a + 2.0 * b1 + 2.0 * b2 - 4.0) * kf + 3.0 * a * a
                    - (b1 - b2).powi(2)
                    - 2.0 * a * (b1 + b2 - 2.0)
                    + 0.25;
                let u2 =
                    (kf - a + b1 - b2 - 0.5) * (kf - a - b1 + b2 - 0.5) * (kf - a + b1 + b2 - 2.5);
                (u1 * c_prev - u2 * c_prev2) / (2.0 * kf)
            }
        };
        c_prev2 = c_prev;
        c_prev = ck;
        scale /= 2.0 * r;
        let mag = (ck * scale).abs();
        if k > 5 && mag > prev_mag {
            break;
        }
        osc_sum += ck * scale * (theta - kf * PI / 2.0).cos();
        prev_mag = mag;
        // c_0 = 1 sets the scale of the oscillatory sum
        if mag < 0.1 * f64::EPSILON {
            converged = true;
            break;
        }
    }
    degraded |= !converged;
    Ok((algebraic + osc_pref * osc_sum, degraded))
}
