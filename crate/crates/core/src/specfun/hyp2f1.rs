//! `2F1(1, 1/2 - H; H + 3/2; z)` for `0 < H < 3/2`, `0 <= z <= 1`.
//!
//! Direct power series for `z <= 0.8`. Above that the `z -> 1 - z` connection
//! formula is used; for this family the second connection term collapses to
//! `(1-z)^{2H} (z)^{-H-1/2}` times a gamma ratio, leaving a single
//! geometrically convergent series in `1 - z`.

use super::gamma::gamma_real;
use super::Tolerance;
use crate::error::{domain, Error, Result};

const SERIES_LIMIT: f64 = 0.8;
// Width of the band around H = 1 where the connection formula cancels
// catastrophically (both terms carry a 1/(1-H) pole).
const DEGENERATE_BAND: f64 = 1e-4;

/// The restricted Gauss function with explicit parameters.
///
/// The triple must be `(1, 1/2 - H, H + 3/2)` for some `0 < H < 3/2`.
pub fn hyp2f1_restricted(a: f64, b: f64, c: f64, z: f64, tol: &Tolerance) -> Result<f64> {
    let h = c - 1.5;
    let shape_ok = a == 1.0 && (b - (0.5 - h)).abs() <= 1e-12 * (1.0 + h.abs());
    if !shape_ok {
        return Err(domain(format!(
            "2F1({a}, {b}; {c}; z) is outside the supported family (1, 1/2-H; H+3/2)"
        )));
    }
    hyp2f1_fbm(h, z, tol)
}

/// `2F1(1, 1/2 - H; H + 3/2; z)` indexed by the Hurst exponent.
pub fn hyp2f1_fbm(h: f64, z: f64, tol: &Tolerance) -> Result<f64> {
    if !(h > 0.0 && h < 1.5) {
        return Err(domain(format!("Hurst exponent {h} outside (0, 3/2)")));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(domain(format!("2F1 argument {z} outside [0, 1]")));
    }
    if z == 0.0 || h == 0.5 {
        return Ok(1.0);
    }
    if z == 1.0 {
        // Gauss summation
        return Ok((h + 0.5) / (2.0 * h));
    }
    if h == 1.0 && z > 0.5 {
        return Ok(flicker_closed_form(z));
    }
    if z <= SERIES_LIMIT {
        return power_series(h, z, tol);
    }
    if (h - 1.0).abs() < DEGENERATE_BAND {
        // Quadratic interpolation through H = 1 - d, 1, 1 + d; the function is
        // analytic in H, the connection formula is not usable this close.
        let d = DEGENERATE_BAND;
        let lo = connection(1.0 - d, z, tol)?;
        let mid = flicker_closed_form(z);
        let hi = connection(1.0 + d, z, tol)?;
        let u = (h - 1.0) / d;
        return Ok(mid + 0.5 * u * (hi - lo) + 0.5 * u * u * (hi - 2.0 * mid + lo));
    }
    connection(h, z, tol)
}

/// `2F1(-1/2, 1; 5/2; z)` in elementary functions.
fn flicker_closed_form(z: f64) -> f64 {
    let r = z.sqrt();
    3.0 * (r * (z + 1.0) - (z - 1.0).powi(2) * r.atanh()) / (8.0 * z * r)
}

fn power_series(h: f64, z: f64, tol: &Tolerance) -> Result<f64> {
    // terms (b)_n / (c)_n z^n since (1)_n = n!
    let b = 0.5 - h;
    let c = h + 1.5;
    geometric_series(b, c, z, tol, "2F1 power series")
}

/// `sum_n (b)_n / (c)_n w^n`, i.e. `2F1(1, b; c; w)`.
fn geometric_series(b: f64, c: f64, w: f64, tol: &Tolerance, what: &'static str) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..tol.max_terms {
        let nf = n as f64;
        let ratio = (b + nf) / (c + nf) * w;
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
        what,
        terms: tol.max_terms,
    })
}

/// Connection formula around z = 1 (valid for 2H not an integer).
fn connection(h: f64, z: f64, tol: &Tolerance) -> Result<f64> {
    let w = 1.0 - z;
    let first = (h + 0.5) / (2.0 * h)
        * geometric_series(0.5 - h, 1.0 - 2.0 * h, w, tol, "2F1 connection series")?;
    let coef = gamma_real(h + 1.5) * gamma_real(-2.0 * h) / gamma_real(0.5 - h);
    let second = coef * w.powf(2.0 * h) * z.powf(-h - 0.5);
    Ok(first + second)
}
