//! Bits read off a noisy phase: wrapped-Gaussian laws, worst-case bias over
//! the attacker's phase offset, min-entropy, and sampling-interval sizing.
//!
//! A bit is `w(phase)` for a square wave of duty `alpha`: high while the phase
//! modulo `2 pi` lies in `[0, 2 pi alpha)`. Given a Gaussian posterior of
//! variance `sigma2`, shifting the offset slides that window over the wrapped
//! density. The largest achievable `P(b = 1)` is
//! `G(alpha) = (1/pi) int_0^{alpha pi} theta_3(y/2, e^{-sigma2/2}) dy`, reached
//! with the window centred on the mean; the largest `P(b = 0)` is `G(1 - alpha)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fbm::{NoiseMixture, OscillatorConfig};
use crate::leakage;
use crate::specfun::quad::{integrate_with_breaks, QuadOptions};
use crate::specfun::{normal_pdf, theta3_series, Tolerance, THETA_DUAL_SWITCH};

/// Absolute tolerance of the bias quadrature.
pub const BIAS_ABS_TOL: f64 = 1e-10;

/// `Y = X mod r` for `X ~ N(mu, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WrappedGaussian {
    pub mu: f64,
    pub sigma2: f64,
    pub period_r: f64,
}

impl WrappedGaussian {
    pub fn new(mu: f64, sigma2: f64, period_r: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(domain("mean must be finite"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain(format!(
                "variance must be finite and > 0, got {sigma2}"
            )));
        }
        if !(period_r > 0.0 && period_r.is_finite()) {
            return Err(domain(format!(
                "period must be finite and > 0, got {period_r}"
            )));
        }
        Ok(Self {
            mu,
            sigma2,
            period_r,
        })
    }

    /// Theta nome `exp(-2 pi^2 sigma2 / r^2)`.
    pub fn nome(&self) -> f64 {
        (-2.0 * PI * PI * self.sigma2 / (self.period_r * self.period_r)).exp()
    }
}

/// `p_Y(y) = r^{-1} theta_3(pi (mu - y) / r, q)`; the direct wrapped sum is
/// used once `q` exceeds the theta switch.
pub fn wrapped_gaussian_pdf(wg: &WrappedGaussian, y: f64) -> Result<f64> {
    if !(0.0..wg.period_r).contains(&y) {
        return Err(domain(format!("y = {y} outside [0, {})", wg.period_r)));
    }
    if wg.nome() > THETA_DUAL_SWITCH {
        Ok(wrapped_sum(wg, y))
    } else {
        wrapped_theta(wg, y)
    }
}

/// Theta form regardless of the nome.
pub fn wrapped_theta(wg: &WrappedGaussian, y: f64) -> Result<f64> {
    let r = wg.period_r;
    Ok(theta3_series(PI * (wg.mu - y) / r, wg.nome(), &Tolerance::default())? / r)
}

/// `sum_n N(y; mu + n r, sigma2)` over the images within 8 sigma of `y`.
pub fn wrapped_sum(wg: &WrappedGaussian, y: f64) -> f64 {
    let sigma = wg.sigma2.sqrt();
    let r = wg.period_r;
    let lo = ((y - wg.mu - 8.0 * sigma) / r).floor() as i64;
    let hi = ((y - wg.mu + 8.0 * sigma) / r).ceil() as i64;
    (lo..=hi)
        .map(|n| normal_pdf(y, wg.mu + n as f64 * r, sigma))
        .sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "duty cycle must lie in (0, 1), got {alpha}"
        )))
    }
}

/// `1 - G(beta) = (1/pi) int_{beta pi}^{pi} theta_3(y/2, e^{-sigma2/2}) dy`,
/// the mass outside the best window covering `beta` of the period.
///
/// Integrating the complement keeps full relative precision when the
/// window holds nearly everything, and the integrand peaks only at the
/// lower end.
fn outside_mass(sigma2: f64, beta: f64) -> Result<f64> {
    // (1/pi) theta_3(y/2, e^{-sigma2/2}) is twice the wrapped density at y
    let wg = WrappedGaussian::new(0.0, sigma2, 2.0 * PI)?;
    let start = beta * PI;
    let sigma = sigma2.sqrt();
    let mut breaks = vec![start];
    for k in [1.0, 4.0, 10.0, 20.0] {
        if start + k * sigma < PI {
            breaks.push(start + k * sigma);
        }
    }
    breaks.push(PI);
    let mut failure = None;
    let opts = QuadOptions {
        abs_tol: BIAS_ABS_TOL,
        rel_tol: 1e-12,
        ..QuadOptions::default()
    };
    let mass = integrate_with_breaks(
        |y| match wrapped_gaussian_pdf(&wg, y) {
            Ok(v) => 2.0 * v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &breaks,
        &opts,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(mass.clamp(0.0, 1.0)),
    }
}

/// Worst-case bit bias over the phase offset, `max(G(alpha), G(1-alpha)) - 1/2`.
///
/// `sigma2 = 0` gives 1/2 and `sigma2 = inf` gives `|alpha - 1/2|`.
pub fn bias(sigma2: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(domain(format!("variance must be >= 0, got {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(0.5);
    }
    if sigma2.is_infinite() {
        return Ok((alpha - 0.5).abs());
    }
    let q = outside_mass(sigma2, alpha)?;
    let q = if alpha == 0.5 {
        q
    } else {
        q.min(outside_mass(sigma2, 1.0 - alpha)?)
    };
    Ok((0.5 - q).clamp(0.0, 0.5))
}

/// `-log2(1/2 + bias)`.
pub fn min_entropy(sigma2: f64, alpha: f64) -> Result<f64> {
    Ok(entropy_of_bias(bias(sigma2, alpha)?))
}

pub fn entropy_of_bias(bias: f64) -> f64 {
    // adding zero turns -0 into +0
    (-(0.5 + bias).log2()).clamp(0.0, 1.0) + 0.0
}

/// Square-wave bit at the given total phase (rad).
pub fn sample_bit(phase: f64, alpha: f64) -> bool {
    phase.rem_euclid(2.0 * PI) < 2.0 * PI * alpha
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecurityReport {
    /// Conditional phase variance one sampling interval ahead (rad^2).
    pub sigma2: f64,
    pub duty_alpha: f64,
    pub bias: f64,
    pub min_entropy_bits: f64,
    /// `(H, c_H^2 Var(phi^H_dt))` in rad^2.
    pub per_component: Vec<(f64, f64)>,
}

/// Bias and min-entropy of each bit given all earlier ones.
pub fn bandwidth_report(mix: &NoiseMixture, osc: &OscillatorConfig) -> Result<SecurityReport> {
    let per_component = leakage::conditional_breakdown(mix, osc.dt)?;
    let sigma2 = leakage::conditional_variance(mix, osc.dt)?;
    let b = bias(sigma2, osc.duty_alpha)?;
    Ok(SecurityReport {
        sigma2,
        duty_alpha: osc.duty_alpha,
        bias: b,
        min_entropy_bits: entropy_of_bias(b),
        per_component,
    })
}

/// Search interval for [`solve_min_dt_in`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for DtBounds {
    fn default() -> Self {
        Self {
            min: 1e-15,
            max: 1e9,
        }
    }
}

/// Relative tolerance on the returned sampling interval.
pub const DT_REL_TOL: f64 = 1e-6;

/// Smallest sampling interval whose per-bit min-entropy reaches `target` bits.
pub fn solve_min_dt(mix: &NoiseMixture, alpha: f64, target: f64) -> Result<f64> {
    solve_min_dt_in(mix, alpha, target, DtBounds::default())
}

pub fn solve_min_dt_in(
    mix: &NoiseMixture,
    alpha: f64,
    target: f64,
    bounds: DtBounds,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(bounds.min > 0.0 && bounds.max > bounds.min && bounds.max.is_finite()) {
        return Err(domain("need 0 < dt_min < dt_max < inf"));
    }
    if target.is_nan() || target < 0.0 {
        return Err(domain(format!("target entropy must be >= 0, got {target}")));
    }
    let ceiling = entropy_of_bias((alpha - 0.5).abs());
    if target >= 1.0 || target >= ceiling {
        return Err(Error::NoSolution(format!(
            "target {target} bits is not below the noise-saturated entropy {ceiling} bits"
        )));
    }
    let entropy_at =
        |dt: f64| -> Result<f64> { min_entropy(leakage::conditional_variance(mix, dt)?, alpha) };
    if entropy_at(bounds.min)? >= target {
        return Ok(bounds.min);
    }
    if entropy_at(bounds.max)? < target {
        return Err(Error::NoSolution(format!(
            "target {target} bits not reached for dt <= {}",
            bounds.max
        )));
    }
    let (mut lo, mut hi) = (bounds.min.ln(), bounds.max.ln());
    while hi - lo > DT_REL_TOL / 4.0 {
        let mid = 0.5 * (lo + hi);
        if entropy_at(mid.exp())? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}
