//! Special-function kernel shared by every model module.
//!
//! Only the parameter families the phase-noise model needs are supported:
//! the Gauss function `2F1(1, 1/2-H; H+3/2; z)` on `[0, 1]`, the two `1F2`
//! families appearing in the Wigner-Ville spectra, Jacobi `theta_3` for real
//! nome, and the Gaussian pdf/cdf.

mod gamma;
mod gauss;
mod hyp1f2;
mod hyp2f1;
pub mod quad;
mod theta;

pub use gamma::{gamma, gamma_real};
pub use gauss::{normal_cdf, normal_pdf};
pub use hyp1f2::{
    hyp1f2, hyp1f2_asymptotic, hyp1f2_series, hyp1f2_with_crossover, Branch, Hyp1f2,
    DEFAULT_CROSSOVER,
};
pub use hyp2f1::{hyp2f1_fbm, hyp2f1_restricted};
pub use theta::{theta3, theta3_dual, theta3_series, THETA_DUAL_SWITCH};

use crate::error::{domain, Result};

/// Environment variables consulted by [`Tolerance::from_env`].
pub const ENV_ABS_TOL: &str = "PHASENOISE_ABS_TOL";
pub const ENV_REL_TOL: &str = "PHASENOISE_REL_TOL";
pub const ENV_MAX_TERMS: &str = "PHASENOISE_MAX_TERMS";

/// Series truncation control.
///
/// A series stops once the current term is below `abs_tol` *and* the
/// estimated tail is below `rel_tol * |partial sum|`. Running into
/// `max_terms` is reported as an error, never as a silently truncated value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-17,
            rel_tol: 1e-16,
            max_terms: 1_000_000,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(domain(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(domain(format!("rel_tol must be positive, got {rel_tol}")));
        }
        if max_terms == 0 {
            return Err(domain("max_terms must be at least 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_terms,
        })
    }

    /// Defaults, overridden by `PHASENOISE_ABS_TOL`, `PHASENOISE_REL_TOL` and
    /// `PHASENOISE_MAX_TERMS` when set.
    pub fn from_env() -> Result<Self> {
        let base = Self::default();
        let abs_tol = env_or(ENV_ABS_TOL, base.abs_tol)?;
        let rel_tol = env_or(ENV_REL_TOL, base.rel_tol)?;
        let max_terms = env_or(ENV_MAX_TERMS, base.max_terms as f64)?;
        if max_terms.fract() != 0.0 || max_terms < 1.0 {
            return Err(domain(format!(
                "{ENV_MAX_TERMS} must be a positive integer"
            )));
        }
        Self::new(abs_tol, rel_tol, max_terms as usize)
    }

    /// True once a series with current `term`, partial `sum` and estimated
    /// `tail` may stop.
    pub(crate) fn converged(&self, term: f64, tail: f64, sum: f64) -> bool {
        term.abs() < self.abs_tol
            && (tail.abs() <= self.rel_tol * sum.abs() || tail.abs() < self.abs_tol)
    }
}

fn env_or(key: &str, default: f64) -> Result<f64> {
    match std::env::var(key) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .map_err(|e| domain(format!("{key}={v:?}: {e}"))),
        Err(_) => Ok(default),
    }
}
