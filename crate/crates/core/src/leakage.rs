//! What an observer of the past phase can still not predict.
//!
//! Conditioned on the full history up to `s`, an FBM restarts: the residual
//! of `phi_t` is distributed as a fresh `phi_{t-s}`, so the conditional
//! (co)variance depends only on the gaps. The continuous-history formulas are
//! the normative API. [`discrete_posterior`] conditions on finitely many
//! samples; it can only leave more variance behind.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{domain, Result};
use crate::fbm::{self, cholesky_jittered, normal_matrix, HurstExponent, NoiseMixture, TimeGrid};

/// Posterior law of a single component after a gap `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalLaw {
    pub gap_tau: f64,
    pub variance: f64,
    pub hurst: HurstExponent,
}

impl ConditionalLaw {
    pub fn new(hurst: HurstExponent, gap_tau: f64) -> Result<Self> {
        check_gap(gap_tau)?;
        Ok(Self {
            gap_tau,
            variance: fbm::variance(hurst, gap_tau)?,
            hurst,
        })
    }
}

fn check_gap(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("gap must be finite and > 0, got {tau}")))
    }
}

/// `Var(phi_t | phi_{<=t-tau}) = sum_H c_H^2 tau^{2H} / (2H Gamma(H+1/2)^2)`.
///
/// Independent of absolute time and of any deterministic drift.
pub fn conditional_variance(mix: &NoiseMixture, gap_tau: f64) -> Result<f64> {
    check_gap(gap_tau)?;
    fbm::mixture_variance(mix, gap_tau)
}

/// Per-component terms of [`conditional_variance`], `(H, c_H^2 Var(phi^H_tau))`.
pub fn conditional_breakdown(mix: &NoiseMixture, gap_tau: f64) -> Result<Vec<(f64, f64)>> {
    check_gap(gap_tau)?;
    mix.components()
        .iter()
        .map(|c| {
            Ok((
                c.hurst.value(),
                c.coeff * c.coeff * fbm::variance(c.hurst, gap_tau)?,
            ))
        })
        .collect()
}

/// `Cov(phi_t, phi_s | phi_{<=t0}) = Cov(phi_{t-t0}, phi_{s-t0})` for `t >= s > t0 >= 0`.
pub fn conditional_covariance(h: HurstExponent, t: f64, s: f64, t0: f64) -> Result<f64> {
    if !(t >= s && s > t0 && t0 >= 0.0 && t.is_finite()) {
        return Err(domain(format!(
            "need t >= s > t0 >= 0, got t={t}, s={s}, t0={t0}"
        )));
    }
    fbm::covariance(h, t - t0, s - t0)
}

/// Gaussian conditioning on a finite set of past samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
    /// Relative diagonal jitter used for the factorisation.
    pub jitter: f64,
}

fn history(observed_times: &[f64], observations: &[f64]) -> Result<()> {
    if observed_times.len() != observations.len() {
        return Err(domain(format!(
            "{} observation times but {} observations",
            observed_times.len(),
            observations.len()
        )));
    }
    if !observed_times.is_empty() {
        TimeGrid::new(observed_times.to_vec())?;
    }
    if observations.iter().any(|v| !v.is_finite()) {
        return Err(domain("observations must be finite"));
    }
    Ok(())
}

/// Conditional mean and variance of `phi_target` given `phi` at
/// `observed_times` (empty history allowed).
pub fn discrete_posterior(
    h: HurstExponent,
    observed_times: &[f64],
    target_t: f64,
    observations: &[f64],
) -> Result<Posterior> {
    discrete_posterior_mixture(
        &NoiseMixture::single(h, 1.0)?,
        observed_times,
        target_t,
        observations,
    )
}

pub fn discrete_posterior_mixture(
    mix: &NoiseMixture,
    observed_times: &[f64],
    target_t: f64,
    observations: &[f64],
) -> Result<Posterior> {
    history(observed_times, observations)?;
    let last = observed_times.last().copied().unwrap_or(0.0);
    if !(target_t > last && target_t.is_finite()) {
        return Err(domain(format!(
            "target time {target_t} must be after the history (last {last})"
        )));
    }
    let prior = fbm::mixture_variance(mix, target_t)?;
    if observed_times.is_empty() {
        return Ok(Posterior {
            mean: 0.0,
            variance: prior,
            jitter: 0.0,
        });
    }
    let k_obs = fbm::covariance_matrix(mix, observed_times)?;
    let (chol, jitter) = cholesky_jittered(&k_obs)?;
    let cross = DVector::from_iterator(
        observed_times.len(),
        observed_times
            .iter()
            .map(|&s| fbm::mixture_covariance(mix, s, target_t))
            .collect::<Result<Vec<_>>>()?,
    );
    let whitened = chol
        .l()
        .solve_lower_triangular(&cross)
        .ok_or(crate::Error::Decomposition { jitter })?;
    let variance = prior - whitened.norm_squared();
    let weights = chol.solve(&DVector::from_column_slice(observations));
    Ok(Posterior {
        mean: cross.dot(&weights),
        variance,
        jitter,
    })
}

/// Samples of `phi` on `future_grid` given the history: the discrete
/// posterior mean curve plus a fresh FBM started at the last observed time
/// (time zero for an empty history). Shape `future_grid.len() x n_paths`.
pub fn renewal_sample(
    h: HurstExponent,
    observed_times: &[f64],
    observations: &[f64],
    future_grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    history(observed_times, observations)?;
    if n_paths == 0 {
        return Err(domain("n_paths must be positive"));
    }
    let start = observed_times.last().copied().unwrap_or(0.0);
    if future_grid.points()[0] <= start {
        return Err(domain("future grid must lie strictly after the history"));
    }
    let mix = NoiseMixture::single(h, 1.0)?;
    let future = future_grid.points();

    let means: Vec<f64> = if observed_times.is_empty() {
        vec![0.0; future.len()]
    } else {
        let k_obs = fbm::covariance_matrix(&mix, observed_times)?;
        let (chol, _) = cholesky_jittered(&k_obs)?;
        let weights = chol.solve(&DVector::from_column_slice(observations));
        future
            .iter()
            .map(|&t| {
                let mut m = 0.0;
                for (s, w) in observed_times.iter().zip(weights.iter()) {
                    m += fbm::covariance(h, *s, t)? * w;
                }
                Ok(m)
            })
            .collect::<Result<_>>()?
    };

    let shifted: Vec<f64> = future.iter().map(|t| t - start).collect();
    let k_fresh = fbm::covariance_matrix(&mix, &shifted)?;
    let (chol, _) = cholesky_jittered(&k_fresh)?;
    let mut out = chol.l() * normal_matrix(future.len(), n_paths, seed);
    for (i, m) in means.iter().enumerate() {
        for j in 0..n_paths {
            out[(i, j)] += m;
        }
    }
    Ok(out)
}
