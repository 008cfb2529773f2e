//! Second-difference (Allan-type) variances and recovery of the white and
//! flicker coefficients from a phase trace.
//!
//! Far from the trace start, `Var(D^2_h phi^H) ~ C(H) h^{2H}` with
//! `C(H) = (4 - 4^H) csc(H pi) / Gamma(2H + 1)`; `C(1/2) = 2` and
//! `C(1) = 4 ln 2 / pi`.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::fbm::HurstExponent;
use crate::specfun::gamma_real;
use crate::trace::PhaseTrace;

/// Half-width of the band around `H = 1` evaluated by the local expansion.
pub const FLICKER_BAND: f64 = 1e-6;

/// `C(H)`, continuous through the removable singularity at `H = 1`.
pub fn allan_constant(h: HurstExponent) -> f64 {
    let hv = h.value();
    let e = hv - 1.0;
    if e.abs() < FLICKER_BAND {
        let l = 4f64.ln();
        let num = l + l * l * e / 2.0 + (l.powi(3) / 6.0 + l * PI * PI / 6.0) * e * e;
        return 4.0 / PI * num / gamma_real(3.0 + 2.0 * e);
    }
    (4.0 - 4f64.powf(hv)) / (PI * hv).sin() / gamma_real(2.0 * hv + 1.0)
}

/// Leading-order `Var(D^2_h phi^H)` for large `t`: `C(H) h^{2H}`.
pub fn theoretical_d2_variance(h: HurstExponent, lag_h: f64) -> Result<f64> {
    if !(lag_h > 0.0 && lag_h.is_finite()) {
        return Err(domain(format!("lag must be finite and > 0, got {lag_h}")));
    }
    Ok(allan_constant(h) * lag_h.powf(2.0 * h.value()))
}

/// `(4 ln 2 / pi)`, the flicker constant.
pub fn flicker_constant() -> f64 {
    4.0 * LN_2 / PI
}

/// Covariance of differenced values: forward first differences
/// `X(t + h) - X(t)` for order 1, centred second differences
/// `X(t + h) - 2 X(t) + X(t - h)` for order 2.
pub fn diff_covariance<F>(cov: F, order: u8, t: f64, s: f64, lag_h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let stencil: &[(f64, f64)] = match order {
        1 => &[(0.0, -1.0), (1.0, 1.0)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        _ => {
            return Err(domain(format!(
                "difference order must be 1 or 2, got {order}"
            )))
        }
    };
    let mut acc = 0.0;
    for &(i, wi) in stencil {
        for &(j, wj) in stencil {
            acc += wi * wj * cov(t + i * lag_h, s + j * lag_h)?;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllanCurve {
    /// Lags (s).
    pub lags: Vec<f64>,
    /// Lags in samples.
    pub lag_samples: Vec<usize>,
    /// `mean(D_n^2)` (rad^2).
    pub variances: Vec<f64>,
    pub counts: Vec<usize>,
    /// `mean(D_n)`, a drift diagnostic; near zero for a zero-mean model.
    pub mean_diff: Vec<f64>,
}

impl AllanCurve {
    /// Build a curve from given points, e.g. theoretical values.
    pub fn from_points(lags: Vec<f64>, variances: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lags.len() != variances.len() || lags.len() != counts.len() {
            return Err(domain("lags, variances and counts differ in length"));
        }
        if lags.windows(2).any(|w| w[1] <= w[0]) || lags.iter().any(|l| !(*l > 0.0)) {
            return Err(domain("lags must be positive and strictly increasing"));
        }
        if variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(domain("variances must be finite and >= 0"));
        }
        if counts.iter().any(|c| *c < 2) {
            return Err(domain("each point needs a count of at least 2"));
        }
        let n = lags.len();
        Ok(Self {
            lags,
            lag_samples: vec![0; n],
            variances,
            counts,
            mean_diff: vec![0.0; n],
        })
    }

    /// Classic Allan normalisation `var / (2 lag^2 (2 pi f0)^2)`.
    pub fn normalized(&self, f0: f64) -> Vec<f64> {
        let w0 = 2.0 * PI * f0;
        self.variances
            .iter()
            .zip(&self.lags)
            .map(|(v, l)| v / (2.0 * l * l * w0 * w0))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }
}

fn second_differences(x: &[f64], m: usize) -> (f64, f64, usize) {
    let count = x.len() - 2 * m;
    let (mut sq, mut sum) = (0.0, 0.0);
    for n in 0..count {
        let d = x[n + 2 * m] - 2.0 * x[n + m] + x[n];
        sq += d * d;
        sum += d;
    }
    (sq / count as f64, sum / count as f64, count)
}

/// Overlapping second-difference variances at the given lags (in samples).
pub fn estimate(trace: &PhaseTrace, lags: &[usize]) -> Result<AllanCurve> {
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let max = *lags
        .last()
        .ok_or_else(|| Error::InsufficientData("no lags requested".into()))?;
    if lags[0] == 0 {
        return Err(domain("lags must be positive"));
    }
    if trace.samples.len() < 2 * max + 2 {
        return Err(Error::InsufficientData(format!(
            "lag {max} needs at least {} samples, trace has {}",
            2 * max + 2,
            trace.samples.len()
        )));
    }
    let rows: Vec<(f64, f64, usize)> = lags
        .par_iter()
        .map(|&m| second_differences(&trace.samples, m))
        .collect();
    Ok(AllanCurve {
        lags: lags.iter().map(|&m| m as f64 * trace.dt).collect(),
        lag_samples: lags,
        variances: rows.iter().map(|r| r.0).collect(),
        mean_diff: rows.iter().map(|r| r.1).collect(),
        counts: rows.iter().map(|r| r.2).collect(),
    })
}

/// Point weights for [`fit_mixture_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    /// `count / (lag var^2)`: the overlapping estimator at lag `m` has
    /// relative variance of order `m / count`. Weights use the fitted model
    /// after a first pass on the measured variances.
    #[default]
    InverseVariance,
    /// Difference counts only.
    Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// rad s^{-1/2}
    pub c_white: f64,
    /// rad s^{-1}
    pub c_flicker: f64,
    /// Weighted RMS residual (rad^2).
    pub residual_norm: f64,
    /// Covariance of the fitted weights `(c_white^2, c_flicker^2)`.
    pub covariance_of_fit: [[f64; 2]; 2],
    pub weighting: FitWeighting,
}

pub fn fit_mixture(curve: &AllanCurve) -> Result<FitResult> {
    fit_mixture_with(curve, FitWeighting::default())
}

/// Nonnegative weighted least squares of the variances on the basis
/// `{2 lag, (4 ln 2 / pi) lag^2}`.
pub fn fit_mixture_with(curve: &AllanCurve, weighting: FitWeighting) -> Result<FitResult> {
    let n = curve.lags.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 lags, got {n}"
        )));
    }
    let (lo, hi) = (curve.lags[0], curve.lags[n - 1]);
    if !(hi > lo) {
        return Err(domain("degenerate design: all lags are equal"));
    }
    if hi < 10.0 * lo {
        return Err(domain(format!(
            "lags must span at least a decade, got {lo:e}..{hi:e}"
        )));
    }
    let cf = flicker_constant();
    let basis: Vec<[f64; 2]> = curve.lags.iter().map(|&l| [2.0 * l, cf * l * l]).collect();
    let inverse_variance = |level: &[f64]| -> Vec<f64> {
        curve
            .counts
            .iter()
            .zip(&curve.lags)
            .zip(level)
            .map(|((&c, &l), &v)| c as f64 / (l * v * v).max(f64::MIN_POSITIVE))
            .collect()
    };
    match weighting {
        FitWeighting::Counts => {
            let w: Vec<f64> = curve.counts.iter().map(|&c| c as f64).collect();
            weighted_nnls(&basis, &curve.variances, &w, weighting)
        }
        FitWeighting::InverseVariance => {
            let first = weighted_nnls(
                &basis,
                &curve.variances,
                &inverse_variance(&curve.variances),
                weighting,
            )?;
            let (a, b) = (first.c_white.powi(2), first.c_flicker.powi(2));
            let model: Vec<f64> = basis.iter().map(|x| a * x[0] + b * x[1]).collect();
            if model.iter().any(|m| !(*m > 0.0)) {
                return Ok(first);
            }
            weighted_nnls(
                &basis,
                &curve.variances,
                &inverse_variance(&model),
                weighting,
            )
        }
    }
}

fn weighted_nnls(
    basis: &[[f64; 2]],
    values: &[f64],
    weights: &[f64],
    weighting: FitWeighting,
) -> Result<FitResult> {
    let n = basis.len();
    // scale columns so the normal equations stay well conditioned
    let scale = [basis[n - 1][0], basis[n - 1][1]];
    let mut g = [[0.0; 2]; 2];
    let mut r = [0.0; 2];
    for ((b, &w), &v) in basis.iter().zip(weights).zip(values) {
        for i in 0..2 {
            r[i] += w * b[i] / scale[i] * v;
            for j in 0..2 {
                g[i][j] += w * b[i] / scale[i] * b[j] / scale[j];
            }
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if !(det > 1e-14 * g[0][0] * g[1][1]) {
        return Err(domain("degenerate design: basis columns are collinear"));
    }
    let inv = [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ];
    let sse = |x: [f64; 2]| -> f64 {
        basis
            .iter()
            .zip(weights)
            .zip(values)
            .map(|((b, w), v)| {
                let e = v - b[0] / scale[0] * x[0] - b[1] / scale[1] * x[1];
                w * e * e
            })
            .sum()
    };
    // active-set enumeration for two nonnegative unknowns
    let mut candidates = vec![[0.0, 0.0]];
    let full = [
        inv[0][0] * r[0] + inv[0][1] * r[1],
        inv[1][0] * r[0] + inv[1][1] * r[1],
    ];
    if full[0] >= 0.0 && full[1] >= 0.0 {
        candidates.push(full);
    }
    if r[0] > 0.0 {
        candidates.push([r[0] / g[0][0], 0.0]);
    }
    if r[1] > 0.0 {
        candidates.push([0.0, r[1] / g[1][1]]);
    }
    let best = candidates
        .into_iter()
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .expect("zero candidate");

    let wsum: f64 = weights.iter().sum();
    let rss = sse(best);
    // residual variance per unit weight
    let s2 = rss / n.saturating_sub(2).max(1) as f64;
    let mut cov = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            cov[i][j] = s2 * inv[i][j] / (scale[i] * scale[j]);
        }
    }
    Ok(FitResult {
        c_white: (best[0] / scale[0]).sqrt(),
        c_flicker: (best[1] / scale[1]).sqrt(),
        residual_norm: (rss / wsum).sqrt(),
        covariance_of_fit: cov,
        weighting,
    })
}

/// Curve of `C(H)` used to check continuity.
pub fn constant_curve(hs: &[f64]) -> Result<Vec<f64>> {
    hs.iter()
        .map(|&h| Ok(allan_constant(HurstExponent::new(h)?)))
        .collect()
}
