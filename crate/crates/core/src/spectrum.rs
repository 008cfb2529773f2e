//! Wigner-Ville spectra of fractional Brownian motion.
//!
//! Spectra use the Fourier convention `F{f}(omega) = int f(t) e^{-i omega t} dt`,
//! so `S` is a two-sided density in angular frequency and `int S d omega / 2pi`
//! is a variance.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::fbm::HurstExponent;
use crate::specfun::{gamma_real, hyp1f2, Branch, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub value: f64,
    pub branch: Branch,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// Instantaneous spectrum
/// `S(t, omega) = 2^{2H+1} t^{2H+1} 1F2(H+1/2; H+1, H+3/2; -t^2 omega^2) / Gamma(2H+2)`.
///
/// This is a quasi-density: for `H > 1/2` and large `t omega` its growing
/// oscillation around `omega^{-2H-1}` can dip below zero.
pub fn instantaneous(h: HurstExponent, t: f64, omega: f64) -> Result<SpectrumPoint> {
    check_positive("t", t)?;
    check_positive("omega", omega)?;
    let hv = h.value();
    let x = t * omega;
    let f = hyp1f2(hv + 0.5, hv + 1.0, hv + 1.5, -x * x, &Tolerance::default())?;
    let value = (2.0 * t).powf(2.0 * hv + 1.0) * f.value / gamma_real(2.0 * hv + 2.0);
    Ok(SpectrumPoint {
        omega,
        value,
        branch: f.branch,
    })
}

/// Running time average `(1/T) int_0^T S(t, omega) dt`
/// `= 2^{2H+1} T^{2H+1} 1F2(H+1/2; H+3/2, H+2; -T^2 omega^2) / Gamma(2H+3)`,
/// which tends to `omega^{-2H-1}` as `T omega` grows.
pub fn time_averaged(h: HurstExponent, big_t: f64, omega: f64) -> Result<SpectrumPoint> {
    check_positive("T", big_t)?;
    check_positive("omega", omega)?;
    let hv = h.value();
    let x = big_t * omega;
    let f = hyp1f2(hv + 0.5, hv + 1.5, hv + 2.0, -x * x, &Tolerance::default())?;
    let value = (2.0 * big_t).powf(2.0 * hv + 1.0) * f.value / gamma_real(2.0 * hv + 3.0);
    Ok(SpectrumPoint {
        omega,
        value,
        branch: f.branch,
    })
}

/// Spectrum of the forward increment `X_{t+h} - X_t` from the spectrum of `X`:
/// `S(t+h) + S(t) - 2 cos(omega h) S(t + h/2)`.
pub fn differenced<F>(s_fn: F, t: f64, omega: f64, lag: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    check_positive("lag", lag)?;
    Ok(s_fn(t + lag, omega)? + s_fn(t, omega)?
        - 2.0 * (omega * lag).cos() * s_fn(t + 0.5 * lag, omega)?)
}

/// Spectrum of the centred increment `X_{t+h/2} - X_{t-h/2}`:
/// `4 sin^2(omega h / 2) S(t) + [S(t+h/2) - 2 S(t) + S(t-h/2)]`.
pub fn centered_differenced<F>(s_fn: F, t: f64, omega: f64, lag: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    check_positive("lag", lag)?;
    let centre = s_fn(t, omega)?;
    let second = s_fn(t + 0.5 * lag, omega)? - 2.0 * centre + s_fn(t - 0.5 * lag, omega)?;
    Ok(4.0 * (0.5 * omega * lag).sin().powi(2) * centre + second)
}

/// Long-time spectrum of fractional frequency `y = Delta phi / (2 pi f0 Delta t)`:
/// `4 sin^2(omega dt / 2) / (2 pi f0 dt)^2 * omega^{-2H-1}`.
pub fn fractional_frequency(h: HurstExponent, f0: f64, delta_t: f64, omega: f64) -> Result<f64> {
    check_positive("f0", f0)?;
    check_positive("delta_t", delta_t)?;
    check_positive("omega", omega)?;
    let half = 0.5 * omega * delta_t;
    // 4 sin^2(u) / (2 u)^2 written as sinc^2 to stay exact for small u
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    Ok(sinc * sinc * omega * omega / (2.0 * PI * f0).powi(2) * omega.powf(-2.0 * h.value() - 1.0))
}

/// Averaged periodogram on positive frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
}

/// Welch estimate: Hann-windowed segments of `segment_len` samples with 50 %
/// overlap, `|FFT|^2` averaged over all segments of all traces. Values are
/// `dt |X_k|^2 / sum w^2`, an estimate of `S(omega_k)` in the convention of
/// this module; bins `k = 1 .. segment_len/2` at `omega_k = 2 pi k / (segment_len dt)`.
pub fn periodogram<'a, I>(traces: I, dt: f64, segment_len: usize) -> Result<Periodogram>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    check_positive("dt", dt)?;
    if segment_len < 4 {
        return Err(domain("segment length must be at least 4"));
    }
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2;
    let mut acc = vec![0.0; bins];
    let mut segments = 0usize;
    let step = segment_len / 2;
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    for trace in traces {
        if trace.len() < segment_len {
            return Err(domain(format!(
                "trace of length {} shorter than segment length {segment_len}",
                trace.len()
            )));
        }
        let mut start = 0;
        while start + segment_len <= trace.len() {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(trace[start + i] * window[i], 0.0);
            }
            fft.process(&mut buf);
            for k in 1..=bins {
                acc[k - 1] += buf[k].norm_sqr();
            }
            segments += 1;
            start += step;
        }
    }
    if segments == 0 {
        return Err(domain("periodogram needs at least one trace"));
    }
    let scale = dt / (energy * segments as f64);
    Ok(Periodogram {
        omega: (1..=bins)
            .map(|k| 2.0 * PI * k as f64 / (segment_len as f64 * dt))
            .collect(),
        power: acc.into_iter().map(|p| p * scale).collect(),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(domain("slope fit needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(domain("log-log fit needs positive values"));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}
