//! Closed-form phase-noise analysis for oscillator-based true random number
//! generators.
//!
//! Phase noise is modelled as a mixture of Riemann-Liouville fractional
//! Brownian motions `phi = sum_H c_H phi^H`, with `H = 1/2` (white frequency
//! noise) and `H = 1` (flicker frequency noise) as the components that matter
//! in practice. The crate provides
//!
//! * [`fbm`]: covariance, correlation and Gaussian path simulation,
//! * [`spectrum`]: Wigner-Ville spectra and the fractional-frequency law,
//! * [`leakage`]: conditional variance given the observed phase history,
//! * [`entropy`]: wrapped-Gaussian densities, worst-case bit bias and
//!   min-entropy, sampling-interval sizing,
//! * [`allan`]: second-difference variances and recovery of the noise
//!   coefficients from measured traces,
//! * [`specfun`]: the special-function kernel underneath all of the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allan;
pub mod entropy;
mod error;
pub mod fbm;
pub mod leakage;
pub mod specfun;
pub mod spectrum;
pub mod trace;

pub use allan::{AllanCurve, FitResult};
pub use entropy::{SecurityReport, WrappedGaussian};
pub use error::{Error, Result};
pub use fbm::{HurstExponent, NoiseMixture, OscillatorConfig, TimeGrid};
pub use leakage::ConditionalLaw;
pub use specfun::{Branch, Tolerance};
pub use spectrum::SpectrumPoint;
pub use trace::{PhaseTrace, TraceFormat};
