use std::f64::consts::PI;

use crate::error::{domain, Result};

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!(
            "gamma requires a finite positive argument, got {x}"
        )));
    }
    Ok(gamma_real(x))
}

/// Gamma function on the whole real line (reflection for `x < 1/2`).
/// Returns `inf`/NaN at the poles.
pub fn gamma_real(x: f64) -> f64 {
    if x < 0.5 {
        let s = sin_pi(x);
        if s == 0.0 {
            return f64::NAN;
        }
        return PI / (s * gamma_real(1.0 - x));
    }
    if x == x.floor() && x <= 171.0 {
        // exact factorial for small integers
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return acc;
    }
    let z = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = z + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * a
}

/// `sin(pi x)` with exact argument reduction, so it is accurate near integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}
