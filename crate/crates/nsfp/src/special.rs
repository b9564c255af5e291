//! Special functions used by the kernel calculus and its oracles.
//!
//! The gamma function comes from `statrs`; the Mittag-Leffler function is a
//! direct series summation, which is accurate for the moderate arguments the
//! relaxation oracle needs (|z| of order one).

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, ln_gamma};

/// Euler gamma function.
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

/// One-parameter Mittag-Leffler function `E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)`.
///
/// Summed over 200 terms in log space so late terms underflow to zero instead
/// of overflowing the gamma factor.
pub fn mittag_leffler(alpha: f64, z: f64) -> f64 {
    assert!(alpha > 0.0, "mittag_leffler: alpha must be positive");
    if z == 0.0 {
        return 1.0;
    }
    let ln_abs_z = z.abs().ln();
    let mut sum = 0.0;
    for k in 0..200 {
        let ln_term = k as f64 * ln_abs_z - ln_gamma(alpha * k as f64 + 1.0);
        let mut term = ln_term.exp();
        if z < 0.0 && k % 2 == 1 {
            term = -term;
        }
        sum += term;
    }
    sum
}

/// Closed form of `E_{1/2}(-x)` for `x >= 0`: `exp(x^2) erfc(x)`.
///
/// Used to cross-check the series against an independent route.
pub fn ml_half_closed_form(x: f64) -> f64 {
    (x * x).exp() * erfc(x)
}
