//! Standard normal density, distribution and tail helpers.
//!
//! Tails are evaluated through `erfc` so that `1 - F(x)` keeps full relative
//! accuracy far into the tail; beyond the range where `erfc` underflows the
//! log-tail switches to the asymptotic Mills-ratio expansion.

use libm::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - F(x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 - F(x))`, finite for every finite `x`.
pub fn log_sf(x: f64) -> f64 {
    if x < 30.0 {
        return sf(x).ln();
    }
    let inv2 = 1.0 / (x * x);
    let series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
    -0.5 * x * x - LN_SQRT_2PI - x.ln() + series.ln()
}

/// `P(|xi| > z)` for a standard normal `xi`.
pub fn two_sided_sf(z: f64) -> f64 {
    erfc(z.abs() * FRAC_1_SQRT_2)
}

/// `ln P(|xi| > z)`.
pub fn log_two_sided_sf(z: f64) -> f64 {
    std::f64::consts::LN_2 + log_sf(z.abs())
}

/// `ln P(|xi| <= z)`, accurate both for small `z` and deep in the tail.
pub fn log_central(z: f64) -> f64 {
    let z = z.abs();
    if z < 1.0 {
        erf(z * FRAC_1_SQRT_2).ln()
    } else {
        (-two_sided_sf(z)).ln_1p()
    }
}
