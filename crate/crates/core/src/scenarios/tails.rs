//! Standard normal tail bounds: the Mills-ratio sandwich and three cruder
//! bounds with their actual ranges of validity.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: f64,
}

/// `phi(x) (1/x - 1/x^3) <= 1 - F(x) <= phi(x) / x` for `x >= 1`.
pub fn gauss_tail_bounds(x: f64) -> Result<TailBounds> {
    if !(x >= 1.0 && x.is_finite()) {
        return Err(invalid(
            "x",
            format!("the Mills sandwich is validated on x >= 1, got {x}"),
        ));
    }
    let phi = normal::pdf(x);
    Ok(TailBounds {
        lower: phi * (1.0 / x - 1.0 / (x * x * x)),
        upper: phi / x,
        exact: normal::sf(x),
    })
}

/// `phi(x)`, an upper bound for `1 - F(x)` once `x` is past about 0.3.
pub fn density_upper(x: f64) -> f64 {
    normal::pdf(x)
}

/// `(x + 1/x)^{-1} e^{-x^2/2} / (2 pi)`, claimed lower bound.
pub fn ratio_lower(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI * (x + 1.0 / x))
}

/// `sqrt(2/pi) e^{-x^2/2} / x`, claimed lower bound.
pub fn crude_mills_lower(x: f64) -> f64 {
    (2.0 / PI).sqrt() * (-0.5 * x * x).exp() / x
}

/// Where each crude bound is actually valid, on `[0, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrudeTailReport {
    /// `1 - F(x) <= phi(x)` holds exactly for `x >= upper_valid_from`.
    pub upper_valid_from: f64,
    /// Grid points in `(0, x_max]` where the first lower link holds.
    pub first_lower_fraction: f64,
    /// Grid points where `first link >= last link`.
    pub chain_link_fraction: f64,
    /// Grid points where the last link is below `1 - F(x)`.
    pub last_lower_fraction: f64,
    pub grid_points: usize,
}

/// Scans `(0, x_max]` on `points` grid points and locates the crossing of
/// `1 - F` and `phi` by bisection.
pub fn crude_tail_report(x_max: f64, points: usize) -> Result<CrudeTailReport> {
    if !(x_max > 0.0 && x_max.is_finite()) || points == 0 {
        return Err(invalid(
            "x_max",
            "needs a positive range and at least one point",
        ));
    }
    // 1 - F(x) - phi(x) is positive at 0 and negative at 1
    let f = |x: f64| normal::sf(x) - normal::pdf(x);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xs: Vec<f64> = (1..=points)
        .map(|i| x_max * i as f64 / points as f64)
        .collect();
    let frac =
        |pred: &dyn Fn(f64) -> bool| xs.iter().filter(|x| pred(**x)).count() as f64 / points as f64;
    Ok(CrudeTailReport {
        upper_valid_from: hi,
        first_lower_fraction: frac(&|x| ratio_lower(x) <= normal::sf(x)),
        chain_link_fraction: frac(&|x| ratio_lower(x) >= crude_mills_lower(x)),
        last_lower_fraction: frac(&|x| crude_mills_lower(x) <= normal::sf(x)),
        grid_points: points,
    })
}
