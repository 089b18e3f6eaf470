//! Covariance families: Brownian motion, sine-modulated Brownian motion,
//! fractional Brownian motion and weighted truncated sequences.

use nalgebra::{DMatrix, DVector};

use super::{Coords, GaussianModel, TimeGrid};
use crate::error::{invalid, Result};

fn kernel_model(grid: &TimeGrid, k: impl Fn(f64, f64) -> f64) -> Result<GaussianModel> {
    let t = grid.points();
    let d = t.len();
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let v = k(t[i], t[j]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    GaussianModel::centered_from_cov(
        cov,
        Coords::TimeGrid {
            points: grid.clone(),
        },
    )
}

/// Standard Brownian motion on the grid: `cov[i][j] = min(t_i, t_j)`.
pub fn bm_covariance(grid: &TimeGrid) -> Result<GaussianModel> {
    kernel_model(grid, f64::min)
}

/// Quadratic variation clock `A_n(t) = 2 int_0^t sin^2(ns) ds = t - sin(2nt)/(2n)`.
pub fn modulation_clock(n: u32, t: f64) -> f64 {
    let two_n = 2.0 * n as f64;
    t - (two_n * t).sin() / two_n
}

/// `sqrt(2) int_0^t sin(ns) dB_s`, a Brownian motion run on the clock `A_n`.
pub fn modulated_bm_covariance(n: u32, grid: &TimeGrid) -> Result<GaussianModel> {
    if n == 0 {
        return Err(invalid("n", "modulation frequency must be at least 1"));
    }
    kernel_model(grid, |s, t| modulation_clock(n, s.min(t)))
}

/// Fractional Brownian motion with Hurst index `h`.
pub fn fbm_covariance(h: f64, grid: &TimeGrid) -> Result<GaussianModel> {
    if !(h > 0.0 && h < 1.0) {
        return Err(invalid("hurst", format!("must lie in (0, 1), got {h}")));
    }
    let e = 2.0 * h;
    kernel_model(grid, |s, t| {
        0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
    })
}

/// `(a_1 xi_1, ..., a_n xi_n)` with i.i.d. standard normal `xi_k`.
pub fn weighted_seq_model(weights: &[f64]) -> Result<GaussianModel> {
    if weights.is_empty() {
        return Err(invalid("weights", "at least one weight is required"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(invalid(
            "weights",
            format!("must be strictly positive, got {w}"),
        ));
    }
    let var = DVector::from_iterator(weights.len(), weights.iter().map(|a| a * a));
    GaussianModel::centered_from_cov(
        DMatrix::from_diagonal(&var),
        Coords::SeqTrunc {
            level: weights.len(),
            weights: weights.to_vec(),
        },
    )
}
