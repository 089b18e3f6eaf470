//! Fixtures shared by the benchmarks.

use ldp_core::gauss::{bm_covariance, fbm_covariance};
use ldp_core::{Coords, GaussianModel, TimeGrid};
use nalgebra::{DMatrix, DVector};

pub fn bm(points: usize) -> GaussianModel {
    bm_covariance(&TimeGrid::uniform(points, 1.0).unwrap()).unwrap()
}

pub fn fbm(hurst: f64, points: usize) -> GaussianModel {
    fbm_covariance(hurst, &TimeGrid::uniform(points, 1.0).unwrap()).unwrap()
}

/// A fixed full-rank model in `dim` coordinates.
pub fn dense(dim: usize) -> GaussianModel {
    let b = DMatrix::from_fn(dim, dim, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
    let cov = &b * b.transpose() + DMatrix::identity(dim, dim) * 0.2;
    let mean = DVector::from_fn(dim, |i, _| 0.1 * i as f64);
    GaussianModel::new(mean, cov, Coords::Plain).unwrap()
}
