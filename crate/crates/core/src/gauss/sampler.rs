use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::GaussianModel;
use crate::error::{invalid, LdpError, Result};
use crate::seed;

/// Base jitter relative to `trace / dim`.
const JITTER_BASE: f64 = 1e-12;
/// Number of tenfold jitter escalations after the first jittered attempt.
const JITTER_ESCALATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    /// Lower-triangular Cholesky factor of `cov + jitter * I`.
    Cholesky,
    /// Symmetric square root from the clipped eigendecomposition.
    SymmetricSqrt,
}

/// A square root `L` of the covariance, `L L' = cov + jitter I`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub matrix: DMatrix<f64>,
    pub kind: FactorKind,
    pub jitter: f64,
}

/// Factorizes a covariance for sampling.
///
/// Cholesky is tried first, then Cholesky of `cov + j I` with
/// `j = 1e-12 trace/dim` escalated tenfold up to three times. If all of those
/// fail the symmetric eigen square root is used, provided no eigenvalue is
/// below `-PSD_TOLERANCE * |cov|`.
pub fn factorize(cov: &DMatrix<f64>) -> Result<Factor> {
    let d = cov.nrows();
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(Factor {
            matrix: ch.unpack(),
            kind: FactorKind::Cholesky,
            jitter: 0.0,
        });
    }
    let base = JITTER_BASE * cov.trace() / d as f64;
    let mut tried = Vec::new();
    if base > 0.0 {
        let mut jitter = base;
        for _ in 0..=JITTER_ESCALATIONS {
            tried.push(jitter);
            let shifted = cov + DMatrix::identity(d, d) * jitter;
            if let Some(ch) = shifted.cholesky() {
                return Ok(Factor {
                    matrix: ch.unpack(),
                    kind: FactorKind::Cholesky,
                    jitter,
                });
            }
            jitter *= 10.0;
        }
    }
    let eig = SymmetricEigen::new(cov.clone());
    let norm = eig.eigenvalues.amax();
    if eig.eigenvalues.min() < -super::PSD_TOLERANCE * norm {
        return Err(LdpError::FactorizationFailed { jitters: tried });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let matrix = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    Ok(Factor {
        matrix,
        kind: FactorKind::SymmetricSqrt,
        jitter: 0.0,
    })
}

/// Draws `N(mean, cov)` vectors from standard normals through a fixed factor.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    mean: Vec<f64>,
    /// Row-major factor; for Cholesky only the lower triangle is read.
    rows: Vec<f64>,
    triangular: bool,
    jitter: f64,
}

impl Sampler {
    pub fn new(model: &GaussianModel) -> Result<Self> {
        let factor = factorize(model.cov())?;
        let d = model.dim();
        let mut rows = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                rows.push(factor.matrix[(i, j)]);
            }
        }
        Ok(Self {
            dim: d,
            mean: model.mean().iter().copied().collect(),
            rows,
            triangular: factor.kind == FactorKind::Cholesky,
            jitter: factor.jitter,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Fills `noise` with standard normals and writes `mean + L noise` to `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, noise: &mut [f64], out: &mut [f64]) {
        for z in noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.transform(noise, out);
    }

    /// `out = mean + L noise` for given standard normal coordinates.
    pub fn transform(&self, noise: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.rows[i * d..(i + 1) * d];
            let len = if self.triangular { i + 1 } else { d };
            let acc: f64 = row[..len]
                .iter()
                .zip(&noise[..len])
                .map(|(a, b)| a * b)
                .sum();
            out[i] = self.mean[i] + acc;
        }
    }
}

/// `count` independent draws from `model`, a pure function of `(model, count, seed)`.
pub fn sample(model: &GaussianModel, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(invalid("count", "must be positive"));
    }
    let sampler = Sampler::new(model)?;
    let mut rng = seed::stream(seed);
    let d = model.dim();
    let mut noise = vec![0.0; d];
    Ok((0..count)
        .map(|_| {
            let mut x = vec![0.0; d];
            sampler.draw_into(&mut rng, &mut noise, &mut x);
            x
        })
        .collect())
}
