//! Gaussian measures on finite coordinate systems.
//!
//! A [`GaussianModel`] is a mean vector and a positive semidefinite covariance
//! attached to either a time grid (paths of a process observed at finitely
//! many times) or a truncated sequence (the first `n` coordinates of a
//! sequence-valued variable). The process families used across the crate are
//! built in [`families`]; sampling lives in [`sampler`].

pub mod families;
pub mod sampler;
pub mod speed;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};

pub use families::{
    bm_covariance, fbm_covariance, modulated_bm_covariance, modulation_clock, weighted_seq_model,
};
pub use sampler::{factorize, sample, Factor, FactorKind, Sampler};
pub use speed::SpeedFunction;

/// Relative tolerance for the positive-semidefiniteness check.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Strictly increasing observation times in `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(LdpError::InvalidGrid("grid is empty".into()));
        }
        if let Some(bad) = points.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(LdpError::InvalidGrid(format!(
                "time {bad} is negative or not finite"
            )));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(LdpError::InvalidGrid(format!(
                "times must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Self(points))
    }

    /// `n` equally spaced points `T/n, 2T/n, ..., T` (time zero is implied).
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(LdpError::InvalidGrid("grid is empty".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(
                "horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        Self::new((1..=n).map(|i| horizon * i as f64 / n as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.0.last().expect("grid is never empty")
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = LdpError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.0
    }
}

/// What the coordinates of a model stand for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coords {
    TimeGrid {
        points: TimeGrid,
    },
    SeqTrunc {
        level: usize,
        weights: Vec<f64>,
    },
    /// Unlabelled coordinates (joint models, imported files).
    Plain,
}

impl Coords {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Coords::TimeGrid { points } if points.len() != dim => {
                Err(LdpError::DimensionMismatch {
                    expected: dim,
                    got: points.len(),
                })
            }
            Coords::SeqTrunc { level, weights } => {
                if *level != dim || weights.len() != dim {
                    return Err(LdpError::DimensionMismatch {
                        expected: dim,
                        got: weights.len(),
                    });
                }
                if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                    return Err(invalid(
                        "weights",
                        format!("must be strictly positive, got {w}"),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A Gaussian law `N(mean, cov)` on a finite coordinate system.
///
/// Immutable after construction; the constructor enforces exact symmetry of
/// the stored covariance and positive semidefiniteness up to
/// [`PSD_TOLERANCE`] relative to the spectral norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    coords: Coords,
    norm: f64,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, coords: Coords) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(LdpError::DimensionMismatch {
                expected: dim,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("cov", "entries must be finite"));
        }
        for j in 0..dim {
            for i in (j + 1)..dim {
                if cov[(i, j)] != cov[(j, i)] {
                    return Err(LdpError::NotSymmetric { row: i, col: j });
                }
            }
        }
        coords.validate(dim)?;
        let (min_eig, norm) = spectrum_bounds(&cov);
        let tolerance = PSD_TOLERANCE * norm;
        if min_eig < -tolerance {
            return Err(LdpError::NotPsd {
                min_eigenvalue: min_eig,
                tolerance,
            });
        }
        Ok(Self {
            mean,
            cov,
            coords,
            norm,
        })
    }

    pub fn centered_from_cov(cov: DMatrix<f64>, coords: Coords) -> Result<Self> {
        let dim = cov.nrows();
        Self::new(DVector::zeros(dim), cov, coords)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    /// Spectral norm of the covariance.
    pub fn cov_norm(&self) -> f64 {
        self.norm
    }

    pub fn centered(&self) -> Self {
        Self {
            mean: DVector::zeros(self.dim()),
            ..self.clone()
        }
    }

    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), mean.len())?;
        Ok(Self {
            mean,
            ..self.clone()
        })
    }

    /// Law of `c X`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(invalid("scale", format!("must be finite, got {c}")));
        }
        Ok(Self {
            mean: &self.mean * c,
            cov: &self.cov * (c * c),
            coords: self.coords.clone(),
            norm: self.norm * c * c,
        })
    }

    /// `log E[exp <theta, X>] = <theta, mean> + theta' cov theta / 2`.
    pub fn log_laplace(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(theta.dot(&self.mean) + 0.5 * quad_form(&self.cov, theta))
    }

    pub fn to_document(&self) -> ModelDocument {
        let d = self.dim();
        let mut cov = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                cov.push(self.cov[(i, j)]);
            }
        }
        ModelDocument {
            dim: d,
            mean: self.mean.iter().copied().collect(),
            cov,
            coords: self.coords.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.mean.len() != doc.dim {
            return Err(LdpError::DimensionMismatch {
                expected: doc.dim,
                got: doc.mean.len(),
            });
        }
        if doc.cov.len() != doc.dim * doc.dim {
            return Err(LdpError::DimensionMismatch {
                expected: doc.dim * doc.dim,
                got: doc.cov.len(),
            });
        }
        Self::new(
            DVector::from_vec(doc.mean),
            DMatrix::from_row_slice(doc.dim, doc.dim, &doc.cov),
            doc.coords,
        )
    }
}

/// On-disk representation of a model; `cov` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub dim: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    #[serde(default = "plain_coords")]
    pub coords: Coords,
}

fn plain_coords() -> Coords {
    Coords::Plain
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LdpError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (m * v).dot(v)
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter()
        .enumerate()
        .all(|(k, v)| *v == 0.0 || k % m.nrows() == k / m.nrows())
}

/// Smallest eigenvalue and spectral norm of a symmetric matrix.
fn spectrum_bounds(cov: &DMatrix<f64>) -> (f64, f64) {
    if is_diagonal(cov) {
        let d = cov.diagonal();
        return (d.min(), d.amax());
    }
    let eig = SymmetricEigen::new(cov.clone());
    (eig.eigenvalues.min(), eig.eigenvalues.amax())
}
