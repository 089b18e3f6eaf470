//! Cameron-Martin norms and the Gaussian rate function.
//!
//! For a Gaussian law with covariance `Sigma` the Cameron-Martin space is the
//! range of `Sigma`, a point `h = Sigma phi` has norm `|h|_H^2 = phi' Sigma phi`,
//! and the rate function is `I(x) = |x - E X|_H^2 / 2`, infinite off the
//! support. [`RateFunctional`] realizes all of this through one symmetric
//! eigendecomposition with a numerical rank cutoff.

pub mod qp;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{LdpError, Result};
use crate::gauss::{check_dim, quad_form, GaussianModel};
use crate::sets::{HalfSpace, Region};

/// Eigenvalues below `RANK_CUTOFF * sigma_max` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-10;
/// A point whose component off the covariance range exceeds this fraction of
/// its norm has infinite Cameron-Martin norm.
pub const RANGE_TOLERANCE: f64 = 1e-8;

/// A functional `z -> <phi, z>` together with its barycenter `h = Sigma phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representer {
    pub phi: DVector<f64>,
    pub barycenter: DVector<f64>,
}

/// Result of minimizing the rate over a region.
#[derive(Debug, Clone)]
pub struct RateInfimum {
    pub value: f64,
    /// `None` when the region does not meet the support (`value = +inf`).
    pub argmin: Option<DVector<f64>>,
    /// Index of the winning half-space for unions and complements.
    pub facet: Option<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RateFunctional {
    centered: GaussianModel,
    offset: DVector<f64>,
    pinv: DMatrix<f64>,
    range_basis: DMatrix<f64>,
    range_eigenvalues: DVector<f64>,
    cutoff: f64,
}

impl RateFunctional {
    pub fn new(model: &GaussianModel) -> Self {
        let eig = SymmetricEigen::new(model.cov().clone());
        let sigma_max = eig.eigenvalues.amax();
        let cutoff = RANK_CUTOFF * sigma_max;
        let keep: Vec<usize> = (0..model.dim())
            .filter(|&i| eig.eigenvalues[i].abs() > cutoff && eig.eigenvalues[i] > 0.0)
            .collect();
        let d = model.dim();
        let r = keep.len();
        let mut range_basis = DMatrix::zeros(d, r);
        let mut range_eigenvalues = DVector::zeros(r);
        for (c, &i) in keep.iter().enumerate() {
            range_basis.set_column(c, &eig.eigenvectors.column(i));
            range_eigenvalues[c] = eig.eigenvalues[i];
        }
        let inv = DMatrix::from_diagonal(&range_eigenvalues.map(|l| 1.0 / l));
        let pinv = &range_basis * inv * range_basis.transpose();
        Self {
            centered: model.centered(),
            offset: model.mean().clone(),
            pinv,
            range_basis,
            range_eigenvalues,
            cutoff,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn rank(&self) -> usize {
        self.range_eigenvalues.len()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        self.centered.cov()
    }

    pub fn pinv_cov(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Orthonormal basis of the covariance range (columns).
    pub fn range_basis(&self) -> &DMatrix<f64> {
        &self.range_basis
    }

    pub fn centered_model(&self) -> &GaussianModel {
        &self.centered
    }

    /// `Lambda(theta) = theta' Sigma theta / 2` of the centered law.
    pub fn centered_log_laplace(&self, theta: &DVector<f64>) -> Result<f64> {
        self.centered.log_laplace(theta)
    }

    /// `h = E[Z <phi, Z>] = Sigma phi` for the centered law.
    pub fn barycenter(&self, phi: &DVector<f64>) -> Result<Representer> {
        check_dim(self.dim(), phi.len())?;
        Ok(Representer {
            phi: phi.clone(),
            barycenter: self.cov() * phi,
        })
    }

    /// Squared Cameron-Martin norm, `+inf` off the covariance range.
    pub fn cm_norm_sq(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let coeffs = self.range_basis.transpose() * x;
        let residual = x - &self.range_basis * &coeffs;
        if residual.norm() > RANGE_TOLERANCE * x.norm() {
            return Ok(f64::INFINITY);
        }
        Ok(coeffs
            .iter()
            .zip(self.range_eigenvalues.iter())
            .map(|(c, l)| c * c / l)
            .sum())
    }

    /// `I(x) = |x - E X|_H^2 / 2`.
    pub fn rate(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(0.5 * self.cm_norm_sq(&(x - &self.offset))?)
    }

    /// Minimal-norm representer `phi = Sigma^+ (x - E X)`; it exposes `x`.
    pub fn exposing_hyperplane(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.rate(x)?.is_finite() {
            return Err(LdpError::InfiniteRate);
        }
        Ok(&self.pinv * (x - &self.offset))
    }

    /// Grid lower bound on `sup_theta <theta, x> - log E exp <theta, X>`.
    ///
    /// Enumerates `points^dim` values of `theta` on `[-w, w]^dim`; restricted to
    /// `dim <= 4` and intended as an independent check of [`Self::rate`].
    pub fn conjugate_bruteforce(
        &self,
        x: &DVector<f64>,
        halfwidth: f64,
        points: usize,
    ) -> Result<f64> {
        let d = self.dim();
        check_dim(d, x.len())?;
        if d > 4 {
            return Err(LdpError::OracleDimension(d));
        }
        if points < 11 {
            return Err(crate::error::invalid(
                "grid_points_per_axis",
                "must be at least 11",
            ));
        }
        if !(halfwidth > 0.0) {
            return Err(crate::error::invalid("box_halfwidth", "must be positive"));
        }
        let centered_x = x - &self.offset;
        let cov = self.cov();
        let axis: Vec<f64> = (0..points)
            .map(|j| -halfwidth + 2.0 * halfwidth * j as f64 / (points - 1) as f64)
            .collect();
        let mut idx = vec![0usize; d];
        let mut theta = DVector::zeros(d);
        let mut best = f64::NEG_INFINITY;
        loop {
            for k in 0..d {
                theta[k] = axis[idx[k]];
            }
            let v = theta.dot(&centered_x) - 0.5 * quad_form(cov, &theta);
            best = best.max(v);
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < points {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        Ok(best)
    }

    /// `inf_{x in region} I(x)` with a certified minimizer.
    ///
    /// Convex regions go through the dual projected-gradient solver; unions of
    /// half-spaces (including complements of compact sets) are split into
    /// facets, each solved exactly, and the lowest-index best facet wins.
    pub fn rate_infimum(&self, region: &Region) -> Result<RateInfimum> {
        let d = self.dim();
        match region {
            Region::Inside(set) => {
                set.validate()?;
                if let Some(k) = set.fixed_dim() {
                    check_dim(d, k)?;
                }
                self.solve(&set.constraints(d), None)
            }
            Region::HalfSpace(h) => {
                self.check_halfspace(h)?;
                self.solve(&[h.as_constraint()], None)
            }
            Region::Outside(set) => {
                set.validate()?;
                if let Some(k) = set.fixed_dim() {
                    check_dim(d, k)?;
                }
                self.best_facet(&set.facets(d))
            }
            Region::AnyOf(hs) => {
                if hs.is_empty() {
                    return Err(LdpError::Infeasible);
                }
                hs.iter().try_for_each(|h| self.check_halfspace(h))?;
                self.best_facet(hs)
            }
        }
    }

    /// Facet minimizers within relative distance `rel_tol` of the infimum,
    /// returned as shifts from the mean. These are the dominating points used
    /// to center importance sampling.
    pub fn dominating_points(&self, region: &Region, rel_tol: f64) -> Result<Vec<DVector<f64>>> {
        let facets = match region {
            Region::Outside(set) => set.facets(self.dim()),
            Region::AnyOf(hs) => hs.clone(),
            _ => {
                let r = self.rate_infimum(region)?;
                return Ok(r.argmin.map(|x| vec![x - &self.offset]).unwrap_or_default());
            }
        };
        let solved = facets
            .iter()
            .map(|h| self.solve(&[h.as_constraint()], None))
            .collect::<Result<Vec<_>>>()?;
        let best = solved.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Ok(Vec::new());
        }
        Ok(solved
            .into_iter()
            .filter(|s| s.value <= best * (1.0 + rel_tol) + 1e-300)
            .filter_map(|s| s.argmin.map(|x| x - &self.offset))
            .collect())
    }

    fn check_halfspace(&self, h: &HalfSpace) -> Result<()> {
        if let Some(i) = h.form.max_index() {
            if i >= self.dim() {
                return Err(LdpError::DimensionMismatch {
                    expected: self.dim(),
                    got: i + 1,
                });
            }
        }
        if h.form.0.iter().all(|(_, c)| *c == 0.0) && h.level > 0.0 {
            return Err(LdpError::Infeasible);
        }
        Ok(())
    }

    fn best_facet(&self, facets: &[HalfSpace]) -> Result<RateInfimum> {
        let mut best: Option<RateInfimum> = None;
        for (i, h) in facets.iter().enumerate() {
            let r = self.solve(&[h.as_constraint()], Some(i))?;
            if best.as_ref().is_none_or(|b| r.value < b.value) {
                best = Some(r);
            }
        }
        best.ok_or(LdpError::Infeasible)
    }

    fn solve(&self, rows: &[crate::sets::Constraint], facet: Option<usize>) -> Result<RateInfimum> {
        let sol = qp::minimize(self.cov(), &self.offset, rows)?;
        Ok(RateInfimum {
            value: sol.value,
            argmin: sol.x,
            facet: if sol.value.is_finite() { facet } else { None },
            kkt_residual: sol.kkt_residual,
            iterations: sol.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{bm_covariance, weighted_seq_model, Coords, TimeGrid};
    use crate::sets::{CompactSetSpec, LinearForm};

    fn diag(v: &[f64]) -> GaussianModel {
        GaussianModel::centered_from_cov(
            DMatrix::from_diagonal(&DVector::from_row_slice(v)),
            Coords::Plain,
        )
        .unwrap()
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn barycenter_examples() {
        let rf = RateFunctional::new(&diag(&[1.0, 4.0]));
        assert_eq!(
            rf.barycenter(&dv(&[0.0, 1.0])).unwrap().barycenter,
            dv(&[0.0, 4.0])
        );
        assert_eq!(
            rf.barycenter(&dv(&[0.0, 0.0])).unwrap().barycenter,
            dv(&[0.0, 0.0])
        );
        assert!(rf.barycenter(&dv(&[1.0])).is_err());
    }

    #[test]
    fn cm_norm_examples() {
        let rf = RateFunctional::new(&diag(&[1.0, 4.0]));
        assert_eq!(rf.cm_norm_sq(&dv(&[0.0, 0.0])).unwrap(), 0.0);
        assert!((rf.cm_norm_sq(&dv(&[1.0, 2.0])).unwrap() - 2.0).abs() < 1e-14);
        let rf = RateFunctional::new(&diag(&[1.0, 0.0]));
        assert_eq!(rf.rank(), 1);
        assert!(rf.cm_norm_sq(&dv(&[0.0, 1.0])).unwrap().is_infinite());
    }

    #[test]
    fn pseudo_inverse_identities() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let rf = RateFunctional::new(
            &GaussianModel::centered_from_cov(cov.clone(), Coords::Plain).unwrap(),
        );
        assert_eq!(rf.rank(), 2);
        let p = rf.pinv_cov();
        let norm = cov.amax();
        assert!((p * &cov * p - p).amax() <= 1e-8 * norm);
        assert!((&cov * p * &cov - &cov).amax() <= 1e-8 * norm);
    }

    #[test]
    fn rate_vanishes_at_mean() {
        let m = diag(&[1.0, 2.0]).with_mean(dv(&[0.5, -1.0])).unwrap();
        let rf = RateFunctional::new(&m);
        assert_eq!(rf.rate(&dv(&[0.5, -1.0])).unwrap(), 0.0);
        assert!(rf
            .exposing_hyperplane(&dv(&[0.5, -1.0]))
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn diagonal_rate_and_exposing_hyperplane() {
        let a = [1.0, 0.7, 0.3, 0.1];
        let rf = RateFunctional::new(&weighted_seq_model(&a).unwrap());
        let x = dv(&[0.2, -0.5, 0.1, 0.0]);
        let expect: f64 = (0..4).map(|k| 0.5 * x[k] * x[k] / (a[k] * a[k])).sum();
        assert!((rf.rate(&x).unwrap() - expect).abs() < 1e-12);
        let eta = rf.exposing_hyperplane(&x).unwrap();
        for k in 0..4 {
            assert!((eta[k] - x[k] / (a[k] * a[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn bruteforce_one_dim() {
        let rf = RateFunctional::new(&diag(&[1.0]));
        assert_eq!(
            rf.conjugate_bruteforce(&dv(&[0.0]), 8.0, 1601).unwrap(),
            0.0
        );
        let v = rf.conjugate_bruteforce(&dv(&[2.0]), 8.0, 1601).unwrap();
        assert!((v - 2.0).abs() < 1e-3);
        assert!(v <= 2.0);
        assert!(rf.conjugate_bruteforce(&dv(&[2.0]), 8.0, 5).is_err());
        let big = RateFunctional::new(&diag(&[1.0; 5]));
        assert!(matches!(
            big.conjugate_bruteforce(&DVector::zeros(5), 1.0, 11),
            Err(LdpError::OracleDimension(5))
        ));
    }

    #[test]
    fn exposing_rejects_infinite_rate() {
        let rf = RateFunctional::new(&diag(&[1.0, 0.0]));
        assert!(matches!(
            rf.exposing_hyperplane(&dv(&[0.0, 1.0])),
            Err(LdpError::InfiniteRate)
        ));
    }

    #[test]
    fn halfspace_infimum() {
        let rf = RateFunctional::new(&diag(&[1.0]));
        let r = rf
            .rate_infimum(&Region::HalfSpace(HalfSpace::new(
                LinearForm::coordinate(0, 1.0),
                1.7,
            )))
            .unwrap();
        assert!((r.value - 1.7 * 1.7 / 2.0).abs() < 1e-14);
        assert!((r.argmin.unwrap()[0] - 1.7).abs() < 1e-14);
        let empty = HalfSpace::new(LinearForm(vec![]), 1.0);
        assert!(matches!(
            rf.rate_infimum(&Region::HalfSpace(empty)),
            Err(LdpError::Infeasible)
        ));
    }

    #[test]
    fn region_containing_mean() {
        let m = diag(&[1.0, 1.0]).with_mean(dv(&[0.2, 0.1])).unwrap();
        let rf = RateFunctional::new(&m);
        let r = rf
            .rate_infimum(&Region::Inside(CompactSetSpec::SupBall { radius: 1.0 }))
            .unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn box_complement_ties_break_low() {
        let rf = RateFunctional::new(&diag(&[1.0, 1.0]));
        let r = rf
            .rate_infimum(&Region::Outside(CompactSetSpec::SupBall { radius: 2.0 }))
            .unwrap();
        assert!((r.value - 2.0).abs() < 1e-14);
        assert_eq!(r.facet, Some(0));
        let pts = rf
            .dominating_points(
                &Region::Outside(CompactSetSpec::SupBall { radius: 2.0 }),
                1e-9,
            )
            .unwrap();
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn bm_exit_infimum_is_exact() {
        let grid = TimeGrid::uniform(200, 1.0).unwrap();
        let rf = RateFunctional::new(&bm_covariance(&grid).unwrap());
        let r = rf
            .rate_infimum(&Region::Outside(CompactSetSpec::SupBall { radius: 1.5 }))
            .unwrap();
        assert!((r.value - 1.125).abs() < 1e-9);
        // straight line from the origin to the level at the horizon
        let x = r.argmin.unwrap();
        for (i, t) in grid.points().iter().enumerate() {
            assert!((x[i] - 1.5 * t).abs() < 1e-9);
        }
        assert!(r.kkt_residual <= qp::VALUE_TOLERANCE);
    }
}
