//! Minimization of `(x - m)' Sigma^+ (x - m) / 2` over a polyhedron
//! `{A x <= b}`, restricted to the affine support `m + range(Sigma)`.
//!
//! Writing `x = m - Sigma A' lambda` the problem dualizes to the
//! nonnegatively constrained quadratic
//!
//! ```text
//! max_{lambda >= 0}  -lambda' Q lambda / 2 - lambda' d,   Q = A Sigma A',  d = b - A m
//! ```
//!
//! which is solved by accelerated projected gradient with adaptive restarts,
//! followed by an active-set polish. `Q` is never formed; products go through
//! the sparse rows of `A` and one dense product with `Sigma`.

use nalgebra::{DMatrix, DVector};

use crate::error::{LdpError, Result};
use crate::sets::Constraint;

/// Relative tolerance on the value certified by the duality gap.
pub const VALUE_TOLERANCE: f64 = 1e-6;
const FEASIBILITY_TOLERANCE: f64 = 1e-9;
const ITERATIONS_PER_RESTART: usize = 20_000;
const RESTARTS: usize = 6;

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub value: f64,
    pub x: Option<DVector<f64>>,
    /// `max(relative primal violation, relative duality gap)`.
    pub kkt_residual: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    cov: &'a DMatrix<f64>,
    mean: &'a DVector<f64>,
    rows: &'a [Constraint],
    slack0: Vec<f64>,
    scale: f64,
}

impl<'a> Problem<'a> {
    fn new(cov: &'a DMatrix<f64>, mean: &'a DVector<f64>, rows: &'a [Constraint]) -> Self {
        let m = mean.as_slice();
        let slack0: Vec<f64> = rows.iter().map(|c| c.bound - c.form.apply(m)).collect();
        let scale = rows
            .iter()
            .map(|c| c.bound.abs())
            .chain(slack0.iter().map(|s| s.abs()))
            .fold(1e-300, f64::max);
        Self {
            cov,
            mean,
            rows,
            slack0,
            scale,
        }
    }

    /// `Sigma A' lambda`
    fn lift(&self, lambda: &[f64]) -> DVector<f64> {
        let mut at = DVector::zeros(self.mean.len());
        for (c, &l) in self.rows.iter().zip(lambda) {
            if l != 0.0 {
                for &(i, a) in &c.form.0 {
                    at[i] += a * l;
                }
            }
        }
        self.cov * at
    }

    /// `Q lambda`
    fn q_apply(&self, lambda: &[f64], out: &mut [f64]) -> DVector<f64> {
        let w = self.lift(lambda);
        for (o, c) in out.iter_mut().zip(self.rows) {
            *o = c.form.apply(w.as_slice());
        }
        w
    }

    fn primal(&self, lambda: &[f64]) -> DVector<f64> {
        self.mean - self.lift(lambda)
    }

    /// Relative KKT residual and primal value at `lambda`.
    fn certify(&self, lambda: &[f64]) -> (f64, f64, DVector<f64>) {
        let x = self.primal(lambda);
        let mut violation = 0.0f64;
        let mut gap = 0.0;
        for (c, &l) in self.rows.iter().zip(lambda) {
            let s = c.bound - c.form.apply(x.as_slice());
            violation = violation.max(-s);
            gap += l * s;
        }
        // value = lambda' Q lambda / 2 = (x - m)' Sigma^+ (x - m) / 2
        let mut ql = vec![0.0; lambda.len()];
        let _ = self.q_apply(lambda, &mut ql);
        let value = 0.5 * ql.iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>();
        let rel_violation = violation / self.scale;
        let rel_gap = gap.abs() / value.max(1e-300);
        let residual = if rel_violation > FEASIBILITY_TOLERANCE {
            1.0 + rel_violation
        } else {
            rel_gap
        };
        (residual, value, x)
    }

    fn lipschitz(&self) -> f64 {
        let k = self.rows.len();
        // paired rows of boxes cancel on a constant vector
        let mut v: Vec<f64> = (0..k).map(|i| 1.0 / (i + 1) as f64).collect();
        let mut qv = vec![0.0; k];
        let mut est = 0.0;
        for _ in 0..200 {
            self.q_apply(&v, &mut qv);
            let norm = qv.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return self.trace();
            }
            let prev = est;
            est = norm;
            for (a, b) in v.iter_mut().zip(&qv) {
                *a = b / norm;
            }
            if (est - prev).abs() <= 1e-6 * est {
                break;
            }
        }
        est * 1.01
    }

    /// `tr Q`, an upper bound on its largest eigenvalue.
    fn trace(&self) -> f64 {
        self.rows
            .iter()
            .map(|c| {
                let mut at = DVector::zeros(self.mean.len());
                for &(i, a) in &c.form.0 {
                    at[i] += a;
                }
                (self.cov * &at).dot(&at)
            })
            .sum()
    }

    /// Re-solves the equality-constrained problem on the active set of `lambda`.
    fn polish(&self, lambda: &[f64]) -> Option<Vec<f64>> {
        let active: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] > 0.0).collect();
        if active.is_empty() {
            return None;
        }
        let d = self.mean.len();
        let k = active.len();
        let mut at = DMatrix::zeros(d, k);
        for (col, &r) in active.iter().enumerate() {
            for &(i, a) in &self.rows[r].form.0 {
                at[(i, col)] += a;
            }
        }
        let sat = self.cov * &at;
        let q = at.transpose() * &sat;
        let rhs = DVector::from_iterator(k, active.iter().map(|&r| -self.slack0[r]));
        let sol = q.cholesky()?.solve(&rhs);
        if sol.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return None;
        }
        let mut full = vec![0.0; lambda.len()];
        for (&r, l) in active.iter().zip(sol.iter()) {
            full[r] = *l;
        }
        Some(full)
    }
}

/// Solves the support-restricted quadratic over `{A x <= b}`.
pub fn minimize(
    cov: &DMatrix<f64>,
    mean: &DVector<f64>,
    rows: &[Constraint],
) -> Result<QpSolution> {
    let p = Problem::new(cov, mean, rows);
    if p.slack0.iter().all(|s| *s >= 0.0) {
        return Ok(QpSolution {
            value: 0.0,
            x: Some(mean.clone()),
            kkt_residual: 0.0,
            iterations: 0,
        });
    }
    if rows.len() == 1 {
        return Ok(single(&p));
    }

    let k = rows.len();
    let lip = p.lipschitz();
    if lip == 0.0 {
        // Sigma A' = 0: no direction in the support moves any constraint.
        return Ok(QpSolution {
            value: f64::INFINITY,
            x: None,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }
    let step = 1.0 / lip;
    let mut lambda = vec![0.0; k];
    let mut best: Option<(f64, f64, DVector<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut qy = vec![0.0; k];

    for _ in 0..=RESTARTS {
        let mut y = lambda.clone();
        let mut t = 1.0f64;
        for it in 0..ITERATIONS_PER_RESTART {
            iterations += 1;
            p.q_apply(&y, &mut qy);
            let mut next = vec![0.0; k];
            let mut restart_score = 0.0;
            for i in 0..k {
                let grad = qy[i] + p.slack0[i];
                next[i] = (y[i] - step * grad).max(0.0);
                restart_score += grad * (next[i] - lambda[i]);
            }
            if restart_score > 0.0 {
                t = 1.0;
                y.clone_from(&lambda);
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            for i in 0..k {
                y[i] = (next[i] + momentum * (next[i] - lambda[i])).max(0.0);
            }
            lambda = next;
            t = t_next;
            if it % 25 == 24 {
                let candidate = p.polish(&lambda).unwrap_or_else(|| lambda.clone());
                for lam in [candidate, lambda.clone()] {
                    let (res, value, x) = p.certify(&lam);
                    if best.as_ref().is_none_or(|b| res < b.0) {
                        best = Some((res, value, x, lam));
                    }
                }
                if best.as_ref().is_some_and(|b| b.0 <= VALUE_TOLERANCE) {
                    let (res, value, x, _) = best.unwrap();
                    return Ok(QpSolution {
                        value,
                        x: Some(x),
                        kkt_residual: res,
                        iterations,
                    });
                }
            }
        }
        if let Some(b) = &best {
            lambda.clone_from(&b.3);
        }
    }
    let (residual, best_value) = best
        .map(|b| (b.0, b.1))
        .unwrap_or((f64::INFINITY, f64::NAN));
    Err(LdpError::NonConvergence {
        restarts: RESTARTS,
        best_value,
        residual,
    })
}

fn single(p: &Problem<'_>) -> QpSolution {
    let mut q = [0.0];
    let _ = p.q_apply(&[1.0], &mut q);
    let deficit = -p.slack0[0];
    let unit = p.rows[0].form.0.iter().map(|(_, a)| a * a).sum::<f64>();
    let reach = q[0];
    if reach <= 1e-14 * p.cov.amax().max(1e-300) * unit {
        return QpSolution {
            value: f64::INFINITY,
            x: None,
            kkt_residual: 0.0,
            iterations: 1,
        };
    }
    let lambda = [deficit / reach];
    let (res, _, x) = p.certify(&lambda);
    QpSolution {
        value: deficit * deficit / (2.0 * reach),
        x: Some(x),
        kkt_residual: res,
        iterations: 1,
    }
}
