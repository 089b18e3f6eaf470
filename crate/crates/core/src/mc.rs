//! Seeded batch Monte Carlo with Cameron-Martin tilting and decay fitting.
//!
//! Every batch draws from its own stream `derive_seed(master_seed, [batch])`,
//! batches run on the rayon pool and are collected in index order, so an
//! [`Estimate`] depends only on its inputs and never on the thread count.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{LdpError, Result};
use crate::gauss::{GaussianModel, Sampler};
use crate::rkhs::RateFunctional;
use crate::seed;

/// Two-sided confidence level of every interval reported by this module.
pub const CI_LEVEL: f64 = 0.99;
pub const MIN_BATCH: usize = 1_000;
pub const MIN_BATCHES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub batch: usize,
    pub batches: usize,
    pub master_seed: u64,
}

impl McParams {
    pub fn new(batch: usize, batches: usize, master_seed: u64) -> Result<Self> {
        let p = Self {
            batch,
            batches,
            master_seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch < MIN_BATCH {
            return Err(LdpError::InvalidMc(format!(
                "mc.batch must be at least {MIN_BATCH}, got {}",
                self.batch
            )));
        }
        if self.batches < MIN_BATCHES {
            return Err(LdpError::InvalidMc(format!(
                "mc.batches must be at least {MIN_BATCHES}, got {}",
                self.batches
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.batch * self.batches
    }

    /// Same budget on an independent stream keyed by `path`.
    pub fn substream(&self, path: &[u64]) -> Self {
        Self {
            master_seed: seed::derive_seed(self.master_seed, path),
            ..*self
        }
    }

    pub fn with_batch(&self, batch: usize) -> Self {
        Self { batch, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_effective: f64,
    pub floor_flag: bool,
}

impl Estimate {
    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

/// Per-batch running sums; merging is addition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: usize,
    hits: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, w: f64) {
        self.count += 1;
        if w != 0.0 {
            self.hits += 1;
            self.sum += w;
            self.sum_sq += w * w;
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            count: self.count + o.count,
            hits: self.hits + o.hits,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }
}

/// Quantile of Student's t with `dof` degrees of freedom at `(1 + CI_LEVEL) / 2`.
pub fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + 0.5 * CI_LEVEL)
}

fn run_batches<F>(dim: usize, mc: &McParams, score: F) -> Result<Vec<Moments>>
where
    F: Fn(&mut seed::StreamRng, &mut [f64], &mut [f64]) -> f64 + Sync,
{
    mc.validate()?;
    Ok((0..mc.batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::stream(seed::derive_seed(mc.master_seed, &[b as u64]));
            let mut noise = vec![0.0; dim];
            let mut z = vec![0.0; dim];
            let mut m = Moments::default();
            for _ in 0..mc.batch {
                m.push(score(&mut rng, &mut noise, &mut z));
            }
            m
        })
        .collect())
}

/// Batch-means estimate; `nonnegative` clamps the lower CI end at 0 and
/// enables the rule-of-three floor on zero hits.
fn summarize(batches: &[Moments], nonnegative: bool) -> Estimate {
    let total = batches.iter().fold(Moments::default(), |a, b| a.merge(*b));
    let k = batches.len() as f64;
    let means: Vec<f64> = batches.iter().map(Moments::mean).collect();
    let value = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (k - 1.0);
    let std_error = (var / k).sqrt();
    let n_effective = if total.sum_sq > 0.0 {
        total.sum * total.sum / total.sum_sq
    } else {
        0.0
    };
    if nonnegative && total.hits == 0 {
        return Estimate {
            value: 0.0,
            std_error: 0.0,
            ci_lo: 0.0,
            ci_hi: 3.0 / total.count as f64,
            n_effective,
            floor_flag: true,
        };
    }
    let half = t_quantile(batches.len() - 1) * std_error;
    let mut ci_lo = value - half;
    if nonnegative {
        ci_lo = ci_lo.max(0.0);
    }
    Estimate {
        value,
        std_error,
        ci_lo,
        ci_hi: value + half,
        n_effective,
        floor_flag: false,
    }
}

/// `E f(X)` for a nonnegative score `f`.
pub fn estimate_mean<F>(model: &GaussianModel, f: F, mc: &McParams) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let sampler = Sampler::new(model)?;
    let batches = run_batches(model.dim(), mc, |rng, noise, z| {
        sampler.draw_into(rng, noise, z);
        f(z)
    })?;
    Ok(summarize(&batches, true))
}

/// `P(X in event)` by plain frequency.
pub fn estimate_probability<E>(model: &GaussianModel, event: E, mc: &McParams) -> Result<Estimate>
where
    E: Fn(&[f64]) -> bool + Sync,
{
    estimate_mixture(model, event, &[DVector::zeros(model.dim())], mc)
}

/// `P(X in event)` sampling `X + h` and reweighting by the likelihood ratio
/// `exp(-<phi, Z - m> + |h|_H^2 / 2)`, `phi = Sigma^+ h`.
pub fn estimate_tilted<E>(
    model: &GaussianModel,
    event: E,
    shift: &DVector<f64>,
    mc: &McParams,
) -> Result<Estimate>
where
    E: Fn(&[f64]) -> bool + Sync,
{
    estimate_mixture(model, event, std::slice::from_ref(shift), mc)
}

/// Importance sampling from the equal-weight mixture of `N(m + h_j, Sigma)`.
///
/// Used with the set of dominating points of a symmetric event, where a single
/// shift would leave the mirror-image exits unweighted. With one shift no
/// component index is drawn, so a zero shift reproduces the plain estimator
/// bit for bit.
pub fn estimate_mixture<E>(
    model: &GaussianModel,
    event: E,
    shifts: &[DVector<f64>],
    mc: &McParams,
) -> Result<Estimate>
where
    E: Fn(&[f64]) -> bool + Sync,
{
    if shifts.is_empty() {
        return Err(LdpError::InvalidMc(
            "at least one tilt shift is required".into(),
        ));
    }
    let rf = RateFunctional::new(model);
    let mut phis = Vec::with_capacity(shifts.len());
    let mut halfnorms = Vec::with_capacity(shifts.len());
    for h in shifts {
        let norm_sq = rf.cm_norm_sq(h)?;
        if !norm_sq.is_finite() {
            return Err(LdpError::InvalidMc(
                "tilt shift lies outside the covariance range".into(),
            ));
        }
        phis.push(rf.pinv_cov() * h);
        halfnorms.push(0.5 * norm_sq);
    }
    let sampler = Sampler::new(model)?;
    let mean: Vec<f64> = model.mean().iter().copied().collect();
    let plain = shifts.len() == 1 && shifts[0].iter().all(|v| *v == 0.0);
    let ln_j = (shifts.len() as f64).ln();
    let batches = run_batches(model.dim(), mc, |rng, noise, z| {
        sampler.draw_into(rng, noise, z);
        if plain {
            return if event(z) { 1.0 } else { 0.0 };
        }
        let j = if shifts.len() == 1 {
            0
        } else {
            rand::Rng::random_range(rng, 0..shifts.len())
        };
        for (zi, hi) in z.iter_mut().zip(shifts[j].iter()) {
            *zi += hi;
        }
        if !event(z) {
            return 0.0;
        }
        // log of the mixture density ratio dQ/dP at z
        let logs: Vec<f64> = phis
            .iter()
            .zip(&halfnorms)
            .map(|(phi, hn)| {
                phi.iter()
                    .zip(z.iter().zip(&mean))
                    .map(|(p, (x, m))| p * (x - m))
                    .sum::<f64>()
                    - hn
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln() - ln_j;
        (-lse).exp()
    })?;
    Ok(summarize(&batches, true))
}

/// Weighted least-squares fit of `log p = intercept + slope * g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub points: usize,
}

/// Non-finite `log_p` entries are dropped; the slope standard error comes
/// from the weighted residual variance with `points - 2` degrees of freedom.
pub fn fit_decay(g: &[f64], log_p: &[f64], weights: &[f64]) -> Result<DecayFit> {
    if g.len() != log_p.len() || g.len() != weights.len() {
        return Err(LdpError::DimensionMismatch {
            expected: g.len(),
            got: log_p.len().min(weights.len()),
        });
    }
    let pts: Vec<(f64, f64, f64)> = g
        .iter()
        .zip(log_p)
        .zip(weights)
        .filter(|((x, y), w)| x.is_finite() && y.is_finite() && **w > 0.0 && w.is_finite())
        .map(|((x, y), w)| (*x, *y, *w))
        .collect();
    if pts.len() < 3 {
        return Err(LdpError::TooFewPoints(pts.len()));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xbar = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ybar = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(LdpError::TooFewPoints(1));
    }
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let s2 = rss / (pts.len() - 2) as f64;
    Ok(DecayFit {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        points: pts.len(),
    })
}
