//! Fernique constants, exponential moments of seminorms and the compact
//! sets `K_R = (R + log C) K` behind exponential tightness.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{invalid, LdpError, Result};
use crate::gauss::{sample, GaussianModel, Sampler};
use crate::mc::{self, Estimate, McParams};
use crate::normal;
use crate::seed;
use crate::sets::{CompactSetSpec, Seminorm};

/// Minimum sample count for a Fernique exceedance estimate.
pub const MIN_FERNIQUE_SAMPLES: usize = 10_000;
/// Two-sided 99% standard normal quantile used by the Wilson interval.
const WILSON_Z: f64 = 2.575_829_303_548_901;

/// `t_0 = s`, `t_n = sqrt(2) t_{n-1} + s`.
pub fn t_sequence(s: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", format!("must be positive, got {s}")));
    }
    let mut t = Vec::with_capacity(n_max + 1);
    t.push(s);
    for n in 1..=n_max {
        t.push(SQRT_2 * t[n - 1] + s);
    }
    Ok(t)
}

/// `sqrt(zeta) = s sqrt(2) / (sqrt(2) - 1)`, so that `t_n <= sqrt(zeta) 2^{n/2}`.
pub fn sqrt_zeta(s: f64) -> f64 {
    s * SQRT_2 / (SQRT_2 - 1.0)
}

/// Wilson score interval at 99% for `hits` successes out of `count`.
pub fn wilson_interval(hits: usize, count: usize) -> (f64, f64) {
    let n = count as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerniqueConstants {
    pub s: f64,
    pub beta: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub a_max: f64,
    pub beta_ci: (f64, f64),
    pub count: usize,
}

impl FerniqueConstants {
    /// Builds the constants from a measured exceedance probability.
    ///
    /// Refuses when the upper end of the interval reaches `1/2`. `beta` is
    /// floored at `1 / (count + 2)` so that `kappa > 0` on empty tails.
    pub fn from_beta(s: f64, beta: f64, beta_ci: (f64, f64), count: usize) -> Result<Self> {
        if beta_ci.1 >= 0.5 || beta >= 0.5 {
            return Err(LdpError::FerniqueRefused {
                beta,
                beta_hi: beta_ci.1,
            });
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid("s", format!("must be positive, got {s}")));
        }
        let beta = beta.max(1.0 / (count as f64 + 2.0));
        let kappa = beta / (1.0 - beta);
        let zeta = sqrt_zeta(s).powi(2);
        Ok(Self {
            s,
            beta,
            kappa,
            zeta,
            a_max: (1.0 / kappa).ln() / (2.0 * zeta),
            beta_ci,
            count,
        })
    }
}

fn exceedances(samples: &[Vec<f64>], norm: &Seminorm, s: f64) -> Result<usize> {
    let mut hits = 0;
    for x in samples {
        if norm.eval(x)? > s {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Constants from the empirical frequency of `{norm > s}` in `samples`.
pub fn fernique_constants(
    samples: &[Vec<f64>],
    norm: &Seminorm,
    s: f64,
) -> Result<FerniqueConstants> {
    if samples.len() < MIN_FERNIQUE_SAMPLES {
        return Err(invalid(
            "samples",
            format!(
                "need at least {MIN_FERNIQUE_SAMPLES}, got {}",
                samples.len()
            ),
        ));
    }
    let hits = exceedances(samples, norm, s)?;
    let count = samples.len();
    FerniqueConstants::from_beta(
        s,
        hits as f64 / count as f64,
        wilson_interval(hits, count),
        count,
    )
}

/// Shared constants for a family: the worst member's exceedance decides.
pub fn family_constants(
    models: &[GaussianModel],
    norm: &Seminorm,
    s: f64,
    count: usize,
    seed: u64,
) -> Result<FerniqueConstants> {
    let mut worst: Option<(usize, f64, (f64, f64))> = None;
    for (i, m) in models.iter().enumerate() {
        let xs = sample(m, count, seed::derive_seed(seed, &[i as u64]))?;
        if xs.len() < MIN_FERNIQUE_SAMPLES {
            return Err(invalid(
                "count",
                format!("need at least {MIN_FERNIQUE_SAMPLES}"),
            ));
        }
        let hits = exceedances(&xs, norm, s)?;
        let beta = hits as f64 / count as f64;
        let ci = wilson_interval(hits, count);
        if worst.as_ref().is_none_or(|w| ci.1 > w.2 .1) {
            worst = Some((hits, beta, ci));
        }
    }
    let (_, beta, ci) = worst.ok_or_else(|| invalid("models", "family is empty"))?;
    FerniqueConstants::from_beta(s, beta, ci, count)
}

/// `P(|xi| > t_n) <= kappa^{2^n} P(|xi| < s)` for a standard normal, with
/// `beta = P(|xi| > s)` exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub t_n: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn gaussian_tail_chain(s: f64, n_max: usize) -> Result<Vec<TailRow>> {
    let beta = normal::two_sided_sf(s);
    if beta >= 0.5 {
        return Err(LdpError::FerniqueRefused {
            beta,
            beta_hi: beta,
        });
    }
    let kappa = beta / (1.0 - beta);
    let inner = 1.0 - beta;
    Ok(t_sequence(s, n_max)?
        .into_iter()
        .enumerate()
        .map(|(n, t_n)| {
            let lhs = normal::two_sided_sf(t_n);
            let rhs = kappa.powi(1 << n) * inner;
            // n = 0 is an identity
            TailRow {
                n,
                t_n,
                lhs,
                rhs,
                holds: lhs <= rhs * (1.0 + 1e-12),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub model: usize,
    pub estimate: Estimate,
    /// Same estimate at twice the batch size.
    pub doubled: Estimate,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqMomentReport {
    pub a: f64,
    pub a_max: f64,
    pub rows: Vec<MomentRow>,
    pub family_sup: f64,
    pub stable: bool,
}

/// Maximal relative change under doubling accepted as stable.
pub const STABILITY_TOLERANCE: f64 = 0.1;

/// `E exp(a phi(X)^2)` for each model, at the given budget and at twice it.
pub fn verify_sq_exp_moment(
    models: &[GaussianModel],
    norm: &Seminorm,
    a: f64,
    constants: &FerniqueConstants,
    mc: &McParams,
) -> Result<SqMomentReport> {
    if !(a >= 0.0) {
        return Err(invalid("a", format!("must be nonnegative, got {a}")));
    }
    if a > constants.a_max {
        return Err(LdpError::ExponentTooLarge {
            a,
            a_max: constants.a_max,
        });
    }
    let mut rows = Vec::with_capacity(models.len());
    for (i, m) in models.iter().enumerate() {
        let sub = mc.substream(&[i as u64]);
        let f = |x: &[f64]| (a * norm.eval(x).unwrap_or(f64::INFINITY).powi(2)).exp();
        let estimate = mc::estimate_mean(m, f, &sub)?;
        let doubled = mc::estimate_mean(m, f, &sub.with_batch(2 * sub.batch))?;
        let relative_change = (doubled.value - estimate.value).abs() / estimate.value;
        rows.push(MomentRow {
            model: i,
            estimate,
            doubled,
            relative_change,
        });
    }
    let family_sup = rows.iter().map(|r| r.doubled.value).fold(0.0, f64::max);
    let stable =
        family_sup.is_finite() && rows.iter().all(|r| r.relative_change < STABILITY_TOLERANCE);
    Ok(SqMomentReport {
        a,
        a_max: constants.a_max,
        rows,
        family_sup,
        stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinMomentRow {
    pub model: usize,
    pub estimate: Estimate,
    pub sq_estimate: Estimate,
    /// `exp(t^2 / a) + E exp(a phi^2)`
    pub bound: f64,
    pub holds: bool,
}

/// `E exp(t phi(X))` against `exp(t^2/a) + E exp(a phi(X)^2)`, both estimated
/// on the same draws.
pub fn verify_lin_exp_moment(
    models: &[GaussianModel],
    norm: &Seminorm,
    t: f64,
    a: f64,
    constants: &FerniqueConstants,
    mc: &McParams,
) -> Result<Vec<LinMomentRow>> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    if !(a > 0.0) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if a > constants.a_max {
        return Err(LdpError::ExponentTooLarge {
            a,
            a_max: constants.a_max,
        });
    }
    models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let sub = mc.substream(&[i as u64]);
            let phi = |x: &[f64]| norm.eval(x).unwrap_or(f64::INFINITY);
            let estimate = mc::estimate_mean(m, |x| (t * phi(x)).exp(), &sub)?;
            let sq_estimate = mc::estimate_mean(m, |x| (a * phi(x).powi(2)).exp(), &sub)?;
            let bound = (t * t / a).exp() + sq_estimate.value;
            Ok(LinMomentRow {
                model: i,
                holds: estimate.value <= bound,
                estimate,
                sq_estimate,
                bound,
            })
        })
        .collect()
}

/// `K_R = (R + log C) K`.
pub fn build_kr(set: &CompactSetSpec, c: f64, r: f64) -> Result<CompactSetSpec> {
    set.validate()?;
    if !(c >= 1.0 && c.is_finite()) {
        return Err(invalid(
            "C",
            format!("an exponential moment of a gauge is at least 1, got {c}"),
        ));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("R", format!("must be positive, got {r}")));
    }
    Ok(set.scaled(r + c.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovRow {
    pub g: u32,
    pub t: f64,
    pub probability: Estimate,
    /// `exp((log C - t) g)`
    pub bound: f64,
    /// The 99% interval does not lie entirely above the bound.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub c: Estimate,
    pub r: f64,
    pub rows: Vec<MarkovRow>,
}

/// Estimates `C = E exp(q_K(X))`, then checks
/// `P(q_K(g^{-1/2} X) > t) <= exp((log C - t) g)` at `t = R + log C`.
pub fn kr_markov_check(
    model: &GaussianModel,
    set: &CompactSetSpec,
    r: f64,
    gs: &[u32],
    mc: &McParams,
) -> Result<MarkovReport> {
    set.validate()?;
    let c = mc::estimate_mean(
        model,
        |x| set.minkowski(x).map(f64::exp).unwrap_or(f64::INFINITY),
        &mc.substream(&[0]),
    )?;
    let log_c = c.value.ln();
    let t = r + log_c;
    build_kr(set, c.value, r)?;
    let rows = gs
        .iter()
        .map(|&g| {
            if g == 0 {
                return Err(invalid("g", "must be a positive integer"));
            }
            let level = t * (g as f64).sqrt();
            let probability = mc::estimate_probability(
                model,
                |x| set.minkowski(x).is_ok_and(|q| q > level),
                &mc.substream(&[1, g as u64]),
            )?;
            let bound = ((log_c - t) * g as f64).exp();
            Ok(MarkovRow {
                g,
                t,
                holds: probability.ci_lo <= bound,
                probability,
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkovReport { c, r, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidReport {
    pub g: u32,
    pub direct_mean: Vec<f64>,
    pub scaled_mean: Vec<f64>,
    pub direct_var: Vec<f64>,
    pub scaled_var: Vec<f64>,
    /// Sup-norm quantiles at levels 0.5, 0.9, 0.99.
    pub direct_quantiles: [f64; 3],
    pub scaled_quantiles: [f64; 3],
    pub max_discrepancy: f64,
}

/// Compares `X` with `g^{-1/2}(Z_1 + ... + Z_g)` for i.i.d. copies `Z_i`.
///
/// Both sides read the same stream, so `g = 1` compares identical draws.
pub fn iid_scaling_check(
    model: &GaussianModel,
    g: u32,
    count: usize,
    seed: u64,
) -> Result<IidReport> {
    if g == 0 {
        return Err(invalid("g", "must be a positive integer"));
    }
    if count < 2 {
        return Err(invalid("count", "need at least two draws"));
    }
    let sampler = Sampler::new(model)?;
    let d = model.dim();
    let mut noise = vec![0.0; d];
    let mut z = vec![0.0; d];

    let mut rng = seed::stream(seed);
    let direct: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            sampler.draw_into(&mut rng, &mut noise, &mut z);
            z.clone()
        })
        .collect();

    let mut rng = seed::stream(seed);
    let scale = 1.0 / (g as f64).sqrt();
    let scaled: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let mut acc = vec![0.0; d];
            for _ in 0..g {
                sampler.draw_into(&mut rng, &mut noise, &mut z);
                for (a, v) in acc.iter_mut().zip(&z) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a *= scale);
            acc
        })
        .collect();

    let (direct_mean, direct_var) = moments(&direct);
    let (scaled_mean, scaled_var) = moments(&scaled);
    let direct_quantiles = sup_quantiles(&direct);
    let scaled_quantiles = sup_quantiles(&scaled);
    let max_discrepancy = direct_mean
        .iter()
        .zip(&scaled_mean)
        .chain(direct_var.iter().zip(&scaled_var))
        .chain(direct_quantiles.iter().zip(&scaled_quantiles))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(IidReport {
        g,
        direct_mean,
        scaled_mean,
        direct_var,
        scaled_var,
        direct_quantiles,
        scaled_quantiles,
        max_discrepancy,
    })
}

fn moments(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let d = xs[0].len();
    let mut mean = vec![0.0; d];
    for x in xs {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for x in xs {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            *s += (v - m).powi(2) / (n - 1.0);
        }
    }
    (mean, var)
}

fn sup_quantiles(xs: &[Vec<f64>]) -> [f64; 3] {
    let mut sups: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .collect();
    sups.sort_by(f64::total_cmp);
    let q = |p: f64| sups[((p * (sups.len() - 1) as f64).round()) as usize];
    [q(0.5), q(0.9), q(0.99)]
}
