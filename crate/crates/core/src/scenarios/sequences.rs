//! Sequence-space examples, computed exactly through independence of the
//! coordinates.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{
    check_n_list, fit_rows, BoxRule, DecayReport, DecayRow, Diagnostic, SequenceRule, Verdict,
};
use crate::error::{invalid, LdpError, Result};
use crate::gauss::{weighted_seq_model, Coords, GaussianModel, SpeedFunction};
use crate::normal;
use crate::rkhs::RateFunctional;

/// Slack on the counterexample inequality `(1/n) log P >= -a_{k0}^2 / 2`.
pub const C0_SLACK: f64 = 1e-6;
/// `2 / sqrt(2 pi) + 1`, the constant the bound chain delivers.
pub const WEIGHTED_CONST_BOUND: f64 = 1.797_884_560_802_865_4;
/// Probability of leaving a fixed box that counts as tightness failure.
pub const TIGHTNESS_LEVEL: f64 = 0.99;
/// Truncation level of the rate cross-check.
const CROSS_CHECK_DIM: usize = 10;

fn check_decreasing(seq: &[f64], key: &'static str) -> Result<()> {
    match seq.windows(2).position(|w| w[1] >= w[0]) {
        Some(i) => Err(invalid(
            key,
            format!(
                "must be strictly decreasing, fails between k = {} and k = {}",
                i + 1,
                i + 2
            ),
        )),
        None => Ok(()),
    }
}

pub(super) fn check_c0(n_list: &[u64], bounds: &SequenceRule, k0_list: &[usize]) -> Result<()> {
    check_n_list(n_list)?;
    bounds.validate("scenario.bounds")?;
    let n_max = *n_list.last().unwrap() as usize;
    check_decreasing(&bounds.take(n_max, "scenario.bounds")?, "scenario.bounds")?;
    if k0_list.is_empty() || k0_list[0] == 0 || k0_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(
            "scenario.k0_list",
            "must be a non-empty strictly increasing list of indices >= 1",
        ));
    }
    if k0_list.last().is_some_and(|k| *k > n_max) {
        return Err(invalid(
            "scenario.k0_list",
            format!("indices must not exceed the largest n = {n_max}"),
        ));
    }
    Ok(())
}

/// `ln P(|xi_k| <= z_k for all k)`.
fn log_inside(z: impl Iterator<Item = f64>) -> f64 {
    z.map(normal::log_central).sum()
}

pub fn run_c0_counterexample(
    n_list: &[u64],
    bounds: &SequenceRule,
    k0_list: &[usize],
) -> Result<DecayReport> {
    check_c0(n_list, bounds, k0_list)?;
    let n_max = *n_list.last().unwrap() as usize;
    let a = bounds.take(n_max, "scenario.bounds")?;
    let std1 = GaussianModel::centered_from_cov(nalgebra::DMatrix::identity(1, 1), Coords::Plain)?;

    let per_n: Vec<(DecayRow, Vec<Diagnostic>, bool)> = n_list
        .par_iter()
        .map(|&n| {
            let nf = n as f64;
            let sn = nf.sqrt();
            let ak = &a[..n as usize];
            let p = -log_inside(ak.iter().map(|v| v * sn)).exp_m1();
            let predicted = -0.5 * ak[ak.len() - 1].powi(2);
            let row = DecayRow::exact(n, nf, p, predicted);
            let mut diags = Vec::new();
            let mut ok = true;
            let mut prev = f64::NEG_INFINITY;
            for &k0 in k0_list.iter().filter(|k| **k as u64 <= n) {
                let a0 = a[k0 - 1];
                let lower = normal::log_two_sided_sf(a0 * sn) / nf;
                let bound = -0.5 * a0 * a0;
                ok &= row.log_p_over_g >= bound - C0_SLACK;
                ok &= row.log_p_over_g >= lower;
                ok &= lower > prev;
                prev = lower;
                diags.push(Diagnostic::at(n, &format!("lower_bound_k{k0}"), lower));
                diags.push(Diagnostic::at(n, &format!("rate_bound_k{k0}"), bound));
            }
            // (1/n) log E exp(n <theta, n^{-1/2} X_n>) at theta_k = 1/k, coordinatewise
            let mut lambda = 0.0;
            let mut formula = 0.0;
            for k in 1..=n as usize {
                let th = 1.0 / k as f64;
                lambda += std1.log_laplace(&DVector::from_element(1, sn * th))? / nf;
                formula += 0.5 * th * th;
            }
            diags.push(Diagnostic::at(n, "lambda_check", lambda));
            diags.push(Diagnostic::at(n, "lambda_formula", formula));
            Ok((row, diags, ok))
        })
        .collect::<Result<Vec<_>>>()?;

    let refuted = per_n.iter().all(|r| r.2);
    let (rows, diags): (Vec<_>, Vec<_>) = per_n.into_iter().map(|(r, d, _)| (r, d)).unzip();
    let verdict = Verdict {
        label: "exponential tightness at speed n".into(),
        status: if refuted { "REFUTED" } else { "NOT REFUTED" }.into(),
        ok: refuted,
        detail: "empirical rate ≥ −a_{k0}²/2".into(),
    };
    Ok(DecayReport {
        scenario: "c0_counterexample".into(),
        fit: fit_rows(&rows),
        rows,
        predicted: 0.0,
        verdicts: vec![verdict],
        diagnostics: diags.concat(),
        notes: vec!["probabilities are exact products over independent coordinates".into()],
    })
}

#[allow(clippy::too_many_arguments)]
pub(super) fn check_weighted(
    n_list: &[u64],
    weights: &SequenceRule,
    b: &BoxRule,
    r: f64,
    m: f64,
    speed: &SpeedFunction,
    test_boxes: &[SequenceRule],
    tightness_n_max: usize,
) -> Result<()> {
    check_n_list(n_list)?;
    weights.validate("scenario.weights")?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("scenario.r", format!("must be positive, got {r}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid("scenario.m", format!("must be positive, got {m}")));
    }
    let n_max = *n_list.last().unwrap() as usize;
    let a = weights.take(n_max, "scenario.weights")?;
    if a.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("scenario.weights", "must be nonincreasing"));
    }
    if let BoxRule::Custom { bounds } = b {
        bounds.validate("scenario.b")?;
        bounds.take(n_max, "scenario.b")?;
    }
    speed.validate()?;
    let gs = speed.eval_many(n_list)?;
    for (&n, &g) in n_list.iter().zip(&gs) {
        let bound = m * (n as f64).ln();
        if g < bound {
            return Err(LdpError::SpeedTooSlow { n, g, bound });
        }
    }
    for t in test_boxes {
        t.validate("scenario.test_boxes")?;
        if let Some(len) = t.len() {
            if len < tightness_n_max {
                return Err(invalid(
                    "scenario.test_boxes",
                    "explicit test boxes must cover tightness_n_max",
                ));
            }
        }
    }
    if tightness_n_max == 0 || tightness_n_max > 100_000_000 {
        return Err(invalid("scenario.tightness_n_max", "must lie in 1..=1e8"));
    }
    weights
        .take(tightness_n_max, "scenario.weights")
        .map(|_| ())
}

/// Smallest `n <= n_max` with `P(X_n not in K) >= level` for the box
/// `|x_k| <= b_k`, where `X_n = (a_1 xi_1, ..., a_n xi_n)`.
pub fn tightness_failure_index(
    weights: &SequenceRule,
    bounds: &SequenceRule,
    n_max: usize,
    level: f64,
) -> Option<usize> {
    let target = (1.0 - level).ln();
    let mut log_in = 0.0;
    for k in 1..=n_max {
        if bounds.len().is_some_and(|l| l < k) || weights.len().is_some_and(|l| l < k) {
            return None;
        }
        log_in += normal::log_central(bounds.at(k) / weights.at(k));
        if log_in <= target {
            return Some(k);
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
pub fn run_weighted_c0(
    n_list: &[u64],
    weights: &SequenceRule,
    b: &BoxRule,
    r: f64,
    m: f64,
    speed: &SpeedFunction,
    test_boxes: &[SequenceRule],
    tightness_n_max: usize,
) -> Result<DecayReport> {
    check_weighted(n_list, weights, b, r, m, speed, test_boxes, tightness_n_max)?;
    let n_max = *n_list.last().unwrap() as usize;
    let a = weights.take(n_max, "scenario.weights")?;
    let bk = b.bounds(&a, r, m)?;
    let gs = speed.eval_many(n_list)?;

    let mut rows = Vec::with_capacity(n_list.len());
    let mut diags = Vec::new();
    let mut chain_ok = true;
    let mut max_const = 0.0f64;
    for (&n, &g) in n_list.iter().zip(&gs) {
        let n_us = n as usize;
        let z: Vec<f64> = (0..n_us).map(|k| g.sqrt() * bk[k] / a[k]).collect();
        let p = -log_inside(z.iter().copied()).exp_m1();
        let tail_sum: f64 = z.iter().map(|v| normal::sf(*v)).sum();
        let chain = 2.0 * tail_sum + 0.5 * (2.0 * tail_sum).powi(2);
        let exp_sum: f64 = z.iter().map(|v| (-0.5 * v * v).exp()).sum();
        let constant = p * (r * g).exp();
        chain_ok &= p <= chain * (1.0 + 1e-12);
        max_const = max_const.max(constant);
        let predicted = -(0..n_us)
            .map(|k| 0.5 * (bk[k] / a[k]).powi(2))
            .fold(f64::INFINITY, f64::min);
        rows.push(DecayRow::exact(n, g, p, predicted));
        diags.extend([
            Diagnostic::at(n, "tail_sum", tail_sum),
            Diagnostic::at(n, "chain_bound", chain),
            Diagnostic::at(n, "exp_sum", exp_sum),
            Diagnostic::at(n, "exp_sum_bound", (-r * g).exp()),
            Diagnostic::at(n, "const", constant),
        ]);
    }

    let mut verdicts = Vec::new();
    let failures: Vec<Option<usize>> = test_boxes
        .par_iter()
        .map(|t| tightness_failure_index(weights, t, tightness_n_max, TIGHTNESS_LEVEL))
        .collect();
    for (i, f) in failures.iter().enumerate() {
        diags.push(Diagnostic::global(
            &format!("tightness_failure_n_box{i}"),
            f.map_or(f64::INFINITY, |n| n as f64),
        ));
    }
    let not_tight = !failures.is_empty() && failures.iter().all(Option::is_some);
    let reached: Vec<String> = failures
        .iter()
        .map(|f| f.map_or("none".to_string(), |n| n.to_string()))
        .collect();
    verdicts.push(Verdict {
        label: "tightness".into(),
        status: if not_tight { "FAIL" } else { "NOT REFUTED" }.into(),
        ok: not_tight,
        detail: format!(
            "by design; P(X_n in K^c) >= {TIGHTNESS_LEVEL} by n = [{}] for the {} test boxes, n <= {tightness_n_max}",
            reached.join(", "),
            failures.len()
        ),
    });
    verdicts.push(Verdict::check(
        "exponential tightness",
        chain_ok && max_const <= WEIGHTED_CONST_BOUND,
        format!("P(g_n^{{-1/2}} X_n not in K) <= const e^{{-R g_n}}, max const = {max_const:.4e} <= {WEIGHTED_CONST_BOUND:.4}"),
    ));

    // I(x) = sum x_k^2 / (2 a_k^2) and its exposing functional on a truncated point
    let d = CROSS_CHECK_DIM.min(n_max);
    let rf = RateFunctional::new(&weighted_seq_model(&a[..d])?);
    let x = DVector::from_iterator(
        d,
        (0..d).map(|k| a[k] * if k % 2 == 0 { 0.5 } else { -0.25 }),
    );
    let formula: f64 = (0..d).map(|k| 0.5 * x[k] * x[k] / (a[k] * a[k])).sum();
    let rate = rf.rate(&x)?;
    let eta = rf.exposing_hyperplane(&x)?;
    let eta_err = (0..d)
        .map(|k| (eta[k] - x[k] / (a[k] * a[k])).abs())
        .fold(0.0, f64::max);
    diags.push(Diagnostic::global("rate_formula", formula));
    diags.push(Diagnostic::global("rate_rkhs", rate));
    diags.push(Diagnostic::global("eta_max_error", eta_err));
    verdicts.push(Verdict::check(
        "rate cross-check",
        (rate - formula).abs() <= 1e-10 * formula && eta_err <= 1e-10 * eta.amax(),
        format!("I = {rate:.10} vs sum x_k^2/(2 a_k^2) = {formula:.10}"),
    ));

    Ok(DecayReport {
        scenario: "weighted_c0".into(),
        fit: fit_rows(&rows),
        predicted: rows
            .iter()
            .map(|r| r.predicted)
            .fold(f64::NEG_INFINITY, f64::max),
        rows,
        verdicts,
        diagnostics: diags,
        notes: vec!["probabilities are exact products over independent coordinates".into()],
    })
}
