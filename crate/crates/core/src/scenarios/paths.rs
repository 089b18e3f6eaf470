use rayon::prelude::*;

use super::{fit_rows, slope_verdicts, DecayReport, DecayRow, Diagnostic, GridSpec};
use crate::error::{invalid, Result};
use crate::gauss::{
    bm_covariance, fbm_covariance, modulated_bm_covariance, GaussianModel, SpeedFunction,
};
use crate::mc::{self, McParams};
use crate::rkhs::RateFunctional;
use crate::sets::{CompactSetSpec, Region};

/// Dominating points closer than this (relative) to the best share the tilt.
const DOMINATING_TOLERANCE: f64 = 1e-9;

pub(super) fn check_path_set(set: &CompactSetSpec, dim: usize) -> Result<()> {
    set.validate()?;
    match set.fixed_dim() {
        Some(d) if d != dim => Err(invalid(
            "set",
            format!("set has dimension {d}, grid has {dim} points"),
        )),
        _ => Ok(()),
    }
}

/// `-inf_{x not in K} I(x)` under `model`.
pub(super) fn exit_prediction(model: &GaussianModel, set: &CompactSetSpec) -> Result<f64> {
    Ok(-RateFunctional::new(model)
        .rate_infimum(&Region::Outside(set.clone()))?
        .value)
}

/// `P(g^{-1/2} X not in K)` by importance sampling from the mixture over the
/// dominating points of the complement under the law of `g^{-1/2} X`.
pub(super) fn exit_row(
    model: &GaussianModel,
    set: &CompactSetSpec,
    n: u64,
    g: f64,
    predicted: f64,
    mc: &McParams,
) -> Result<DecayRow> {
    let scaled = model.scaled(1.0 / g.sqrt())?;
    let rf = RateFunctional::new(&scaled);
    let region = Region::Outside(set.clone());
    let shifts = rf.dominating_points(&region, DOMINATING_TOLERANCE)?;
    if shifts.is_empty() {
        return Ok(DecayRow::exact(n, g, 0.0, predicted));
    }
    let est = mc::estimate_mixture(
        &scaled,
        |x| set.minkowski(x).is_ok_and(|q| q > 1.0),
        &shifts,
        &mc.substream(&[n]),
    )?;
    Ok(DecayRow::estimated(n, g, &est, predicted))
}

fn assemble(
    scenario: &str,
    rows: Vec<DecayRow>,
    predicted: f64,
    diagnostics: Vec<Diagnostic>,
) -> DecayReport {
    let fit = fit_rows(&rows);
    let verdicts = slope_verdicts(fit.as_ref(), predicted);
    DecayReport {
        scenario: scenario.into(),
        rows,
        fit,
        predicted,
        verdicts,
        diagnostics,
        notes: vec!["slopes are fitted on the tested range only; limits are not certified".into()],
    }
}

pub fn run_modulated_bm(
    n_list: &[u64],
    grid: &GridSpec,
    set: &CompactSetSpec,
    speed: &SpeedFunction,
    mc: &McParams,
) -> Result<DecayReport> {
    let grid = grid.build()?;
    check_path_set(set, grid.len())?;
    let gs = speed.eval_many(n_list)?;
    let limit = bm_covariance(&grid)?;
    let predicted = exit_prediction(&limit, set)?;
    let per_n = n_list
        .par_iter()
        .zip(gs.par_iter())
        .map(|(&n, &g)| {
            let model = modulated_bm_covariance(n as u32, &grid)?;
            let row = exit_row(&model, set, n, g, predicted, mc)?;
            let gap = (model.cov() - limit.cov()).amax();
            let diags = vec![
                Diagnostic::at(n, "cov_gap", gap),
                Diagnostic::at(n, "cov_gap_bound", 0.5 / n as f64),
                Diagnostic::at(n, "rate_n", -exit_prediction(&model, set)?),
            ];
            Ok((row, diags))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, diags): (Vec<_>, Vec<_>) = per_n.into_iter().unzip();
    Ok(assemble("modulated_bm", rows, predicted, diags.concat()))
}

pub fn run_fbm_drift(
    n_list: &[u64],
    h_list: &[f64],
    h_limit: f64,
    grid: &GridSpec,
    set: &CompactSetSpec,
    speed: &SpeedFunction,
    mc: &McParams,
) -> Result<DecayReport> {
    if h_list.len() != n_list.len() {
        return Err(invalid(
            "scenario.h_list",
            "needs one Hurst index per entry of n_list",
        ));
    }
    let grid = grid.build()?;
    check_path_set(set, grid.len())?;
    let gs = speed.eval_many(n_list)?;
    let limit = fbm_covariance(h_limit, &grid)?;
    let predicted = exit_prediction(&limit, set)?;
    let t = grid.points();
    let per_n = n_list
        .par_iter()
        .zip(gs.par_iter())
        .zip(h_list.par_iter())
        .map(|((&n, &g), &h)| {
            let model = fbm_covariance(h, &grid)?;
            let row = exit_row(&model, set, n, g, predicted, mc)?;
            // E (X_t - X_s)^2 read off the covariance versus |t - s|^{2H}
            let c = model.cov();
            let mut moment_err = 0.0f64;
            for j in 0..t.len() {
                for i in 0..j {
                    let inc = c[(j, j)] + c[(i, i)] - 2.0 * c[(i, j)];
                    moment_err = moment_err.max((inc - (t[j] - t[i]).powf(2.0 * h)).abs());
                }
            }
            let diags = vec![
                Diagnostic::at(n, "hurst", h),
                Diagnostic::at(n, "increment_moment_error", moment_err),
                Diagnostic::at(n, "rate_n", -exit_prediction(&model, set)?),
            ];
            Ok((row, diags))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, diags): (Vec<_>, Vec<_>) = per_n.into_iter().unzip();
    Ok(assemble("fbm_drift", rows, predicted, diags.concat()))
}
