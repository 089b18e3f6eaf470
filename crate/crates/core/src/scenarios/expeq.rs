use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{DecayReport, DecayRow, Diagnostic, GridSpec, PairBuilder, Verdict};
use crate::error::{LdpError, Result};
use crate::gauss::{modulation_clock, Coords, GaussianModel, SpeedFunction, TimeGrid};
use crate::mc::{self, McParams};
use crate::rkhs::RateFunctional;
use crate::sets::{HalfSpace, LinearForm, Region};

/// Joint law of `(X_n(t_1..t_d), X(t_1..t_d))` driven by one Brownian motion.
pub fn joint_pair_model(pair: PairBuilder, grid: &TimeGrid, n: u64) -> Result<GaussianModel> {
    let t = grid.points();
    let d = t.len();
    let clock: Vec<f64> = match pair {
        PairBuilder::ModulatedBm => t.iter().map(|s| modulation_clock(n as u32, *s)).collect(),
        PairBuilder::Identical => t.to_vec(),
        PairBuilder::Independent => return Err(LdpError::UncoupledPair),
    };
    // covariance of W at the clock times and at the plain times
    let mut cov = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] = clock[i].min(clock[j]);
            cov[(d + i, d + j)] = t[i].min(t[j]);
            let cross = clock[i].min(t[j]);
            cov[(i, d + j)] = cross;
            cov[(d + j, i)] = cross;
        }
    }
    GaussianModel::centered_from_cov(cov, Coords::Plain)
}

fn difference_cov(joint: &GaussianModel, d: usize) -> DMatrix<f64> {
    let c = joint.cov();
    let c11 = c.view((0, 0), (d, d));
    let c12 = c.view((0, d), (d, d));
    let c21 = c.view((d, 0), (d, d));
    let c22 = c.view((d, d), (d, d));
    c11 - c12 - c21 + c22
}

/// `{|x_i - y_i| >= delta for some i}` as a union of half-spaces.
fn two_sided_exits(d: usize, delta: f64) -> Vec<HalfSpace> {
    (0..d)
        .flat_map(|i| {
            let up = LinearForm(vec![(i, 1.0), (d + i, -1.0)]);
            [
                HalfSpace::new(up.negated(), delta),
                HalfSpace::new(up, delta),
            ]
        })
        .collect()
}

pub fn run_exp_equivalence(
    n_list: &[u64],
    pair: PairBuilder,
    grid: &GridSpec,
    delta: f64,
    threshold: f64,
    speed: &SpeedFunction,
    mc: &McParams,
) -> Result<DecayReport> {
    if pair == PairBuilder::Independent {
        return Err(LdpError::UncoupledPair);
    }
    let grid = grid.build()?;
    let d = grid.len();
    let gs = speed.eval_many(n_list)?;
    let region = Region::AnyOf(two_sided_exits(d, delta));

    let per_n = n_list
        .par_iter()
        .zip(gs.par_iter())
        .map(|(&n, &g)| {
            let joint = joint_pair_model(pair, &grid, n)?;
            let dcov = difference_cov(&joint, d);
            let sup_var = SymmetricEigen::new(dcov.clone()).eigenvalues.max().max(0.0);
            let diag_var = dcov.diagonal().amax();
            let diags = vec![
                Diagnostic::at(n, "var_diff_sup", sup_var),
                Diagnostic::at(n, "var_diff_diag_max", diag_var),
            ];
            if dcov.iter().all(|v| *v == 0.0) {
                let mut row = DecayRow::exact(n, g, 0.0, f64::NEG_INFINITY);
                row.gap = f64::NAN;
                return Ok((row, diags));
            }
            let scaled = joint.scaled(1.0 / g.sqrt())?;
            let rf = RateFunctional::new(&scaled);
            let shifts = rf.dominating_points(&region, 1e-9)?;
            let shifts = if shifts.is_empty() {
                vec![DVector::zeros(2 * d)]
            } else {
                shifts
            };
            let est = mc::estimate_mixture(
                &scaled,
                |x| (0..d).any(|i| (x[i] - x[d + i]).abs() >= delta),
                &shifts,
                &mc.substream(&[n]),
            )?;
            let mut row = DecayRow::estimated(n, g, &est, f64::NEG_INFINITY);
            row.gap = f64::NAN;
            Ok((row, diags))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, diags): (Vec<DecayRow>, Vec<_>) = per_n.into_iter().unzip();

    let exact_zero = rows.iter().all(|r| r.exact && r.p_hat == 0.0);
    let verdict = if exact_zero {
        Verdict::check(
            "exponential equivalence trend",
            true,
            "difference is identically zero; exact-zero at every n".into(),
        )
    } else {
        let lv: Vec<f64> = rows.iter().map(|r| r.log_p_over_g).collect();
        let decreasing = lv.windows(2).all(|w| w[1] < w[0]);
        let last = *lv.last().unwrap();
        Verdict::check(
            "exponential equivalence trend",
            decreasing && last <= threshold,
            format!(
                "(1/g_n) log P decreasing: {decreasing}, last {last:.4} vs threshold {threshold:.4}"
            ),
        )
    };
    let mut notes = vec!["the limit -inf is not certifiable numerically; only the trend on the tested range is checked".into()];
    if exact_zero {
        notes.push(
            "all rows are exact zeros of a degenerate difference, not Monte Carlo floors".into(),
        );
    }
    Ok(DecayReport {
        scenario: "exp_equivalence".into(),
        rows,
        fit: None,
        predicted: f64::NEG_INFINITY,
        verdicts: vec![verdict],
        diagnostics: diags.concat(),
        notes,
    })
}
