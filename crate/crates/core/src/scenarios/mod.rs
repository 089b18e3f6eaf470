//! Executable versions of the path and sequence examples: Monte Carlo or
//! exact exit probabilities at a speed, compared with rate-function
//! predictions.

mod expeq;
mod paths;
mod sequences;
pub mod tails;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gauss::{
    bm_covariance, fbm_covariance, weighted_seq_model, GaussianModel, SpeedFunction, TimeGrid,
};
use crate::mc::{DecayFit, McParams};
use crate::sets::CompactSetSpec;

pub use expeq::{joint_pair_model, run_exp_equivalence};
pub use paths::{run_fbm_drift, run_modulated_bm};
pub use sequences::{run_c0_counterexample, run_weighted_c0, tightness_failure_index};
pub use tails::{crude_tail_report, gauss_tail_bounds, CrudeTailReport, TailBounds};

/// Uniform grid `T i / points`, `i = 1..points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub horizon: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        if self.points == 0 {
            return Err(invalid("grid.points", "must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(
                "grid.horizon",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        TimeGrid::uniform(self.points, self.horizon)
    }
}

/// A positive sequence `k -> c_k`, `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SequenceRule {
    /// `1 / k`
    Harmonic,
    /// `(log(k + 1))^{-1/2}`
    InvSqrtLog,
    /// `c k^{-p}`
    Power { c: f64, p: f64 },
    /// `c (log(k + 1))^{-p}`
    LogPower { c: f64, p: f64 },
    /// `values[k - 1]`
    Explicit { values: Vec<f64> },
}

impl SequenceRule {
    pub fn validate(&self, key: &'static str) -> Result<()> {
        match self {
            Self::Harmonic | Self::InvSqrtLog => Ok(()),
            Self::Power { c, p } | Self::LogPower { c, p } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(invalid(key, format!("c must be positive, got {c}")));
                }
                if !(*p >= 0.0 && p.is_finite()) {
                    return Err(invalid(key, format!("p must be nonnegative, got {p}")));
                }
                Ok(())
            }
            Self::Explicit { values } => {
                if values.is_empty() {
                    return Err(invalid(key, "explicit sequence is empty"));
                }
                match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    Some(v) => Err(invalid(key, format!("entries must be positive, got {v}"))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Longest prefix the rule defines (`None` for closed forms).
    pub fn len(&self) -> Option<usize> {
        match self {
            Self::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let l = ((k + 1) as f64).ln();
        match self {
            Self::Harmonic => 1.0 / k as f64,
            Self::InvSqrtLog => 1.0 / l.sqrt(),
            Self::Power { c, p } => c * (k as f64).powf(-p),
            Self::LogPower { c, p } => c * l.powf(-p),
            Self::Explicit { values } => values[k - 1],
        }
    }

    /// `c_1, ..., c_n`, failing if an explicit list is too short.
    pub fn take(&self, n: usize, key: &'static str) -> Result<Vec<f64>> {
        if let Some(len) = self.len() {
            if len < n {
                return Err(invalid(
                    key,
                    format!("explicit sequence has {len} entries, {n} needed"),
                ));
            }
        }
        Ok((1..=n).map(|k| self.at(k)).collect())
    }
}

/// How the box `|x_k| <= b_k` of the weighted example is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoxRule {
    /// `b_k^2 = 2 (R + 1/M) a_k^2`, spelled `paper` in config files.
    #[serde(rename = "paper")]
    RateMatched,
    Custom {
        bounds: SequenceRule,
    },
}

impl BoxRule {
    /// `b_1, ..., b_n` for weights `a_1, ..., a_n`.
    pub fn bounds(&self, a: &[f64], r: f64, m: f64) -> Result<Vec<f64>> {
        match self {
            Self::RateMatched => {
                let c = (2.0 * (r + 1.0 / m)).sqrt();
                Ok(a.iter().map(|v| c * v).collect())
            }
            Self::Custom { bounds } => bounds.take(a.len(), "scenario.b"),
        }
    }
}

/// Fixed boxes used to exhibit the failure of tightness:
/// `b_k = 2 (log(k+1))^{-1/2}`, `c (log(k+1))^{-1/4}` for `c = 0.5, 1, 1.5`,
/// and `b_k = k^{-1/4}`.
pub fn default_test_boxes() -> Vec<SequenceRule> {
    vec![
        SequenceRule::LogPower { c: 2.0, p: 0.5 },
        SequenceRule::LogPower { c: 0.5, p: 0.25 },
        SequenceRule::LogPower { c: 1.0, p: 0.25 },
        SequenceRule::LogPower { c: 1.5, p: 0.25 },
        SequenceRule::Power { c: 1.0, p: 0.25 },
    ]
}

/// Which pair `(X_n, X)` the exponential-equivalence scenario couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairBuilder {
    /// `X_n(t) = W(A_n(t))`, `X(t) = W(t)` for one Brownian motion `W`.
    ModulatedBm,
    /// `X_n = X`.
    Identical,
    /// Independent copies; rejected.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    ModulatedBm {
        n_list: Vec<u64>,
        grid: GridSpec,
        set: CompactSetSpec,
        speed: SpeedFunction,
    },
    FbmDrift {
        n_list: Vec<u64>,
        h_list: Vec<f64>,
        h_limit: f64,
        grid: GridSpec,
        set: CompactSetSpec,
        speed: SpeedFunction,
    },
    C0Counterexample {
        n_list: Vec<u64>,
        bounds: SequenceRule,
        k0_list: Vec<usize>,
    },
    WeightedC0 {
        n_list: Vec<u64>,
        weights: SequenceRule,
        b: BoxRule,
        r: f64,
        m: f64,
        speed: SpeedFunction,
        test_boxes: Vec<SequenceRule>,
        tightness_n_max: usize,
    },
    ExpEquivalence {
        n_list: Vec<u64>,
        pair: PairBuilder,
        grid: GridSpec,
        delta: f64,
        threshold: f64,
        speed: SpeedFunction,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub mc: McParams,
}

pub(crate) fn check_n_list(n_list: &[u64]) -> Result<()> {
    if n_list.is_empty() {
        return Err(invalid("scenario.n_list", "must not be empty"));
    }
    if n_list[0] == 0 {
        return Err(invalid("scenario.n_list", "indices start at 1"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("scenario.n_list", "must be strictly increasing"));
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        match self.kind {
            ScenarioKind::ModulatedBm { .. } => "modulated_bm",
            ScenarioKind::FbmDrift { .. } => "fbm_drift",
            ScenarioKind::C0Counterexample { .. } => "c0_counterexample",
            ScenarioKind::WeightedC0 { .. } => "weighted_c0",
            ScenarioKind::ExpEquivalence { .. } => "exp_equivalence",
        }
    }

    /// Checks every parameter before any sampling starts.
    pub fn validate(&self) -> Result<()> {
        self.mc.validate()?;
        match &self.kind {
            ScenarioKind::ModulatedBm {
                n_list,
                grid,
                set,
                speed,
            } => {
                check_n_list(n_list)?;
                if n_list.iter().any(|n| *n > u32::MAX as u64) {
                    return Err(invalid("scenario.n_list", "modulation frequency too large"));
                }
                paths::check_path_set(set, grid.build()?.len())?;
                speed.validate()?;
                speed.eval_many(n_list).map(|_| ())
            }
            ScenarioKind::FbmDrift {
                n_list,
                h_list,
                h_limit,
                grid,
                set,
                speed,
            } => {
                check_n_list(n_list)?;
                if h_list.len() != n_list.len() {
                    return Err(invalid(
                        "scenario.h_list",
                        "needs one Hurst index per entry of n_list",
                    ));
                }
                if let Some(h) = h_list
                    .iter()
                    .chain(std::iter::once(h_limit))
                    .find(|h| !(**h > 0.0 && **h < 1.0))
                {
                    return Err(invalid(
                        "scenario.h_list",
                        format!("Hurst indices must lie in (0, 1), got {h}"),
                    ));
                }
                paths::check_path_set(set, grid.build()?.len())?;
                speed.validate()?;
                speed.eval_many(n_list).map(|_| ())
            }
            ScenarioKind::C0Counterexample {
                n_list,
                bounds,
                k0_list,
            } => sequences::check_c0(n_list, bounds, k0_list),
            ScenarioKind::WeightedC0 {
                n_list,
                weights,
                b,
                r,
                m,
                speed,
                test_boxes,
                tightness_n_max,
            } => sequences::check_weighted(
                n_list,
                weights,
                b,
                *r,
                *m,
                speed,
                test_boxes,
                *tightness_n_max,
            ),
            ScenarioKind::ExpEquivalence {
                n_list,
                pair,
                grid,
                delta,
                threshold,
                speed,
            } => {
                check_n_list(n_list)?;
                if *pair == PairBuilder::Independent {
                    return Err(crate::error::LdpError::UncoupledPair);
                }
                if n_list.iter().any(|n| *n > u32::MAX as u64) {
                    return Err(invalid("scenario.n_list", "modulation frequency too large"));
                }
                grid.build()?;
                if !(*delta > 0.0 && delta.is_finite()) {
                    return Err(invalid(
                        "scenario.delta",
                        format!("must be positive, got {delta}"),
                    ));
                }
                if !threshold.is_finite() {
                    return Err(invalid("scenario.threshold", "must be finite"));
                }
                speed.validate()?;
                speed.eval_many(n_list).map(|_| ())
            }
        }
    }

    pub fn run(&self) -> Result<DecayReport> {
        self.validate()?;
        match &self.kind {
            ScenarioKind::ModulatedBm {
                n_list,
                grid,
                set,
                speed,
            } => run_modulated_bm(n_list, grid, set, speed, &self.mc),
            ScenarioKind::FbmDrift {
                n_list,
                h_list,
                h_limit,
                grid,
                set,
                speed,
            } => run_fbm_drift(n_list, h_list, *h_limit, grid, set, speed, &self.mc),
            ScenarioKind::C0Counterexample {
                n_list,
                bounds,
                k0_list,
            } => run_c0_counterexample(n_list, bounds, k0_list),
            ScenarioKind::WeightedC0 {
                n_list,
                weights,
                b,
                r,
                m,
                speed,
                test_boxes,
                tightness_n_max,
            } => run_weighted_c0(
                n_list,
                weights,
                b,
                *r,
                *m,
                speed,
                test_boxes,
                *tightness_n_max,
            ),
            ScenarioKind::ExpEquivalence {
                n_list,
                pair,
                grid,
                delta,
                threshold,
                speed,
            } => run_exp_equivalence(n_list, *pair, grid, *delta, *threshold, speed, &self.mc),
        }
    }

    /// Law whose rate function the scenario predicts, truncated to at most
    /// `seq_dim` coordinates for sequence examples.
    pub fn limit_model(&self, seq_dim: usize) -> Result<GaussianModel> {
        match &self.kind {
            ScenarioKind::ModulatedBm { grid, .. } | ScenarioKind::ExpEquivalence { grid, .. } => {
                bm_covariance(&grid.build()?)
            }
            ScenarioKind::FbmDrift { grid, h_limit, .. } => {
                fbm_covariance(*h_limit, &grid.build()?)
            }
            ScenarioKind::C0Counterexample { n_list, .. } => {
                let d = seq_dim.min(*n_list.last().unwrap_or(&1) as usize).max(1);
                weighted_seq_model(&vec![1.0; d])
            }
            ScenarioKind::WeightedC0 {
                n_list, weights, ..
            } => {
                let d = seq_dim.min(*n_list.last().unwrap_or(&1) as usize).max(1);
                weighted_seq_model(&weights.take(d, "scenario.weights")?)
            }
        }
    }
}

/// One row of a decay table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: u64,
    pub g: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `log(p_hat) / g`, or `log(ci_hi) / g` on floor rows.
    pub log_p_over_g: f64,
    pub predicted: f64,
    pub gap: f64,
    /// Zero Monte Carlo hits: the row carries the rule-of-three bound.
    pub floor_flag: bool,
    /// Closed-form row (no sampling noise).
    pub exact: bool,
}

impl DecayRow {
    pub(crate) fn exact(n: u64, g: f64, p: f64, predicted: f64) -> Self {
        let log_p_over_g = p.ln() / g;
        Self {
            n,
            g,
            p_hat: p,
            ci_lo: p,
            ci_hi: p,
            log_p_over_g,
            predicted,
            gap: log_p_over_g - predicted,
            floor_flag: false,
            exact: true,
        }
    }

    pub(crate) fn estimated(n: u64, g: f64, e: &crate::mc::Estimate, predicted: f64) -> Self {
        let log_p_over_g = if e.floor_flag {
            e.ci_hi.ln() / g
        } else {
            e.value.ln() / g
        };
        Self {
            n,
            g,
            p_hat: e.value,
            ci_lo: e.ci_lo,
            ci_hi: e.ci_hi,
            log_p_over_g,
            predicted,
            gap: log_p_over_g - predicted,
            floor_flag: e.floor_flag,
            exact: false,
        }
    }
}

/// A named per-row or scenario-wide quantity reported next to the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub n: Option<u64>,
    pub name: String,
    pub value: f64,
}

impl Diagnostic {
    pub(crate) fn at(n: u64, name: &str, value: f64) -> Self {
        Self {
            n: Some(n),
            name: name.into(),
            value,
        }
    }

    pub(crate) fn global(name: &str, value: f64) -> Self {
        Self {
            n: None,
            name: name.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: String,
    /// Word printed in the summary (`PASS`, `FAIL`, `REFUTED`, ...).
    pub status: String,
    /// Whether the outcome matches the claim being reproduced.
    pub ok: bool,
    pub detail: String,
}

impl Verdict {
    pub(crate) fn check(label: &str, ok: bool, detail: String) -> Self {
        Self {
            label: label.into(),
            status: if ok { "PASS" } else { "FAIL" }.into(),
            ok,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("{}: {} ({})", self.label, self.status, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub scenario: String,
    pub rows: Vec<DecayRow>,
    pub fit: Option<DecayFit>,
    /// Scenario-level prediction `-inf I` under the limit law.
    pub predicted: f64,
    pub verdicts: Vec<Verdict>,
    pub diagnostics: Vec<Diagnostic>,
    pub notes: Vec<String>,
}

impl DecayReport {
    pub fn all_ok(&self) -> bool {
        self.verdicts.iter().all(|v| v.ok)
    }

    pub fn verdict(&self, label: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.label == label)
    }

    pub fn diagnostics_named<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = &'a Diagnostic> + 'a {
        self.diagnostics.iter().filter(move |d| d.name == name)
    }

    /// Human-readable summary: verdict lines, then warnings and notes.
    pub fn summary(&self) -> String {
        let mut out = format!("scenario: {}\n", self.scenario);
        if let Some(f) = &self.fit {
            out.push_str(&format!(
                "fitted slope: {:.6} (se {:.6}, {} points), predicted: {:.6}\n",
                f.slope, f.slope_se, f.points, self.predicted
            ));
        }
        for v in &self.verdicts {
            out.push_str(&v.line());
            out.push('\n');
        }
        for r in self.rows.iter().filter(|r| r.floor_flag) {
            out.push_str(&format!(
                "warning: n = {} below MC floor (no hits; reporting rule-of-three bound {:.3e})\n",
                r.n, r.ci_hi
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

/// Fits the non-floor rows of a table with unit weights.
pub(crate) fn fit_rows(rows: &[DecayRow]) -> Option<DecayFit> {
    let (g, lp): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| !r.floor_flag && r.p_hat > 0.0)
        .map(|r| (r.g, r.p_hat.ln()))
        .unzip();
    crate::mc::fit_decay(&g, &lp, &vec![1.0; g.len()]).ok()
}

/// Upper-bound and agreement verdicts for a fitted slope.
pub(crate) fn slope_verdicts(fit: Option<&DecayFit>, predicted: f64) -> Vec<Verdict> {
    let Some(f) = fit else {
        return vec![Verdict::check(
            "upper-bound check",
            false,
            "fewer than 3 rows above the MC floor".into(),
        )];
    };
    let tol = 3.0 * f.slope_se;
    let agree_tol = tol + 0.1 * predicted.abs();
    vec![
        Verdict::check(
            "upper-bound check",
            f.slope <= predicted + tol,
            format!(
                "slope {:.4} vs predicted {:.4} ± {:.4}",
                f.slope, predicted, tol
            ),
        ),
        Verdict::check(
            "rate agreement",
            (f.slope - predicted).abs() <= agree_tol,
            format!(
                "slope {:.4} vs predicted {:.4} ± {:.4}",
                f.slope, predicted, agree_tol
            ),
        ),
    ]
}
