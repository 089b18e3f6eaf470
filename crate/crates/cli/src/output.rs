//! Artifact files written by a run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ldp_core::{DecayReport, RateFunctional, ScenarioKind};
use nalgebra::DVector;

use crate::config::{curve_dim, Profile, RunConfig, SEQ_CURVE_DIM};

pub const DECAY_COLUMNS: [&str; 8] = [
    "n",
    "g_n",
    "p_hat",
    "ci_lo",
    "ci_hi",
    "log_p_over_g",
    "predicted",
    "gap",
];
pub const DIAGNOSTIC_COLUMNS: [&str; 3] = ["n", "name", "value"];
pub const CURVE_COLUMNS: [&str; 4] = ["ray", "profile", "scale", "rate"];

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Tracks what has been written so a failure can list it.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write(name, &bytes)
    }

    /// `error.txt`: the failure and the files that survived it.
    pub fn write_error_manifest(&mut self, stage: &str, error: &anyhow::Error) -> Result<()> {
        let mut text =
            format!("error: {error:#}\nstage: {stage}\nartifacts written before the failure:\n");
        for p in &self.written {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            text.push_str(&format!("  {name}\n"));
        }
        self.write("error.txt", text.as_bytes())
    }
}

pub fn decay_rows(report: &DecayReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                num(r.g),
                num(r.p_hat),
                num(r.ci_lo),
                num(r.ci_hi),
                num(r.log_p_over_g),
                num(r.predicted),
                num(r.gap),
            ]
        })
        .collect()
}

pub fn diagnostic_rows(report: &DecayReport) -> Vec<Vec<String>> {
    report
        .diagnostics
        .iter()
        .map(|d| {
            vec![
                d.n.map(|n| n.to_string()).unwrap_or_default(),
                d.name.clone(),
                num(d.value),
            ]
        })
        .collect()
}

fn direction(profile: &Profile, kind: &ScenarioKind, dim: usize) -> Result<Vec<f64>> {
    let path_times = |grid: &ldp_core::scenarios::GridSpec| -> Result<(Vec<f64>, f64)> {
        let g = grid.build()?;
        Ok((g.points().to_vec(), g.horizon()))
    };
    Ok(match profile {
        Profile::Values(v) => v.clone(),
        Profile::First => (0..dim).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
        Profile::Ones => vec![1.0; dim],
        Profile::Weights => match kind {
            ScenarioKind::WeightedC0 { weights, .. } => weights.take(dim, "scenario.weights")?,
            _ => vec![1.0; dim],
        },
        Profile::Linear | Profile::Constant | Profile::Sine => {
            let grid = match kind {
                ScenarioKind::ModulatedBm { grid, .. }
                | ScenarioKind::FbmDrift { grid, .. }
                | ScenarioKind::ExpEquivalence { grid, .. } => grid,
                _ => anyhow::bail!("path profile on a sequence scenario"),
            };
            let (t, horizon) = path_times(grid)?;
            t.iter()
                .map(|s| match profile {
                    Profile::Linear => s / horizon,
                    Profile::Constant => 1.0,
                    _ => (std::f64::consts::PI * s / horizon).sin(),
                })
                .collect()
        }
    })
}

/// `I(s v)` under the limit law for every ray and scale.
pub fn curve_rows(config: &RunConfig) -> Result<Vec<Vec<String>>> {
    let kind = &config.scenario.kind;
    let model = config.scenario.limit_model(SEQ_CURVE_DIM)?;
    let dim = curve_dim(kind);
    anyhow::ensure!(
        model.dim() == dim,
        "limit model has dimension {}, curve expects {dim}",
        model.dim()
    );
    let rf = RateFunctional::new(&model);
    let mut rows = Vec::new();
    for (i, ray) in config.curve.iter().enumerate() {
        let v = DVector::from_vec(direction(&ray.profile, kind, dim)?);
        let name = ray.profile.name();
        for &s in &ray.scales {
            let rate = rf.rate(&(model.mean() + &v * s))?;
            rows.push(vec![i.to_string(), name.to_string(), num(s), num(rate)]);
        }
    }
    Ok(rows)
}
