//! Runner behind the `ldp-lab` binary: configuration files, scenario
//! dispatch and artifact output.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ldp_core::tightness::fernique_constants;
use ldp_core::{DecayReport, GaussianModel, ModelDocument, RateFunctional, Seminorm};
use nalgebra::DVector;

pub use config::{parse_config, print_config, ConfigError, Format, Profile, Ray, RunConfig};
use output::{
    curve_rows, decay_rows, diagnostic_rows, Artifacts, CURVE_COLUMNS, DECAY_COLUMNS,
    DIAGNOSTIC_COLUMNS,
};

/// Exit status when every verdict holds.
pub const EXIT_OK: i32 = 0;
/// Exit status when the run finished but some verdict failed.
pub const EXIT_VERDICT: i32 = 1;
/// Exit status for configuration, numerical or I/O errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug)]
pub struct Outcome {
    pub report: Option<DecayReport>,
    pub artifacts: Vec<PathBuf>,
    pub error: Option<String>,
    pub exit_code: i32,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(parse_config(&text)?)
}

/// Replaces the seed of the run and of its Monte Carlo streams.
pub fn with_seed(mut config: RunConfig, seed: u64) -> Result<RunConfig> {
    config.seed = seed;
    config.scenario.mc.master_seed = seed;
    config::validate_config(&config)?;
    Ok(config)
}

fn summary_text(config: &RunConfig, report: &DecayReport) -> String {
    format!("seed: {}\n{}", config.seed, report.summary())
}

/// Runs one scenario and writes its artifacts; failures leave an
/// `error.txt` next to whatever was already written.
pub fn run(config: &RunConfig) -> Outcome {
    let mut artifacts = match Artifacts::new(&config.output_dir) {
        Ok(a) => a,
        Err(e) => {
            return Outcome {
                report: None,
                artifacts: Vec::new(),
                error: Some(format!("{e:#}")),
                exit_code: EXIT_ERROR,
            }
        }
    };
    let fail =
        |mut artifacts: Artifacts, stage: &str, e: anyhow::Error, report: Option<DecayReport>| {
            let _ = artifacts.write_error_manifest(stage, &e);
            Outcome {
                report,
                artifacts: artifacts.written().to_vec(),
                error: Some(format!("{e:#}")),
                exit_code: EXIT_ERROR,
            }
        };

    if let Err(e) = artifacts.write("config.toml", print_config(config).as_bytes()) {
        return fail(artifacts, "config", e, None);
    }
    let report = match config.scenario.run() {
        Ok(r) => r,
        Err(e) => return fail(artifacts, "scenario", e.into(), None),
    };
    let written = (|| -> Result<()> {
        for f in &config.formats {
            match f {
                Format::Csv => {
                    artifacts.write_csv("decay.csv", &DECAY_COLUMNS, &decay_rows(&report))?;
                    artifacts.write_csv(
                        "diagnostics.csv",
                        &DIAGNOSTIC_COLUMNS,
                        &diagnostic_rows(&report),
                    )?;
                    artifacts.write_csv("rate_curve.csv", &CURVE_COLUMNS, &curve_rows(config)?)?;
                }
                Format::Summary => {
                    artifacts.write("summary.txt", summary_text(config, &report).as_bytes())?
                }
                Format::Json => {
                    let mut json = serde_json::to_vec_pretty(&report)?;
                    json.push(b'\n');
                    artifacts.write("report.json", &json)?;
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = written {
        return fail(artifacts, "output", e, Some(report));
    }
    Outcome {
        exit_code: if report.all_ok() {
            EXIT_OK
        } else {
            EXIT_VERDICT
        },
        report: Some(report),
        artifacts: artifacts.written().to_vec(),
        error: None,
    }
}

pub fn load_model(path: &Path) -> Result<GaussianModel> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc: ModelDocument = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a model document", path.display()))?;
    Ok(GaussianModel::from_document(doc)?)
}

/// A point file holds a JSON array of numbers.
pub fn load_point(path: &Path) -> Result<DVector<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: Vec<f64> = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a JSON array of numbers", path.display()))?;
    Ok(DVector::from_vec(v))
}

/// `I(x)` for the model and point files, one line.
pub fn rate_command(model: &Path, point: &Path) -> Result<String> {
    let model = load_model(model)?;
    let x = load_point(point)?;
    let rate = RateFunctional::new(&model).rate(&x)?;
    Ok(format!("I(x) = {}\n", output::num(rate)))
}

/// Fernique constants of the sup norm from `count` draws of the model.
pub fn fernique_command(model: &Path, s: f64, count: usize, seed: u64) -> Result<String> {
    let model = load_model(model)?;
    let draws = ldp_core::gauss::sample(&model, count, seed)?;
    let c = fernique_constants(&draws, &Seminorm::SupNorm, s)?;
    Ok(format!(
        "s = {}\nbeta = {} (99% Wilson interval [{}, {}], {} draws)\nkappa = {}\nzeta = {}\na_max = {}\n",
        output::num(c.s),
        output::num(c.beta),
        output::num(c.beta_ci.0),
        output::num(c.beta_ci.1),
        c.count,
        output::num(c.kappa),
        output::num(c.zeta),
        output::num(c.a_max),
    ))
}
