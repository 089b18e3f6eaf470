//! Run configuration files.
//!
//! A configuration is a TOML document with top-level `seed`, `output_dir` and
//! `formats` keys and the sections `[scenario]`, `[grid]`, `[set]`,
//! `[speed]`, `[mc]` and `[[curve]]`. Which sections are accepted depends on
//! `scenario.kind`; anything else is an error. The README lists every key.

use std::collections::BTreeSet;
use std::path::PathBuf;

use ldp_core::scenarios::{default_test_boxes, BoxRule, GridSpec, PairBuilder, SequenceRule};
use ldp_core::{CompactSetSpec, LdpError, McParams, ScenarioKind, ScenarioSpec, SpeedFunction};
use thiserror::Error;
use toml::{Table, Value};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BATCH: usize = 20_000;
pub const DEFAULT_BATCHES: usize = 4;
pub const DEFAULT_OUTPUT_DIR: &str = "ldp-out";
pub const DEFAULT_SCALES: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
/// Coordinates kept when a rate curve is drawn on a sequence space.
pub const SEQ_CURVE_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    /// `decay.csv`, `diagnostics.csv`, `rate_curve.csv`
    Csv,
    /// `summary.txt`
    Summary,
    /// `report.json`
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Summary => "summary",
            Format::Json => "json",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "summary" => Some(Format::Summary),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// Direction `v` of a ray `s -> s v` along which the rate is tabulated.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `v(t) = t / T`
    Linear,
    /// `v(t) = 1`
    Constant,
    /// `v(t) = sin(pi t / T)`
    Sine,
    /// `v = e_1`
    First,
    /// `v_k = 1`
    Ones,
    /// `v_k = a_k`, the weights of the limit model
    Weights,
    Values(Vec<f64>),
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Linear => "linear",
            Profile::Constant => "constant",
            Profile::Sine => "sine",
            Profile::First => "first",
            Profile::Ones => "ones",
            Profile::Weights => "weights",
            Profile::Values(_) => "values",
        }
    }

    fn for_paths(&self) -> bool {
        matches!(
            self,
            Profile::Linear | Profile::Constant | Profile::Sine | Profile::Values(_)
        )
    }

    fn for_sequences(&self) -> bool {
        matches!(
            self,
            Profile::First | Profile::Ones | Profile::Weights | Profile::Values(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub profile: Profile,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub output_dir: PathBuf,
    pub formats: BTreeSet<Format>,
    pub seed: u64,
    pub curve: Vec<Ray>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("invalid value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error(transparent)]
    Invalid(#[from] LdpError),
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Problems found while walking the document, reported together.
#[derive(Default)]
struct Ctx {
    unknown: Vec<String>,
    missing: Vec<String>,
    bad: Vec<(String, String)>,
}

impl Ctx {
    fn allow(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.unknown.push(join(path, k));
            }
        }
    }

    fn bad(&mut self, key: String, reason: impl Into<String>) {
        self.bad.push((key, reason.into()));
    }

    fn get<'a>(
        &mut self,
        t: &'a Table,
        path: &str,
        key: &str,
        required: bool,
    ) -> Option<&'a Value> {
        let v = t.get(key);
        if v.is_none() && required {
            self.missing.push(join(path, key));
        }
        v
    }

    fn number(&mut self, v: &Value, key: String) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.bad(key, "expected a number");
                None
            }
        }
    }

    fn count(&mut self, v: &Value, key: String) -> Option<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.bad(key, "expected a nonnegative integer");
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<f64> {
        let v = self.get(t, path, key, required)?;
        self.number(v, join(path, key))
    }

    fn u64(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<u64> {
        let v = self.get(t, path, key, required)?;
        self.count(v, join(path, key))
    }

    fn str<'a>(&mut self, t: &'a Table, path: &str, key: &str, required: bool) -> Option<&'a str> {
        match self.get(t, path, key, required)? {
            Value::String(s) => Some(s),
            _ => {
                self.bad(join(path, key), "expected a string");
                None
            }
        }
    }

    fn array<'a>(
        &mut self,
        t: &'a Table,
        path: &str,
        key: &str,
        required: bool,
    ) -> Option<&'a [Value]> {
        match self.get(t, path, key, required)? {
            Value::Array(a) => Some(a),
            _ => {
                self.bad(join(path, key), "expected an array");
                None
            }
        }
    }

    fn f64_list(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<Vec<f64>> {
        let a = self.array(t, path, key, required)?;
        a.iter().map(|v| self.number(v, join(path, key))).collect()
    }

    fn u64_list(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<Vec<u64>> {
        let a = self.array(t, path, key, required)?;
        a.iter().map(|v| self.count(v, join(path, key))).collect()
    }

    fn table<'a>(
        &mut self,
        t: &'a Table,
        path: &str,
        key: &str,
        required: bool,
    ) -> Option<&'a Table> {
        match self.get(t, path, key, required)? {
            Value::Table(s) => Some(s),
            _ => {
                self.bad(join(path, key), "expected a table");
                None
            }
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if !self.unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(self.unknown));
        }
        if !self.missing.is_empty() {
            return Err(ConfigError::MissingKeys(self.missing));
        }
        match self.bad.into_iter().next() {
            Some((key, reason)) => Err(ConfigError::BadValue { key, reason }),
            None => Ok(()),
        }
    }
}

fn parse_sequence(ctx: &mut Ctx, v: &Value, path: &str) -> Option<SequenceRule> {
    let Value::Table(t) = v else {
        ctx.bad(path.to_string(), "expected a table with a `rule` key");
        return None;
    };
    let rule = ctx.str(t, path, "rule", true)?;
    match rule {
        "harmonic" | "inv_sqrt_log" => {
            ctx.allow(t, path, &["rule"]);
            Some(if rule == "harmonic" {
                SequenceRule::Harmonic
            } else {
                SequenceRule::InvSqrtLog
            })
        }
        "power" | "log_power" => {
            ctx.allow(t, path, &["rule", "c", "p"]);
            let c = ctx.f64(t, path, "c", true);
            let p = ctx.f64(t, path, "p", true);
            let (c, p) = (c?, p?);
            Some(if rule == "power" {
                SequenceRule::Power { c, p }
            } else {
                SequenceRule::LogPower { c, p }
            })
        }
        "explicit" => {
            ctx.allow(t, path, &["rule", "values"]);
            Some(SequenceRule::Explicit {
                values: ctx.f64_list(t, path, "values", true)?,
            })
        }
        other => {
            ctx.bad(
                join(path, "rule"),
                format!(
                    "unknown rule `{other}` (harmonic, inv_sqrt_log, power, log_power, explicit)"
                ),
            );
            None
        }
    }
}

fn parse_set(ctx: &mut Ctx, doc: &Table, times: Option<Vec<f64>>) -> Option<CompactSetSpec> {
    let t = ctx.table(doc, "", "set", true)?;
    let kind = ctx.str(t, "set", "kind", true)?;
    match kind {
        "sup_ball" => {
            ctx.allow(t, "set", &["kind", "radius"]);
            Some(CompactSetSpec::SupBall {
                radius: ctx.f64(t, "set", "radius", true)?,
            })
        }
        "box" => {
            ctx.allow(t, "set", &["kind", "bounds"]);
            Some(CompactSetSpec::Box {
                bounds: ctx.f64_list(t, "set", "bounds", true)?,
            })
        }
        "modulus_set" => {
            ctx.allow(t, "set", &["kind", "hoelder", "exponent", "anchor"]);
            let hoelder = ctx.f64(t, "set", "hoelder", true);
            let exponent = ctx.f64(t, "set", "exponent", true);
            let anchor = ctx.f64(t, "set", "anchor", true);
            Some(CompactSetSpec::ModulusSet {
                hoelder: hoelder?,
                exponent: exponent?,
                anchor: anchor?,
                times: times?,
            })
        }
        other => {
            ctx.bad(
                "set.kind".into(),
                format!("unknown set `{other}` (sup_ball, box, modulus_set)"),
            );
            None
        }
    }
}

fn parse_speed(ctx: &mut Ctx, doc: &Table) -> Option<SpeedFunction> {
    let Some(t) = ctx.table(doc, "", "speed", false) else {
        return (!doc.contains_key("speed")).then_some(SpeedFunction::Linear);
    };
    let kind = ctx.str(t, "speed", "kind", true)?;
    match kind {
        "linear" => {
            ctx.allow(t, "speed", &["kind"]);
            Some(SpeedFunction::Linear)
        }
        "power_log" => {
            ctx.allow(t, "speed", &["kind", "m"]);
            Some(SpeedFunction::PowerLog {
                m: ctx.f64(t, "speed", "m", true)?,
            })
        }
        "power" => {
            ctx.allow(t, "speed", &["kind", "p"]);
            Some(SpeedFunction::Power {
                p: ctx.f64(t, "speed", "p", true)?,
            })
        }
        "table" => {
            ctx.allow(t, "speed", &["kind", "values"]);
            Some(SpeedFunction::Table {
                values: ctx.f64_list(t, "speed", "values", true)?,
            })
        }
        other => {
            ctx.bad(
                "speed.kind".into(),
                format!("unknown speed `{other}` (linear, power_log, power, table)"),
            );
            None
        }
    }
}

fn parse_grid(ctx: &mut Ctx, doc: &Table, default_points: usize) -> Option<GridSpec> {
    let mut grid = GridSpec {
        points: default_points,
        horizon: 1.0,
    };
    if let Some(t) = ctx.table(doc, "", "grid", false) {
        ctx.allow(t, "grid", &["points", "horizon"]);
        if let Some(p) = ctx.u64(t, "grid", "points", false) {
            grid.points = usize::try_from(p).unwrap_or(usize::MAX);
        }
        if let Some(h) = ctx.f64(t, "grid", "horizon", false) {
            grid.horizon = h;
        }
    } else if doc.contains_key("grid") {
        return None;
    }
    Some(grid)
}

fn parse_mc(ctx: &mut Ctx, doc: &Table, seed: u64) -> Option<McParams> {
    let mut mc = McParams {
        batch: DEFAULT_BATCH,
        batches: DEFAULT_BATCHES,
        master_seed: seed,
    };
    if let Some(t) = ctx.table(doc, "", "mc", false) {
        ctx.allow(t, "mc", &["batch", "batches"]);
        if let Some(b) = ctx.u64(t, "mc", "batch", false) {
            mc.batch = usize::try_from(b).unwrap_or(usize::MAX);
        }
        if let Some(b) = ctx.u64(t, "mc", "batches", false) {
            mc.batches = usize::try_from(b).unwrap_or(usize::MAX);
        }
    } else if doc.contains_key("mc") {
        return None;
    }
    Some(mc)
}

fn grid_times(ctx: &mut Ctx, grid: Option<&GridSpec>) -> Option<Vec<f64>> {
    match grid?.build() {
        Ok(g) => Some(g.points().to_vec()),
        Err(e) => {
            ctx.bad("grid".into(), e.to_string());
            None
        }
    }
}

fn parse_profile(ctx: &mut Ctx, t: &Table, path: &str) -> Option<Profile> {
    let name = ctx.str(t, path, "profile", true)?;
    Some(match name {
        "linear" => Profile::Linear,
        "constant" => Profile::Constant,
        "sine" => Profile::Sine,
        "first" => Profile::First,
        "ones" => Profile::Ones,
        "weights" => Profile::Weights,
        "values" => Profile::Values(ctx.f64_list(t, path, "values", true)?),
        other => {
            ctx.bad(
                join(path, "profile"),
                format!("unknown profile `{other}` (linear, constant, sine, first, ones, weights, values)"),
            );
            return None;
        }
    })
}

fn parse_curve(ctx: &mut Ctx, doc: &Table, paths: bool) -> Option<Vec<Ray>> {
    let Some(v) = doc.get("curve") else {
        return Some(vec![Ray {
            profile: if paths {
                Profile::Linear
            } else {
                Profile::First
            },
            scales: DEFAULT_SCALES.to_vec(),
        }]);
    };
    let Value::Array(items) = v else {
        ctx.bad("curve".into(), "expected an array of tables ([[curve]])");
        return None;
    };
    let mut rays = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let path = format!("curve[{i}]");
        let Value::Table(t) = item else {
            ctx.bad(path, "expected a table");
            ok = false;
            continue;
        };
        ctx.allow(t, &path, &["profile", "values", "scales"]);
        let profile = parse_profile(ctx, t, &path);
        if profile
            .as_ref()
            .is_some_and(|p| !matches!(p, Profile::Values(_)))
            && t.contains_key("values")
        {
            ctx.unknown.push(join(&path, "values"));
        }
        let scales = match t.get("scales") {
            Some(_) => ctx.f64_list(t, &path, "scales", false),
            None => Some(DEFAULT_SCALES.to_vec()),
        };
        match (profile, scales) {
            (Some(profile), Some(scales)) => rays.push(Ray { profile, scales }),
            _ => ok = false,
        }
    }
    ok.then_some(rays)
}

fn parse_kind(ctx: &mut Ctx, doc: &Table) -> Option<ScenarioKind> {
    let s = ctx.table(doc, "", "scenario", true)?;
    let kind = ctx.str(s, "scenario", "kind", true)?;
    let sc = "scenario";
    let top: &[&str] = match kind {
        "modulated_bm" | "fbm_drift" => &["grid", "set", "speed"],
        "c0_counterexample" => &[],
        "weighted_c0" => &["speed"],
        "exp_equivalence" => &["grid", "speed"],
        other => {
            ctx.bad(
                "scenario.kind".into(),
                format!(
                    "unknown scenario `{other}` (modulated_bm, fbm_drift, c0_counterexample, weighted_c0, exp_equivalence)"
                ),
            );
            return None;
        }
    };
    let mut allowed = vec!["seed", "output_dir", "formats", "scenario", "mc", "curve"];
    allowed.extend_from_slice(top);
    ctx.allow(doc, "", &allowed);

    let n_list = |ctx: &mut Ctx, default: Option<Vec<u64>>| match ctx.u64_list(
        s,
        sc,
        "n_list",
        default.is_none(),
    ) {
        Some(v) => Some(v),
        None if !s.contains_key("n_list") => default,
        None => None,
    };

    match kind {
        "modulated_bm" => {
            ctx.allow(s, sc, &["kind", "n_list"]);
            let n_list = n_list(ctx, Some(vec![2, 4, 8, 16]));
            let grid = parse_grid(ctx, doc, 200);
            let times = grid_times(ctx, grid.as_ref());
            let set = parse_set(ctx, doc, times);
            let speed = parse_speed(ctx, doc);
            Some(ScenarioKind::ModulatedBm {
                n_list: n_list?,
                grid: grid?,
                set: set?,
                speed: speed?,
            })
        }
        "fbm_drift" => {
            ctx.allow(s, sc, &["kind", "n_list", "h_list", "h_limit"]);
            let n_list = n_list(ctx, None);
            let h_list = ctx.f64_list(s, sc, "h_list", true);
            let h_limit = ctx.f64(s, sc, "h_limit", true);
            let grid = parse_grid(ctx, doc, 200);
            let times = grid_times(ctx, grid.as_ref());
            let set = parse_set(ctx, doc, times);
            let speed = parse_speed(ctx, doc);
            Some(ScenarioKind::FbmDrift {
                n_list: n_list?,
                h_list: h_list?,
                h_limit: h_limit?,
                grid: grid?,
                set: set?,
                speed: speed?,
            })
        }
        "c0_counterexample" => {
            ctx.allow(s, sc, &["kind", "n_list", "bounds", "k0_list"]);
            let n_list = n_list(ctx, Some(vec![100, 1000, 10_000]));
            let bounds = match s.get("bounds") {
                Some(v) => parse_sequence(ctx, v, "scenario.bounds"),
                None => Some(SequenceRule::Harmonic),
            };
            let k0_list = match s.get("k0_list") {
                Some(_) => ctx.u64_list(s, sc, "k0_list", false),
                None => Some(vec![5, 10, 20]),
            };
            Some(ScenarioKind::C0Counterexample {
                n_list: n_list?,
                bounds: bounds?,
                k0_list: k0_list?
                    .into_iter()
                    .map(|k| usize::try_from(k).unwrap_or(usize::MAX))
                    .collect(),
            })
        }
        "weighted_c0" => {
            ctx.allow(
                s,
                sc,
                &[
                    "kind",
                    "n_list",
                    "weights",
                    "b",
                    "r",
                    "m",
                    "test_boxes",
                    "tightness_n_max",
                ],
            );
            let n_list = n_list(ctx, Some((5..=50).collect()));
            let weights = match s.get("weights") {
                Some(v) => parse_sequence(ctx, v, "scenario.weights"),
                None => Some(SequenceRule::InvSqrtLog),
            };
            let b = match s.get("b") {
                None => Some(BoxRule::RateMatched),
                Some(Value::String(p)) if p == "paper" => Some(BoxRule::RateMatched),
                Some(v @ Value::Table(_)) => {
                    parse_sequence(ctx, v, "scenario.b").map(|bounds| BoxRule::Custom { bounds })
                }
                Some(_) => {
                    ctx.bad(
                        "scenario.b".into(),
                        "expected \"paper\" or a sequence table",
                    );
                    None
                }
            };
            let r = ctx
                .f64(s, sc, "r", false)
                .or((!s.contains_key("r")).then_some(1.0));
            let m = ctx
                .f64(s, sc, "m", false)
                .or((!s.contains_key("m")).then_some(1.0));
            let test_boxes = match ctx.array(s, sc, "test_boxes", false) {
                Some(items) => items
                    .iter()
                    .enumerate()
                    .map(|(i, v)| parse_sequence(ctx, v, &format!("scenario.test_boxes[{i}]")))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect::<Option<Vec<_>>>(),
                None => (!s.contains_key("test_boxes")).then(default_test_boxes),
            };
            let n_max = ctx
                .u64(s, sc, "tightness_n_max", false)
                .or((!s.contains_key("tightness_n_max")).then_some(1_000_000));
            let speed = parse_speed(ctx, doc);
            Some(ScenarioKind::WeightedC0 {
                n_list: n_list?,
                weights: weights?,
                b: b?,
                r: r?,
                m: m?,
                speed: speed?,
                test_boxes: test_boxes?,
                tightness_n_max: usize::try_from(n_max?).unwrap_or(usize::MAX),
            })
        }
        "exp_equivalence" => {
            ctx.allow(s, sc, &["kind", "n_list", "pair", "delta", "threshold"]);
            let n_list = n_list(ctx, Some(vec![2, 4, 8, 16]));
            let pair = match ctx.str(s, sc, "pair", false) {
                None if !s.contains_key("pair") => Some(PairBuilder::ModulatedBm),
                None => None,
                Some("modulated_bm") => Some(PairBuilder::ModulatedBm),
                Some("identical") => Some(PairBuilder::Identical),
                Some("independent") => Some(PairBuilder::Independent),
                Some(other) => {
                    ctx.bad(
                        "scenario.pair".into(),
                        format!("unknown pair `{other}` (modulated_bm, identical, independent)"),
                    );
                    None
                }
            };
            let delta = ctx.f64(s, sc, "delta", true);
            let threshold = ctx.f64(s, sc, "threshold", true);
            let grid = parse_grid(ctx, doc, 50);
            let speed = parse_speed(ctx, doc);
            Some(ScenarioKind::ExpEquivalence {
                n_list: n_list?,
                pair: pair?,
                grid: grid?,
                delta: delta?,
                threshold: threshold?,
                speed: speed?,
            })
        }
        _ => unreachable!("kind checked above"),
    }
}

fn is_path_kind(kind: &ScenarioKind) -> bool {
    matches!(
        kind,
        ScenarioKind::ModulatedBm { .. }
            | ScenarioKind::FbmDrift { .. }
            | ScenarioKind::ExpEquivalence { .. }
    )
}

/// Dimension of the limit model the rate curve is evaluated under.
pub fn curve_dim(kind: &ScenarioKind) -> usize {
    match kind {
        ScenarioKind::ModulatedBm { grid, .. }
        | ScenarioKind::FbmDrift { grid, .. }
        | ScenarioKind::ExpEquivalence { grid, .. } => grid.points,
        ScenarioKind::C0Counterexample { n_list, .. } | ScenarioKind::WeightedC0 { n_list, .. } => {
            (*n_list.last().unwrap_or(&1) as usize).clamp(1, SEQ_CURVE_DIM)
        }
    }
}

fn validate_curve(curve: &[Ray], kind: &ScenarioKind) -> Result<(), ConfigError> {
    let paths = is_path_kind(kind);
    let dim = curve_dim(kind);
    for (i, ray) in curve.iter().enumerate() {
        let fits = if paths {
            ray.profile.for_paths()
        } else {
            ray.profile.for_sequences()
        };
        if !fits {
            return Err(ConfigError::BadValue {
                key: format!("curve[{i}].profile"),
                reason: format!(
                    "`{}` does not apply to {} scenarios",
                    ray.profile.name(),
                    if paths { "path" } else { "sequence" }
                ),
            });
        }
        if let Profile::Values(v) = &ray.profile {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(ConfigError::BadValue {
                    key: format!("curve[{i}].values"),
                    reason: format!("needs {dim} finite entries, got {}", v.len()),
                });
            }
        }
        if ray.scales.is_empty() || ray.scales.iter().any(|s| !s.is_finite()) {
            return Err(ConfigError::BadValue {
                key: format!("curve[{i}].scales"),
                reason: "needs at least one finite scale".into(),
            });
        }
    }
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut ctx = Ctx::default();

    let seed = match doc.get("seed") {
        Some(v) => ctx.count(v, "seed".into()),
        None => Some(DEFAULT_SEED),
    };
    let output_dir = match doc.get("output_dir") {
        Some(_) => ctx.str(&doc, "", "output_dir", false).map(PathBuf::from),
        None => Some(PathBuf::from(DEFAULT_OUTPUT_DIR)),
    };
    let formats = match ctx.array(&doc, "", "formats", false) {
        Some(items) => {
            let mut set = BTreeSet::new();
            for v in items {
                match v.as_str().and_then(Format::parse) {
                    Some(f) => {
                        set.insert(f);
                    }
                    None => ctx.bad(
                        "formats".into(),
                        format!("unknown format {v} (csv, summary, json)"),
                    ),
                }
            }
            Some(set)
        }
        None => (!doc.contains_key("formats")).then(|| [Format::Csv, Format::Summary].into()),
    };
    let kind = parse_kind(&mut ctx, &doc);
    let mc = parse_mc(&mut ctx, &doc, seed.unwrap_or(DEFAULT_SEED));
    let curve = parse_curve(&mut ctx, &doc, kind.as_ref().is_none_or(is_path_kind));
    ctx.finish()?;

    let (seed, output_dir, formats) = (seed.unwrap(), output_dir.unwrap(), formats.unwrap());
    let config = RunConfig {
        scenario: ScenarioSpec {
            kind: kind.unwrap(),
            mc: mc.unwrap(),
        },
        output_dir,
        formats,
        seed,
        curve: curve.unwrap(),
    };
    validate_config(&config)?;
    Ok(config)
}

/// Checks everything a parsed or hand-built configuration must satisfy.
pub fn validate_config(config: &RunConfig) -> Result<(), ConfigError> {
    if config.seed > i64::MAX as u64 {
        return Err(ConfigError::BadValue {
            key: "seed".into(),
            reason: format!("must not exceed {}", i64::MAX),
        });
    }
    if config.scenario.mc.master_seed != config.seed {
        return Err(ConfigError::BadValue {
            key: "seed".into(),
            reason: "Monte Carlo seed differs from the run seed".into(),
        });
    }
    if config.formats.is_empty() {
        return Err(ConfigError::BadValue {
            key: "formats".into(),
            reason: "at least one output format is required".into(),
        });
    }
    if config.output_dir.as_os_str().is_empty() {
        return Err(ConfigError::BadValue {
            key: "output_dir".into(),
            reason: "must not be empty".into(),
        });
    }
    config.scenario.validate()?;
    validate_curve(&config.curve, &config.scenario.kind)
}

fn int(v: u64) -> Value {
    Value::Integer(v as i64)
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

fn ints(v: impl IntoIterator<Item = u64>) -> Value {
    Value::Array(v.into_iter().map(int).collect())
}

fn table(entries: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
    Value::Table(
        entries
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    )
}

fn sequence_value(rule: &SequenceRule) -> Value {
    let name = |s: &str| ("rule", Value::String(s.into()));
    match rule {
        SequenceRule::Harmonic => table([name("harmonic")]),
        SequenceRule::InvSqrtLog => table([name("inv_sqrt_log")]),
        SequenceRule::Power { c, p } => table([
            name("power"),
            ("c", Value::Float(*c)),
            ("p", Value::Float(*p)),
        ]),
        SequenceRule::LogPower { c, p } => table([
            name("log_power"),
            ("c", Value::Float(*c)),
            ("p", Value::Float(*p)),
        ]),
        SequenceRule::Explicit { values } => table([name("explicit"), ("values", floats(values))]),
    }
}

fn set_value(set: &CompactSetSpec) -> Value {
    let kind = |s: &str| ("kind", Value::String(s.into()));
    match set {
        CompactSetSpec::SupBall { radius } => {
            table([kind("sup_ball"), ("radius", Value::Float(*radius))])
        }
        CompactSetSpec::Box { bounds } => table([kind("box"), ("bounds", floats(bounds))]),
        CompactSetSpec::ModulusSet {
            hoelder,
            exponent,
            anchor,
            ..
        } => table([
            kind("modulus_set"),
            ("hoelder", Value::Float(*hoelder)),
            ("exponent", Value::Float(*exponent)),
            ("anchor", Value::Float(*anchor)),
        ]),
    }
}

fn speed_value(speed: &SpeedFunction) -> Value {
    let kind = |s: &str| ("kind", Value::String(s.into()));
    match speed {
        SpeedFunction::Linear => table([kind("linear")]),
        SpeedFunction::PowerLog { m } => table([kind("power_log"), ("m", Value::Float(*m))]),
        SpeedFunction::Power { p } => table([kind("power"), ("p", Value::Float(*p))]),
        SpeedFunction::Table { values } => table([kind("table"), ("values", floats(values))]),
    }
}

fn grid_value(grid: &GridSpec) -> Value {
    table([
        ("points", int(grid.points as u64)),
        ("horizon", Value::Float(grid.horizon)),
    ])
}

/// Prints a configuration with every default spelled out; parsing the result
/// gives back the same configuration.
pub fn print_config(config: &RunConfig) -> String {
    let mut doc = Table::new();
    doc.insert("seed".into(), int(config.seed));
    doc.insert(
        "output_dir".into(),
        Value::String(config.output_dir.to_string_lossy().into_owned()),
    );
    doc.insert(
        "formats".into(),
        Value::Array(
            config
                .formats
                .iter()
                .map(|f| Value::String(f.name().into()))
                .collect(),
        ),
    );
    let kind_name = Value::String(config.scenario.name().into());
    let scenario = match &config.scenario.kind {
        ScenarioKind::ModulatedBm {
            n_list,
            grid,
            set,
            speed,
        } => {
            doc.insert("grid".into(), grid_value(grid));
            doc.insert("set".into(), set_value(set));
            doc.insert("speed".into(), speed_value(speed));
            table([
                ("kind", kind_name),
                ("n_list", ints(n_list.iter().copied())),
            ])
        }
        ScenarioKind::FbmDrift {
            n_list,
            h_list,
            h_limit,
            grid,
            set,
            speed,
        } => {
            doc.insert("grid".into(), grid_value(grid));
            doc.insert("set".into(), set_value(set));
            doc.insert("speed".into(), speed_value(speed));
            table([
                ("kind", kind_name),
                ("n_list", ints(n_list.iter().copied())),
                ("h_list", floats(h_list)),
                ("h_limit", Value::Float(*h_limit)),
            ])
        }
        ScenarioKind::C0Counterexample {
            n_list,
            bounds,
            k0_list,
        } => table([
            ("kind", kind_name),
            ("n_list", ints(n_list.iter().copied())),
            ("bounds", sequence_value(bounds)),
            ("k0_list", ints(k0_list.iter().map(|k| *k as u64))),
        ]),
        ScenarioKind::WeightedC0 {
            n_list,
            weights,
            b,
            r,
            m,
            speed,
            test_boxes,
            tightness_n_max,
        } => {
            doc.insert("speed".into(), speed_value(speed));
            let b = match b {
                BoxRule::RateMatched => Value::String("paper".into()),
                BoxRule::Custom { bounds } => sequence_value(bounds),
            };
            table([
                ("kind", kind_name),
                ("n_list", ints(n_list.iter().copied())),
                ("weights", sequence_value(weights)),
                ("b", b),
                ("r", Value::Float(*r)),
                ("m", Value::Float(*m)),
                (
                    "test_boxes",
                    Value::Array(test_boxes.iter().map(sequence_value).collect()),
                ),
                ("tightness_n_max", int(*tightness_n_max as u64)),
            ])
        }
        ScenarioKind::ExpEquivalence {
            n_list,
            pair,
            grid,
            delta,
            threshold,
            speed,
        } => {
            doc.insert("grid".into(), grid_value(grid));
            doc.insert("speed".into(), speed_value(speed));
            let pair = match pair {
                PairBuilder::ModulatedBm => "modulated_bm",
                PairBuilder::Identical => "identical",
                PairBuilder::Independent => "independent",
            };
            table([
                ("kind", kind_name),
                ("n_list", ints(n_list.iter().copied())),
                ("pair", Value::String(pair.into())),
                ("delta", Value::Float(*delta)),
                ("threshold", Value::Float(*threshold)),
            ])
        }
    };
    doc.insert("scenario".into(), scenario);
    let mc = &config.scenario.mc;
    doc.insert(
        "mc".into(),
        table([
            ("batch", int(mc.batch as u64)),
            ("batches", int(mc.batches as u64)),
        ]),
    );
    let rays = config
        .curve
        .iter()
        .map(|r| {
            let mut t = Table::new();
            t.insert("profile".into(), Value::String(r.profile.name().into()));
            if let Profile::Values(v) = &r.profile {
                t.insert("values".into(), floats(v));
            }
            t.insert("scales".into(), floats(&r.scales));
            Value::Table(t)
        })
        .collect();
    doc.insert("curve".into(), Value::Array(rays));
    toml::to_string(&doc).expect("configuration tables always serialize")
}
