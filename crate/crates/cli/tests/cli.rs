use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ldp_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const MODULATED: &str = r#"
[scenario]
kind = "modulated_bm"
n_list = [2, 4, 8]

[grid]
points = 20

[set]
kind = "sup_ball"
radius = 1.0

[mc]
batch = 2000
batches = 4
"#;

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn weighted_defaults_report_both_verdicts() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "w.toml", "[scenario]\nkind = \"weighted_c0\"\n");
    let o = ldp_lab(tmp.path(), &["run", "w.toml", "--out", "out"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = stdout(&o);
    assert!(out.contains("\ntightness: FAIL (by design"), "{out}");
    assert!(out.contains("exponential tightness: PASS"), "{out}");
    let summary = fs::read_to_string(tmp.path().join("out/summary.txt")).unwrap();
    assert!(summary.starts_with("seed: 1\n"));
    assert!(summary.ends_with(&out));
    for f in [
        "config.toml",
        "decay.csv",
        "diagnostics.csv",
        "rate_curve.csv",
    ] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn c0_defaults_refute_exponential_tightness() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "c.toml",
        "formats = [\"summary\", \"json\"]\n[scenario]\nkind = \"c0_counterexample\"\n",
    );
    let o = ldp_lab(tmp.path(), &["run", "c.toml"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o)
        .contains("exponential tightness at speed n: REFUTED (empirical rate ≥ −a_{k0}²/2)"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ldp-out/report.json")).unwrap())
            .unwrap();
    assert_eq!(json["scenario"], "c0_counterexample");
    assert!(!tmp.path().join("ldp-out/decay.csv").exists());
}

#[test]
fn failed_verdicts_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "m.toml",
        &MODULATED.replace("[2, 4, 8]", "[2, 4]"),
    );
    let o = ldp_lab(tmp.path(), &["run", "m.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("upper-bound check: FAIL"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "m.toml", MODULATED);
    let read = |d: &str| {
        [
            "decay.csv",
            "diagnostics.csv",
            "rate_curve.csv",
            "summary.txt",
        ]
        .map(|f| fs::read(tmp.path().join(d).join(f)).unwrap())
    };
    ldp_lab(tmp.path(), &["run", "m.toml", "--seed", "7", "--out", "a"]);
    ldp_lab(tmp.path(), &["run", "m.toml", "--seed", "7", "--out", "b"]);
    ldp_lab(tmp.path(), &["run", "m.toml", "--seed", "8", "--out", "c"]);
    assert!(read("a") == read("b"));
    assert_ne!(read("a")[0], read("c")[0]);
    assert!(String::from_utf8(read("a")[3].clone())
        .unwrap()
        .starts_with("seed: 7\n"));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "m.toml", MODULATED);
    ldp_lab(
        tmp.path(),
        &["run", "m.toml", "--threads", "1", "--out", "one"],
    );
    ldp_lab(
        tmp.path(),
        &["run", "m.toml", "--threads", "4", "--out", "four"],
    );
    for f in ["decay.csv", "diagnostics.csv", "summary.txt"] {
        assert_eq!(
            fs::read(tmp.path().join("one").join(f)).unwrap(),
            fs::read(tmp.path().join("four").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn output_failures_leave_a_manifest() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "m.toml", MODULATED);
    fs::create_dir_all(tmp.path().join("ldp-out/summary.txt")).unwrap();
    let o = ldp_lab(tmp.path(), &["run", "m.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let manifest = fs::read_to_string(tmp.path().join("ldp-out/error.txt")).unwrap();
    assert!(manifest.contains("stage: output"), "{manifest}");
    assert!(manifest.contains("summary.txt"));
    for f in ["config.toml", "decay.csv", "rate_curve.csv"] {
        assert!(manifest.contains(&format!("  {f}\n")), "{manifest}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "bad.toml",
        &MODULATED.replace("radius = 1.0", "radius = -1.0"),
    );
    let o = ldp_lab(tmp.path(), &["run", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("set.radius"));
    assert!(!tmp.path().join("ldp-out").exists());
    let o = ldp_lab(tmp.path(), &["check", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_prints_the_normalized_config() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "m.toml", MODULATED);
    let o = ldp_lab(tmp.path(), &["check", "m.toml"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("seed = 1\n") && text.contains("[speed]\nkind = \"linear\"\n"),
        "{text}"
    );
    write(tmp.path(), "n.toml", &text);
    assert_eq!(stdout(&ldp_lab(tmp.path(), &["check", "n.toml"])), text);
}

const BM2: &str = r#"{
  "dim": 2,
  "mean": [0.0, 0.0],
  "cov": [1.0, 1.0, 1.0, 2.0],
  "coords": {"kind": "plain"}
}"#;

#[test]
fn rate_command_prints_the_quadratic_form() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "model.json", BM2);
    write(tmp.path(), "x.json", "[1.0, 3.0]");
    let o = ldp_lab(tmp.path(), &["rate", "model.json", "x.json"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let v: f64 = text
        .trim()
        .strip_prefix("I(x) = ")
        .unwrap()
        .parse()
        .unwrap();
    // C^{-1} = [[2, -1], [-1, 1]], x' C^{-1} x = 2 - 6 + 9
    assert!((v - 2.5).abs() < 1e-12, "{v}");
    write(tmp.path(), "y.json", "[1.0]");
    assert_eq!(
        ldp_lab(tmp.path(), &["rate", "model.json", "y.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fernique_command_reports_constants() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "model.json", BM2);
    let o = ldp_lab(
        tmp.path(),
        &[
            "fernique",
            "model.json",
            "--s",
            "1.5",
            "--count",
            "20000",
            "--seed",
            "3",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    for key in ["s = ", "beta = ", "kappa = ", "zeta = ", "a_max = "] {
        assert!(text.contains(key), "{text}");
    }
    assert!(text.contains("20000 draws"));
    let again = ldp_lab(
        tmp.path(),
        &[
            "fernique",
            "model.json",
            "--s",
            "1.5",
            "--count",
            "20000",
            "--seed",
            "3",
        ],
    );
    assert_eq!(stdout(&again), text);
}
