use ldp_core::scenarios::{BoxRule, GridSpec, PairBuilder, SequenceRule};
use ldp_core::{CompactSetSpec, LdpError, McParams, ScenarioKind, ScenarioSpec, SpeedFunction};
use ldp_lab::config::{DEFAULT_BATCH, DEFAULT_BATCHES, DEFAULT_SEED};
use ldp_lab::{parse_config, print_config, ConfigError, Format, Profile, Ray, RunConfig};
use proptest::prelude::*;

const MINIMAL: &str = r#"
[scenario]
kind = "modulated_bm"

[set]
kind = "sup_ball"
radius = 1
"#;

#[test]
fn minimal_config_gets_defaults() {
    let c = parse_config(MINIMAL).unwrap();
    assert_eq!(c.seed, DEFAULT_SEED);
    assert_eq!(
        c.scenario.mc,
        McParams {
            batch: DEFAULT_BATCH,
            batches: DEFAULT_BATCHES,
            master_seed: DEFAULT_SEED
        }
    );
    assert_eq!(
        c.scenario.kind,
        ScenarioKind::ModulatedBm {
            n_list: vec![2, 4, 8, 16],
            grid: GridSpec {
                points: 200,
                horizon: 1.0
            },
            set: CompactSetSpec::SupBall { radius: 1.0 },
            speed: SpeedFunction::Linear,
        }
    );
    assert_eq!(c.formats, [Format::Csv, Format::Summary].into());
    assert_eq!(c.curve.len(), 1);
    assert_eq!(c.curve[0].profile, Profile::Linear);
}

#[test]
fn box_rule_keyword_expands() {
    let c = parse_config("[scenario]\nkind = \"weighted_c0\"\nb = \"paper\"\nr = 1.0\nm = 1.0\n")
        .unwrap();
    let ScenarioKind::WeightedC0 {
        weights, b, r, m, ..
    } = &c.scenario.kind
    else {
        panic!("wrong kind")
    };
    assert_eq!(*b, BoxRule::RateMatched);
    let a = weights.take(10, "w").unwrap();
    let bk = b.bounds(&a, *r, *m).unwrap();
    for k in 0..10 {
        assert!((bk[k] * bk[k] - 2.0 * (r + 1.0 / m) * a[k] * a[k]).abs() < 1e-12);
    }
}

#[test]
fn negative_radius_names_the_key() {
    let err = parse_config(&MINIMAL.replace("radius = 1", "radius = -1")).unwrap_err();
    assert!(matches!(
        err,
        ConfigError::Invalid(LdpError::InvalidParameter {
            name: "set.radius",
            ..
        })
    ));
    assert!(err.to_string().contains("set.radius"));
}

#[test]
fn unknown_keys_are_errors() {
    let err = parse_config(&format!("{MINIMAL}\n[mc]\nbatch = 1000\nbatchez = 4\n")).unwrap_err();
    assert_eq!(err, ConfigError::UnknownKeys(vec!["mc.batchez".into()]));
    let err =
        parse_config("[scenario]\nkind = \"c0_counterexample\"\n[grid]\npoints = 3\n").unwrap_err();
    assert_eq!(err, ConfigError::UnknownKeys(vec!["grid".into()]));
    let err =
        parse_config(&MINIMAL.replace("radius = 1", "radius = 1\nbounds = [1.0]")).unwrap_err();
    assert_eq!(err, ConfigError::UnknownKeys(vec!["set.bounds".into()]));
}

#[test]
fn missing_keys_are_listed_together() {
    let err = parse_config(
        "[scenario]\nkind = \"fbm_drift\"\n[set]\nkind = \"modulus_set\"\nhoelder = 1.0\n[speed]\nkind = \"power_log\"\n",
    )
    .unwrap_err();
    let ConfigError::MissingKeys(keys) = &err else {
        panic!("{err}")
    };
    for k in [
        "scenario.n_list",
        "scenario.h_list",
        "scenario.h_limit",
        "set.exponent",
        "set.anchor",
        "speed.m",
    ] {
        assert!(keys.contains(&k.to_string()), "{k} not in {keys:?}");
    }
    assert!(err.to_string().starts_with("missing required keys: "));
    let err = parse_config("[scenario]\nkind = \"modulated_bm\"\n").unwrap_err();
    assert_eq!(err, ConfigError::MissingKeys(vec!["set".into()]));
}

#[test]
fn type_and_range_errors_name_the_key() {
    let err = parse_config(&MINIMAL.replace("radius = 1", "radius = \"big\"")).unwrap_err();
    assert!(matches!(&err, ConfigError::BadValue { key, .. } if key == "set.radius"));
    let err = parse_config(&format!("{MINIMAL}\n[mc]\nbatch = 10\n")).unwrap_err();
    assert!(err.to_string().contains("mc.batch"), "{err}");
    let err = parse_config(&format!("{MINIMAL}\n[grid]\npoints = 0\n")).unwrap_err();
    assert!(err.to_string().contains("grid.points"), "{err}");
    let err = parse_config(&format!("seed = -3\n{MINIMAL}")).unwrap_err();
    assert!(matches!(&err, ConfigError::BadValue { key, .. } if key == "seed"));
    let err = parse_config(&format!("formats = [\"csv\", \"xml\"]\n{MINIMAL}")).unwrap_err();
    assert!(matches!(&err, ConfigError::BadValue { key, .. } if key == "formats"));
    assert!(matches!(
        parse_config("[scenario"),
        Err(ConfigError::Syntax(_))
    ));
}

#[test]
fn uncoupled_pairs_are_rejected() {
    let text = "[scenario]\nkind = \"exp_equivalence\"\npair = \"independent\"\ndelta = 0.1\nthreshold = -1.0\n";
    assert_eq!(
        parse_config(text).unwrap_err(),
        ConfigError::Invalid(LdpError::UncoupledPair)
    );
}

#[test]
fn curve_profiles_must_fit_the_scenario() {
    let err = parse_config(&format!("{MINIMAL}\n[[curve]]\nprofile = \"first\"\n")).unwrap_err();
    assert!(matches!(&err, ConfigError::BadValue { key, .. } if key == "curve[0].profile"));
    let err = parse_config(&format!(
        "{MINIMAL}\n[[curve]]\nprofile = \"values\"\nvalues = [1.0]\n"
    ))
    .unwrap_err();
    assert!(matches!(&err, ConfigError::BadValue { key, .. } if key == "curve[0].values"));
    let c = parse_config("[scenario]\nkind = \"c0_counterexample\"\n[[curve]]\nprofile = \"ones\"\nscales = [0, 1]\n")
        .unwrap();
    assert_eq!(
        c.curve,
        vec![Ray {
            profile: Profile::Ones,
            scales: vec![0.0, 1.0]
        }]
    );
}

#[test]
fn modulus_sets_take_their_times_from_the_grid() {
    let text = "[scenario]\nkind = \"modulated_bm\"\n[grid]\npoints = 4\nhorizon = 2.0\n\
                [set]\nkind = \"modulus_set\"\nhoelder = 3.0\nexponent = 0.5\nanchor = 1.0\n";
    let c = parse_config(text).unwrap();
    let ScenarioKind::ModulatedBm { set, .. } = &c.scenario.kind else {
        panic!()
    };
    assert!(
        matches!(set, CompactSetSpec::ModulusSet { times, .. } if times == &vec![0.5, 1.0, 1.5, 2.0])
    );
    assert_eq!(parse_config(&print_config(&c)).unwrap(), c);
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn n_list(max: u64) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::btree_set(1..max, 1..6).prop_map(|s| s.into_iter().collect())
}

fn sequence() -> impl Strategy<Value = SequenceRule> {
    prop_oneof![
        Just(SequenceRule::Harmonic),
        Just(SequenceRule::InvSqrtLog),
        (finite(0.1, 3.0), finite(0.1, 2.0)).prop_map(|(c, p)| SequenceRule::Power { c, p }),
        (finite(0.1, 3.0), finite(0.1, 2.0)).prop_map(|(c, p)| SequenceRule::LogPower { c, p }),
    ]
}

fn speed() -> impl Strategy<Value = SpeedFunction> {
    prop_oneof![
        Just(SpeedFunction::Linear),
        finite(0.5, 4.0).prop_map(|p| SpeedFunction::Power { p }),
    ]
}

fn grid() -> impl Strategy<Value = GridSpec> {
    (1usize..40, finite(0.1, 5.0)).prop_map(|(points, horizon)| GridSpec { points, horizon })
}

fn path_set(points: usize) -> impl Strategy<Value = CompactSetSpec> {
    prop_oneof![
        finite(0.1, 5.0).prop_map(|radius| CompactSetSpec::SupBall { radius }),
        prop::collection::vec(finite(0.1, 5.0), points)
            .prop_map(|bounds| CompactSetSpec::Box { bounds }),
    ]
}

fn kind() -> impl Strategy<Value = ScenarioKind> {
    prop_oneof![
        (n_list(1000), grid(), speed()).prop_flat_map(|(n_list, grid, speed)| {
            path_set(grid.points).prop_map(move |set| ScenarioKind::ModulatedBm {
                n_list: n_list.clone(),
                grid,
                set,
                speed: speed.clone(),
            })
        }),
        (n_list(1000), grid(), finite(0.05, 0.95)).prop_flat_map(|(n_list, grid, h_limit)| {
            let k = n_list.len();
            (
                prop::collection::vec(finite(0.05, 0.95), k),
                path_set(grid.points),
            )
                .prop_map(move |(h_list, set)| ScenarioKind::FbmDrift {
                    n_list: n_list.clone(),
                    h_list,
                    h_limit,
                    grid,
                    set,
                    speed: SpeedFunction::Linear,
                })
        }),
        (n_list(500), prop::collection::btree_set(1usize..10, 1..4)).prop_map(
            |(mut n_list, k0)| {
                n_list.retain(|n| *n >= 10);
                if n_list.is_empty() {
                    n_list.push(10);
                }
                ScenarioKind::C0Counterexample {
                    n_list,
                    bounds: SequenceRule::Harmonic,
                    k0_list: k0.into_iter().collect(),
                }
            }
        ),
        (
            n_list(60),
            finite(0.1, 3.0),
            finite(0.1, 3.0),
            prop::option::of(sequence()),
            prop::collection::vec(sequence(), 1..4),
            1usize..5000
        )
            .prop_map(|(n_list, r, m, b, test_boxes, tightness_n_max)| {
                ScenarioKind::WeightedC0 {
                    n_list,
                    weights: SequenceRule::InvSqrtLog,
                    b: b.map_or(BoxRule::RateMatched, |bounds| BoxRule::Custom { bounds }),
                    r,
                    m,
                    speed: SpeedFunction::Linear,
                    test_boxes,
                    tightness_n_max,
                }
            }),
        (
            n_list(1000),
            prop_oneof![Just(PairBuilder::ModulatedBm), Just(PairBuilder::Identical)],
            grid(),
            finite(0.01, 2.0),
            finite(-10.0, 0.0),
            speed()
        )
            .prop_map(|(n_list, pair, grid, delta, threshold, speed)| {
                ScenarioKind::ExpEquivalence {
                    n_list,
                    pair,
                    grid,
                    delta,
                    threshold,
                    speed,
                }
            }),
    ]
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        kind(),
        0u64..=i64::MAX as u64,
        1000usize..100_000,
        4usize..20,
        prop::collection::btree_set(
            prop_oneof![Just(Format::Csv), Just(Format::Summary), Just(Format::Json)],
            1..4,
        ),
        "[a-z][a-z0-9_/]{0,12}",
        prop::collection::vec(finite(-3.0, 3.0), 1..5),
    )
        .prop_map(|(kind, seed, batch, batches, formats, dir, scales)| {
            let paths = matches!(
                kind,
                ScenarioKind::ModulatedBm { .. }
                    | ScenarioKind::FbmDrift { .. }
                    | ScenarioKind::ExpEquivalence { .. }
            );
            RunConfig {
                scenario: ScenarioSpec {
                    kind,
                    mc: McParams {
                        batch,
                        batches,
                        master_seed: seed,
                    },
                },
                output_dir: dir.into(),
                formats,
                seed,
                curve: vec![Ray {
                    profile: if paths { Profile::Sine } else { Profile::Ones },
                    scales,
                }],
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(c in run_config()) {
        prop_assume!(ldp_lab::config::validate_config(&c).is_ok());
        let text = print_config(&c);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(print_config(&back), text);
    }
}
