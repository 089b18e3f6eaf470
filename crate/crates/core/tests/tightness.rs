mod common;

use ldp_core::gauss::{fbm_covariance, weighted_seq_model};
use ldp_core::tightness::{
    build_kr, family_constants, fernique_constants, gaussian_tail_chain, iid_scaling_check,
    kr_markov_check, t_sequence, verify_lin_exp_moment, verify_sq_exp_moment,
};
use ldp_core::{CompactSetSpec, Coords, GaussianModel, LdpError, McParams, Seminorm, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::rng;

fn random_set(r: &mut impl Rng, dim: usize) -> CompactSetSpec {
    match r.random_range(0..3) {
        0 => CompactSetSpec::Box {
            bounds: (0..dim).map(|_| r.random_range(0.1..2.0)).collect(),
        },
        1 => CompactSetSpec::SupBall {
            radius: r.random_range(0.1..2.0),
        },
        _ => CompactSetSpec::ModulusSet {
            hoelder: r.random_range(0.5..3.0),
            exponent: r.random_range(0.2..1.0),
            anchor: r.random_range(0.1..2.0),
            times: (1..=dim).map(|k| k as f64 / dim as f64).collect(),
        },
    }
}

#[test]
fn gauge_agrees_with_direct_membership() {
    let mut r = rng(31);
    let mut checked = 0;
    for _ in 0..10_000 {
        let dim = r.random_range(1..6);
        let set = random_set(&mut r, dim);
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
        let t = r.random_range(0.05..4.0);
        let q = set.minkowski(&x).unwrap();
        if (q - t).abs() < 1e-9 * t {
            continue;
        }
        assert_eq!(
            set.contains_scaled(&x, t).unwrap(),
            q <= t,
            "{set:?} {x:?} t = {t}"
        );
        checked += 1;
    }
    assert!(checked > 9_900);
}

#[test]
fn gauges_are_seminorms_and_sets_well_balanced() {
    let mut r = rng(37);
    for _ in 0..2_000 {
        let dim = r.random_range(1..6);
        let set = random_set(&mut r, dim);
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let l = r.random_range(-3.0..3.0);
        let lx: Vec<f64> = x.iter().map(|v| l * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let q = |v: &[f64]| set.minkowski(v).unwrap();
        assert!((q(&lx) - l.abs() * q(&x)).abs() <= 1e-9 * q(&x).max(1.0));
        assert!(q(&xy) <= q(&x) + q(&y) + 1e-9);
        if set.contains(&x).unwrap() {
            let s = r.random_range(0.0..1.0);
            let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
            assert!(set.contains(&sx).unwrap());
        }
    }
    let zero = vec![0.0; 3];
    assert_eq!(
        CompactSetSpec::SupBall { radius: 1.0 }
            .minkowski(&zero)
            .unwrap(),
        0.0
    );
}

#[test]
fn tail_chain_holds_for_small_n() {
    for s in [0.8, 1.0, 1.5] {
        let rows = gaussian_tail_chain(s, 3).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!(
                row.holds,
                "s = {s}, n = {}: {} > {}",
                row.n, row.lhs, row.rhs
            );
        }
    }
    assert!(matches!(
        gaussian_tail_chain(0.5, 3),
        Err(LdpError::FerniqueRefused { .. })
    ));
}

#[test]
fn threshold_ratios_increase() {
    let t = t_sequence(1.0, 12).unwrap();
    let zeta = ldp_core::tightness::sqrt_zeta(1.0);
    let ratios: Vec<f64> = t
        .iter()
        .enumerate()
        .map(|(n, v)| v / 2f64.powf(n as f64 / 2.0))
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    assert!(*ratios.last().unwrap() < zeta);
    assert!(zeta - ratios.last().unwrap() < 0.05 * zeta);
}

#[test]
fn fernique_from_standard_normal_samples() {
    let model = weighted_seq_model(&[1.0]).unwrap();
    let xs = ldp_core::gauss::sample(&model, 200_000, 5).unwrap();
    let c = fernique_constants(&xs, &Seminorm::SupNorm, 1.0).unwrap();
    assert!((c.beta - 0.3173).abs() < 0.005, "{}", c.beta);
    assert!(c.beta_ci.0 <= c.beta && c.beta <= c.beta_ci.1);
    assert!((c.zeta - 11.6569).abs() < 1e-3);
    assert!((c.a_max - 0.0329).abs() < 0.001);
    assert!(matches!(
        fernique_constants(&xs, &Seminorm::SupNorm, 0.3),
        Err(LdpError::FerniqueRefused { .. })
    ));
    assert!(fernique_constants(&xs[..100], &Seminorm::SupNorm, 1.0).is_err());
}

#[test]
fn square_moment_of_standard_normal() {
    let model = weighted_seq_model(&[1.0]).unwrap();
    let c = ldp_core::FerniqueConstants::from_beta(0.1, 1e-3, (5e-4, 2e-3), 100_000).unwrap();
    assert!(c.a_max > 0.1);
    let mc = McParams::new(100_000, 4, 77).unwrap();
    let rep = verify_sq_exp_moment(&[model.clone()], &Seminorm::SupNorm, 0.1, &c, &mc).unwrap();
    let e = &rep.rows[0].estimate;
    let exact = 1.0 / 0.8f64.sqrt();
    assert!(
        (e.value - exact).abs() < 3.0 * e.std_error,
        "{} vs {exact}",
        e.value
    );
    let zero = verify_sq_exp_moment(&[model], &Seminorm::SupNorm, 0.0, &c, &mc).unwrap();
    assert_eq!(zero.rows[0].estimate.value, 1.0);
}

#[test]
fn fbm_family_moments_are_stable() {
    let grid = TimeGrid::uniform(50, 1.0).unwrap();
    let models: Vec<GaussianModel> = [0.4, 0.5, 0.6]
        .iter()
        .map(|h| fbm_covariance(*h, &grid).unwrap())
        .collect();
    let c = family_constants(&models, &Seminorm::SupNorm, 1.5, 20_000, 3).unwrap();
    let mc = McParams::new(20_000, 4, 3).unwrap();
    let rep = verify_sq_exp_moment(&models, &Seminorm::SupNorm, c.a_max / 2.0, &c, &mc).unwrap();
    assert!(rep.stable, "{rep:?}");
    assert!(rep.family_sup.is_finite() && rep.family_sup > 1.0);
    assert!(matches!(
        verify_sq_exp_moment(&models, &Seminorm::SupNorm, 2.0 * c.a_max, &c, &mc),
        Err(LdpError::ExponentTooLarge { .. })
    ));
}

#[test]
fn square_moments_are_nondecreasing_in_a() {
    let grid = TimeGrid::uniform(10, 1.0).unwrap();
    let models = [fbm_covariance(0.5, &grid).unwrap()];
    let c = family_constants(&models, &Seminorm::SupNorm, 1.5, 20_000, 1).unwrap();
    let mc = McParams::new(5_000, 4, 9).unwrap();
    let mut prev = 0.0;
    for k in 0..=5 {
        let a = c.a_max * k as f64 / 5.0;
        let v = verify_sq_exp_moment(&models, &Seminorm::SupNorm, a, &c, &mc)
            .unwrap()
            .rows[0]
            .estimate
            .value;
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn linear_moment_bound() {
    let model = weighted_seq_model(&[1.0]).unwrap();
    let c = ldp_core::FerniqueConstants::from_beta(0.1, 1e-3, (5e-4, 2e-3), 100_000).unwrap();
    let mc = McParams::new(100_000, 4, 12).unwrap();
    let rows =
        verify_lin_exp_moment(&[model.clone()], &Seminorm::SupNorm, 1.0, 0.1, &c, &mc).unwrap();
    let exact = 2.0 * 0.5f64.exp() * ldp_core::normal::cdf(1.0);
    let e = &rows[0].estimate;
    assert!(
        (e.value - exact).abs() < 3.0 * e.std_error,
        "{} vs {exact}",
        e.value
    );
    assert!(rows[0].holds);
    assert!((rows[0].bound - (10f64.exp() + rows[0].sq_estimate.value)).abs() < 1e-6);
    let zero =
        verify_lin_exp_moment(&[model.clone()], &Seminorm::SupNorm, 0.0, 0.1, &c, &mc).unwrap();
    assert_eq!(zero[0].estimate.value, 1.0);
    let mut prev = 0.0;
    for t in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let v = verify_lin_exp_moment(&[model.clone()], &Seminorm::SupNorm, t, 0.1, &c, &mc)
            .unwrap()[0]
            .estimate
            .value;
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn kr_sets_grow_with_r() {
    let set = CompactSetSpec::Box {
        bounds: vec![1.0, 0.5],
    };
    assert_eq!(build_kr(&set, 1.0, 1.0).unwrap(), set);
    let k3 = build_kr(
        &CompactSetSpec::SupBall { radius: 1.0 },
        std::f64::consts::E,
        2.0,
    )
    .unwrap();
    assert!(matches!(k3, CompactSetSpec::SupBall { radius } if (radius - 3.0).abs() < 1e-12));
    let mut r = rng(41);
    let small = build_kr(&set, 2.0, 0.5).unwrap();
    let large = build_kr(&set, 2.0, 1.5).unwrap();
    for _ in 0..1000 {
        let x = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        if small.contains(&x).unwrap() {
            assert!(large.contains(&x).unwrap());
        }
    }
    assert!(build_kr(&set, 0.5, 1.0).is_err());
}

#[test]
fn markov_bound_for_one_dimensional_model() {
    let model =
        GaussianModel::centered_from_cov(DMatrix::from_element(1, 1, 0.25), Coords::Plain).unwrap();
    let set = CompactSetSpec::Box { bounds: vec![1.0] };
    for r in [0.5, 1.0] {
        let mc = McParams::new(50_000, 4, 5).unwrap();
        let rep = kr_markov_check(&model, &set, r, &[1, 2, 4], &mc).unwrap();
        for row in &rep.rows {
            assert!(
                row.holds,
                "R = {r}, g = {}: {:?} vs {}",
                row.g, row.probability, row.bound
            );
        }
    }
}

#[test]
fn iid_device_preserves_the_centered_law() {
    let model = weighted_seq_model(&[1.0]).unwrap();
    let one = iid_scaling_check(&model, 1, 1000, 4).unwrap();
    assert_eq!(one.max_discrepancy, 0.0);
    let n = 20_000;
    let rep = iid_scaling_check(&model, 16, n, 4).unwrap();
    // variance of a sample variance of N(0, 1) is about 2 / n
    assert!((rep.scaled_var[0] - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    let shifted = model.with_mean(DVector::from_element(1, 0.5)).unwrap();
    let rep = iid_scaling_check(&shifted, 16, n, 4).unwrap();
    assert!((rep.scaled_mean[0] - 4.0 * 0.5).abs() < 5.0 / (n as f64).sqrt());
    assert!(iid_scaling_check(&model, 0, n, 4).is_err());
}
