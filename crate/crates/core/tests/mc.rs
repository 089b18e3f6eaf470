mod common;

use ldp_core::mc::{estimate_mixture, estimate_probability, estimate_tilted, fit_decay};
use ldp_core::{McParams, RateFunctional};
use nalgebra::DVector;
use rand::Rng;

use common::{random_model, rng};

#[test]
fn tilted_and_plain_estimators_agree() {
    let mut r = rng(17);
    let mc = McParams::new(5_000, 8, 99).unwrap();
    let mut misses = 0;
    for case in 0..50 {
        let dim = 1 + case % 4;
        let model = random_model(&mut r, dim, dim);
        let coeffs: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let l = DVector::from_column_slice(&coeffs);
        let sd = (l.transpose() * model.cov() * &l)[(0, 0)].sqrt();
        // P(<l, X> > m + 1.28 sd) = 0.1
        let level = l.dot(model.mean()) + 1.2816 * sd;
        let event = |x: &[f64]| x.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>() > level;
        let shift = model.cov() * &l * (1.2816 / sd);
        let sub = mc.substream(&[case as u64]);
        let plain = estimate_probability(&model, event, &sub).unwrap();
        let tilted = estimate_tilted(&model, event, &shift, &sub.substream(&[1])).unwrap();
        let joint = (plain.std_error.powi(2) + tilted.std_error.powi(2)).sqrt();
        if (plain.value - tilted.value).abs() > 3.0 * joint {
            misses += 1;
        }
        assert!(
            (tilted.value - 0.1).abs() < 0.02,
            "case {case}: {}",
            tilted.value
        );
    }
    // 3 sigma, 50 cases
    assert!(misses <= 2, "{misses} disagreements");
}

#[test]
fn mixture_over_symmetric_points_is_unbiased() {
    let model = ldp_core::gauss::weighted_seq_model(&[1.0]).unwrap();
    let shifts = [DVector::from_vec(vec![3.0]), DVector::from_vec(vec![-3.0])];
    let mc = McParams::new(20_000, 8, 3).unwrap();
    let est = estimate_mixture(&model, |x| x[0].abs() > 3.0, &shifts, &mc).unwrap();
    let exact = ldp_core::normal::two_sided_sf(3.0);
    assert!((est.value - exact).abs() < 3.0 * est.std_error.max(1e-12) + 1e-3 * exact);
    assert!(est.ci_lo <= est.value && est.value <= est.ci_hi);
}

#[test]
fn dominating_point_tilt_reaches_deep_tails() {
    let model = random_model(&mut rng(2), 3, 3);
    let rf = RateFunctional::new(&model);
    let l = DVector::from_vec(vec![0.5, -1.0, 0.25]);
    let sd = (l.transpose() * model.cov() * &l)[(0, 0)].sqrt();
    let level = l.dot(model.mean()) + 5.0 * sd;
    let region = ldp_core::Region::HalfSpace(ldp_core::HalfSpace::new(
        ldp_core::LinearForm::dense(l.as_slice()),
        level,
    ));
    let shifts = rf.dominating_points(&region, 1e-9).unwrap();
    assert_eq!(shifts.len(), 1);
    let mc = McParams::new(10_000, 4, 8).unwrap();
    let event = |x: &[f64]| 0.5 * x[0] - x[1] + 0.25 * x[2] >= level;
    let est = estimate_mixture(&model, event, &shifts, &mc).unwrap();
    let exact = ldp_core::normal::sf(5.0);
    assert!(
        (est.value / exact - 1.0).abs() < 0.05,
        "{} vs {exact}",
        est.value
    );
    assert!(estimate_probability(&model, event, &mc).unwrap().floor_flag);
}

#[test]
fn noisy_decay_fit_recovers_slope() {
    let mut r = rng(23);
    let normal = rand_distr::Normal::new(0.0, 0.05).unwrap();
    let mut outside = 0;
    for _ in 0..200 {
        let g: Vec<f64> = (1..=12).map(|k| k as f64).collect();
        let lp: Vec<f64> = g.iter().map(|x| 0.3 - 0.5 * x + r.sample(normal)).collect();
        let fit = fit_decay(&g, &lp, &vec![1.0; g.len()]).unwrap();
        if (fit.slope + 0.5).abs() > 3.0 * fit.slope_se {
            outside += 1;
        }
    }
    // t_10 tails beyond 3 standard errors carry about 1.3% of the mass
    assert!(outside <= 10, "{outside} of 200 fits outside 3 se");
}

#[test]
fn estimates_are_pure_functions_of_the_seed() {
    let model = random_model(&mut rng(4), 2, 2);
    let mc = McParams::new(2_000, 5, 1234).unwrap();
    let event = |x: &[f64]| x[0] + x[1] > 0.5;
    let a = estimate_probability(&model, event, &mc).unwrap();
    let b = estimate_probability(&model, event, &mc).unwrap();
    assert_eq!(a, b);
    let c = estimate_probability(&model, event, &mc.substream(&[1])).unwrap();
    assert_ne!(a, c);
}
