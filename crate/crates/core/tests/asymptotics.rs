use bvfrac::asymptotics::{
    fit_log_slope, sweep, uniform_bound, uniform_bound_from_value, verify_limit, Experiment, Functional, Schedule,
    SweepEntry, SweepSeries,
};
use bvfrac::fields::catalog::catalog;
use bvfrac::fields::PiecewiseConstantField;
use bvfrac::kernel::Mollifier;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn series(n: usize, f: impl Fn(f64) -> f64) -> SweepSeries<f64> {
    let schedule = Schedule::between(0.3, 1e-4, n).unwrap();
    let entries =
        schedule.epsilons().into_iter().map(|e| SweepEntry { epsilon: e, value: f(e), error_estimate: 0.0 }).collect();
    SweepSeries { functional: Functional::Gagliardo, schedule, entries }
}

#[test]
fn affine_data_is_fitted_exactly() {
    let fit = fit_log_slope(&series(8, |e| 3.0 * e.ln().abs() + 5.0)).unwrap();
    assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 5.0).abs() < 1e-12);
    assert!(fit.rms_residual < 1e-12 && fit.stable);
    let fit = fit_log_slope(&series(5, |_| 7.0)).unwrap();
    assert!(fit.slope.abs() < 1e-12 && (fit.intercept - 7.0).abs() < 1e-12);
}

#[test]
fn noisy_affine_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise: Vec<f64> = (0..16).map(|_| rng.random_range(-0.01..0.01)).collect();
    let s = series(16, |e| 3.0 * e.ln().abs() + 5.0);
    let mut s2 = s.clone();
    for (entry, n) in s2.entries.iter_mut().zip(&noise) {
        entry.value += n;
    }
    let fit = fit_log_slope(&s2).unwrap();
    assert!((2.99..=3.01).contains(&fit.slope), "{}", fit.slope);
    assert!(fit.rms_residual > 0.0 && fit.rms_residual < 0.01);
}

#[test]
fn schedules_are_validated() {
    assert!(Schedule::<f64>::between(0.1, 1e-3, 3).is_err());
    assert!(Schedule::<f64>::between(0.5, 1e-3, 6).is_err());
    assert!(Schedule::<f64>::between(1e-3, 1e-2, 6).is_err());
    let s = Schedule::<f64>::between(1e-2, 1e-4, 9).unwrap();
    let e = s.epsilons();
    assert_eq!(e.len(), 9);
    assert!((e[8] - 1e-4).abs() < 1e-16 && e.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn constant_field_sweep_is_zero() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let u = PiecewiseConstantField::<f64>::zero(1, 1).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let exp = Experiment::new(Functional::Gagliardo, &u, &hat, 2.0, &c.domain);
    let s = sweep(&exp, &Schedule::between(0.1, 1e-3, 5).unwrap()).unwrap();
    assert!(s.entries.iter().all(|e| e.value == 0.0));
    let b = uniform_bound(&u, &hat, 2.0, 1e-2, &c.domain).unwrap();
    assert!(b.pass && b.lhs == 0.0);
}

#[test]
fn step_sweep_grows_like_twice_the_log() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let exp = Experiment::new(Functional::Gagliardo, &c.field, &hat, 2.0, &c.domain);
    let s = sweep(&exp, &Schedule::between(1e-2, 1e-4, 9).unwrap()).unwrap();
    assert!(s.entries.windows(2).all(|w| w[1].value > w[0].value));
    for e in &s.entries {
        let r = e.value / e.epsilon.ln().abs();
        assert!((1.5..=2.5).contains(&r), "ε={}: {r}", e.epsilon);
        assert!(uniform_bound_from_value(&c.field, &hat, 2.0, e.epsilon, e.value).unwrap().pass);
    }
}

#[test]
fn step_limit_matches_the_prediction() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let schedule = Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap();
    for functional in [Functional::Profile1d, Functional::Gagliardo] {
        let exp = Experiment::new(functional, &c.field, &hat, 2.0, &c.domain);
        let r = verify_limit(&exp, &schedule, 0.10).unwrap();
        assert_eq!(r.prediction.predicted, 2.0);
        assert!(r.pass && r.fit.fit.stable, "{functional:?}: {:?}", r.fit);
        assert!(r.uniform_bound.iter().all(|b| b.pass));
    }
}

#[test]
fn slope_scales_with_the_mass_power() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let schedule = Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap();
    for (mass, q) in [(2.0, 2.0), (0.5, 3.0)] {
        let eta = Mollifier::hat(1, 1.0, mass).unwrap();
        let exp = Experiment::new(Functional::Profile1d, &c.field, &eta, q, &c.domain);
        let r = verify_limit(&exp, &schedule, 0.10).unwrap();
        assert_eq!(r.prediction.predicted, 2.0 * f64::powf(mass, q));
        assert!(r.pass, "mass {mass}: {:?}", r.fit);
    }
}

#[test]
fn massless_kernel_has_zero_slope() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let odd = Mollifier::<f64>::odd_bump(1, 1.0).unwrap();
    assert!(odd.mass().abs() < 1e-14);
    let exp = Experiment::new(Functional::Profile1d, &c.field, &odd, 2.0, &c.domain);
    let r = verify_limit(&exp, &Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap(), 0.10).unwrap();
    assert_eq!(r.prediction.predicted, 0.0);
    assert!(r.fit.fit.slope.abs() <= 0.05, "{}", r.fit.fit.slope);
    assert!(r.pass);
}

#[test]
fn cubic_exponent_with_jump_two() {
    let c = catalog::<f64>("step1d_box", &json!({"height": 2.0})).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let exp = Experiment::new(Functional::Profile1d, &c.field, &hat, 3.0, &c.domain);
    let r = verify_limit(&exp, &Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap(), 0.10).unwrap();
    assert_eq!(r.prediction.predicted, 16.0);
    assert!(r.pass, "{:?}", r.fit);
    assert!(r.uniform_bound.iter().all(|b| b.pass));
}

#[test]
fn verdict_is_invariant_under_rescaling() {
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let schedule = Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap();
    let base = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let r0 = verify_limit(&Experiment::new(Functional::Profile1d, &base.field, &hat, 2.0, &base.domain), &schedule, 0.10).unwrap();
    for lambda in [2.0, -1.0] {
        let u = base.field.scaled(lambda);
        let r = verify_limit(&Experiment::new(Functional::Profile1d, &u, &hat, 2.0, &base.domain), &schedule, 0.10).unwrap();
        assert_eq!(r.pass, r0.pass);
        assert!((r.fit.relative_gap - r0.fit.relative_gap).abs() < 1e-9);
    }
}

#[test]
fn limit_does_not_depend_on_the_kernel_shape() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let schedule = Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap();
    let tol = 0.10;
    let slopes: Vec<f64> = [Mollifier::hat(1, 1.0, 1.0).unwrap(), Mollifier::bump(1, 1.0, 1.0).unwrap()]
        .iter()
        .map(|eta| {
            let r = verify_limit(&Experiment::new(Functional::Gagliardo, &c.field, eta, 2.0, &c.domain), &schedule, tol).unwrap();
            assert!(r.uniform_bound.iter().all(|b| b.pass));
            r.fit.fit.slope
        })
        .collect();
    assert!((slopes[0] - slopes[1]).abs() <= 2.0 * tol * 2.0, "{slopes:?}");
}

#[test]
fn halfplane_limit_in_two_dimensions() {
    let c = catalog::<f64>("halfplane_in_square", &Value::Null).unwrap();
    let eta = Mollifier::bump(2, 1.0, 1.0).unwrap();
    let exp = Experiment::new(Functional::Gagliardo, &c.field, &eta, 2.0, &c.domain);
    let r = verify_limit(&exp, &Schedule::between(0.1, 1e-3, 8).unwrap(), 0.15).unwrap();
    assert_eq!(r.prediction.predicted, 4.0);
    assert!(r.pass, "{:?}", r.fit);
    assert!(r.uniform_bound.iter().all(|b| b.pass));
}

#[test]
fn uniform_bound_at_small_epsilon() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let b = uniform_bound(&c.field, &hat, 2.0, 1e-3, &c.domain).unwrap();
    assert!(b.pass && b.lhs > 0.0, "{b:?}");
}

#[test]
fn halfspace_smoke_test_in_three_dimensions() {
    use bvfrac::fields::{Aabb, Domain};
    use bvfrac::mollify::ResolutionPolicy;
    use bvfrac::seminorm::ShiftConfig;
    let u = PiecewiseConstantField::box_patch(Aabb::new(vec![0.0, -2.0, -2.0], vec![2.0, 2.0, 2.0]).unwrap(), vec![1.0]).unwrap();
    let omega = Aabb::new(vec![-0.5; 3], vec![0.5; 3]).unwrap();
    let domain = Domain::new(omega, Aabb::new(vec![-1.5, -2.5, -2.5], vec![2.5; 3]).unwrap()).unwrap();
    let eta = Mollifier::bump(3, 1.0, 1.0).unwrap();
    let mut exp = Experiment::new(Functional::Gagliardo, &u, &eta, 2.0, &domain);
    // coarse budget: one sweep in seconds rather than hours
    exp.policy = ResolutionPolicy { layer_factor: 8, coarse: 1.0 / 16.0, ..Default::default() };
    exp.shift = ShiftConfig { radii_per_decade: 16, polar_3d: 4, azimuth_3d: 8, ..Default::default() };
    let r = verify_limit(&exp, &Schedule::between(0.1, 0.1 / 16.0, 5).unwrap(), 0.20).unwrap();
    assert!((r.prediction.predicted - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    assert!(r.pass, "{:?}", r.fit);
    assert!(r.uniform_bound.iter().all(|b| b.pass));
}
