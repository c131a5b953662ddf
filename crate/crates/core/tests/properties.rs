use bvfrac::asymptotics::{fit_log_slope, sweep, Experiment, Functional, Schedule, SweepEntry, SweepSeries};
use bvfrac::constants::{constant_d_monte_carlo, profile_integral};
use bvfrac::fields::catalog::catalog;
use bvfrac::fields::{Aabb, PiecewiseConstantField};
use bvfrac::kernel::Mollifier;
use bvfrac::mollify::{mollify_point, Grid, SampledField};
use bvfrac::perturbation::Potential;
use bvfrac::seminorm::{gagliardo_energy, localized_functional};
use proptest::prelude::*;
use serde_json::{json, Value};

fn disc(cx: f64, cy: f64, r: f64) -> PiecewiseConstantField<f64> {
    catalog::<f64>("disc_in_square", &json!({"r": r, "center": [cx, cy]})).unwrap().field
}

fn split(bx: &Aabb<f64>, axis: usize, t: f64) -> (Aabb<f64>, Aabb<f64>) {
    let mut hi = bx.hi.clone();
    let mut lo = bx.lo.clone();
    hi[axis] = t;
    lo[axis] = t;
    (Aabb::new(bx.lo.clone(), hi).unwrap(), Aabb::new(lo, bx.hi.clone()).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jump_energy_is_additive_over_partitions(
        cx in 0.35f64..0.65, cy in 0.35f64..0.65, r in 0.05f64..0.3,
        s in 0.05f64..0.95, t in 0.05f64..0.95, q in 1.0f64..4.0,
    ) {
        let u = disc(cx, cy, r);
        let omega = Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let whole = u.jump_energy(&omega, q).unwrap();
        let (left, right) = split(&omega, 0, s);
        let (a, b) = split(&left, 1, t);
        let (c, d) = split(&right, 1, t);
        let parts: f64 = [a, b, c, d].iter().map(|bx| u.jump_energy(bx, q).unwrap()).sum();
        prop_assert!((parts - whole).abs() <= 1e-12 * whole.max(1.0));
        for bx in [&left, &right] {
            prop_assert!(u.jump_energy(bx, q).unwrap() >= 0.0);
        }
    }

    #[test]
    fn jump_energy_scales_and_is_monotone(lambda in -5.0f64..5.0, q in 1.0f64..4.0, pad in 0.0f64..0.5) {
        let c = catalog::<f64>("two_jumps_1d", &Value::Null).unwrap();
        let omega = &c.domain.omega;
        let base = c.field.jump_energy(omega, q).unwrap();
        let scaled = c.field.scaled(lambda).jump_energy(omega, q).unwrap();
        prop_assert!((scaled - lambda.abs().powf(q) * base).abs() <= 1e-12 * base.max(1.0));
        let small = Aabb::new(vec![-0.3 + pad * 0.4], vec![0.5]).unwrap();
        prop_assert!(c.field.jump_energy(&small, q).unwrap() <= base);
        prop_assert_eq!(PiecewiseConstantField::<f64>::zero(1, 2).unwrap().jump_energy(omega, q).unwrap(), 0.0);
    }

    #[test]
    fn profile_integral_is_additive(a in -1.5f64..1.5, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, th in 0.0f64..std::f64::consts::TAU) {
        let (b, c) = (a + d1, a + d1 + d2);
        let kernels = [
            (Mollifier::<f64>::hat(1, 1.0, 1.0).unwrap(), vec![1.0]),
            (Mollifier::gaussian(1, 0.4, 1.0).unwrap(), vec![-1.0]),
            (Mollifier::bump(2, 1.0, 1.0).unwrap(), vec![th.cos(), th.sin()]),
            (Mollifier::odd_bump(1, 1.0).unwrap(), vec![1.0]),
        ];
        for (eta, nu) in &kernels {
            let ab = profile_integral(eta, nu, a, b).unwrap();
            let bc = profile_integral(eta, nu, b, c).unwrap();
            let ac = profile_integral(eta, nu, a, c).unwrap();
            prop_assert!((ab + bc - ac).abs() <= 1e-10);
        }
    }

    #[test]
    fn mollified_constant_region_is_value_times_mass(
        x in -0.3f64..0.3, y in -0.3f64..0.3, c in -3.0f64..3.0, mass in 0.1f64..2.0, eps in 0.01f64..0.3,
    ) {
        let u = PiecewiseConstantField::box_patch(Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(), vec![c]).unwrap();
        let eta = Mollifier::bump(2, 1.0, mass).unwrap();
        let v = mollify_point(&u, &eta, eps, &[x, y]).unwrap()[0];
        prop_assert!((v - c * mass).abs() <= 1e-13 * (1.0 + c.abs()));
    }

    #[test]
    fn affine_series_is_fitted_exactly(a in 0.0f64..10.0, b in 0.0f64..10.0, n in 4usize..20) {
        let schedule = Schedule::<f64>::between(0.3, 1e-5, n).unwrap();
        let entries = schedule
            .epsilons()
            .into_iter()
            .map(|e| SweepEntry { epsilon: e, value: a * e.ln().abs() + b, error_estimate: 0.0 })
            .collect();
        let fit = fit_log_slope(&SweepSeries { functional: Functional::Gagliardo, schedule, entries }).unwrap();
        prop_assert!((fit.slope - a).abs() < 1e-10 && (fit.intercept - b).abs() < 1e-10);
        prop_assert!(fit.rms_residual < 1e-12);
    }

    #[test]
    fn potentials_are_nonnegative_and_lipschitz(v0 in -2.0f64..2.0, v1 in -2.0f64..2.0) {
        let pots = [
            Potential::DoubleWell,
            Potential::Wells { zeros: vec![vec![1.0, 0.0], vec![-1.0, 0.5]] },
            Potential::Tabulated { r_max: 2.0, values: vec![1.0, 0.0, 0.25, 2.0] },
        ];
        let v = [v0, v1];
        let d = (v0 * v0 + v1 * v1).sqrt();
        for w in &pots {
            prop_assert!(w.eval(&v) >= 0.0);
            let g = w.grad(&v);
            prop_assert!((g[0] * g[0] + g[1] * g[1]).sqrt() <= w.lipschitz_on_ball(d) * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn seminorm_is_homogeneous_and_translation_invariant(
        lambda in -4.0f64..4.0, q in 1.2f64..3.5, k in -8i32..8,
    ) {
        let grid = Grid::<f64>::uniform(&Aabb::new(vec![0.0], vec![1.0]).unwrap(), 64).unwrap();
        let f = SampledField::from_fn(grid, 1, |x| vec![(6.0 * x[0]).sin() + x[0] * x[0]]).unwrap();
        let omega = Aabb::new(vec![0.0], vec![1.0]).unwrap();
        let base = gagliardo_energy(&f, &omega, q).unwrap().value;
        let scaled = gagliardo_energy(&f.scaled(lambda), &omega, q).unwrap().value;
        prop_assert!(rel(scaled, lambda.abs().powf(q) * base) < 1e-10 || lambda == 0.0);
        // dyadic shifts keep the node coordinates exact
        let v = [k as f64 / 8.0];
        let moved = gagliardo_energy(&f.translated(&v), &omega.translated(&v), q).unwrap().value;
        prop_assert!(rel(moved, base) < 1e-10);
    }

    #[test]
    fn localized_functional_is_translation_invariant(sx in -1.0f64..1.0, sy in -1.0f64..1.0, eps in 0.01f64..0.2) {
        let c = catalog::<f64>("halfplane_in_square", &Value::Null).unwrap();
        let v = [sx, sy];
        let a = localized_functional(&c.field, &c.domain.omega, 2.0, eps).unwrap();
        let b = localized_functional(&c.field.translated(&v), &c.domain.omega.translated(&v), 2.0, eps).unwrap();
        prop_assert!(rel(a, b) < 1e-10);
    }
}

#[test]
fn sweeps_and_sampling_are_deterministic() {
    let a = constant_d_monte_carlo::<f64>(3, 300_000, 17).unwrap();
    let b = constant_d_monte_carlo::<f64>(3, 300_000, 17).unwrap();
    assert_eq!(a, b);
    let c = constant_d_monte_carlo::<f64>(3, 300_000, 18).unwrap();
    assert_ne!(a.value, c.value);

    let s = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    let exp = Experiment::new(Functional::Gagliardo, &s.field, &hat, 2.0, &s.domain);
    let schedule = Schedule::between(0.1, 1e-3, 5).unwrap();
    let x = sweep(&exp, &schedule).unwrap();
    let y = sweep(&exp, &schedule).unwrap();
    assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
}
