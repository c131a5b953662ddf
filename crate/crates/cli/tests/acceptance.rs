//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use bvfrac::asymptotics::{verify_limit, Experiment, Functional, LimitReport, Schedule, UniformBound};
use bvfrac::constants::{constant_c, constant_c_monte_carlo, constant_d, constant_d_quadrature, profile_integral};
use bvfrac::fields::catalog::{catalog, CatalogField};
use bvfrac::fields::Aabb;
use bvfrac::kernel::Mollifier;
use bvfrac::mollify::{mollify, Grid, ResolutionPolicy, SampledField};
use bvfrac::perturbation::{double_limit_verify, DoubleLimit, Potential, MEAN_TOL};
use bvfrac::seminorm::{gagliardo_energy, localized_functional, profile_energy_for_field, ShiftConfig};
use bvfrac_cli::{execute, ExperimentConfig};
use serde_json::{json, Value};

const SLOPE_1D_TOL: f64 = 0.10;
const RUNTIME_1D: Duration = Duration::from_secs(60);
const KERNEL_SPREAD_TOL: f64 = 0.20;
const MASSLESS_FRACTION: f64 = 0.05;
const SLOPE_2D_TOL: f64 = 0.15;
const RUNTIME_2D: Duration = Duration::from_secs(600);
const LOCALIZED_1D_TOL: f64 = 1e-8;
const LOCALIZED_2D_TOL: f64 = 0.03;
const D_QUAD_TOL: f64 = 1e-6;
const MC_SAMPLES: usize = 10_000_000;
const MC_SIGMAS: f64 = 3.0;
const DOUBLE_LIMIT_TOL: f64 = 0.10;
const ORACLE_TOL: f64 = 0.01;
const HOMOGENEITY_TOL: f64 = 1e-10;
const TRANSLATION_TOL: f64 = 1e-10;
const ADDITIVITY_TOL: f64 = 1e-12;
const LAMBDA_TOL: f64 = 1e-10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn step(params: Value) -> CatalogField<f64> {
    catalog("step1d_box", &params).unwrap()
}

/// `10^{-1.5}` down to `10^{-4}`, 12 points.
fn schedule_1d() -> Schedule<f64> {
    Schedule::between(10f64.powf(-1.5), 1e-4, 12).unwrap()
}

fn profile_limit(c: &CatalogField<f64>, eta: &Mollifier<f64>, q: f64) -> LimitReport<f64> {
    let exp = Experiment::new(Functional::Profile1d, &c.field, eta, q, &c.domain);
    verify_limit(&exp, &schedule_1d(), SLOPE_1D_TOL).unwrap()
}

fn hat() -> Mollifier<f64> {
    Mollifier::hat(1, 1.0, 1.0).unwrap()
}

/// Sweeps shared by criteria 1 to 5 and 7.
struct Sweeps {
    c1: LimitReport<f64>,
    c1_time: Duration,
    c2: LimitReport<f64>,
    c3_gauss: LimitReport<f64>,
    c4: LimitReport<f64>,
    c5: LimitReport<f64>,
    c5_time: Duration,
}

fn sweeps() -> Sweeps {
    let s = step(Value::Null);
    let t = Instant::now();
    let c1 = profile_limit(&s, &hat(), 2.0);
    let c1_time = t.elapsed();
    let c2 = profile_limit(&step(json!({"height": 2.0})), &hat(), 3.0);
    let c3_gauss = profile_limit(&s, &Mollifier::gaussian(1, 1.0 / 6.0, 1.0).unwrap(), 2.0);
    let c4 = profile_limit(&s, &Mollifier::odd_bump(1, 1.0).unwrap(), 2.0);
    let h = catalog::<f64>("halfplane_in_square", &Value::Null).unwrap();
    let bump = Mollifier::bump(2, 1.0, 1.0).unwrap();
    let exp = Experiment::new(Functional::Gagliardo, &h.field, &bump, 2.0, &h.domain);
    let t = Instant::now();
    let c5 = verify_limit(&exp, &Schedule::between(0.1, 1e-3, 8).unwrap(), SLOPE_2D_TOL).unwrap();
    let c5_time = t.elapsed();
    Sweeps { c1, c1_time, c2, c3_gauss, c4, c5, c5_time }
}

fn slope(r: &LimitReport<f64>) -> f64 {
    r.fit.fit.slope
}

fn criterion_1(s: &Sweeps) -> Verdict {
    let a = slope(&s.c1);
    let ok = rel(a, 2.0) <= SLOPE_1D_TOL && s.c1_time < RUNTIME_1D;
    verdict(ok, format!("slope {a:.5} vs 2, {:.2} s", s.c1_time.as_secs_f64()))
}

fn criterion_2(s: &Sweeps) -> Verdict {
    let a = slope(&s.c2);
    let ok = s.c2.prediction.predicted == 16.0 && rel(a, 16.0) <= SLOPE_1D_TOL;
    verdict(ok, format!("slope {a:.5} vs {}", s.c2.prediction.predicted))
}

fn criterion_3(s: &Sweeps) -> Verdict {
    let (a, b) = (slope(&s.c1), slope(&s.c3_gauss));
    let mean = 0.5 * (a + b);
    verdict((a - b).abs() <= KERNEL_SPREAD_TOL * mean, format!("hat {a:.5}, gaussian {b:.5}, spread {:.4} of mean", (a - b).abs() / mean))
}

fn criterion_4(s: &Sweeps) -> Verdict {
    let (a, a1) = (slope(&s.c4), slope(&s.c1));
    verdict(a.abs() <= MASSLESS_FRACTION * a1, format!("|A| = {:.5}, {:.4} of {a1:.5}", a.abs(), a.abs() / a1))
}

fn criterion_5(s: &Sweeps) -> Verdict {
    let a = slope(&s.c5);
    let ok = rel(a, 4.0) <= SLOPE_2D_TOL && s.c5_time < RUNTIME_2D;
    verdict(ok, format!("slope {a:.5} vs 4, {:.2} s", s.c5_time.as_secs_f64()))
}

fn criterion_6() -> Verdict {
    let s = step(Value::Null);
    let mut worst: f64 = 0.0;
    for q in [1.5, 2.0, 3.0] {
        for eps in [0.4, 0.1, 0.01] {
            let v = localized_functional(&s.field, &s.domain.omega, q, eps).unwrap();
            worst = worst.max((v - 2.0).abs());
        }
    }
    let h = catalog::<f64>("halfplane_in_square", &Value::Null).unwrap();
    let c2 = constant_c::<f64>(2).unwrap().value;
    let v = localized_functional(&h.field, &h.domain.omega, 2.0, 0.01).unwrap();
    let ok = worst <= LOCALIZED_1D_TOL && rel(v, c2) <= LOCALIZED_2D_TOL;
    verdict(ok, format!("1D max error {worst:.2e}; 2D {v:.6} vs {c2}"))
}

fn criterion_7(s: &Sweeps) -> Verdict {
    let all: Vec<&UniformBound<f64>> = [&s.c1, &s.c2, &s.c3_gauss, &s.c4, &s.c5].iter().flat_map(|r| r.uniform_bound.iter()).collect();
    let expected = [&s.c1, &s.c2, &s.c3_gauss, &s.c4, &s.c5].iter().map(|r| r.series.entries.len()).sum::<usize>();
    let violations = all.iter().filter(|b| !b.pass).count();
    let worst = all.iter().map(|b| b.lhs / b.rhs).fold(0.0, f64::max);
    verdict(all.len() == expected && violations == 0, format!("{} checks, {violations} violations, max lhs/rhs {worst:.4}", all.len()))
}

fn criterion_8() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let d = constant_d::<f64>(n).unwrap().value;
        worst = worst.max(rel(constant_d_quadrature::<f64>(n).unwrap().value, d));
    }
    let mut z = Vec::new();
    for (n, exact, seed) in [(2, 2.0, 11), (3, 2.0 * PI / 3.0, 12)] {
        let closed = constant_c::<f64>(n).unwrap().value;
        let mc = constant_c_monte_carlo::<f64>(n, MC_SAMPLES, seed).unwrap();
        z.push(((closed - exact).abs(), (mc.value - exact).abs() / mc.std_error));
    }
    let ok = worst <= D_QUAD_TOL && z.iter().all(|&(c, s)| c < 1e-12 && s <= MC_SIGMAS);
    verdict(ok, format!("D max rel {worst:.2e}; C_2 {:.2} sigma, C_3 {:.2} sigma", z[0].1, z[1].1))
}

fn criterion_9() -> Verdict {
    let c = catalog::<f64>("vector_step", &json!({"a": [-1.0], "b": [1.0]})).unwrap();
    let eta = Mollifier::bump(1, 1.0, 1.0).unwrap();
    let r = double_limit_verify(&DoubleLimit {
        field: &c.field,
        eta: &eta,
        potential: &Potential::DoubleWell,
        q: 2.0,
        domain: &c.domain,
        rhos: vec![0.2, 0.1, 0.05],
        schedule: Schedule::between(0.1, 1e-3, 6).unwrap(),
        tolerance: DOUBLE_LIMIT_TOL,
        policy: ResolutionPolicy::default(),
        shift: ShiftConfig::default(),
    })
    .unwrap();
    let mean_ok = r.rows.iter().all(|row| row.mean_defect <= MEAN_TOL);
    let ratios_ok = r.potential_ratios.iter().all(|&x| (1.5..=2.5).contains(&x));
    let ok = r.target == 8.0 && rel(r.extrapolated, 8.0) <= DOUBLE_LIMIT_TOL && ratios_ok && mean_ok && r.pass;
    verdict(ok, format!("total {:.5} vs 8, ratios {:?}, max mean defect {:.1e}", r.extrapolated, r.potential_ratios, r.max_mean_defect))
}

fn criterion_10() -> Verdict {
    let s = step(Value::Null);
    let eta = hat();
    let mut gaps = Vec::new();
    for eps in [1e-2, 1e-3] {
        let f = mollify(&s.field, &eta, eps, &s.domain.omega, &ResolutionPolicy::default()).unwrap();
        let shift = gagliardo_energy(&f, &s.domain.omega, 2.0).unwrap().value;
        let oracle = profile_energy_for_field(&s.field, &eta, eps, &s.domain.omega, 2.0).unwrap().value;
        gaps.push(rel(shift, oracle));
    }
    verdict(gaps.iter().all(|&g| g <= ORACLE_TOL), format!("relative gaps {:.2e}, {:.2e}", gaps[0], gaps[1]))
}

fn criterion_11() -> Verdict {
    // homogeneity and translation on a smooth sampled field
    let omega = Aabb::new(vec![0.0], vec![1.0]).unwrap();
    let grid = Grid::<f64>::uniform(&omega, 64).unwrap();
    let f = SampledField::from_fn(grid, 1, |x| vec![(6.0 * x[0]).sin() + x[0] * x[0]]).unwrap();
    let mut hom: f64 = 0.0;
    let mut tr: f64 = 0.0;
    for q in [1.5, 2.0, 3.0] {
        let base = gagliardo_energy(&f, &omega, q).unwrap().value;
        for lambda in [-2.5, 0.5, 3.0] {
            let v = gagliardo_energy(&f.scaled(lambda), &omega, q).unwrap().value;
            hom = hom.max(rel(v, lambda.abs().powf(q) * base));
        }
        for k in [-3.0, 5.0] {
            let t = [k / 8.0];
            let v = gagliardo_energy(&f.translated(&t), &omega.translated(&t), q).unwrap().value;
            tr = tr.max(rel(v, base));
        }
    }
    // jump-energy additivity over a partition of the square
    let d = catalog::<f64>("disc_in_square", &json!({"r": 0.3})).unwrap();
    let mut add: f64 = 0.0;
    for q in [1.5, 2.0, 3.0] {
        let whole = d.field.jump_energy(&d.domain.omega, q).unwrap();
        let parts: f64 = [([0.0, 0.0], [0.4, 0.7]), ([0.4, 0.0], [1.0, 0.7]), ([0.0, 0.7], [0.4, 1.0]), ([0.4, 0.7], [1.0, 1.0])]
            .iter()
            .map(|(lo, hi)| d.field.jump_energy(&Aabb::new(lo.to_vec(), hi.to_vec()).unwrap(), q).unwrap())
            .sum();
        add = add.max((parts - whole).abs() / whole);
    }
    // profile integral additivity
    let mut lam: f64 = 0.0;
    let kernels = [(hat(), vec![1.0]), (Mollifier::bump(2, 1.0, 1.0).unwrap(), vec![0.6, 0.8])];
    for (eta, nu) in &kernels {
        for (a, b, c) in [(-1.2, -0.1, 0.7), (-0.5, 0.0, 0.5), (0.1, 0.3, 1.4)] {
            let ab = profile_integral(eta, nu, a, b).unwrap();
            let bc = profile_integral(eta, nu, b, c).unwrap();
            let ac = profile_integral(eta, nu, a, c).unwrap();
            lam = lam.max((ab + bc - ac).abs());
        }
    }
    // identical config, seed and thread budget give identical reports
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/step1d.json");
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    cfg.threads = Some(2);
    let x = execute(&cfg).unwrap().report.deterministic_json();
    let y = execute(&cfg).unwrap().report.deterministic_json();
    let det = x == y;
    let ok = hom <= HOMOGENEITY_TOL && tr <= TRANSLATION_TOL && add <= ADDITIVITY_TOL && lam <= LAMBDA_TOL && det;
    verdict(ok, format!("homogeneity {hom:.1e}, translation {tr:.1e}, additivity {add:.1e}, profile {lam:.1e}, identical reports {det}"))
}

fn main() {
    let s = sweeps();
    let results = [
        criterion_1(&s),
        criterion_2(&s),
        criterion_3(&s),
        criterion_4(&s),
        criterion_5(&s),
        criterion_6(),
        criterion_7(&s),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    let mut failed = 0;
    for (k, v) in results.iter().enumerate() {
        println!("criterion {:>2}: {} ({})", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
