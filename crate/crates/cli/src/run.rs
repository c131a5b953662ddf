//! Executes one experiment and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bvfrac::asymptotics::{uniform_bound_from_value, verify_limit, Experiment, Functional};
use bvfrac::constants::{constant_c, constant_c_monte_carlo, constant_d, constant_d_monte_carlo, constant_d_quadrature};
use bvfrac::mollify::{gradient_bound_check, mollify, mollify_point};
use bvfrac::perturbation::{double_limit_verify, DoubleLimit};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, Outputs};
use crate::csv::Table;
use crate::error::CliError;
use crate::plot::{Plot, Series};
use crate::report::{Metadata, Report, RunInfo, Status};

/// Relative agreement of the closed-form and quadrature `D_N`.
pub const D_QUADRATURE_TOL: f64 = 1e-6;
/// Monte Carlo agreement, in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
/// Default relative tolerance of the localized functional against `C_N J_q`.
pub const LOCALIZED_TOL: f64 = 0.03;

pub const SERIES_HEADER: [&str; 4] = ["epsilon", "value", "value_over_abslog", "error_estimate"];
pub const PERTURB_HEADER: [&str; 7] = ["rho", "epsilon", "seminorm", "seminorm_error", "potential", "correction", "mean_defect"];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub table: Option<Table>,
    pub plot: Option<Plot>,
}

struct Body {
    pass: bool,
    results: Value,
    table: Option<Table>,
    plot: Option<Plot>,
}

/// Validates and runs `cfg` on a pool of `cfg.threads` workers (all cores if unset).
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let (body, threads) = match cfg.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::InvalidConfig { field: "threads".into(), message: e.to_string() })?;
            (pool.install(|| dispatch(cfg))?, k)
        }
        None => (dispatch(cfg)?, rayon::current_num_threads()),
    };
    let report = Report {
        experiment: cfg.experiment.name().into(),
        status: Status::from_bool(body.pass),
        config: cfg.clone(),
        run: RunInfo { seed: cfg.seed, threads },
        results: body.results,
        metadata: Metadata::now(start.elapsed().as_secs_f64()),
    };
    Ok(Outcome { report, table: body.table, plot: body.plot })
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Body, CliError> {
    match cfg.experiment {
        ExperimentKind::Constants => run_constants(cfg),
        ExperimentKind::Mollify => run_mollify(cfg),
        ExperimentKind::Seminorm => run_seminorm(cfg),
        ExperimentKind::Verify => run_verify(cfg),
        ExperimentKind::Perturb => run_perturb(cfg),
    }
}

fn within_sigmas(value: f64, exact: f64, std_error: f64) -> (f64, bool) {
    let diff = (value - exact).abs();
    if std_error > 0.0 {
        let z = diff / std_error;
        (z, z <= MC_SIGMAS)
    } else {
        (0.0, diff <= 1e-12 * exact.abs().max(1.0))
    }
}

fn run_constants(cfg: &ExperimentConfig) -> Result<Body, CliError> {
    let c = cfg.constants.clone().unwrap_or_default();
    let mut pass = true;
    let mut rows = Vec::new();
    for &n in &c.dims {
        let d = constant_d::<f64>(n)?;
        let dq = constant_d_quadrature::<f64>(n)?;
        let dmc = constant_d_monte_carlo::<f64>(n, c.mc_samples, cfg.seed)?;
        let cc = constant_c::<f64>(n)?;
        let cmc = constant_c_monte_carlo::<f64>(n, c.mc_samples, cfg.seed.wrapping_add(1))?;
        let rel = (dq.value - d.value).abs() / d.value;
        let (dz, dok) = within_sigmas(dmc.value, d.value, dmc.std_error);
        let (cz, cok) = within_sigmas(cmc.value, cc.value, cmc.std_error);
        let ok = rel <= D_QUADRATURE_TOL && dok && cok;
        pass &= ok;
        rows.push(json!({
            "dim": n,
            "d": {
                "closed_form": d.value,
                "quadrature": dq.value,
                "quadrature_relative_error": rel,
                "monte_carlo": dmc.value,
                "monte_carlo_std_error": dmc.std_error,
                "monte_carlo_sigmas": dz,
            },
            "c": {
                "closed_form": cc.value,
                "monte_carlo": cmc.value,
                "monte_carlo_std_error": cmc.std_error,
                "monte_carlo_sigmas": cz,
            },
            "pass": ok,
        }));
    }
    let results = json!({
        "mc_samples": c.mc_samples,
        "quadrature_tolerance": D_QUADRATURE_TOL,
        "mc_sigmas": MC_SIGMAS,
        "constants": rows,
    });
    Ok(Body { pass, results, table: None, plot: None })
}

fn run_mollify(cfg: &ExperimentConfig) -> Result<Body, CliError> {
    let (c, eta) = cfg.field_and_kernel()?;
    let eps = cfg.epsilon.expect("validated");
    let points = cfg
        .points
        .iter()
        .map(|x| Ok(json!({ "x": x, "value": mollify_point(&c.field, &eta, eps, x)? })))
        .collect::<Result<Vec<_>, bvfrac::Error>>()?;
    let f = mollify(&c.field, &eta, eps, &c.domain.omega, &cfg.policy())?;
    let g = gradient_bound_check(&f)?;
    let (dim, codim) = (f.dim(), f.codim);
    let header = (0..dim).map(|i| format!("x{i}")).chain((0..codim).map(|j| format!("u{j}")));
    let mut table = Table::new(header);
    for k in 0..f.grid.len() {
        let mut row = f.grid.node(k);
        row.extend_from_slice(f.value(k));
        table.push(row);
    }
    let results = json!({
        "field": c.name,
        "epsilon": eps,
        "mass": eta.mass(),
        "points": points,
        "grid": {
            "nodes": f.grid.len(),
            "shape": f.grid.shape(),
            "layer_spacing": f.layer_spacing,
            "layer_limit": f.layer_limit,
        },
        "gradient_bound": g,
        "linf_bound": f.linf_bound,
    });
    Ok(Body { pass: g.pass, results, table: Some(table), plot: None })
}

fn formula_inputs(c: &bvfrac::fields::catalog::CatalogField<f64>, mass: f64, q: f64) -> Result<Value, CliError> {
    let d_n = constant_d::<f64>(c.field.dim())?.value;
    let jump_energy = c.field.jump_energy(&c.domain.omega, q)?;
    Ok(json!({
        "mass": mass,
        "d_n": d_n,
        "jump_energy": jump_energy,
        "closed_form_jump_energy": c.closed_form_jump_energy(q),
        "q": q,
        "predicted_slope": 2.0 * mass.abs().powf(q) * d_n * jump_energy,
    }))
}

fn run_seminorm(cfg: &ExperimentConfig) -> Result<Body, CliError> {
    let (c, eta) = cfg.field_and_kernel()?;
    let eps = cfg.epsilon.expect("validated");
    let q = cfg.q();
    let functional = cfg.functional.unwrap_or(Functional::Gagliardo);
    let mut exp = Experiment::new(functional, &c.field, &eta, q, &c.domain);
    exp.policy = cfg.policy();
    exp.shift = cfg.shift_config();
    let (value, error_estimate) = exp.evaluate(eps)?;
    let abslog = eps.ln().abs();
    let method = match functional {
        Functional::Gagliardo | Functional::Relative => "shift_decomposition",
        Functional::Profile1d => "scaled_profile_1d",
        Functional::Localized => "localized_closed_form",
    };
    let mut results = json!({
        "field": c.name,
        "functional": functional,
        "method": method,
        "epsilon": eps,
        "value": value,
        "error_estimate": error_estimate,
        "value_over_abslog": value / abslog,
        "formula": formula_inputs(&c, eta.mass(), q)?,
    });
    let pass = match functional {
        Functional::Gagliardo | Functional::Profile1d => {
            let b = uniform_bound_from_value(&c.field, &eta, q, eps, value)?;
            results["uniform_bound"] = serde_json::to_value(b).expect("serializes");
            b.pass
        }
        Functional::Localized => {
            let c_n = constant_c::<f64>(c.field.dim())?.value;
            let reference = c_n * c.field.jump_energy(&c.domain.omega, q)?;
            let tol = cfg.tolerance.unwrap_or(LOCALIZED_TOL);
            let rel = if reference > 0.0 { (value - reference).abs() / reference } else { value.abs() };
            results["localized"] = json!({ "c_n": c_n, "reference": reference, "relative_error": rel, "tolerance": tol });
            rel <= tol
        }
        // the uniform bound concerns Ω × Ω only
        Functional::Relative => value.is_finite(),
    };
    let mut table = Table::new(SERIES_HEADER);
    table.push(vec![eps, value, value / abslog, error_estimate]);
    Ok(Body { pass, results, table: Some(table), plot: None })
}

fn run_verify(cfg: &ExperimentConfig) -> Result<Body, CliError> {
    let (c, eta) = cfg.field_and_kernel()?;
    let q = cfg.q();
    let functional = cfg.functional.unwrap_or(Functional::Gagliardo);
    let mut exp = Experiment::new(functional, &c.field, &eta, q, &c.domain);
    exp.policy = cfg.policy();
    exp.shift = cfg.shift_config();
    let schedule = cfg.schedule()?;
    let r = verify_limit(&exp, &schedule, cfg.tolerance.expect("validated"))?;
    let bound_ok = r.uniform_bound.iter().all(|b| b.pass);
    let mut table = Table::new(SERIES_HEADER);
    let mut points = Vec::new();
    for e in &r.series.entries {
        let l = e.epsilon.ln().abs();
        table.push(vec![e.epsilon, e.value, e.value / l, e.error_estimate]);
        points.push((l, e.value / l));
    }
    let plot = Plot {
        title: format!("{} ({:?}), q = {q}: fitted slope {:.4}", c.name, functional, r.fit.fit.slope),
        series: vec![Series { label: "value / |ln ε|".into(), points }],
        asymptote: Some(r.prediction.predicted),
    };
    let results = json!({
        "field": c.name,
        "formula": formula_inputs(&c, eta.mass(), q)?,
        "limit": r,
        "uniform_bound_pass": bound_ok,
    });
    Ok(Body { pass: r.pass && bound_ok, results, table: Some(table), plot: Some(plot) })
}

fn run_perturb(cfg: &ExperimentConfig) -> Result<Body, CliError> {
    let (c, eta) = cfg.field_and_kernel()?;
    let p = cfg.perturb.as_ref().expect("validated");
    let dl = DoubleLimit {
        field: &c.field,
        eta: &eta,
        potential: &p.potential,
        q: cfg.q(),
        domain: &c.domain,
        rhos: p.rhos.clone(),
        schedule: cfg.schedule()?,
        tolerance: cfg.tolerance.expect("validated"),
        policy: cfg.policy(),
        shift: cfg.shift_config(),
    };
    let r = double_limit_verify(&dl)?;
    let mut table = Table::new(PERTURB_HEADER);
    for row in &r.rows {
        table.push(vec![row.rho, row.epsilon, row.seminorm, row.seminorm_error, row.potential, row.correction, row.mean_defect]);
    }
    let series = p
        .rhos
        .iter()
        .map(|&rho| Series {
            label: format!("ρ = {rho}"),
            points: r
                .rows
                .iter()
                .filter(|row| row.rho == rho)
                .map(|row| {
                    let l = row.epsilon.ln().abs();
                    (l, row.seminorm / l)
                })
                .collect(),
        })
        .collect();
    let plot = Plot { title: format!("{}: double limit, target {:.4}", c.name, r.target), series, asymptote: Some(r.target) };
    let results = json!({
        "field": c.name,
        "formula": formula_inputs(&c, eta.mass(), cfg.q())?,
        "double_limit": r,
    });
    Ok(Body { pass: r.pass, results, table: Some(table), plot: Some(plot) })
}

/// Artifact paths of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Targets {
    pub report: PathBuf,
    pub csv: PathBuf,
    pub plot: PathBuf,
}

impl Targets {
    /// The configured file names inside `dir`.
    pub fn in_dir(dir: &Path, names: &Outputs) -> Self {
        Self { report: dir.join(&names.report), csv: dir.join(&names.csv), plot: dir.join(&names.plot) }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |e| CliError::Io { path: path.display().to_string(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

/// Writes the report, and the table and plot when present. The plot is
/// written when `plot` is set or the config asks for it.
pub fn write_outputs(outcome: &Outcome, to: &Targets, plot: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    write_file(&to.report, &outcome.report.to_json())?;
    written.push(to.report.clone());
    if let Some(t) = &outcome.table {
        write_file(&to.csv, &t.render())?;
        written.push(to.csv.clone());
    }
    if let (Some(p), true) = (&outcome.plot, plot || outcome.report.config.outputs.plot_enabled) {
        write_file(&to.plot, &p.render())?;
        written.push(to.plot.clone());
    }
    Ok(written)
}
