use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bvfrac::asymptotics::Functional;
use bvfrac::fields::Domain;
use bvfrac::kernel::KernelSpec;
use bvfrac_cli::config::FieldConfig;
use bvfrac_cli::{execute, write_outputs, CliError, ExperimentConfig, ExperimentKind, Outcome, Targets};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "bvfrac", version, about = "Fractional energies of mollified BV fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// D_N and C_N by closed form, quadrature and Monte Carlo.
    Constants(Common),
    /// Mollified field on the layer grid and the gradient bound at one scale.
    Mollify(Common),
    /// One energy evaluation.
    Seminorm(Common),
    /// Sweep, log-slope fit and comparison with the predicted limit.
    Verify(Common),
    /// Recovery sequences and the double limit.
    Perturb(Common),
    /// Every *.json in a directory, each into its own subdirectory of --out.
    All(Common),
}

/// Flags given next to `--config` override the file.
#[derive(Args)]
struct Common {
    /// Config file (a directory for `all`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, or the report (`.json`) or table (`.csv`) path.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Table path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the SVG plot.
    #[arg(long)]
    plot: bool,
    /// Catalog entry.
    #[arg(long)]
    field: Option<String>,
    /// Catalog parameters as a JSON object.
    #[arg(long)]
    params: Option<String>,
    /// Kernel kind, or a full kernel spec as JSON.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// `{"omega": {"lo": .., "hi": ..}, "ambient": {..}}`.
    #[arg(long)]
    domain: Option<String>,
    /// gagliardo, relative, profile1d or localized.
    #[arg(long)]
    functional: Option<String>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Dimensions for `constants`, comma separated.
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
}

fn json_arg<T: serde::de::DeserializeOwned>(flag: &str, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::InvalidConfig { field: format!("--{flag}"), message: e.to_string() })
}

fn apply_flags(cfg: &mut ExperimentConfig, c: &Common) -> Result<(), CliError> {
    if let Some(name) = &c.field {
        let params = c.params.as_deref().map(|p| json_arg::<Value>("params", p)).transpose()?.unwrap_or(Value::Null);
        cfg.field = Some(FieldConfig { name: name.clone(), params });
    } else if let (Some(p), Some(f)) = (&c.params, cfg.field.as_mut()) {
        f.params = json_arg("params", p)?;
    }
    if let Some(k) = &c.kernel {
        let spec: KernelSpec = if k.trim_start().starts_with('{') {
            json_arg("kernel", k)?
        } else {
            json_arg("kernel", &format!("{{\"kind\": {}}}", Value::String(k.clone())))?
        };
        cfg.kernel = Some(spec);
    }
    if let Some(d) = &c.domain {
        cfg.domain = Some(json_arg::<Domain<f64>>("domain", d)?);
    }
    if let Some(f) = &c.functional {
        cfg.functional = Some(json_arg::<Functional>("functional", &Value::String(f.clone()).to_string())?);
    }
    if c.eps.is_some() {
        cfg.epsilon = c.eps;
    }
    if c.q.is_some() {
        cfg.q = c.q;
    }
    if c.tolerance.is_some() {
        cfg.tolerance = c.tolerance;
    }
    if !c.dim.is_empty() || c.mc_samples.is_some() {
        let mut k = cfg.constants.clone().unwrap_or_default();
        if !c.dim.is_empty() {
            k.dims = c.dim.clone();
        }
        if let Some(m) = c.mc_samples {
            k.mc_samples = m;
        }
        cfg.constants = Some(k);
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.threads {
        cfg.threads = Some(t);
    }
    Ok(())
}

fn targets(cfg: &ExperimentConfig, c: &Common, out: &Path) -> Targets {
    let ext = out.extension().and_then(|e| e.to_str());
    let dir = match ext {
        Some("json") | Some("csv") => out.parent().unwrap_or(Path::new("")),
        _ => out,
    };
    let mut t = Targets::in_dir(dir, &cfg.outputs);
    match ext {
        Some("json") => t.report = out.to_path_buf(),
        Some("csv") => t.csv = out.to_path_buf(),
        _ => {}
    }
    if let Some(p) = &c.csv {
        t.csv = p.clone();
    }
    t
}

fn print_summary(o: &Outcome) {
    let r = &o.report;
    match r.experiment.as_str() {
        "constants" => {
            println!("{:<4} {:>2} {:>22} {:>22} {:>12}", "kind", "N", "closed_form", "monte_carlo", "std_error");
            for row in r.results["constants"].as_array().into_iter().flatten() {
                for kind in ["d", "c"] {
                    let k = &row[kind];
                    println!(
                        "{:<4} {:>2} {:>22.15} {:>22.15} {:>12.3e}",
                        kind.to_uppercase(),
                        row["dim"],
                        k["closed_form"].as_f64().unwrap_or(f64::NAN),
                        k["monte_carlo"].as_f64().unwrap_or(f64::NAN),
                        k["monte_carlo_std_error"].as_f64().unwrap_or(f64::NAN),
                    );
                }
            }
        }
        "seminorm" => {
            let v = serde_json::json!({
                "value": r.results["value"],
                "error_estimate": r.results["error_estimate"],
                "method": r.results["method"],
            });
            println!("{v}");
        }
        _ => {}
    }
}

fn run_one(kind: Option<ExperimentKind>, config: Option<&Path>, c: &Common, out: &Path) -> Result<i32, CliError> {
    let mut cfg = match (config, kind) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(k)) => ExperimentConfig::bare(k),
        (None, None) => unreachable!("`all` always passes a file"),
    };
    if let Some(k) = kind {
        if cfg.experiment != k {
            return Err(CliError::InvalidConfig {
                field: "experiment".into(),
                message: format!("config describes `{}`, not `{}`", cfg.experiment.name(), k.name()),
            });
        }
    }
    apply_flags(&mut cfg, c)?;
    let outcome = execute(&cfg)?;
    let written = write_outputs(&outcome, &targets(&cfg, c, out), c.plot)?;
    print_summary(&outcome);
    let status = outcome.report.status;
    println!("{}: {} ({})", cfg.experiment.name(), status, written[0].display());
    Ok(status.exit_code())
}

fn run_all(c: &Common) -> Result<i32, CliError> {
    let dir = c.config.clone().unwrap_or_else(|| PathBuf::from("configs"));
    let io = |e| CliError::Io { path: dir.display().to_string(), source: e };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut code = 0;
    for f in files {
        let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let r = run_one(None, Some(&f), c, &c.out.join(&stem)).unwrap_or_else(|e| {
            eprintln!("{stem}: error: {e}");
            e.exit_code()
        });
        code = code.max(r);
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let single = |k: ExperimentKind, c: &Common| run_one(Some(k), c.config.as_deref(), c, &c.out);
    let result = match &cli.command {
        Command::All(c) => run_all(c),
        Command::Constants(c) => single(ExperimentKind::Constants, c),
        Command::Mollify(c) => single(ExperimentKind::Mollify, c),
        Command::Seminorm(c) => single(ExperimentKind::Seminorm, c),
        Command::Verify(c) => single(ExperimentKind::Verify, c),
        Command::Perturb(c) => single(ExperimentKind::Perturb, c),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
