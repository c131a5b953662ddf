use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bvfrac_cli::report::strip_metadata;
use bvfrac_cli::{execute, ExperimentConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bvfrac"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn constants_for_dimension_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"experiment": "constants", "constants": {"dims": [2], "mc_samples": 100000}, "seed": 3}"#);
    let out = tmp.path().join("out");
    let o = run(&["constants", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "PASS");
    let row = &r["results"]["constants"][0];
    assert_eq!(row["dim"], 2);
    assert!((row["d"]["closed_form"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((row["c"]["closed_form"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(r["run"]["seed"], 3);
}

#[test]
fn constants_run_without_a_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["constants", "--out", tmp.path().to_str().unwrap(), "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    assert_eq!(r["results"]["constants"].as_array().unwrap().len(), 3);
    assert_eq!(r["config"]["seed"], 9);
}

#[test]
fn bundled_step_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("step1d.json");
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verify: PASS"));
    let r = report(tmp.path());
    let slope = r["results"]["limit"]["fit"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() <= 0.2, "{slope}");
    let f = &r["results"]["formula"];
    assert_eq!(f["mass"], 1.0);
    assert_eq!(f["d_n"], 1.0);
    assert_eq!(f["jump_energy"], 1.0);

    let csv = std::fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,value,value_over_abslog,error_estimate"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        assert!((row[1] / row[0].ln().abs() - row[2]).abs() < 1e-12);
    }
    // the config asks for the plot
    let svg = std::fs::read_to_string(tmp.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("predicted 2") && svg.matches("<circle").count() == 12);
}

#[test]
fn q_at_most_one_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("step1d.json")).unwrap().replace("\"q\": 2.0", "\"q\": 1.0");
    let cfg = write(tmp.path(), "bad.json", &text);
    let o = run(&["verify", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("q > 1") && err.contains("(q)"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn malformed_configs_exit_two_with_a_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.json", "{\n  \"experiment\": \"verify\",\n  \"q\": 2.0,,\n}", "line 3"),
        ("unknown.json", r#"{"experiment": "verify", "colour": 1}"#, "colour"),
        ("catalog.json", r#"{"experiment": "seminorm", "field": {"name": "square"}, "kernel": {"kind": "hat"}, "q": 2.0, "epsilon": 0.1}"#, "field.name"),
        ("eps.json", r#"{"experiment": "seminorm", "field": {"name": "step1d_box"}, "kernel": {"kind": "hat"}, "q": 2.0, "epsilon": 1.5}"#, "epsilon"),
        ("sched.json", r#"{"experiment": "verify", "field": {"name": "step1d_box"}, "kernel": {"kind": "hat"}, "q": 2.0, "schedule": {"eps_max": 0.1, "eps_min": 0.01, "count": 3}, "tolerance": 0.1}"#, "schedule"),
        ("dims.json", r#"{"experiment": "constants", "constants": {"dims": [7], "mc_samples": 10000}}"#, "constants.dims"),
        ("threads.json", r#"{"experiment": "constants", "threads": 0}"#, "threads"),
    ];
    for (name, text, needle) in cases {
        let cfg = write(tmp.path(), name, text);
        let kind = if name.starts_with("dims") || name.starts_with("threads") {
            "constants"
        } else if text.contains("seminorm") {
            "seminorm"
        } else {
            "verify"
        };
        let o = run(&[kind, "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{name}: {err}");
        assert!(err.contains(needle), "{name}: {err}");
    }
}

#[test]
fn subcommand_must_match_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("step1d.json");
    let o = run(&["perturb", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // the localized functional does not see the kernel
    let text = r#"{"experiment": "seminorm", "field": {"name": "step1d_box"}, "kernel": {"kind": "hat", "mass": 2.0},
        "q": 2.0, "functional": "localized", "epsilon": 0.1, "tolerance": 0.01}"#;
    let cfg = write(tmp.path(), "ok.json", text);
    let o = run(&["seminorm", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    assert!((r["results"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-8);

    let text = r#"{"experiment": "verify", "field": {"name": "step1d_box"}, "kernel": {"kind": "hat", "mass": 2.0},
        "q": 2.0, "functional": "profile1d", "schedule": {"eps_max": 0.1, "eps_min": 0.001, "count": 6}, "tolerance": 0.1}"#;
    let mut cfg = ExperimentConfig::parse(text).unwrap();
    let good = execute(&cfg).unwrap();
    assert_eq!(good.report.status, bvfrac_cli::Status::Pass);
    // the fitted slope carries a finite-ε bias far above this tolerance
    cfg.tolerance = Some(1e-6);
    let bad = execute(&cfg).unwrap();
    assert_eq!(bad.report.status, bvfrac_cli::Status::Fail);
    assert_eq!(bad.report.status.exit_code(), 1);
}

#[test]
fn bundled_configs_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap();
        let printed = cfg.to_json();
        let again = ExperimentConfig::parse(&printed).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.to_json(), printed);
        n += 1;
    }
    assert_eq!(n, 5);
}

#[test]
fn reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("doublewell1d.json");
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("r{k}"));
        let o = run(&["perturb", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(std::fs::read_to_string(out.join("report.json")).unwrap());
        let csv = std::fs::read_to_string(out.join("series.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 6);
    }
    assert_eq!(strip_metadata(&texts[0]).unwrap(), strip_metadata(&texts[1]).unwrap());
    let r: Value = serde_json::from_str(&texts[0]).unwrap();
    assert_eq!(r["run"]["threads"], 2);
    assert!(r["metadata"]["unix_time"].as_u64().unwrap() > 0);
}

#[test]
fn all_runs_every_config_in_a_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cfg");
    std::fs::create_dir(&dir).unwrap();
    write(&dir, "a.json", r#"{"experiment": "constants", "constants": {"dims": [1, 3], "mc_samples": 10000}}"#);
    write(
        &dir,
        "b.json",
        r#"{"experiment": "mollify", "field": {"name": "halfplane_in_square"}, "kernel": {"kind": "bump"}, "epsilon": 0.1,
            "points": [[0.0, 0.0], [-0.3, 0.0], [0.4, -0.2]]}"#,
    );
    write(&dir, "notes.txt", "ignored");
    let out = tmp.path().join("out");
    let o = run(&["all", "--config", dir.to_str().unwrap(), "--out", out.to_str().unwrap(), "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out.join("a"))["results"]["constants"].as_array().unwrap().len(), 2);
    let m = report(&out.join("b"));
    let pts = m["results"]["points"].as_array().unwrap();
    // the jump is the line x = 0 with value 1 on the right
    assert!((pts[0]["value"][0].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!(pts[1]["value"][0].as_f64().unwrap().abs() < 1e-12);
    assert!((pts[2]["value"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(m["results"]["gradient_bound"]["pass"], true);

    // one invalid config makes the batch exit 2 but the others still run
    write(&dir, "c.json", r#"{"experiment": "verify", "q": 0.5}"#);
    let o = run(&["all", "--config", dir.to_str().unwrap(), "--out", tmp.path().join("out2").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(tmp.path().join("out2/a/report.json").exists());
}

#[test]
fn flag_forms_without_a_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |p: &str| tmp.path().join(p).display().to_string();

    let o = run(&["constants", "--dim", "2,3", "--mc-samples", "20000", "--out", &d("c")]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.lines().next().unwrap().split_whitespace().eq(["kind", "N", "closed_form", "monte_carlo", "std_error"]));
    assert!(table.lines().any(|l| l.starts_with("C") && l.contains("2.094395102393195")));

    let o = run(&["mollify", "--field", "step1d_box", "--kernel", "hat", "--eps", "0.1", "--out", &d("m/grid.csv")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("m/grid.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,u0"));
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        // χ_(0,1) mollified by the unit hat at scale 0.1
        let s = (v[0] / 0.1).clamp(-1.0, 1.0);
        let expect = if s >= 0.0 { 1.0 - 0.5 * (1.0 - s).powi(2) } else { 0.5 * (1.0 + s).powi(2) };
        assert!((v[1] - expect).abs() < 1e-12, "{l}");
    }
    assert!(tmp.path().join("m/report.json").exists());

    let o = run(&[
        "seminorm", "--field", "step1d_box", "--kernel", r#"{"kind": "hat", "mass": 1.0}"#, "--eps", "0.01", "--q", "2",
        "--functional", "profile1d", "--out", &d("s"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first = String::from_utf8_lossy(&o.stdout).lines().next().unwrap().to_string();
    let v: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["method"], "scaled_profile_1d");
    assert!(v["value"].as_f64().unwrap() > 0.0 && v["error_estimate"].as_f64().unwrap() >= 0.0);

    let o = run(&["seminorm", "--field", "step1d_box", "--kernel", "triangle", "--eps", "0.01", "--q", "2", "--out", &d("x")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--kernel"));
}

#[test]
fn report_and_table_paths_can_be_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("massless_kernel.json");
    let report_path = tmp.path().join("r/report.json");
    let csv_path = tmp.path().join("t/series.csv");
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", report_path.to_str().unwrap(), "--csv", csv_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(r["results"]["formula"]["mass"], 0.0);
    assert_eq!(r["results"]["formula"]["predicted_slope"], 0.0);
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap().lines().count(), 13);
    assert!(tmp.path().join("r/plot.svg").exists());
}
