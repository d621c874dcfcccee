use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csoa::cli::{RunSummary, SweepSummary, TraceTable};
use csoa::metrics::violation_summary;
use csoa::problems::{load_csv, synthetic_fairness_data, CsvSchema, SyntheticFairnessConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn csoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csoa"))
        .args(args)
        .env_remove("CSOA_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn desk(dir: &Path, extra: &[&str]) -> Output {
    let cfg = configs().join("desk_qp.toml");
    let mut args = vec![
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--horizon",
        "2000",
        "--output-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    csoa(&args)
}

fn summary(dir: &Path) -> RunSummary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn run_summary_violation_matches_trace_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = desk(tmp.path(), &["--trace-stride", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path());
    let records = TraceTable::read(&tmp.path().join("trace.csv")).unwrap().records().unwrap();
    assert_eq!(records.len(), s.trace_rows);
    assert_eq!(s.trace_stride, 3);
    let recomputed = violation_summary(&records);
    assert_eq!(recomputed.len(), s.violation.len());
    for (a, b) in recomputed.iter().zip(&s.violation) {
        assert_eq!(a.running_avg_final, b.running_avg_final);
        assert_eq!(a.max_instantaneous, b.max_instantaneous);
        assert_eq!(a.fraction_violated, b.fraction_violated);
    }
    assert_eq!(s.final_h_avg, records.last().unwrap().h_avg);
    assert!(s.metrics.contains_key("gap"));
}

#[test]
fn zero_horizon_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk_qp_l1_fw.toml");
    let out = csoa(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--horizon",
        "0",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    assert!(summary(tmp.path()).note.is_some());
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cfg = configs().join("desk_qp.toml");
    let cfg = cfg.to_str().unwrap();
    let unknown = csoa(&["run", "--config", cfg, "--seed", "1", "--set", "problem.qp.colour=1", "--output-dir", dir]);
    assert_eq!(code(&unknown), 2);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("colour"));
    let mismatch = csoa(&["run", "--config", cfg, "--seed", "1", "--algorithm", "fw_csoa", "--output-dir", dir]);
    assert_eq!(code(&mismatch), 2);
    let no_seed = csoa(&["run", "--config", cfg]);
    assert_eq!(code(&no_seed), 2);
    let missing = csoa(&["run", "--config", "/nonexistent/csoa.toml", "--seed", "1", "--output-dir", dir]);
    assert_ne!(code(&missing), 0);
    let no_data = csoa(&["datagen", "--config", cfg, "--seed", "1", "--output-dir", dir]);
    assert_eq!(code(&no_data), 2);
}

#[test]
fn diverging_run_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("diverge.toml");
    fs::write(
        &cfg_path,
        r#"algorithm = "csoa"
horizon = 50

[problem]
kind = "desk_qp"
set = "l2_ball"

[problem.qp]
radius = 1e300

[schedule]
kind = "fixed"
eta = 1e300
delta = 1.0
upsilon = 0.0
"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = csoa(&[
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "1",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_value_sweep_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk_qp.toml");
    let sweep_dir = tmp.path().join("sweep");
    let out = csoa(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--axis",
        "T",
        "--values",
        "2000",
        "--seeds",
        "1",
        "--output-dir",
        sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = tmp.path().join("run");
    assert_eq!(code(&desk(&run_dir, &[])), 0);
    let swept: SweepSummary =
        serde_json::from_str(&fs::read_to_string(sweep_dir.join("sweep_summary.json")).unwrap()).unwrap();
    let single = summary(&run_dir);
    assert_eq!(swept.points.len(), 1);
    assert_eq!(swept.points[0].obj_avg_mean, single.final_obj_avg.unwrap());
    assert_eq!(swept.points[0].h_avg_mean, single.final_h_avg);
    assert_eq!(swept.points[0].obj_avg_std, 0.0);
    assert!(swept.rate_fit.is_none());
    let nested = fs::read(sweep_dir.join("T=2000/seed=4/trace.csv")).unwrap();
    assert_eq!(nested, fs::read(run_dir.join("trace.csv")).unwrap());
}

#[test]
fn report_plots_one_series_per_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&desk(&a, &[])), 0);
    let fw = configs().join("desk_qp_l1_fw.toml");
    let out = csoa(&[
        "run",
        "--config",
        fw.to_str().unwrap(),
        "--seed",
        "4",
        "--horizon",
        "2000",
        "--output-dir",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let plots = tmp.path().join("plots");
    let trace_a = a.join("trace.csv");
    let trace_b = b.join("trace.csv");

    let one = plots.join("one");
    let out = csoa(&["report", trace_a.to_str().unwrap(), "--output-dir", one.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["objective.svg", "violation.svg"] {
        let svg = fs::read_to_string(one.join(name)).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
        assert_eq!(svg.matches("<polyline").count(), 1, "{name}");
    }

    let two = plots.join("two");
    let out = csoa(&[
        "report",
        trace_a.to_str().unwrap(),
        trace_b.to_str().unwrap(),
        "--log-x",
        "--output-dir",
        two.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(two.join("objective.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("a/trace") && svg.contains("b/trace"));

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = csoa(&["report", empty.to_str().unwrap(), "--output-dir", one.to_str().unwrap()]);
    assert_ne!(code(&out), 0);
}

#[test]
fn datagen_fairness_csv_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fairness.toml");
    let out = csoa(&[
        "datagen",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "6",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let schema = CsvSchema {
        standardize: false,
        ..CsvSchema::new("y", "s")
    };
    let loaded = load_csv(&tmp.path().join("fairness.csv"), &schema).unwrap();
    let generated = synthetic_fairness_data(&SyntheticFairnessConfig::default(), 6).unwrap();
    assert_eq!(loaded.labels, generated.labels);
    assert_eq!(loaded.sensitive, generated.sensitive);
    assert_eq!(loaded.features, generated.features);
}

#[test]
fn check_command_passes() {
    let out = csoa(&["check", "--seed", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}
