use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, DeskSet, ProblemSpec, RunConfig};
use super::csvio::{fmt_f64, TraceTable, TraceWriter};
use super::svg::{line_plot, PlotOptions, Series};
use crate::bench::DeskQp;
use crate::constants::{estimate_constants, EstimateConfig};
use crate::metrics::{
    accuracy, fit_rate, normalized_error, p_percent, violation_summary, ConstraintViolation, RateFit,
};
use crate::model::{HyperParams, ProblemConstants};
use crate::problem::StochasticProblem;
use crate::problems::{
    gen_synthetic_mc, ingest_csv, split_data, synthetic_fairness_data, synthetic_mc_instance,
    FairClassificationProblem, FairData, MatrixCompletionProblem,
};
use crate::sets::{AnySet, FeasibleSet};
use crate::solvers::{run, Algorithm, RunResult, Schedule, ScheduleT1, ScheduleT2, TraceRecord};

/// Everything written to `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    pub hyper: HyperParams,
    pub schedule: serde_json::Value,
    pub constants: Option<ProblemConstants>,
    pub warnings: Vec<String>,
    pub trace_rows: usize,
    pub trace_stride: usize,
    pub final_obj_avg: Option<f64>,
    pub final_h_avg: Vec<f64>,
    pub violation: Vec<ConstraintViolation>,
    pub max_lambda_norm: f64,
    pub projection_calls: usize,
    pub lmo_calls: usize,
    pub metrics: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    pub note: Option<String>,
}

enum Built {
    Desk(DeskQp, AnySet),
    Fair {
        problem: FairClassificationProblem,
        test: FairData,
    },
    Mc(MatrixCompletionProblem),
}

fn build(cfg: &RunConfig, seed: u64) -> anyhow::Result<Built> {
    Ok(match &cfg.problem {
        ProblemSpec::DeskQp { qp, set } => {
            qp.validate().map_err(|e| ConfigError::new(format!("problem.qp: {e}")))?;
            let s = match set {
                DeskSet::L2Ball => AnySet::L2Ball(qp.ball()),
                DeskSet::L1Ball => AnySet::L1Ball(qp.l1_ball()),
            };
            Built::Desk(qp.clone(), s)
        }
        ProblemSpec::FairnessSynthetic {
            data,
            data_seed,
            batch,
            test_fraction,
            validation_fraction,
        } => {
            let data_seed = data_seed.unwrap_or(seed);
            let all = synthetic_fairness_data(data, data_seed)
                .map_err(|e| ConfigError::new(format!("problem.data: {e}")))?;
            let split = split_data(&all, *test_fraction, *validation_fraction, data_seed)?;
            let problem = FairClassificationProblem::new(split.train, data.c, data.radius)?
                .with_batch(*batch)?;
            Built::Fair {
                problem,
                test: split.test,
            }
        }
        ProblemSpec::FairnessCsv {
            path,
            schema,
            c,
            radius,
            batch,
            split_seed,
            test_fraction,
            validation_fraction,
        } => {
            let all = crate::problems::load_csv(path, schema)
                .with_context(|| format!("loading {}", path.display()))?;
            let split_seed = split_seed.unwrap_or(seed);
            let split = if (*test_fraction, *validation_fraction) == (0.3, 0.1) {
                ingest_csv(path, schema, split_seed)?
            } else {
                split_data(&all, *test_fraction, *validation_fraction, split_seed)?
            };
            let problem = FairClassificationProblem::new(split.train, *c, *radius)?.with_batch(*batch)?;
            Built::Fair {
                problem,
                test: split.test,
            }
        }
        ProblemSpec::MatrixCompletion {
            data,
            data_seed,
            normalization,
            power,
        } => {
            let p = gen_synthetic_mc(data, data_seed.unwrap_or(seed))
                .map_err(|e| ConfigError::new(format!("problem.data: {e}")))?
                .with_normalization(*normalization)
                .with_power_config(*power);
            Built::Mc(p)
        }
    })
}

struct Prepared {
    hyper: HyperParams,
    schedule: serde_json::Value,
    constants: Option<ProblemConstants>,
    warnings: Vec<String>,
}

fn prepare<P, S>(
    cfg: &RunConfig,
    seed: u64,
    problem: &P,
    set: &S,
    exact: Option<ProblemConstants>,
) -> anyhow::Result<Prepared>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let needs_constants = matches!(cfg.schedule, Schedule::Theorem1 | Schedule::Theorem2 { .. });
    let constants = if !needs_constants {
        None
    } else {
        match (&cfg.constants, exact) {
            (None, Some(c)) => Some(c),
            (est, _) => {
                let mut est = est.clone().unwrap_or(EstimateConfig {
                    seed,
                    ..Default::default()
                });
                if est.slater_point.is_none() {
                    est.slater_point = Some(vec![0.0; problem.dim()]);
                }
                Some(estimate_constants(problem, set, &est)?)
            }
        }
    };
    let (hyper, warnings) = cfg
        .schedule
        .resolve(cfg.algorithm, constants.as_ref(), cfg.horizon, seed)
        .map_err(|e| ConfigError::new(format!("schedule: {e}")))?;
    let schedule = match (&cfg.schedule, &constants) {
        (Schedule::Theorem1, Some(c)) => serde_json::to_value(ScheduleT1::new(c, cfg.horizon.max(1))?)?,
        (Schedule::Theorem2 { delta }, Some(c)) => {
            serde_json::to_value(ScheduleT2::new(c, cfg.horizon.max(1), *delta)?)?
        }
        (s, _) => serde_json::to_value(s)?,
    };
    Ok(Prepared {
        hyper,
        schedule,
        constants,
        warnings,
    })
}

fn execute<P, S>(
    cfg: &RunConfig,
    seed: u64,
    problem: &P,
    set: &S,
    exact: Option<ProblemConstants>,
    out_dir: Option<&Path>,
) -> anyhow::Result<(RunSummary, RunResult)>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let prep = prepare(cfg, seed, problem, set, exact)?;
    let started = Instant::now();
    let x0 = vec![0.0; problem.dim()];
    let mut writer = match out_dir {
        Some(dir) => Some(TraceWriter::create(&dir.join("trace.csv"), problem.num_constraints())?),
        None => None,
    };
    let outcome = run(cfg.algorithm, problem, set, &prep.hyper, x0, &cfg.trace, &mut |r: &TraceRecord| {
        match writer.as_mut() {
            Some(w) => w.write(r),
            None => Ok(()),
        }
    });
    if let Some(w) = writer {
        w.finish()?;
    }
    let result = outcome?;
    let mut warnings = prep.warnings;
    warnings.extend(result.warnings.iter().cloned());
    let last = result.final_record();
    let summary = RunSummary {
        problem: cfg.problem.kind().into(),
        algorithm: cfg.algorithm,
        horizon: cfg.horizon,
        seed,
        hyper: prep.hyper,
        schedule: prep.schedule,
        constants: prep.constants,
        warnings,
        trace_rows: result.trace.len(),
        trace_stride: result.stride,
        final_obj_avg: last.map(|r| r.obj_avg),
        final_h_avg: last.map(|r| r.h_avg.clone()).unwrap_or_default(),
        violation: violation_summary(&result.trace),
        max_lambda_norm: result.max_lambda_norm,
        projection_calls: result.projection_calls,
        lmo_calls: result.lmo_calls,
        metrics: BTreeMap::new(),
        wall_time_s: started.elapsed().as_secs_f64(),
        note: (cfg.horizon == 0).then(|| "horizon is 0: no iterations were run".to_string()),
    };
    Ok((summary, result))
}

/// Runs one configuration. With `out_dir`, writes `trace.csv` and
/// `summary.json` there.
pub fn execute_run(cfg: &RunConfig, seed: u64, out_dir: Option<&Path>) -> anyhow::Result<RunSummary> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let built = build(cfg, seed)?;
    let mut summary = match &built {
        Built::Desk(qp, set) => {
            let exact = match set {
                AnySet::L1Ball(_) => qp.exact_constants_l1(),
                _ => qp.exact_constants(),
            };
            let (mut s, _) = execute(cfg, seed, qp, set, Some(exact), out_dir)?;
            if let Ok(sol) = qp.solution(0.0) {
                s.metrics.insert("f_star".into(), sol.f_star);
                if let Some(avg) = s.final_obj_avg {
                    s.metrics.insert("gap".into(), avg - sol.f_star);
                }
            }
            s
        }
        Built::Fair { problem, test } => {
            let (mut s, result) = execute(cfg, seed, problem, &problem.set(), None, out_dir)?;
            let x = &result.state.x;
            s.metrics.insert("train_covariance".into(), problem.covariance(x));
            s.metrics.insert("test_accuracy".into(), accuracy(x, test));
            if let Ok(p) = p_percent(x, test) {
                s.metrics.insert("test_p_percent".into(), p.value);
            }
            if cfg.compare_unconstrained {
                let free = problem.unconstrained();
                let (_, free_result) = execute(cfg, seed, &free, &free.set(), None, None)?;
                let xf = &free_result.state.x;
                s.metrics.insert("unconstrained_test_accuracy".into(), accuracy(xf, test));
                s.metrics
                    .insert("unconstrained_train_covariance".into(), problem.covariance(xf));
                if let Ok(p) = p_percent(xf, test) {
                    s.metrics.insert("unconstrained_test_p_percent".into(), p.value);
                }
            }
            s
        }
        Built::Mc(problem) => {
            let (mut s, result) = execute(cfg, seed, problem, &problem.set(), None, out_dir)?;
            s.metrics.insert(
                "normalized_error".into(),
                normalized_error(&result.state.x, problem.observed())?,
            );
            s.metrics.insert("beta".into(), problem.beta());
            if let Some(h) = s.final_h_avg.first() {
                s.metrics.insert("h_avg_sum_units".into(), problem.to_sum_units(*h));
            }
            s
        }
    };
    if let Some(dir) = out_dir {
        summary.wall_time_s = (summary.wall_time_s * 1e3).round() / 1e3;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[value(name = "T", alias = "t")]
    T,
    #[value(name = "b")]
    B,
    #[value(name = "upsilon0")]
    Upsilon0,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seeds: usize,
    pub obj_avg_mean: f64,
    pub obj_avg_std: f64,
    pub h_avg_mean: Vec<f64>,
    pub h_avg_std: Vec<f64>,
    pub metrics_mean: BTreeMap<String, f64>,
    pub metrics_std: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub rate_fit: Option<RateFit>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn axis_label(axis: SweepAxis, v: f64) -> String {
    match axis {
        SweepAxis::T => format!("T={}", v as u64),
        SweepAxis::B => format!("b={}", v as u64),
        SweepAxis::Upsilon0 => format!("upsilon0={v}"),
    }
}

/// One run per (value, seed) pair in parallel, then per-value aggregation.
pub fn execute_sweep(
    cfg: &RunConfig,
    axis: SweepAxis,
    values: &[f64],
    n_seeds: usize,
    base_seed: u64,
    out_dir: Option<&Path>,
) -> anyhow::Result<SweepSummary> {
    if values.is_empty() {
        bail!(ConfigError::new("sweep needs at least one value"));
    }
    if n_seeds == 0 {
        bail!(ConfigError::new("sweep needs at least one seed"));
    }
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match axis {
            SweepAxis::T => {
                if v < 0.0 || v.fract() != 0.0 {
                    bail!(ConfigError::new(format!("sweep value {v} is not a horizon")));
                }
                c.horizon = v as usize;
            }
            SweepAxis::B => {
                if v < 1.0 || v.fract() != 0.0 {
                    bail!(ConfigError::new(format!("sweep value {v} is not a batch size")));
                }
                c.set_batch(v as usize)?;
            }
            SweepAxis::Upsilon0 => c.set_upsilon0(v)?,
        }
        c.validate()?;
        configs.push(c);
    }
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| (0..n_seeds as u64).map(move |k| (i, k)))
        .collect();
    let results: Vec<anyhow::Result<RunSummary>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let dir: Option<PathBuf> = out_dir.map(|d| {
                d.join(axis_label(axis, values[i])).join(format!("seed={}", base_seed + k))
            });
            execute_run(&configs[i], base_seed + k, dir.as_deref())
        })
        .collect();
    let mut by_value: Vec<Vec<RunSummary>> = vec![Vec::new(); values.len()];
    for ((i, _), r) in jobs.iter().zip(results) {
        by_value[*i].push(r?);
    }

    let points: Vec<SweepPoint> = values
        .iter()
        .zip(&by_value)
        .map(|(&value, runs)| {
            let objs: Vec<f64> = runs.iter().filter_map(|r| r.final_obj_avg).collect();
            let (obj_avg_mean, obj_avg_std) = if objs.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&objs) };
            let n_h = runs.iter().map(|r| r.final_h_avg.len()).max().unwrap_or(0);
            let (mut h_avg_mean, mut h_avg_std) = (Vec::new(), Vec::new());
            for i in 0..n_h {
                let vals: Vec<f64> = runs.iter().filter_map(|r| r.final_h_avg.get(i).copied()).collect();
                let (m, s) = mean_std(&vals);
                h_avg_mean.push(m);
                h_avg_std.push(s);
            }
            let mut metrics_mean = BTreeMap::new();
            let mut metrics_std = BTreeMap::new();
            let keys: std::collections::BTreeSet<&String> = runs.iter().flat_map(|r| r.metrics.keys()).collect();
            for key in keys {
                let vals: Vec<f64> = runs.iter().filter_map(|r| r.metrics.get(key).copied()).collect();
                let (m, s) = mean_std(&vals);
                metrics_mean.insert(key.clone(), m);
                metrics_std.insert(key.clone(), s);
            }
            SweepPoint {
                value,
                seeds: runs.len(),
                obj_avg_mean,
                obj_avg_std,
                h_avg_mean,
                h_avg_std,
                metrics_mean,
                metrics_std,
            }
        })
        .collect();

    let rate_fit = if axis == SweepAxis::T && values.len() >= 3 {
        let gaps: Option<Vec<f64>> = points.iter().map(|p| p.metrics_mean.get("gap").copied()).collect();
        match gaps {
            Some(g) => match fit_rate(values, &g) {
                Ok(fit) => Some(fit),
                Err(e) => {
                    log::warn!("rate fit skipped: {e}");
                    None
                }
            },
            None => None,
        }
    } else {
        None
    };
    let summary = SweepSummary {
        axis,
        points,
        rate_fit,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_sweep_csv(&dir.join("sweep.csv"), &summary)?;
        fs::write(dir.join("sweep_summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary)
}

fn write_sweep_csv(path: &Path, s: &SweepSummary) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n_h = s.points.iter().map(|p| p.h_avg_mean.len()).max().unwrap_or(0);
    let keys: Vec<String> = s
        .points
        .iter()
        .flat_map(|p| p.metrics_mean.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut header = vec!["value".to_string(), "seeds".into(), "obj_avg_mean".into(), "obj_avg_std".into()];
    for i in 1..=n_h {
        header.push(format!("h{i}_avg_mean"));
        header.push(format!("h{i}_avg_std"));
    }
    for k in &keys {
        header.push(format!("{k}_mean"));
        header.push(format!("{k}_std"));
    }
    w.write_record(&header)?;
    for p in &s.points {
        let mut row = vec![fmt_f64(p.value), p.seeds.to_string(), fmt_f64(p.obj_avg_mean), fmt_f64(p.obj_avg_std)];
        for i in 0..n_h {
            row.push(fmt_f64(p.h_avg_mean.get(i).copied().unwrap_or(f64::NAN)));
            row.push(fmt_f64(p.h_avg_std.get(i).copied().unwrap_or(f64::NAN)));
        }
        for k in &keys {
            row.push(fmt_f64(p.metrics_mean.get(k).copied().unwrap_or(f64::NAN)));
            row.push(fmt_f64(p.metrics_std.get(k).copied().unwrap_or(f64::NAN)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the dataset a configuration would generate.
pub fn execute_datagen(cfg: &RunConfig, seed: u64, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    match &cfg.problem {
        ProblemSpec::FairnessSynthetic { data, data_seed, .. } => {
            let d = synthetic_fairness_data(data, data_seed.unwrap_or(seed))?;
            let path = out_dir.join("fairness.csv");
            let mut w = csv::Writer::from_path(&path)?;
            let cols: Vec<usize> = (0..d.n_features).filter(|&j| d.feature_names[j] != "intercept").collect();
            let mut header: Vec<String> = cols.iter().map(|&j| d.feature_names[j].clone()).collect();
            header.extend(["y".to_string(), "s".to_string()]);
            w.write_record(&header)?;
            for i in 0..d.len() {
                let mut row: Vec<String> = cols.iter().map(|&j| fmt_f64(d.row(i)[j])).collect();
                row.push(format!("{}", d.labels[i] as u8));
                row.push(format!("{}", d.sensitive[i] as u8));
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(vec![path])
        }
        ProblemSpec::MatrixCompletion { data, data_seed, .. } => {
            let inst = synthetic_mc_instance(data, data_seed.unwrap_or(seed))?;
            let p = &inst.problem;
            let obs_path = out_dir.join("observed.csv");
            let mut w = csv::Writer::from_path(&obs_path)?;
            w.write_record(["row", "col", "value"])?;
            for &(k, v) in p.observed() {
                w.write_record([(k / p.cols()).to_string(), (k % p.cols()).to_string(), fmt_f64(v)])?;
            }
            w.flush()?;
            let truth_path = out_dir.join("truth.csv");
            let mut w = csv::Writer::from_path(&truth_path)?;
            for r in 0..p.rows() {
                w.write_record(inst.truth[r * p.cols()..(r + 1) * p.cols()].iter().map(|v| fmt_f64(*v)))?;
            }
            w.flush()?;
            let meta_path = out_dir.join("meta.json");
            let meta = serde_json::json!({
                "rows": p.rows(),
                "cols": p.cols(),
                "observed": p.observed().len(),
                "unobserved": p.unobserved().len(),
                "alpha": p.alpha(),
                "beta": p.beta(),
            });
            fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
            Ok(vec![obs_path, truth_path, meta_path])
        }
        other => bail!(ConfigError::new(format!(
            "problem.kind: {} has no dataset to generate",
            other.kind()
        ))),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    pub log_x: bool,
    pub log_y: bool,
}

/// Objective and violation plots over one or more traces with one schema.
pub fn execute_report(traces: &[PathBuf], out_dir: &Path, opts: ReportOptions) -> anyhow::Result<Vec<PathBuf>> {
    if traces.is_empty() {
        bail!(ConfigError::new("report needs at least one trace"));
    }
    let mut tables = Vec::new();
    for p in traces {
        let t = TraceTable::read(p).with_context(|| format!("reading {}", p.display()))?;
        if t.rows.is_empty() {
            bail!("trace {} is empty", p.display());
        }
        tables.push(t);
    }
    for (p, t) in traces.iter().zip(&tables).skip(1) {
        if t.columns != tables[0].columns {
            bail!(
                "trace {} has columns {:?}, expected {:?}",
                p.display(),
                t.columns,
                tables[0].columns
            );
        }
    }
    let names: Vec<String> = traces
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            match p.parent().and_then(|d| d.file_name()) {
                Some(parent) if traces.len() > 1 => format!("{}/{}", parent.to_string_lossy(), stem),
                _ => stem,
            }
        })
        .collect();
    let n_h = tables[0].n_constraints();
    let t_col = |t: &TraceTable| t.column("t").unwrap_or_default();

    let objective: Vec<Series> = tables
        .iter()
        .zip(&names)
        .map(|(t, n)| Series {
            name: n.clone(),
            x: t_col(t),
            y: t.column("obj_avg").unwrap_or_default(),
        })
        .collect();
    let mut violation = Vec::new();
    for (t, n) in tables.iter().zip(&names) {
        for i in 1..=n_h {
            violation.push(Series {
                name: if n_h > 1 { format!("{n} h{i}") } else { n.clone() },
                x: t_col(t),
                y: t.column(&format!("h{i}_avg")).unwrap_or_default(),
            });
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let obj_path = out_dir.join("objective.svg");
    fs::write(
        &obj_path,
        line_plot(
            &objective,
            &PlotOptions {
                title: "Running-average objective".into(),
                x_label: "iteration t".into(),
                y_label: "(1/t) sum F(x_s)".into(),
                log_x: opts.log_x,
                log_y: opts.log_y,
            },
        )?,
    )?;
    written.push(obj_path);
    if n_h > 0 {
        let vio_path = out_dir.join("violation.svg");
        fs::write(
            &vio_path,
            line_plot(
                &violation,
                &PlotOptions {
                    title: "Running-average constraint value".into(),
                    x_label: "iteration t".into(),
                    y_label: "(1/t) sum H(x_s)".into(),
                    log_x: opts.log_x,
                    log_y: false,
                },
            )?,
        )?;
        written.push(vio_path);
    }
    Ok(written)
}
