use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use csoa::cli::{
    execute_datagen, execute_report, execute_run, execute_sweep, run_checks, ConfigError,
    ReportOptions, RunConfig, SweepAxis,
};
use csoa::solvers::Algorithm;
use csoa::Error;

const DEFAULT_OUTPUT_DIR: &str = "csoa-out";

#[derive(Parser)]
#[command(name = "csoa", version, about = "Stochastic optimization with expectation constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    batch: Option<usize>,
    /// Record every k-th iteration (0 picks about 200 rows).
    #[arg(long)]
    trace_stride: Option<usize>,
    /// Defaults to the config's output_dir, then $CSOA_OUTPUT_DIR, then ./csoa-out.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override any config field, e.g. --set problem.qp.noise=0.1
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write trace.csv and summary.json.
    Run(Common),
    /// Repeat a configuration over values of one parameter and several seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Seeds per value: seed, seed+1, ...
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Write the synthetic dataset of a configuration as CSV.
    Datagen(Common),
    /// Plot running averages from one or more trace files.
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
    },
    /// Gradient and set invariant checks on small instances.
    Check {
        #[arg(long)]
        seed: u64,
    },
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    match s {
        "csoa" => Ok(Algorithm::Csoa),
        "fw_csoa" | "fw-csoa" => Ok(Algorithm::FwCsoa),
        _ => Err(format!("unknown algorithm {s:?}; expected csoa or fw_csoa")),
    }
}

fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("CSOA_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn load(common: &Common) -> anyhow::Result<(RunConfig, PathBuf)> {
    let mut overrides = common.overrides.clone();
    if let Some(h) = common.horizon {
        overrides.push(format!("horizon={h}"));
    }
    if let Some(a) = common.algorithm {
        overrides.push(format!("algorithm=\"{}\"", a.name()));
    }
    if let Some(k) = common.trace_stride {
        overrides.push(format!("trace.stride={k}"));
    }
    let mut cfg = RunConfig::from_path(&common.config, &overrides)?;
    if let Some(b) = common.batch {
        cfg.set_batch(b)?;
        cfg.validate()?;
    }
    let dir = output_dir(common.output_dir.as_deref(), cfg.output_dir.as_deref());
    Ok((cfg, dir))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, dir) = load(&common)?;
            let summary = execute_run(&cfg, common.seed, Some(&dir))?;
            if let Some(note) = &summary.note {
                println!("{note}");
            }
            println!("{}", serde_json::to_string_pretty(&summary.metrics)?);
            println!("wrote {}", dir.display());
        }
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
        } => {
            let (cfg, dir) = load(&common)?;
            let summary = execute_sweep(&cfg, axis, &values, seeds, common.seed, Some(&dir))?;
            if let Some(fit) = &summary.rate_fit {
                println!("rate fit: slope {:.4}, r2 {:.4}", fit.slope, fit.r2);
            }
            println!("wrote {}", dir.join("sweep.csv").display());
        }
        Command::Datagen(common) => {
            let (cfg, dir) = load(&common)?;
            for p in execute_datagen(&cfg, common.seed, &dir)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Report {
            traces,
            output_dir: flag,
            log_x,
            log_y,
        } => {
            let dir = output_dir(flag.as_deref(), None);
            for p in execute_report(&traces, &dir, ReportOptions { log_x, log_y })? {
                println!("wrote {}", p.display());
            }
        }
        Command::Check { seed } => {
            let outcomes = run_checks(seed).context("running checks")?;
            let mut failed = 0;
            for c in &outcomes {
                println!(
                    "{} {:<55} {:.3e} (tol {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                anyhow::bail!("{failed} of {} checks failed", outcomes.len());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 3,
        Some(Error::InvalidArgument(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
