//! Command-line front end.
//!
//! Exit codes: 0 success, 2 parse/validation/config error, 3 degenerate
//! data, 4 bad flags, 5 censoring calibration failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::evaluate;
use crate::io::{self, RunManifest};
use crate::kernel::{KernelFamily, KernelSpec, DEFAULT_GAMMA};
use crate::rng::RNG_ID;
use crate::screening::{self, Method};

/// Overrides the default worker count of `simulate`.
pub const JOBS_ENV: &str = "HSIC_SIS_JOBS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_BAD_FLAGS: i32 = 4;
pub const EXIT_CALIBRATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "hsic-sis", version, about = "HSIC-based screening for censored survival data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank the covariates of a dataset and select the top d_n.
    Screen(ScreenArgs),
    /// Simulate a scenario, screen every replication and write records.
    Simulate(SimulateArgs),
    /// Summarize replication records at a chosen model size.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct ScreenArgs {
    /// Dataset CSV with header time,status,z1,...,zp.
    #[arg(long)]
    input: PathBuf,
    /// Model size; defaults to floor(n / ln n).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dn: Option<u64>,
    /// Kernel bandwidth, used on both sides.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// gaussian, laplacian or linear.
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Scale every covariate to mean 0, sd 1 before screening.
    #[arg(long)]
    standardize_covariates: bool,
    /// hsic or dc.
    #[arg(long, default_value = "hsic")]
    method: String,
    /// Output CSV; the manifest is written to <out>.manifest.toml.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file (flat key = value).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's replication count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    replications: Option<u64>,
    /// Worker threads; defaults to $HSIC_SIS_JOBS or the number of logical cores.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write every simulated dataset as CSV.
    #[arg(long)]
    write_datasets: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Records CSV written by `simulate`.
    #[arg(long)]
    records: PathBuf,
    /// Model size; defaults to floor(n / ln n) per scenario.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dn: Option<u64>,
    /// Summary CSV; the manifest is written to <out>.manifest.toml.
    #[arg(long)]
    out: PathBuf,
}

/// Maps a library error onto the exit-code contract.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::DegenerateStatus | Error::DegenerateTimes => EXIT_DEGENERATE,
        Error::BadCutoff { .. } | Error::BadBandwidth(_) => EXIT_BAD_FLAGS,
        Error::InfeasibleTarget { .. } | Error::NoConvergence { .. } => EXIT_CALIBRATION,
        _ => EXIT_INVALID,
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

/// Default worker count: `$HSIC_SIS_JOBS`, else the logical core count.
pub fn default_jobs() -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&j| j > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn flag_error(msg: String) -> (i32, Error) {
    (EXIT_BAD_FLAGS, Error::Config(msg))
}

fn run_screen(args: &ScreenArgs) -> std::result::Result<(), (i32, Error)> {
    let family: KernelFamily = args.kernel.parse().map_err(|e: Error| flag_error(e.to_string()))?;
    let method: Method = args.method.parse().map_err(|e: Error| flag_error(e.to_string()))?;
    let spec = KernelSpec {
        family,
        gamma: args.gamma,
    };
    spec.validate().map_err(|e| (EXIT_BAD_FLAGS, e))?;
    let wrap = |e: Error| (exit_code(&e), e);
    let (mut data, digest) = io::read_dataset_with_digest(&args.input).map_err(wrap)?;
    if args.standardize_covariates {
        data = data.with_standardized_covariates();
    }
    let d_n = args.dn.map(|d| d as usize);
    let result = screening::screen_with(method, &data, &spec, &spec, d_n).map_err(wrap)?;
    fs::write(&args.out, io::screen_result_to_csv(&result)).map_err(|e| wrap(e.into()))?;

    let mut m = RunManifest::new("screen");
    m.set("input", args.input.display())
        .set("input_sha256", digest)
        .set("output_sha256", io::sha256_hex(&fs::read(&args.out).map_err(|e| wrap(e.into()))?))
        .set("method", method)
        .set("n", data.n())
        .set("p", data.p())
        .set("d_n", result.d_n)
        .set("d_n_rule", if d_n.is_some() { "user" } else { "floor(n/ln n)" })
        .set("kernel_z", spec)
        .set("kernel_y", spec)
        .set("standardize_covariates", args.standardize_covariates);
    m.write(&manifest_path(&args.out)).map_err(wrap)
}

fn run_simulate(args: &SimulateArgs) -> std::result::Result<(), (i32, Error)> {
    let wrap = |e: Error| (exit_code(&e), e);
    let text = fs::read_to_string(&args.scenario).map_err(|e| (EXIT_INVALID, e.into()))?;
    let cfg = io::parse_scenario(&text).map_err(|e| (EXIT_INVALID, e))?;
    let reps = args.replications.map(|r| r as usize).unwrap_or(cfg.replications);
    let jobs = args.jobs.map(|j| j as usize).unwrap_or_else(default_jobs);
    let scenario = &cfg.scenario;

    let out = evaluate::run_experiment(scenario, cfg.method, reps, jobs).map_err(wrap)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| wrap(e.into()))?;
    if args.write_datasets {
        let dir = args.out_dir.join("datasets");
        fs::create_dir_all(&dir).map_err(|e| wrap(e.into()))?;
        for rep in 0..reps {
            let g = crate::simgen::generate_replication(scenario, out.censoring_scale, rep as u64)
                .map_err(wrap)?;
            io::write_dataset(&dir.join(format!("rep_{rep:04}.csv")), &g.dataset).map_err(wrap)?;
        }
    }
    let records = io::records_to_csv(&out.records);
    let records_path = args.out_dir.join("records.csv");
    fs::write(&records_path, &records).map_err(|e| wrap(e.into()))?;
    fs::write(
        args.out_dir.join("summary.csv"),
        io::summary_to_csv(std::slice::from_ref(&out.summary)),
    )
    .map_err(|e| wrap(e.into()))?;

    let mean_cr =
        out.records.iter().map(|r| r.realized_cr).sum::<f64>() / out.records.len() as f64;
    let mut m = RunManifest::new("simulate");
    m.set("scenario_id", scenario.id())
        .set("scenario_sha256", io::sha256_hex(text.as_bytes()))
        .set("records_sha256", io::sha256_hex(records.as_bytes()))
        .set("model", scenario.model)
        .set("n", scenario.n)
        .set("p", scenario.p)
        .set("censoring", scenario.censoring)
        .set("target_cr", io::fmt_real(scenario.target_cr))
        .set("rho", io::fmt_real(scenario.rho))
        .set("seed", scenario.seed)
        .set("replications", reps)
        .set("method", cfg.method)
        .set("kernel_z", KernelSpec::default())
        .set("kernel_y", KernelSpec::default())
        .set("d_n", out.summary.d_n)
        .set("censoring_scale", io::fmt_real(out.censoring_scale))
        .set("calibration_samples", scenario.n_cal)
        .set("realized_mean_cr", io::fmt_real(mean_cr))
        .set("quantile_convention", evaluate::QUANTILE_CONVENTION)
        .set("rng", RNG_ID);
    m.write(&args.out_dir.join("manifest.toml")).map_err(wrap)
}

fn run_evaluate(args: &EvaluateArgs) -> std::result::Result<(), (i32, Error)> {
    let wrap = |e: Error| (exit_code(&e), e);
    let bytes = fs::read(&args.records).map_err(|e| (EXIT_INVALID, e.into()))?;
    let records = io::parse_records(&bytes).map_err(|e| (EXIT_INVALID, e))?;
    let d_n = args.dn.map(|d| d as usize);
    let summaries = evaluate::aggregate_groups(&records, d_n).map_err(wrap)?;
    fs::write(&args.out, io::summary_to_csv(&summaries)).map_err(|e| wrap(e.into()))?;
    let mut m = RunManifest::new("evaluate");
    m.set("records", args.records.display())
        .set("records_sha256", io::sha256_hex(&bytes))
        .set(
            "d_n",
            d_n.map(|d| d.to_string()).unwrap_or_else(|| "floor(n/ln n)".into()),
        )
        .set("quantile_convention", evaluate::QUANTILE_CONVENTION);
    m.write(&manifest_path(&args.out)).map_err(wrap)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_FLAGS } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Screen(a) => run_screen(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Evaluate(a) => run_evaluate(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err((code, e)) => {
            eprintln!("error: {e}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::DegenerateStatus), EXIT_DEGENERATE);
        assert_eq!(exit_code(&Error::BadCutoff { d_n: 0, p: 3 }), EXIT_BAD_FLAGS);
        assert_eq!(exit_code(&Error::NoConvergence { steps: 200 }), EXIT_CALIBRATION);
        let nested = Error::Replication {
            rep: 4,
            source: Box::new(Error::InfeasibleTarget {
                target: 0.2,
                reason: "x".into(),
            }),
        };
        assert_eq!(exit_code(&nested), EXIT_CALIBRATION);
        assert_eq!(
            exit_code(&Error::Parse { line: 1, column: 1, reason: String::new() }),
            EXIT_INVALID
        );
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path(Path::new("/tmp/out.csv")),
            PathBuf::from("/tmp/out.csv.manifest.toml")
        );
    }
}
