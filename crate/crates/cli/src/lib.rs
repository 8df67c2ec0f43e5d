//! Experiment harness for `contactkit`: reads a TOML experiment config,
//! runs a conditioned replica batch on a sized thread pool and writes
//! `results.csv`, `summary.json` and `seeds.csv`.

pub mod error;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use contactkit::stats::{rerun_replica, run_replicas};
use contactkit::{ExperimentConfig, ExperimentKind, ReplicaBatch, Sigma, StatsError};
use serde_json::{json, Value};

pub use error::{exit, CliError};

/// Output directory used when neither `--out` nor `[output] dir` is given.
pub const DEFAULT_OUT: &str = "contactkit-out";

#[derive(Debug, Parser)]
#[command(name = "contactkit", version, about = "Monte Carlo laboratory for the supercritical contact process")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its outputs.
    Run(RunArgs),
    /// Check a config and list every violation without running anything.
    Validate(ConfigArgs),
    /// Re-run a single replica and print its records as JSON.
    RerunReplica(RerunArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override the experiment kind.
    #[arg(long, value_name = "KIND")]
    pub kind: Option<String>,
    /// Override the root seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Worker threads; never changes results.
    #[arg(long, value_name = "N", env = "CONTACTKIT_THREADS")]
    pub threads: Option<usize>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Replica id as listed in seeds.csv.
    #[arg(long, value_name = "ID")]
    pub replica: u64,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    toml::from_str(&text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Load, apply command-line overrides and validate.
pub fn resolve_config(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(k) = &args.kind {
        cfg.kind = ExperimentKind::parse(k).ok_or_else(|| CliError::UnknownKind(k.clone()))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(CliError::InvalidConfig(violations));
    }
    Ok(cfg)
}

/// Files written by a successful run.
#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub summary: Value,
}

pub fn run_experiment(args: &RunArgs) -> Result<RunReport, CliError> {
    let cfg = resolve_config(&args.config)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out_dir).map_err(|source| CliError::Write { path: out_dir.clone(), source })?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::ThreadPool(e.to_string()))?;

    let started = Instant::now();
    let batch = match pool.install(|| run_replicas(&cfg)) {
        Ok(b) => b,
        Err(StatsError::AcceptanceCapExceeded { attempts, accepted, rejection_rate, batch }) => {
            write_diagnostics(&out_dir, &cfg, &batch, started)?;
            return Err(StatsError::AcceptanceCapExceeded { attempts, accepted, rejection_rate, batch }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let (table, estimates, warnings) = pool.install(|| output::estimates(&batch))?;
    output::write_table(&out_dir.join(output::RESULTS_FILE), &table)?;
    output::write_table(&out_dir.join(output::SEEDS_FILE), &output::seed_table(&batch))?;
    let summary = output::summary(
        &cfg,
        "ok",
        output::diagnostics(&batch),
        Some(estimates),
        &warnings,
        started.elapsed().as_secs_f64(),
    );
    output::write_json(&out_dir.join(output::SUMMARY_FILE), &summary)?;
    Ok(RunReport { out_dir, summary })
}

fn write_diagnostics(out_dir: &Path, cfg: &ExperimentConfig, batch: &ReplicaBatch, started: Instant) -> Result<(), CliError> {
    output::write_table(&out_dir.join(output::SEEDS_FILE), &output::seed_table(batch))?;
    let summary = output::summary(
        cfg,
        "acceptance_cap_exceeded",
        output::diagnostics(batch),
        None,
        &[],
        started.elapsed().as_secs_f64(),
    );
    output::write_json(&out_dir.join(output::SUMMARY_FILE), &summary)
}

/// Violations of a config file; parse failures are errors.
pub fn validate_file(args: &ConfigArgs) -> Result<Vec<contactkit::Violation>, CliError> {
    match resolve_config(args) {
        Ok(_) => Ok(Vec::new()),
        Err(CliError::InvalidConfig(v)) => Ok(v),
        Err(e) => Err(e),
    }
}

/// Records of one replica with sites written as coordinates.
pub fn rerun(args: &RerunArgs) -> Result<Value, CliError> {
    let cfg = resolve_config(&args.config)?;
    let outcome = rerun_replica(&cfg, args.replica)?;
    let plan = cfg.plan();
    let hitting = outcome.hitting.as_ref().map(|h| {
        plan.hitting.iter().zip(&h.times).map(|(p, t)| json!({ "site": p, "t": t })).collect::<Vec<_>>()
    });
    let essential = outcome.essential.as_ref().map(|es| {
        plan.essential
            .iter()
            .zip(es)
            .map(|(p, e)| {
                json!({
                    "site": p,
                    "u": e.u,
                    "v": e.v,
                    "k": e.k,
                    "sigma": match e.sigma {
                        Sigma::Found(s) => json!(s),
                        Sigma::CensoredAtHorizon => json!("CENSORED_AT_HORIZON"),
                        Sigma::Undefined => json!("UNDEFINED"),
                    },
                    "flags": e.flags,
                })
            })
            .collect::<Vec<_>>()
    });
    Ok(json!({
        "schema_version": output::SCHEMA_VERSION,
        "seed": outcome.seed,
        "verdict": outcome.verdict,
        "accepted": outcome.accepted(),
        "hitting": hitting,
        "essential": essential,
    }))
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("{}", serde_json::to_string(&json!({ "error": e.report() })).expect("json values serialize"));
    e.exit_code()
}

/// Parse arguments, dispatch and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::INVALID_CONFIG } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => match run_experiment(&args) {
            Ok(report) => {
                println!("{}", report.out_dir.join(output::SUMMARY_FILE).display());
                exit::OK
            }
            Err(e) => report_error(&e),
        },
        Command::Validate(args) => match validate_file(&args) {
            Ok(violations) => {
                let valid = violations.is_empty();
                println!("{}", json!({ "valid": valid, "violations": violations }));
                if valid { exit::OK } else { exit::INVALID_CONFIG }
            }
            Err(e) => report_error(&e),
        },
        Command::RerunReplica(args) => match rerun(&args) {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
                exit::OK
            }
            Err(e) => report_error(&e),
        },
    }
}
