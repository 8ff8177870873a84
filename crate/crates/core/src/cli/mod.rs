//! Command-line experiment runner.

pub mod concentration;
pub mod config;
pub mod entropy;
pub mod extract;
pub mod freeness;
pub mod report;
pub mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use config::{
    ConcentrationConfig, EntropyConfig, ExperimentConfig, ExtractConfig, ProductFreenessConfig,
    ValidateConfig,
};
use report::Outcome;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "microstates", version, about = "Free entropy experiments on matrix microstates")]
pub struct Cli {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Property and oracle checks.
    Validate {
        /// Only run checks whose name starts with this prefix.
        #[arg(long)]
        filter: Option<String>,
        /// Force the named check to fail.
        #[arg(long)]
        inject_violation: Option<String>,
    },
    /// Entropy of a zone and its Cartesian powers.
    Entropy,
    /// Decay of the mass outside a moment neighborhood.
    Concentration,
    /// Additivity over products and asymptotic freeness of independent blocks.
    ProductFreeness,
    /// Moment extraction, microstate selection and convergence check.
    Extract,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::BudgetExceeded(_) => EXIT_BUDGET,
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::Parse(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::Unbounded
        | Error::DimensionMismatch(_) => EXIT_CONFIG,
        _ => EXIT_CHECKS_FAILED,
    }
}

fn load<C: ExperimentConfig>(path: Option<&Path>, seed: Option<u64>) -> Result<C> {
    let mut c = match path {
        Some(p) => C::from_json(&std::fs::read_to_string(p)?)?,
        None => {
            let c = C::default();
            c.validate()?;
            c
        }
    };
    if let Some(s) = seed {
        c.run_settings().seed = s;
    }
    if c.run_settings().chunks == 0 {
        return Err(Error::Config("run.chunks must be positive".into()));
    }
    Ok(c)
}

/// Runs a subcommand and returns its outcome without touching the disk.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_deref();
    match &cli.command {
        Command::Validate {
            filter,
            inject_violation,
        } => validate::run(
            &load::<ValidateConfig>(path, cli.seed)?,
            filter.as_deref(),
            inject_violation.as_deref(),
        ),
        Command::Entropy => entropy::run(&load::<EntropyConfig>(path, cli.seed)?),
        Command::Concentration => concentration::run(&load::<ConcentrationConfig>(path, cli.seed)?),
        Command::ProductFreeness => freeness::run(&load::<ProductFreenessConfig>(path, cli.seed)?),
        Command::Extract => extract::run(&load::<ExtractConfig>(path, cli.seed)?),
    }
}

/// Writes report.json, timing.json, tables/*.csv and any artifacts.
pub fn write_outputs(out: &Path, outcome: &Outcome, seconds: f64) -> Result<()> {
    let tables = out.join("tables");
    std::fs::create_dir_all(&tables)?;
    std::fs::write(out.join("report.json"), outcome.report.to_json())?;
    let timing = serde_json::json!({
        "command": outcome.report.command,
        "wall_clock_seconds": seconds,
    });
    std::fs::write(out.join("timing.json"), format!("{}\n", serde_json::to_string_pretty(&timing)?))?;
    for t in &outcome.tables {
        std::fs::write(tables.join(format!("{}.csv", t.name)), &t.csv)?;
    }
    for (name, body) in &outcome.artifacts {
        std::fs::write(out.join(name), body)?;
    }
    Ok(())
}

fn run_cli(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let outcome = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| execute(cli))?,
        None => execute(cli)?,
    };
    write_outputs(&cli.out, &outcome, start.elapsed().as_secs_f64())?;

    match cli.format {
        Format::Json => print!("{}", outcome.report.to_json()),
        Format::Csv => {
            for t in &outcome.tables {
                print!("# {}\n{}", t.name, t.csv);
            }
        }
    }
    for c in outcome.report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAILED {}: {}", c.name, c.detail);
    }
    Ok(if outcome.exhausted {
        EXIT_BUDGET
    } else if outcome.report.pass {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    })
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
