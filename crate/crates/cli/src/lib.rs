//! Library behind the `bayesmix` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{Context, RunResult};
use config::ExperimentConfig;
use error::{CliError, CliResult};
use manifest::{sha256_hex, OutputFile, RunManifest, Timing};

/// Finite-horizon experiments on Bayesian mixture predictors.
///
/// Every subcommand reads its table from the TOML file given by --config,
/// writes CSV files and manifest.json into --out, and exits with 0 on
/// success, 1 on I/O errors, 2 on configuration errors, 3 when a checked
/// inequality fails and 4 when a resource cap is exceeded.
#[derive(Parser, Debug)]
#[command(name = "bayesmix", version)]
pub struct Cli {
    /// Experiment configuration file (TOML)
    #[arg(long, global = true, value_name = "PATH", env = "BAYESMIX_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory, created if missing
    #[arg(
        long,
        global = true,
        value_name = "DIR",
        env = "BAYESMIX_OUT",
        default_value = "bayesmix-out"
    )]
    out: PathBuf,

    /// Seed for sampling and generators; overrides the config's seed
    #[arg(long, global = true, value_name = "U64", env = "BAYESMIX_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true, value_name = "N", env = "BAYESMIX_THREADS")]
    threads: Option<usize>,

    /// Convergence tolerance; overrides the config's tolerance
    #[arg(long, global = true, value_name = "FLOAT", env = "BAYESMIX_TOLERANCE")]
    tolerance: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Expected cumulative log-loss d_n(μ, ρ) for each configured pair
    ///
    /// Reads [eval-loss] and writes loss.csv.
    EvalLoss,
    /// Greedy-cover mixture extraction with a sequence-by-sequence audit
    ///
    /// Reads [extract] and writes mixture.toml, provenance.csv, audit.csv and
    /// headline.csv. Exits with 3 when an audited inequality fails.
    Extract,
    /// Finite-horizon minimax value and capacity-achieving prior
    ///
    /// Reads [capacity] and writes capacity.csv, sandwich.csv and one prior
    /// document per class and horizon under priors/.
    Capacity,
    /// Switching predictor against a restart oracle on change-point data
    ///
    /// Reads [changepoint] and writes changepoint.csv, plus trace-SEED.csv
    /// per seed when write-traces is set.
    Changepoint,
    /// Loss curve of the typical-sequence mixture
    ///
    /// Reads [typical] and writes typical.csv.
    Typical,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::EvalLoss => "eval-loss",
            Command::Extract => "extract",
            Command::Capacity => "capacity",
            Command::Changepoint => "changepoint",
            Command::Typical => "typical",
        }
    }
}

fn missing(section: &str) -> CliError {
    CliError::config(format!("config has no [{section}] table"))
}

/// Validates the selected section into a runnable closure.
fn plan(
    cmd: Command,
    cfg: &ExperimentConfig,
    ctx: &Context,
) -> CliResult<Box<dyn FnOnce() -> CliResult<RunResult>>> {
    Ok(match cmd {
        Command::EvalLoss => {
            let p = commands::plan_eval_loss(
                cfg.eval_loss.as_ref().ok_or_else(|| missing("eval-loss"))?,
                ctx,
            )?;
            Box::new(move || commands::run_eval_loss(&p))
        }
        Command::Extract => {
            let p = commands::plan_extract(
                cfg.extract.as_ref().ok_or_else(|| missing("extract"))?,
                ctx,
            )?;
            Box::new(move || commands::run_extract(&p))
        }
        Command::Capacity => {
            let p = commands::plan_capacity(
                cfg.capacity.as_ref().ok_or_else(|| missing("capacity"))?,
                ctx,
            )?;
            Box::new(move || commands::run_capacity(&p))
        }
        Command::Changepoint => {
            let p = commands::plan_changepoint(
                cfg.changepoint
                    .as_ref()
                    .ok_or_else(|| missing("changepoint"))?,
                ctx,
            )?;
            Box::new(move || commands::run_changepoint(&p))
        }
        Command::Typical => {
            let p = commands::plan_typical(
                cfg.typical.as_ref().ok_or_else(|| missing("typical"))?,
                ctx,
            )?;
            Box::new(move || commands::run_typical(&p))
        }
    })
}

fn write_outputs(out: &Path, res: &RunResult) -> CliResult<Vec<OutputFile>> {
    let mut files = Vec::new();
    for o in &res.outputs {
        let path = out.join(&o.path);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, &o.body)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        files.push(OutputFile {
            path: o.path.clone(),
            bytes: o.body.len(),
            sha256: sha256_hex(o.body.as_bytes()),
        });
    }
    Ok(files)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let started = Instant::now();
    let path = cli.config.clone().ok_or_else(|| {
        CliError::config("no configuration given (use --config or BAYESMIX_CONFIG)")
    })?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerance = Some(t);
    }
    let tolerance = config::check_tolerance(cfg.tolerance.unwrap_or(1e-6))?;
    if cli.threads == Some(0) {
        return Err(CliError::config("--threads must be positive"));
    }
    let ctx = Context {
        base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        seed: cfg.seed.unwrap_or(0),
        tolerance,
    };
    let job = plan(cli.command, &cfg, &ctx)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }

    let res = job()?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::io(format!("{}: {e}", cli.out.display())))?;
    let outputs = write_outputs(&cli.out, &res)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        config_sha256: sha256_hex(cfg.to_toml_string()?.as_bytes()),
        seed: ctx.seed,
        tolerance,
        threads: cli.threads,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        timings: res
            .timings
            .iter()
            .map(|(op, s)| Timing {
                operation: op.clone(),
                seconds: *s,
            })
            .collect(),
        outputs,
        status: match &res.failure {
            None => "ok".into(),
            Some(e) => format!("failed: {e}"),
        },
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(cli.out.join("manifest.json"), json + "\n")?;
    match res.failure {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

/// Parses the process arguments, runs, and maps failures to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
