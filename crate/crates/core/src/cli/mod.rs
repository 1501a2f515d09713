//! Experiment runner behind the `twophoto` binary.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 runtime or resource
//! failure, 3 a checking command reached a negative verdict.

pub mod commands;
pub mod config;
pub mod output;

use crate::error::Error;
use clap::{Parser, Subcommand};
use config::{ConfigError, ExperimentConfig, Format};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;
pub const EXIT_VERDICT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "twophoto", version, about = "Two-photocurrent detector simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: config `output_dir`, else `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Sample one scheme; writes samples and summary.json.
    Simulate,
    /// Analytic output distribution on a grid.
    Propensity,
    /// Compare two schemes at operator, sample and distribution level.
    Equivalence,
    /// Binomial versus beam-splitter loss model.
    LossCheck,
    /// Beam-splitter and phase-shifter realisation of the triple coupler.
    Decompose,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Parse(_) => EXIT_VALIDATION,
        Error::ResourceLimit { .. } | Error::Truncation { .. } | Error::Io(_) => EXIT_RUNTIME,
    }
}

fn report_config_error(e: &ConfigError) {
    let doc = serde_json::json!({ "error": "validation", "path": e.path, "message": e.message });
    eprintln!("{doc}");
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None if cli.command == Command::Decompose || cli.command == Command::LossCheck => {
            ExperimentConfig::default()
        }
        None => {
            return Err(ConfigError {
                path: ".".into(),
                message: "this command needs --config".into(),
            })
        }
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

/// Run parsed arguments; returns the exit code.
pub fn run(cli: &Cli) -> u8 {
    if cli.threads > 0 {
        // Fails only if a pool already exists, which leaves that pool in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let cfg = match load(cli) {
        Ok(c) => c,
        Err(e) => {
            report_config_error(&e);
            return EXIT_VALIDATION;
        }
    };
    let base = cli.config.as_ref().and_then(|p| p.parent().map(PathBuf::from));
    let ctx = commands::RunContext::new(&cfg, cli.out.clone(), cli.format, base);
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cfg, &ctx),
        Command::Propensity => commands::propensity_cmd(&cfg, &ctx),
        Command::Equivalence => commands::equivalence(&cfg, &ctx),
        Command::LossCheck => commands::loss_check(&cfg, &ctx),
        Command::Decompose => commands::decompose(&ctx),
    };
    match result {
        Ok(o) => {
            // A closed stdout (e.g. piped into `head`) must not turn success into a panic.
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", o.message);
            for f in &o.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            match o.verdict {
                Some(false) => EXIT_VERDICT,
                _ => EXIT_OK,
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            if code == EXIT_VALIDATION {
                report_config_error(&ConfigError { path: ".".into(), message: e.to_string() });
            } else {
                eprintln!("error: {e}");
            }
            code
        }
    }
}

/// Parse arguments, set up logging and run.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK });
        }
    };
    ExitCode::from(run(&cli))
}
