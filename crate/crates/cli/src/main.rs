use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgpc::config::parse_config;
use dgpc::error::{DgpcError, Result};
use dgpc::experiment::{compare_configs, describe, run_config, run_experiment, Outcome};
use dgpc::output::emit_csv;

/// Restarted polynomial chaos for SDEs.
///
/// Set DGPC_THREADS to bound the worker pool.
#[derive(Parser)]
#[command(name = "dgpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a TOML run configuration.
    Run {
        config: PathBuf,
        /// Overrides `output` in the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reproduce a shipped example (ex1..ex7).
    Experiment {
        name: String,
        /// Defaults to `results/<name>`.
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Run two configurations and report the first against the second.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long, default_value = "compare.csv")]
        output: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<dgpc::config::RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DgpcError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        DgpcError::Config(msg) => DgpcError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("DGPC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| DgpcError::Config(format!("DGPC_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| DgpcError::Config(e.to_string()))
}

fn execute(cli: Cli) -> Result<Outcome> {
    configure_threads()?;
    match cli.command {
        Cmd::Run { config, output } => {
            let mut cfg = load(&config)?;
            if output.is_some() {
                cfg.output = output;
            }
            run_config(&cfg)
        }
        Cmd::Experiment { name, out_dir } => {
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("results").join(&name));
            run_experiment(&name, &dir)
        }
        Cmd::Compare { a, b, output } => {
            let t = compare_configs(&load(&a)?, &load(&b)?)?;
            emit_csv(&t, &output)?;
            Ok(Outcome {
                files: vec![output],
                summary: describe(&t),
            })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
