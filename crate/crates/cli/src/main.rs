use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use delay_consensus_cli::{parse_config, run_command, Command, Format, RunOptions};

/// Delay margins and simulations for linear consensus over delayed digraphs.
#[derive(Parser)]
#[command(name = "delay-consensus", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report and artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Report)]
    format: Format,
    /// Seed for the random initial state when the config has no `sim.x0`.
    #[arg(long)]
    seed: Option<u64>,
    /// `certificate.json` from `analyze` or `margin`; enables `lyapunov.csv` in `simulate`.
    #[arg(long)]
    certificate: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return Ok(2);
        }
    };
    let opts = RunOptions {
        out: cli.out.clone(),
        format: cli.format,
        seed: cli.seed,
        certificate: cli.certificate.clone(),
    };
    let outcome = run_command(cli.command, &cfg, &opts)?;
    print!("{}", outcome.stdout);
    Ok(outcome.report.exit_code() as u8)
}
