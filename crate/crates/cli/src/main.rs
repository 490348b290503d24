use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use memheat_cli::commands::{dispatch, Command, Options, EXIT_CONFIG};
use memheat_cli::config::parse_config;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Run,
    Classify,
    Verify,
    Sweep,
    Oracle,
}

/// Semilinear heat equation with nonlinear memory boundary flux.
#[derive(Debug, Parser)]
#[command(name = "memheat", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// JSON scenario document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Double N and halve θ and dt_max this many times.
    #[arg(long, default_value_t = 0)]
    refine: u32,
    /// With `verify`: compare the direct and transformed p = 1 routes.
    #[arg(long)]
    transform: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let command = match cli.command {
        Sub::Run => Command::Run,
        Sub::Classify => Command::Classify,
        Sub::Verify => Command::Verify,
        Sub::Sweep => Command::Sweep,
        Sub::Oracle => Command::Oracle,
    };
    let options = Options { out: cli.out, refine: cli.refine, transform: cli.transform };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(command, &config, &options, &mut lock) {
        Ok(code) => {
            let _ = lock.flush();
            ExitCode::from(code)
        }
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
