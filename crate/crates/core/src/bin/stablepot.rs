use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stable_potential::cli::{dispatch_with_threads, Command, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "stablepot", version, about = "Potential theory of symmetric alpha-stable processes")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path prefix; artifacts are `<out>.json`, `<out>.csv` or `<out>.error.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Closed-form kernels.
    Kernel,
    /// Walk-on-spheres harmonic measure.
    Wos,
    /// Martin kernel by boundary approach.
    Martin,
    /// h-conditioned paths.
    Cond,
    /// Gauge and conditional gauge.
    Gauge,
    /// Decomposition into exterior, Green and Martin parts.
    Represent,
    /// Property suite.
    Check,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Kernel => Command::Kernel,
        Cmd::Wos => Command::Wos,
        Cmd::Martin => Command::Martin,
        Cmd::Cond => Command::Cond,
        Cmd::Gauge => Command::Gauge,
        Cmd::Represent => Command::Represent,
        Cmd::Check => Command::Check,
    };
    let (Some(config), Some(out)) = (args.config, args.out) else {
        eprintln!("error: --config and --out are required");
        return ExitCode::from(EXIT_VALIDATION as u8);
    };
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    ExitCode::from(dispatch_with_threads(command, &text, &out, args.threads.max(1)) as u8)
}
