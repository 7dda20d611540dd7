use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use surfdyn_cli::{execute, resolve_output_dir, Command, ExperimentConfig};

/// Numerical experiments on area-preserving surface maps.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment config.
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            let diag = e.diagnostic();
            eprintln!("{}", serde_json::to_string(&diag).unwrap_or_else(|_| e.to_string()));
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let dir = resolve_output_dir(&cfg);
    let out = execute(cli.command, &cfg, &dir);
    println!("{}", serde_json::json!({ "command": cli.command.name(), "exit_code": out.exit_code, "output_dir": dir, "summary": out.summary }));
    ExitCode::from(out.exit_code as u8)
}
