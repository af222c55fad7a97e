use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use phonon_gate::cli::{apply_overrides, parse_config, run, Mode, RunConfig};

/// Simulate a trapped-ion / Rydberg-atom CNOT gate driven by phonon
/// blockade: trap-shift curves, pulse dynamics, gate fidelity, and the
/// built-in verification suite.
#[derive(Parser)]
#[command(name = "phonon-gate", version)]
struct Cli {
    /// One of: gate, sweep-shift, sweep-fidelity, traces, check
    mode: String,

    /// Flat key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. --set omega_a=2GHz
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (overrides the `out` key)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<RunConfig, (i32, String)> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| (3, format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut config = parse_config(&text).map_err(|e| (1, e.to_string()))?;
    apply_overrides(&mut config, &cli.set).map_err(|e| (1, e.to_string()))?;
    config.mode = Mode::parse(&cli.mode).ok_or_else(|| {
        (
            1,
            format!(
                "unknown mode '{}' (expected gate, sweep-shift, sweep-fidelity, traces, or check)",
                cli.mode
            ),
        )
    })?;
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(config) => config,
        Err((code, message)) => {
            eprintln!("error: {message}");
            return ExitCode::from(code as u8);
        }
    };
    match run(&config) {
        Ok(files) => {
            for file in files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
