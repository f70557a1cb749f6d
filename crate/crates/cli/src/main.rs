mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tunemag::tuning::{Fallback, Method};

/// Hysteresis simulation, magnetization-state tuning and actuator force maps.
#[derive(Debug, Parser)]
#[command(name = "tunemag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replay a field sequence and write the B(H) trace.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV file of fields or an inline comma-separated list, A/m.
        #[arg(long, allow_hyphen_values = true)]
        sequence: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify an Everett table model from first-order reversal curves.
    Identify {
        #[arg(long)]
        forc: PathBuf,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan and execute a sequence of magnetization targets.
    Tune {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Comma-separated remanence targets, T.
        #[arg(long, allow_hyphen_values = true)]
        targets: String,
        #[arg(long, value_parser = parse_fallback)]
        fallback: Option<Fallback>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Force map and piecewise-linear force fit of the TMA or HTMA.
    Actuator {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: tunemag::actuator::ActuatorKind,
        /// Comma-separated mover positions, m, centred on the mid-travel
        /// position.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        positions: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the fit; defaults to `<out>.fit.json`.
        #[arg(long)]
        fit_out: Option<PathBuf>,
    },
    /// Randomized SMST/EMST comparison.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sequences: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, value_parser = parse_format, default_value = "table")]
        format: tunemag::bench::ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: tunemag::Error| e.to_string())
}

fn parse_fallback(s: &str) -> Result<Fallback, String> {
    match s {
        "error" => Ok(Fallback::Error),
        "smst" => Ok(Fallback::Smst),
        other => Err(format!("unknown fallback `{other}` (expected error or smst)")),
    }
}

fn parse_mode(s: &str) -> Result<tunemag::actuator::ActuatorKind, String> {
    s.parse().map_err(|e: tunemag::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<tunemag::bench::ReportFormat, String> {
    s.parse().map_err(|e: tunemag::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { config, sequence, out } => commands::simulate(config.as_deref(), &sequence, out.as_deref()),
        Command::Identify { forc, grid, out } => commands::identify(&forc, grid, out.as_deref()),
        Command::Tune { config, method, targets, fallback, out } => {
            commands::tune(config.as_deref(), method, &targets, fallback, out.as_deref())
        }
        Command::Actuator { config, mode, positions, out, fit_out } => {
            commands::actuator(config.as_deref(), mode, &positions, out.as_deref(), fit_out.as_deref())
        }
        Command::Bench { config, seed, sequences, length, format, out } => {
            commands::bench(config.as_deref(), seed, sequences, length, format, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
