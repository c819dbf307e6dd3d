use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qosgame_cli::commands::{self, Report};
use qosgame_cli::output::thread_pool;
use qosgame_cli::validate::{self, Scale};
use qosgame_cli::{CliError, Result, Scenario};

/// Energy-efficient power and rate control games with delay constraints.
#[derive(Debug, Parser)]
#[command(name = "qosgame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the table (or report) here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// RNG seed; overrides the scenario's.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Exit with status 3 when the scenario is infeasible.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Efficiency-optimal SIR for a packet size.
    GammaStar {
        #[arg(long, value_name = "M")]
        packet_bits: Option<u32>,
    },
    /// Utility-loss ratios over the class load split.
    PcgSweep,
    /// Rate, size, capacity and goodput over a source-rate sweep.
    PrcgSweep,
    /// Admission test and equilibrium for the listed users.
    PrcgAdmit,
    /// Best-response power dynamics; the table is the trajectory.
    BestResponse,
    /// Monte Carlo and best-response oracle suite.
    Validate {
        #[arg(long, default_value = "full")]
        scale: Scale,
    },
}

fn load(common: &Common) -> Result<Scenario> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut s = Scenario::load(path)?;
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write_to(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(CliError::Io)
}

fn emit(report: &Report, out: Option<&Path>, strict: bool) -> Result<()> {
    let summary = format!(
        "{}\n",
        serde_json::to_string_pretty(&report.summary).expect("summary serializes")
    );
    match (&report.csv, out) {
        (Some(csv), Some(path)) => {
            write_to(path, csv)?;
            std::io::stdout().write_all(summary.as_bytes())?;
        }
        (Some(csv), None) => {
            std::io::stdout().write_all(csv)?;
            std::io::stderr().write_all(summary.as_bytes())?;
        }
        (None, Some(path)) => write_to(path, summary.as_bytes())?,
        (None, None) => std::io::stdout().write_all(summary.as_bytes())?,
    }
    match &report.infeasible {
        Some(why) if strict => Err(CliError::Infeasible(why.clone())),
        Some(why) => {
            eprintln!("warning: {why}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let out_for = |s: &Scenario| {
        common
            .out
            .clone()
            .or_else(|| s.output.as_ref().and_then(|o| o.csv.clone()))
    };
    match cli.command {
        Command::GammaStar { packet_bits } => {
            let bits = match (packet_bits, &common.config) {
                (Some(m), _) => m,
                (None, Some(_)) => load(common)?.system.packet_bits,
                (None, None) => 100,
            };
            emit(&commands::gamma_star(bits)?, common.out.as_deref(), false)
        }
        Command::PcgSweep => {
            let s = load(common)?;
            let report = commands::pcg_sweep(&s, &thread_pool()?)?;
            emit(&report, out_for(&s).as_deref(), common.strict)
        }
        Command::PrcgSweep => {
            let s = load(common)?;
            let report = commands::prcg_sweep(&s, &thread_pool()?)?;
            emit(&report, out_for(&s).as_deref(), common.strict)
        }
        Command::PrcgAdmit => {
            let s = load(common)?;
            emit(
                &commands::prcg_admit(&s)?,
                out_for(&s).as_deref(),
                common.strict,
            )
        }
        Command::BestResponse => {
            let s = load(common)?;
            emit(
                &commands::best_response(&s)?,
                out_for(&s).as_deref(),
                common.strict,
            )
        }
        Command::Validate { scale } => {
            let seed = match (common.seed, &common.config) {
                (Some(seed), _) => seed,
                (None, Some(_)) => load(common)?.seed,
                (None, None) => validate::DEFAULT_SEED,
            };
            let report = validate::run(seed, scale, &thread_pool()?)?;
            match &common.out {
                Some(path) => write_to(path, report.text.as_bytes())?,
                None => std::io::stdout().write_all(report.text.as_bytes())?,
            }
            if report.failures > 0 {
                return Err(CliError::Validation(report.failures));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
