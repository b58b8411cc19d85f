use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csf_ofdm::config::SystemConfig;
use csf_ofdm::estimators::EstimatorKind;
use csf_ofdm::harness::{self, SweepTable};
use csf_ofdm::Error;

/// OFDM channel estimation over doubly-selective channels.
#[derive(Debug, Parser)]
#[command(name = "csf-ofdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a single seeded trial and print its metrics.
    Simulate {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Estimator: ls-interp, mmse-genie, csf-ongrid, csf-offgrid or ideal.
        #[arg(long)]
        estimator: String,
        /// SNR in dB (`inf` for a noiseless run).
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        /// Trial seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the result as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured SNR sweep and write a CSV table.
    Sweep {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exactness and kernel checks.
    Verify {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_config() {
            EXIT_CONFIG
        } else {
            EXIT_RUNTIME
        };
        Self { code, error }
    }
}

/// Any failure to produce a valid config, including an unreadable file, is
/// a config error.
fn load(path: &Path) -> Result<SystemConfig, Failure> {
    SystemConfig::load(path).map_err(|error| Failure {
        code: EXIT_CONFIG,
        error,
    })
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Simulate {
            config,
            estimator,
            snr,
            seed,
            out,
        } => {
            let cfg = load(&config)?;
            let estimator: EstimatorKind = estimator.parse()?;
            let result = harness::run_trial(&cfg, snr, estimator, seed)?;
            if let Some(out) = out {
                let trials = vec![vec![vec![result.clone()]]];
                harness::write_csv(&SweepTable::from_trials(&[snr], &[estimator], &trials), out)?;
            }
            println!("{result}");
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config)?;
            let table = harness::sweep_from_config(&cfg)?;
            harness::write_csv(&table, &out)?;
            println!("wrote {} rows to {}", table.rows.len(), out.display());
        }
        Command::Verify { config } => {
            let cfg = load(&config)?;
            let report = harness::verify_suite(&cfg)?;
            print!("{report}");
            if !report.all_pass() {
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            for line in f.error.to_string().lines() {
                eprintln!("error: {line}");
            }
            ExitCode::from(f.code)
        }
    }
}
