//! `swtg` command line: generation, time advancement, diagnostics, band
//! planning and the self-validation suite.
//!
//! Exit codes: 0 on success, 1 when a validation check fails, 2 on usage
//! or configuration errors. Every failure prints a single line with the
//! `error:` prefix.

mod commands;
mod validate;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "swtg", version, about = "Stochastic wavelet turbulence generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap worker threads (results are thread-count independent).
    #[arg(long)]
    threads: Option<usize>,
    /// RANS profile CSV (overrides the path in the config).
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a static turbulence field and export it as SWTG.
    Generate {
        #[command(subcommand)]
        case: GenerateCase,
    },
    /// Advance a mode set in time, recording probe velocities.
    Evolve {
        #[command(flatten)]
        opts: RunOpts,
        /// Output prefix; writes `<out>_probes.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Field and time-series diagnostics.
    Diagnose {
        #[command(subcommand)]
        what: DiagnoseCase,
    },
    /// Export the per-location retained wavenumber band as CSV.
    Bandplan {
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in validation suite at desk scale.
    Validate {
        /// Smaller grids and ensembles (a few minutes on 4 cores).
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Regenerate bundled fixtures.
    Fixture {
        #[command(subcommand)]
        which: FixtureCase,
    },
}

#[derive(Subcommand)]
enum GenerateCase {
    /// Homogeneous isotropic turbulence from `[spectrum]` parameters.
    Hit {
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wall-bounded flow from a `[profile]` CSV.
    Channel {
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DiagnoseCase {
    /// Shell-averaged energy spectrum of a periodic field.
    Spectrum {
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Second-order structure functions.
    Structure {
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Largest separation; defaults to a quarter of the box.
        #[arg(long)]
        max_r: Option<f64>,
    },
    /// Eulerian autocorrelation of an evolve probe series.
    Autocorr {
        probes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        max_lag: usize,
    },
    /// Ensemble Reynolds stress profile against the gamma-scaled target.
    Reynolds {
        /// SWTG fields forming the ensemble.
        fields: Vec<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference divergence summary.
    Divergence {
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FixtureCase {
    /// Synthetic log-law channel profile.
    Channel {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Maps every failure onto the documented exit codes.
pub enum Failure {
    /// Usage or configuration problem (exit 2).
    Usage(String),
    /// A validation check failed (exit 1).
    Validation(String),
}

impl Failure {
    fn usage(err: impl std::fmt::Display) -> Self {
        Failure::Usage(err.to_string())
    }
}

impl From<swtg::Error> for Failure {
    fn from(err: swtg::Error) -> Self {
        Failure::Usage(err.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::Usage(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Let clap print its rich help/version output for those flows.
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {}", err.kind());
            let _ = err.print();
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn install_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::usage)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { case } => match case {
            GenerateCase::Hit { opts, out } => {
                install_threads(opts.threads)?;
                commands::generate_hit(&opts, &out)
            }
            GenerateCase::Channel { opts, out } => {
                install_threads(opts.threads)?;
                commands::generate_channel(&opts, &out)
            }
        },
        Command::Evolve { opts, out } => {
            install_threads(opts.threads)?;
            commands::evolve(&opts, &out)
        }
        Command::Diagnose { what } => match what {
            DiagnoseCase::Spectrum { field, out } => commands::diagnose_spectrum(&field, &out),
            DiagnoseCase::Structure { field, out, max_r } => {
                commands::diagnose_structure(&field, &out, max_r)
            }
            DiagnoseCase::Autocorr {
                probes,
                out,
                max_lag,
            } => commands::diagnose_autocorr(&probes, &out, max_lag),
            DiagnoseCase::Reynolds { fields, opts, out } => {
                commands::diagnose_reynolds(&fields, &opts, &out)
            }
            DiagnoseCase::Divergence { field, out } => {
                commands::diagnose_divergence(&field, out.as_deref())
            }
        },
        Command::Bandplan { opts, out } => commands::bandplan(&opts, &out),
        Command::Validate { quick, threads } => {
            install_threads(threads)?;
            validate::run(quick)
        }
        Command::Fixture { which } => match which {
            FixtureCase::Channel { out } => commands::fixture_channel(&out),
        },
    }
}
