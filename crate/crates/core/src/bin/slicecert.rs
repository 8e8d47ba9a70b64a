use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use slicecert::cli::{self, LoadedSystem};
use slicecert::dynamics::ProbeOptions;
use slicecert::Error;

#[derive(Parser)]
#[command(name = "slicecert", version, about = "Slice-Hessian stability certificates for relative equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PointArg {
    /// Override the base point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a system definition.
    Validate { file: PathBuf },
    /// Momentum value, isotropy algebras and Witt-Artin dimensions at the point.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        point: PointArg,
    },
    /// Search for a definite slice Hessian.
    Certify {
        file: PathBuf,
        /// Evaluate at this velocity only, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        velocity: Option<Vec<f64>>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        point: PointArg,
    },
    /// Integrate perturbed trajectories and measure the distance to the orbit.
    Probe {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        #[arg(long, default_value_t = 100.0)]
        escape_factor: f64,
        /// Write the first trajectory to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        point: PointArg,
    },
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    message: String,
}

fn emit<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn load(file: &Path, point: Option<Vec<f64>>) -> Result<LoadedSystem, Error> {
    cli::load_system(file)?.with_point(point)
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Validate { file } => {
            let loaded = load(&file, None)?;
            let report = cli::cmd_validate(&loaded);
            eprintln!("valid: dim {}, algebra dim {}", report.dim, report.algebra_dim);
            emit(&report);
            Ok(cli::EXIT_STABLE)
        }
        Command::Analyze { file, point } => {
            let loaded = load(&file, point.point)?;
            let report = cli::cmd_analyze(&loaded)?;
            let [t0, t, n, n0] = report.witt_artin_dims;
            eprintln!(
                "mu = {:?}; dim h = {}, dim k = {}, dim n = {}; (T0, T, N, N0) = ({t0}, {t}, {n}, {n0})",
                report.mu, report.dim_h, report.dim_k, report.dim_n
            );
            emit(&report);
            Ok(cli::EXIT_STABLE)
        }
        Command::Certify { file, velocity, seed, point } => {
            let loaded = load(&file, point.point)?;
            let cert = cli::cmd_certify(&loaded, velocity.as_deref(), seed)?;
            eprintln!(
                "{:?} at xi = {:?}, margin {:.3e}: {}",
                cert.verdict, cert.xi_star, cert.margin, cert.note
            );
            emit(&cert);
            Ok(cli::exit_code_for_certificate(&cert))
        }
        Command::Probe {
            file,
            epsilon,
            horizon,
            samples,
            dt,
            escape_factor,
            csv,
            seed,
            point,
        } => {
            let loaded = load(&file, point.point)?;
            let opts = ProbeOptions {
                epsilon,
                horizon,
                samples,
                dt,
                escape_factor,
                seed,
                record_trace: csv.is_some(),
            };
            let report = cli::cmd_probe(&loaded, &opts)?;
            if let Some(path) = csv {
                cli::write_trace_csv(&report, BufWriter::new(File::create(path)?))?;
            }
            eprintln!(
                "escaped = {}, max orbit distance {:.3e}, energy drift {:.3e}, momentum drift {:.3e}",
                report.escaped, report.max_orbit_distance, report.energy_drift, report.momentum_drift
            );
            emit(&report);
            Ok(cli::EXIT_STABLE)
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            emit(&ErrorReport {
                error: format!("{err:?}").split([' ', '(', '{']).next().unwrap_or("Error").to_string(),
                message: err.to_string(),
            });
            ExitCode::from(cli::exit_code_for(&err))
        }
    }
}
