use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridstab::buslib::BusId;
use hybridstab::cli::{self, Overrides};

/// Small-signal stability certificates and linear simulation for hybrid AC/DC grids.
#[derive(Parser)]
#[command(name = "hybridstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the bus-level and DC-coherency conditions.
    Check {
        case: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Simulate the case's load steps and emit a time-series CSV.
    Simulate {
        case: PathBuf,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a frequency-sweep CSV.
    Sweep {
        case: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kron-reduce the AC network onto the listed buses.
    Kron {
        case: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        keep: Vec<BusId>,
        /// Write the reduced case file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Radius of the low-frequency region, rad/s.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

impl GridArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            delta: self.delta,
            grid_min: self.grid_min,
            grid_max: self.grid_max,
            points: self.points,
            ..Overrides::default()
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_INPUT as u8 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var("HYBRIDSTAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: HYBRIDSTAB_THREADS must be a positive integer");
                return ExitCode::from(cli::EXIT_INPUT as u8);
            }
        }
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut err = io::stderr();
    let result = match &cli.command {
        Command::Check { case, grid, json } => cli::cmd_check(case, &grid.overrides(), *json, &mut out),
        Command::Simulate { case, t_end, dt, out: path } => {
            let ov = Overrides {
                t_end: *t_end,
                dt: *dt,
                ..Overrides::default()
            };
            cli::cmd_simulate(case, &ov, path.as_deref(), &mut out, &mut err)
        }
        Command::Sweep { case, grid, out: path } => cli::cmd_sweep(case, &grid.overrides(), path.as_deref(), &mut out),
        Command::Kron { case, keep, out: path } => cli::cmd_kron(case, keep, path.as_deref(), &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        Err(hybridstab::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::error_exit_code(&e) as u8)
        }
    }
}
