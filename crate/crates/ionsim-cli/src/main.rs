//! Command-line front end for the trapped-ion noise simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical invariant
//! violation, 4 fit non-convergence.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_sideband, CliError, FileConfig, OutputFormat, ResolvedConfig};
use ionsim::SidebandKind;

#[derive(Parser)]
#[command(
    name = "ionsim",
    version,
    about = "Single trapped-ion decoherence under laser intensity and phase noise",
    after_help = "Times, rates, and frequencies are in scaled units (tau = Omega0 t, \
                  Omega0 = 1) unless --physical is given, in which case inputs are in \
                  seconds and Hz and are converted once at startup."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate the master equation and export the ground-state population
    Simulate,
    /// Run all solvers on one configuration and tabulate pairwise deviations
    Compare,
    /// Sweep initial levels, fit each decay, and regress the rate power law
    SweepFit,
    /// Average stochastic trajectories into a trace with standard errors
    Trajectories,
    /// Sample noisy pulse areas and compare their moments with predictions
    PulseArea,
    /// Print the catalog of published-vs-implemented formula discrepancies
    ReportErrata,
}

impl Command {
    fn default_out(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::SweepFit => "sweep-fit",
            Command::Trajectories => "trajectories",
            Command::PulseArea => "pulse-area",
            Command::ReportErrata => "-",
        }
    }
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override file values. A sidecar from
    /// an earlier run is accepted and replays that run.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Drive tuning: carrier, red-sideband, blue-sideband, second-red-sideband
    #[arg(long, global = true, value_parser = parse_sideband)]
    sideband: Option<SidebandKind>,

    /// Initial Fock level of the ground-state ion
    #[arg(long, global = true, value_name = "N")]
    n: Option<usize>,

    /// Lamb-Dicke parameter, in (0, 1)
    #[arg(long, global = true)]
    eta: Option<f64>,

    /// Intensity-noise strength (scaled: Gamma' = Gamma Omega0)
    #[arg(long, global = true)]
    gamma: Option<f64>,

    /// Phase-noise diffusion rate; silences the default gamma
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Grid start time
    #[arg(long, global = true)]
    t0: Option<f64>,

    /// Grid end time
    #[arg(long, global = true)]
    tmax: Option<f64>,

    /// Number of grid points, endpoints included
    #[arg(long, global = true)]
    points: Option<usize>,

    /// Trajectory substep size
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Number of stochastic trajectories
    #[arg(long, global = true)]
    ntraj: Option<usize>,

    /// Master seed; every trajectory derives its own stream from it
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Fock-space truncation (highest retained level)
    #[arg(long, global = true)]
    nmax: Option<usize>,

    /// Master-equation substep bound as a fraction of 1/||G||
    #[arg(long, global = true)]
    step_factor: Option<f64>,

    /// First initial level of a sweep
    #[arg(long, global = true)]
    n_from: Option<usize>,

    /// Last initial level of a sweep
    #[arg(long, global = true)]
    n_to: Option<usize>,

    /// Pulse duration for pulse-area sampling
    #[arg(long, global = true)]
    t_pulse: Option<f64>,

    /// Number of pulse-area samples
    #[arg(long, global = true)]
    n_samples: Option<usize>,

    /// Interpret times in seconds and the drive frequency in Hz
    #[arg(long, global = true, requires = "omega0_hz")]
    physical: bool,

    /// Drive Rabi frequency in Hz (physical mode)
    #[arg(long, global = true)]
    omega0_hz: Option<f64>,

    /// Output stem; files are written as <out>.csv / <out>.json
    #[arg(long, global = true)]
    out: Option<String>,

    /// Trace export format
    #[arg(long, global = true, value_parser = OutputFormat::parse)]
    format: Option<OutputFormat>,

    /// Worker threads for ensembles (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Flags {
    fn layer(&self) -> FileConfig {
        FileConfig {
            sideband: self.sideband,
            n_init: self.n,
            eta: self.eta,
            scaled: self.physical.then_some(false),
            omega0_hz: self.omega0_hz,
            gamma: self.gamma,
            lambda: self.lambda,
            t0: self.t0,
            tmax: self.tmax,
            points: self.points,
            dt: self.dt,
            n_traj: self.ntraj,
            seed: self.seed,
            n_max: self.nmax,
            step_factor: self.step_factor,
            n_from: self.n_from,
            n_to: self.n_to,
            t_pulse: self.t_pulse,
            n_samples: self.n_samples,
            out: self.out.clone(),
            format: self.format,
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.flags.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot configure thread pool: {e}")))?;
    }
    let cfg: ResolvedConfig = config::resolve(
        cli.flags.config.as_deref(),
        cli.flags.layer(),
        cli.command.default_out(),
    )?;
    match cli.command {
        Command::Simulate => run::cmd_simulate(&cfg),
        Command::Compare => run::cmd_compare(&cfg),
        Command::SweepFit => run::cmd_sweep_fit(&cfg),
        Command::Trajectories => run::cmd_trajectories(&cfg),
        Command::PulseArea => run::cmd_pulse_area(&cfg),
        Command::ReportErrata => run::cmd_report_errata(&cfg.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
