//! Experiment runner for the SIR laboratory crate.
//!
//! Every subcommand reads an optional TOML config, applies flag overrides,
//! writes plot-ready CSV under --out, and prints a short summary. Exit
//! codes: 0 on success, 1 when a run fails or an asserted ordering does
//! not hold, 2 on configuration errors.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{ClosureArgs, CliError, CmdResult};
use config::{ExperimentConfig, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sirlab",
    version,
    about = "Numerical laboratory for the stochastic SIR process and its mean-field limit",
    after_help = "Values come from defaults, then the --config file, then flags."
)]
struct Cli {
    /// TOML experiment file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Transmission rate (also narrows the figure2 rate sweep)
    #[arg(long, global = true, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// Recovery rate
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Population size (also narrows sweep subcommands to this n)
    #[arg(long, global = true)]
    n: Option<u32>,
    /// Initial susceptible fraction
    #[arg(long, global = true, allow_negative_numbers = true)]
    s0: Option<f64>,
    /// Initial infected fraction
    #[arg(long, global = true, allow_negative_numbers = true)]
    i0: Option<f64>,
    /// Horizon
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Output grid step
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Replications (gillespie) or instance count (lemmas)
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the limit system; emits t, y1, y2
    Meanfield,
    /// Solve the exact distribution dynamics; emits moment and closure trajectories
    Master,
    /// Integrate the reduced three-variable system with chosen closure values
    Closure {
        /// Constant covariance closure, in [-1, 1]
        #[arg(long, allow_negative_numbers = true)]
        h1: Option<f64>,
        /// Constant susceptible-square closure, in [-1, 1]
        #[arg(long, allow_negative_numbers = true)]
        h2: Option<f64>,
        /// Constant infected-square closure, in [-1, 1]
        #[arg(long, allow_negative_numbers = true)]
        h3: Option<f64>,
        /// Constant infected-variance share, in [0, 1]
        #[arg(long, allow_negative_numbers = true)]
        h4: Option<f64>,
        /// Finite-size parameter; defaults to 1/n
        #[arg(long, allow_negative_numbers = true)]
        epsilon: Option<f64>,
        /// Extract closure tables from a fresh exact solve instead of constants
        #[arg(long)]
        oracle_h: bool,
    },
    /// Compare exact moments against the limit system under the Gronwall envelope
    Bound,
    /// Event-driven ensemble simulation; emits means, variances and standard errors
    Gillespie,
    /// Randomized sweep of the variance and covariance inequalities
    Lemmas,
    /// Susceptible-mean convergence panels: exact curves against the limit curve
    Figure1,
    /// Six-panel comparison against constant-closure bounding dynamics
    Figure2,
    /// Convergence study: error measures and envelope values across populations
    Converge,
    /// Run the full acceptance suite and write a machine-readable report
    Accept,
}

fn dispatch(cmd: &Command, cfg: &ExperimentConfig) -> CmdResult {
    match cmd {
        Command::Meanfield => commands::meanfield(cfg),
        Command::Master => commands::master(cfg),
        Command::Closure { h1, h2, h3, h4, epsilon, oracle_h } => commands::closure(
            cfg,
            &ClosureArgs { h: [*h1, *h2, *h3, *h4], epsilon: *epsilon, oracle_h: *oracle_h },
        ),
        Command::Bound => commands::bound(cfg),
        Command::Gillespie => commands::gillespie(cfg),
        Command::Lemmas => commands::lemmas(cfg),
        Command::Figure1 => commands::figure1(cfg),
        Command::Figure2 => commands::figure2(cfg),
        Command::Converge => commands::converge(cfg),
        Command::Accept => commands::accept(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        tau: cli.tau,
        gamma: cli.gamma,
        n: cli.n,
        s0: cli.s0,
        i0: cli.i0,
        t_end: cli.t_end,
        dt: cli.dt,
        reps: cli.reps,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref())
        .and_then(|mut cfg| cfg.apply(&overrides).map(|()| cfg));
    let cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli.command, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
