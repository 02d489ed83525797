use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cabm",
    version,
    about = "Coalescing/annihilating Brownian motions: simulation and Pfaffian checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. All are optional so that a config file
/// can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Reaction parameter: annihilation probability per collision.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Observation time.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Simulation time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Monte Carlo replicas.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed; falls back to the config file, then `CABM_SEED`, then 42.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial data: `maximal`, inline JSON, or a path to a JSON file.
    #[arg(long)]
    pub data: Option<String>,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Standard-error multiplier of the pass rule.
    #[arg(long)]
    pub z: Option<f64>,
    /// Bias allowance added to the statistical tolerance.
    #[arg(long)]
    pub bias: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicas and dump configurations.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Start from the lattice `lo:hi:spacing` instead of `--data`.
        #[arg(long, allow_hyphen_values = true)]
        lattice: Option<String>,
        /// Equally spaced snapshots per replica after `t = 0`.
        #[arg(long, default_value_t = 1)]
        snapshots: usize,
    },
    /// Tabulate K and its derivatives for all grid pairs `x <= y`.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// `lo:hi:step`.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Use the generic quadrature instead of the fast path.
        #[arg(long)]
        quadrature: bool,
    },
    /// Pfaffian of K against the simulated duality statistic.
    DualityCheck {
        #[command(flatten)]
        common: Common,
        /// Batteries of increasing points, `;`-separated, e.g. `-1,1;-1,0,0.5,2`.
        #[arg(long, allow_hyphen_values = true)]
        points: Option<String>,
        /// Also simulate at `2 dt` and widen the bias allowance to the gap.
        #[arg(long)]
        dt_gap: bool,
    },
    /// Pfaffian intensities against simulated histograms.
    IntensityCheck {
        #[command(flatten)]
        common: Common,
        /// Start from the lattice `lo:hi:spacing` (required for non-finite data).
        #[arg(long, allow_hyphen_values = true)]
        lattice: Option<String>,
        /// Histogram bins `lo:hi:count`.
        #[arg(long, allow_hyphen_values = true, default_value = "-2:2:8")]
        bins: String,
        /// Bin pairs for the two-point intensity, e.g. `3,4;2,5`.
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long, default_value_t = 0.02)]
        relative_bias: f64,
    },
    /// Fredholm Pfaffian series for `E[prod(1 - phi(x_i))]`.
    Laplace {
        #[command(flatten)]
        common: Common,
        /// `a:b:c` for `c` on `(a, b)`, or a step function as JSON / file.
        #[arg(long, allow_hyphen_values = true)]
        phi: String,
        /// Target for the tail majorant.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 12)]
        k_max: usize,
        /// Also estimate by simulation.
        #[arg(long)]
        mc: bool,
        /// Lattice start `lo:hi:spacing` for the simulation.
        #[arg(long, allow_hyphen_values = true)]
        lattice: Option<String>,
    },
    /// Clustered-start mixture identities and survivor probabilities.
    MixtureCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: u32,
        /// Spacing of the clustered start.
        #[arg(long)]
        eps: Option<f64>,
        /// Observation time of the survivor count.
        #[arg(long)]
        survivor_t: Option<f64>,
        /// Skip the run at `eps / 2`.
        #[arg(long)]
        no_halving: bool,
        /// Skip the clustered duality part.
        #[arg(long)]
        no_duality: bool,
    },
    /// Sign-change measure of the n-th block approximation of a step function.
    Approx {
        #[command(flatten)]
        common: Common,
        /// Step function as JSON or a path to a JSON file.
        #[arg(long)]
        f: String,
        #[arg(long)]
        n: u32,
    },
    /// Run the acceptance suite.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Reduced replica counts.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion ids.
        #[arg(long)]
        only: Option<String>,
        /// Include wall-clock times (makes the output run-dependent).
        #[arg(long)]
        timings: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Kernel { .. } => "kernel",
            Command::DualityCheck { .. } => "duality-check",
            Command::IntensityCheck { .. } => "intensity-check",
            Command::Laplace { .. } => "laplace",
            Command::MixtureCheck { .. } => "mixture-check",
            Command::Approx { .. } => "approx",
            Command::Selftest { .. } => "selftest",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Kernel { common, .. }
            | Command::DualityCheck { common, .. }
            | Command::IntensityCheck { common, .. }
            | Command::Laplace { common, .. }
            | Command::MixtureCheck { common, .. }
            | Command::Approx { common, .. }
            | Command::Selftest { common, .. } => common,
        }
    }
}
