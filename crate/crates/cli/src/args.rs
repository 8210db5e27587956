use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use psodrift::{FixedPointConfig, OmegaConfig, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "psodrift", version, about = "Convergence analysis of PSO parameter triples")]
pub struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drift and verdict for a single parameter triple (JSON).
    #[command(allow_negative_numbers = true)]
    Omega {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        /// Also write the stationary angle CDF as CSV (beta, cdf, density).
        #[arg(long)]
        dump_cdf: Option<PathBuf>,
    },
    /// The nine standard parameter sets with reference and computed drift (CSV).
    #[command(allow_negative_numbers = true)]
    Table1 {
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Convergence frontier c*(chi) on the diagonal c_l = c_g (CSV).
    #[command(allow_negative_numbers = true)]
    Boundary {
        #[arg(long, default_value_t = -0.9)]
        chi_min: f64,
        #[arg(long, default_value_t = 0.9)]
        chi_max: f64,
        /// Number of intervals; steps + 1 rows are produced.
        #[arg(long, default_value_t = 18)]
        steps: usize,
        /// Final bisection bracket width.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Upper end of the bisection bracket.
        #[arg(long, default_value_t = psodrift::boundary::DEFAULT_C_HI)]
        c_hi: f64,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Drift over a (chi, c) grid with c_l = c_g = c, row-major in chi (CSV).
    #[command(allow_negative_numbers = true)]
    Grid {
        #[arg(long, default_value_t = -1.0)]
        chi_min: f64,
        #[arg(long, default_value_t = 1.0)]
        chi_max: f64,
        /// Number of chi values.
        #[arg(long, default_value_t = 21)]
        chi_count: usize,
        #[arg(long, default_value_t = -0.5)]
        c_min: f64,
        #[arg(long, default_value_t = 4.5)]
        c_max: f64,
        /// Number of c values.
        #[arg(long, default_value_t = 26)]
        c_count: usize,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Monte Carlo run of the single-particle recurrence (JSON).
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the angle histogram as CSV (bin_midpoint, density).
        #[arg(long)]
        histogram: Option<PathBuf>,
        /// Compare against the numerically computed drift.
        #[arg(long)]
        compare: bool,
        #[command(flatten)]
        numerics: NumericArgs,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub chi: f64,
    #[arg(long = "cl")]
    pub c_l: f64,
    #[arg(long = "cg")]
    pub c_g: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct NumericArgs {
    /// Knots of the starting CDF spline.
    #[arg(long, default_value_t = 64)]
    pub initial_knots: usize,
    /// Knot budget of the CDF spline.
    #[arg(long, default_value_t = 2048)]
    pub max_knots: usize,
    /// Knots of the drift quadrature.
    #[arg(long, default_value_t = 8192)]
    pub quadrature_knots: usize,
    /// L2 distance between iterates that counts as converged.
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    /// Weight of the previous iterate in each fixed-point update.
    #[arg(long, default_value_t = 0.1)]
    pub blend: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iterations: usize,
    /// Distance from +-pi/2 kept by the drift integral when chi = 0.
    #[arg(long, default_value_t = 1e-15)]
    pub clip: f64,
}

impl NumericArgs {
    pub fn config(&self) -> OmegaConfig {
        OmegaConfig {
            fixed_point: FixedPointConfig {
                initial_knots: self.initial_knots,
                max_knots: self.max_knots,
                l2_tolerance: self.tolerance,
                blend_factor: self.blend,
                max_iterations: self.max_iterations,
                ..FixedPointConfig::default()
            },
            quadrature_knots: self.quadrature_knots,
            boundary_clip: self.clip,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub bins: usize,
    #[arg(long, default_value_t = 100)]
    pub batches: usize,
    /// Leading share of iterations excluded from the statistics.
    #[arg(long, default_value_t = 0.01)]
    pub burn_in: f64,
}

impl SimArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            iterations: self.iterations,
            seed: self.seed,
            histogram_bins: self.bins,
            batch_count: self.batches,
            burn_in_fraction: self.burn_in,
        }
    }
}
