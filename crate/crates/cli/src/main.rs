mod commands;
mod config;
mod failure;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::parse::NList;

#[derive(Parser)]
#[command(name = "tangency", version, about = "Numerical laboratory for an unfolding homoclinic tangency")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the JSON report and CSV files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    /// Contraction rate λ of the saddle.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Expansion rate σ of the saddle.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form sink of the n-th return map, refined by Newton.
    Sink {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<u32>,
        /// Parameter value; defaults to μ_n.
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
    },
    /// Distance between renormalized return maps and the limit family.
    RenormSweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Return times, e.g. `2:12`, `10:30:2` or `4,6,9`.
        #[arg(long)]
        n_list: Option<NList>,
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
        /// Half-width of the lattice `[-k, k]^m`.
        #[arg(long)]
        k: Option<f64>,
        /// Lattice points per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// TOML file with general coefficients; switches to the m-dimensional sweep.
        #[arg(long)]
        general: Option<PathBuf>,
        /// `csv` or `json`.
        #[arg(long)]
        format: Option<String>,
    },
    /// Whether the unstable manifold point (1, μ) is captured by the new sink.
    Capture {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
    },
    /// Grows the unstable manifold of the saddle.
    Manifold {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
        /// With `--nu`, sets μ = μ(ν) for this return time.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        max_gap: Option<f64>,
    },
    /// Classifies a grid of initial points by forward simulation.
    Basin {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// Half-width of the square in renormalized units, as a fraction of r_ν.
        #[arg(long)]
        delta: Option<f64>,
        /// Explicit bounds `x_min,x_max,y_min,y_max`; overrides `--delta`.
        #[arg(long, value_delimiter = ',', num_args = 4, allow_negative_numbers = true)]
        bounds: Option<Vec<f64>>,
        #[arg(long)]
        trap_radius: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Estimates the Milnor attractor by sampling and optionally probes its stability.
    Attractor {
        #[command(flatten)]
        model: ModelArgs,
        /// `contraction`, `circle-semistable` or `planar`.
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        transient: Option<usize>,
        #[arg(long)]
        tail: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Return time for the planar map; the sampling box surrounds its sink.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
        /// Also run the stability probe.
        #[arg(long)]
        probe: bool,
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        eps_out: Option<f64>,
        #[arg(long)]
        delta_in: Option<f64>,
    },
    /// Assembles the instability certificate.
    Certify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n_list: Option<NList>,
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
    },
    /// Classifies a spectrum given by eigenvalues or by orbit Jacobians.
    ClassifySpectrum {
        /// Eigenvalues such as `2,0.3+0.1i,0.3-0.1i`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eig: Vec<String>,
        /// Step Jacobian, rows separated by `;`. Repeat in orbit order.
        #[arg(long, allow_hyphen_values = true)]
        jacobian: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli.common, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code as u8)
        }
    }
}
