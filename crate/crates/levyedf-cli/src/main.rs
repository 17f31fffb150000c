//! `levyedf`: simulate jump-diffusion increments, estimate truncated
//! empirical distribution functions of the jump measure, and run the Monte
//! Carlo batteries verifying their Gaussian limit behaviour.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod io;
mod spec_parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use io::InputFormat;

#[derive(Parser)]
#[command(name = "levyedf", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the constant algebra from (beta, zeta, tau) and optionally
    /// check a sampling rate exponent y (Delta_n = n^-y).
    CheckConditions {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        tau: f64,
        /// Sampling rate exponent to check against the window and the limit
        /// conditions.
        #[arg(long)]
        y: Option<f64>,
        /// Emit the full report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Simulate an increment path and export it as CSV plus metadata.
    Simulate {
        /// Model spec: exp_jump | stable_tempered:c=..,beta=..,lambda=.. |
        /// variance_gamma:c=..,lambda=.. | @model.json
        #[arg(long)]
        model: String,
        /// Drift spec: const:VALUE | sin:base=..,amp=..,period=..
        #[arg(long, default_value = "const:0")]
        b: String,
        /// Volatility spec, same grammar as --b.
        #[arg(long, default_value = "const:0")]
        sigma: String,
        #[arg(long)]
        n: usize,
        /// Mesh width Delta_n (exclusive with --y).
        #[arg(long)]
        delta: Option<f64>,
        /// Rate exponent: Delta_n = n^-y (exclusive with --delta).
        #[arg(long)]
        y: Option<f64>,
        /// Truncation scale: v_n = gamma * Delta_n^(1/8).
        #[arg(long)]
        gamma: f64,
        /// Override the exact-sampling cutoff (default min(v_n/10, 1e-3)).
        #[arg(long)]
        u_cut: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the truncated empirical distribution function from a CSV of
    /// increments or prices, with pointwise confidence bands.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// increments (one `increment` column) or prices (`timestamp,price`).
        #[arg(long, default_value = "increments")]
        format: String,
        /// Mesh width; required for increments input, inferred for prices.
        #[arg(long)]
        delta: Option<f64>,
        /// Weight spec: poly:p=5 | exp_bump:p=3 | @rho.json
        #[arg(long)]
        rho: String,
        #[arg(long)]
        gamma: f64,
        /// Evaluation grid t0:t1:steps.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Pointwise confidence level.
        #[arg(long, default_value_t = 0.9)]
        level: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full limit-theorem verification battery from a JSON config.
    VerifyClt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the sampling mesh and track the truncated one-step bias against
    /// the Delta^(1/8) envelope.
    BiasStudy {
        #[arg(long)]
        model: String,
        /// Functional spec, same grammar as --rho in estimate.
        #[arg(long)]
        f: String,
        #[arg(long)]
        gamma: f64,
        /// Dyadic ladder lo:hi meaning Delta in {2^-lo, ..., 2^-hi}.
        #[arg(long)]
        dyadic: Option<String>,
        /// Comma-separated list of mesh widths (alternative to --dyadic).
        #[arg(long)]
        deltas: Option<String>,
        /// sup grid t0:t1:steps (+infinity is always appended).
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// exact (one-jump conditioning) or mc.
        #[arg(long, default_value = "exact")]
        method: String,
        /// Monte Carlo sample budget (mc method).
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Fail if the achieved Monte Carlo SE exceeds this (mc method).
        #[arg(long)]
        target_se: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::CheckConditions { beta, zeta, tau, y, json } => {
            commands::check_conditions(beta, zeta, tau, y, json)
        }
        Command::Simulate { model, b, sigma, n, delta, y, gamma, u_cut, seed, out } => {
            commands::simulate(&model, &b, &sigma, n, delta, y, gamma, u_cut, seed, &out)
        }
        Command::Estimate { input, format, delta, rho, gamma, grid, level, out } => {
            let format: InputFormat = format.parse()?;
            commands::estimate(&input, format, delta, &rho, gamma, &grid, level, &out)
        }
        Command::VerifyClt { config, out } => commands::verify_clt(&config, &out),
        Command::BiasStudy {
            model,
            f,
            gamma,
            dyadic,
            deltas,
            grid,
            method,
            samples,
            target_se,
            seed,
            out,
        } => commands::bias_study(
            &model,
            &f,
            gamma,
            dyadic.as_deref(),
            deltas.as_deref(),
            &grid,
            &method,
            samples,
            target_se,
            seed,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
