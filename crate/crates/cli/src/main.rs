//! `gatecrit`: critical gains, order parameters, Lyapunov exponents, spectra
//! and reservoir benchmarks for randomly initialized gated recurrent networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

pub const JOBS_ENV: &str = "GATECRIT_JOBS";

#[derive(Parser, Debug)]
#[command(name = "gatecrit", version, about, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Flat `section.key = value` file; flags override it, it overrides defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file. Without it, results go to $GATECRIT_OUT_DIR/<subcommand>.<ext> if set, else stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format, csv or json [default: csv, or json for a .json --out path]
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Worker threads for replica parallelism; 1 runs sequentially [default: $GATECRIT_JOBS, else all cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed; replica r uses a seed derived from it [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log verbosity (error, warn, info, debug) [default: warn]
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log: Option<String>,
}

/// Network and initialization settings shared by the simulation subcommands.
#[derive(Args, Debug, Clone, Default)]
pub struct NetArgs {
    /// Architecture: lstm, gru or rnn [default: lstm]
    #[arg(long)]
    pub arch: Option<String>,
    /// Hidden size N [default: subcommand specific]
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Bias scheme: zero, gaussian or chrono [default: gaussian if --sb > 0, else zero]
    #[arg(long)]
    pub bias: Option<String>,
    /// Gate-bias standard deviation s_b for the gaussian scheme; a list for phase and
    /// reservoir heatmaps [default: 0; phase: 0,1,2,3; heatmap: 0,0.5,1,1.5,2]
    #[arg(long)]
    pub sb: Option<String>,
    /// Candidate-bias standard deviation s_c [default: 0]
    #[arg(long)]
    pub sc: Option<f64>,
    /// Chrono T_max (> 2) [default: 1000]
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Chrono output-gate bias standard deviation; 0 means b_o = 0 [default: 0]
    #[arg(long)]
    pub so: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BenettinArgs {
    /// Total Benettin steps, transient included [default: 3000]
    #[arg(long = "t")]
    pub t: Option<usize>,
    /// Discarded leading steps [default: 200]
    #[arg(long)]
    pub transient: Option<usize>,
    /// Separation between reference and perturbed trajectory [default: 1e-7]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Batches for the batch-means standard error [default: 10]
    #[arg(long)]
    pub batches: Option<usize>,
    /// Constant initial state h0 = value * ones [default: 1.0]
    #[arg(long)]
    pub h0: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CrossingArgs {
    /// Lower end of the bisection bracket [default: 1.0, or 0.5 g_c for phase]
    #[arg(long)]
    pub g_lo: Option<f64>,
    /// Upper end of the bisection bracket [default: 3.0, or 1.5 g_c for phase]
    #[arg(long)]
    pub g_hi: Option<f64>,
    /// Stop when the bracket is narrower than this [default: 5e-3]
    #[arg(long)]
    pub tol_g: Option<f64>,
    /// per-replica or shared-bracket [default: per-replica]
    #[arg(long)]
    pub crossing: Option<String>,
    /// Interior points per refinement round, 1 = bisection [default: 1]
    #[arg(long)]
    pub interior: Option<usize>,
    /// Bracket widenings allowed per replica [default: 3]
    #[arg(long)]
    pub max_expand: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Critical gain g_c from the boundary criterion
    Gc {
        #[command(flatten)]
        net: NetArgs,
        /// asymptotic (N -> infinity expectation) or finite (sampled biases) [default: asymptotic]
        #[arg(long)]
        mode: Option<String>,
        /// Realizations averaged in finite mode [default: 1]
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Long-time order parameter q_inf versus gain
    Qinf {
        #[command(flatten)]
        net: NetArgs,
        /// Gain grid, comma list or start:stop:step [default: 0.5:4:0.5]
        #[arg(long)]
        gains: Option<String>,
        /// Steps per trajectory [default: 2000]
        #[arg(long = "t")]
        t: Option<usize>,
        /// Replicas [default: 10]
        #[arg(long)]
        replicas: Option<usize>,
        /// Final steps averaged for q_inf [default: min(T/4, 500)]
        #[arg(long)]
        tail_window: Option<usize>,
        /// Constant initial state h0 = value * ones [default: 1.0]
        #[arg(long)]
        h0: Option<f64>,
    },
    /// Maximal Lyapunov exponent on a gain grid, or its zero crossing
    Lyapunov {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        benettin: BenettinArgs,
        #[command(flatten)]
        crossing: CrossingArgs,
        /// grid or bisect [default: grid]
        #[arg(long)]
        mode: Option<String>,
        /// Gain grid for grid mode [default: 1:3:0.25]
        #[arg(long)]
        gains: Option<String>,
        /// Replicas [default: 10]
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Predicted and empirical critical gain versus bias spread s_b (gaussian biases)
    Phase {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        benettin: BenettinArgs,
        #[command(flatten)]
        crossing: CrossingArgs,
        /// predicted, empirical or both [default: both]
        #[arg(long)]
        mode: Option<String>,
        /// Replicas [default: 10]
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Spectral radius of the Jacobian at the origin versus gain
    Spectrum {
        #[command(flatten)]
        net: NetArgs,
        /// Gain grid [default: 0:3:0.25]
        #[arg(long)]
        gains: Option<String>,
        /// Replicas [default: 5]
        #[arg(long)]
        replicas: Option<usize>,
        /// Power-iteration tolerance [default: 1e-8]
        #[arg(long)]
        tol: Option<f64>,
        /// Power-iteration step limit [default: 5000]
        #[arg(long)]
        max_iters: Option<usize>,
        /// Random restarts [default: 8]
        #[arg(long)]
        restarts: Option<usize>,
        /// Dump all eigenvalues (re, im) of replica 0 instead; needs one gain and N <= 300
        #[arg(long)]
        eigenvalues: bool,
    },
    /// Mackey-Glass forecasting with the network as a reservoir
    Reservoir {
        #[command(flatten)]
        net: NetArgs,
        /// sweep (g/g_c at one s_b) or heatmap (s_b x g/g_c, row-normalized accuracy) [default: sweep]
        #[arg(long)]
        mode: Option<String>,
        /// g/g_c grid [default: 0.5,0.75,0.9,1,1.1,1.25,1.5,2]
        #[arg(long)]
        ratios: Option<String>,
        /// Number of realizations; seed i is derived from the master seed [default: 5]
        #[arg(long)]
        seeds: Option<usize>,
        /// Training samples [default: 3000]
        #[arg(long)]
        train: Option<usize>,
        /// Test samples [default: 1000]
        #[arg(long)]
        test: Option<usize>,
        /// Reservoir washout steps [default: 500]
        #[arg(long)]
        washout: Option<usize>,
        /// Mackey-Glass washout samples [default: 1000]
        #[arg(long)]
        mg_washout: Option<usize>,
        /// Ridge penalty [default: 1e-6]
        #[arg(long)]
        ridge: Option<f64>,
        /// Input amplitude, x_t = scale * u(t) [default: 1.0]
        #[arg(long)]
        input_scale: Option<f64>,
        /// Constant Mackey-Glass history [default: 1.2]
        #[arg(long)]
        history: Option<f64>,
    },
    /// Generate a Mackey-Glass series
    MackeyGlass {
        /// Generated samples, washout included [default: 11000]
        #[arg(long)]
        length: Option<usize>,
        /// Leading samples dropped [default: 1000]
        #[arg(long)]
        washout: Option<usize>,
        /// Constant history value [default: 1.2]
        #[arg(long)]
        history: Option<f64>,
        /// beta [default: 0.2]
        #[arg(long)]
        beta: Option<f64>,
        /// gamma [default: 0.1]
        #[arg(long)]
        gamma: Option<f64>,
        /// Hill exponent n [default: 10]
        #[arg(long)]
        exponent: Option<i32>,
        /// Delay tau [default: 25]
        #[arg(long)]
        tau: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    let level = cli.global.log.clone().unwrap_or_else(|| "warn".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": ").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
