//! `kinetica`: command-line front end for the reaction-network toolkit.
//!
//! Every verb reads a network file, writes machine artifacts into `--out`
//! and prints diagnostics on standard error. Exit codes: 0 success, 1 usage
//! error, 2 the analysis found a violation, 3 runtime failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "kinetica", version, about = "Stochastic and mean-field chemical kinetics")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Network description in the line-oriented text format.
    #[arg(long, value_name = "PATH")]
    pub network: PathBuf,
    /// Directory receiving every artifact; created when missing.
    #[arg(long, value_name = "DIR", default_value = "kinetica-out")]
    pub out: PathBuf,
    /// JSON overlay for the verb's settings (flags take precedence).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; falls back to the overlay, then KINETICA_SEED, then system entropy.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Parse the network, list conservation laws and detect the Schloegl pattern.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Unitarity, detailed balance, reversible measure and Kolmogorov reports.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tolerance: Option<f64>,
        /// Scale of the truncated chain used by the Kolmogorov check.
        #[arg(long = "M", value_name = "M")]
        m: Option<f64>,
    },
    /// Exact stochastic simulation of an ensemble.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "M", value_name = "M")]
        m: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Fixed points of the kinetic equations with their stability.
    FixedPoints {
        #[command(flatten)]
        common: Common,
    },
    /// Linearisation, Onsager symmetry, OU covariance and the Kubo check.
    Fluctuations {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tolerance: Option<f64>,
        /// Replicas of the optional empirical comparison.
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long = "M", value_name = "M")]
        m: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Lattice simulation with the reference transport PDE.
    Lattice {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Mean-field (`--M` list) or lattice scaling (`--epsilon-list`) convergence tables.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long = "M", value_name = "M,...", value_delimiter = ',')]
        m: Option<Vec<f64>>,
        #[arg(long = "epsilon-list", value_name = "EPS,...", value_delimiter = ',')]
        epsilon_list: Option<Vec<f64>>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Outcome of a verb that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Violation,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.verb {
        Verb::Validate { common } => commands::validate(&common),
        Verb::Analyze { common, tolerance, m } => commands::analyze(&common, tolerance, m),
        Verb::Simulate {
            common,
            m,
            t_end,
            replicas,
        } => commands::simulate(&common, m, t_end, replicas),
        Verb::FixedPoints { common } => commands::fixed_points(&common),
        Verb::Fluctuations {
            common,
            tolerance,
            replicas,
            m,
            t_end,
        } => commands::fluctuations(&common, tolerance, replicas, m, t_end),
        Verb::Lattice { common, replicas } => commands::lattice(&common, replicas),
        Verb::Convergence {
            common,
            m,
            epsilon_list,
            replicas,
            t_end,
        } => commands::convergence(&common, m, epsilon_list, replicas, t_end),
    };
    match result {
        Ok(Verdict::Clean) => ExitCode::SUCCESS,
        Ok(Verdict::Violation) => ExitCode::from(2),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
