//! `curbflow`: solve, price, plan and verify corridor parking scenarios.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use curbflow::par;

#[derive(Parser)]
#[command(name = "curbflow", version, about = "Corridor parking equilibrium, optimum, pricing and supply planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Equilibrium,
    Optimum,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SearchArg {
    Binomial,
    Piecewise,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum WhichArg {
    Benchmark,
    FirstBest,
    SecondBest,
}

#[derive(Subcommand)]
enum Command {
    /// Parking distributions of both classes.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Replace the scenario's search-time model.
        #[arg(long, value_enum)]
        search: Option<SearchArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Location-dependent prices that decentralize the optimum.
    Price {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One supply design as JSON on stdout.
    Design {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        which: WhichArg,
    },
    /// Planner cost over a (theta, k) grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// `start:end:count`
        #[arg(long)]
        theta: String,
        /// `start:end:count`
        #[arg(long)]
        k: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check the solvers against the binned oracle and closed forms.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 2000)]
        bins: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Headline numbers for the built-in reference scenarios.
    Reference {
        /// Write the report and its manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the reference scenario files here.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = par::threads_from_env() {
        par::init_thread_pool(n);
    }
    let result = match cli.command {
        Command::Solve { scenario, mode, search, out } => commands::solve(&scenario, mode, search, &out),
        Command::Price { scenario, out } => commands::price(&scenario, &out),
        Command::Design { scenario, which } => commands::design(&scenario, which),
        Command::Sweep { scenario, theta, k, out } => commands::sweep(&scenario, &theta, &k, &out),
        Command::Verify { scenario, bins, json } => commands::verify(&scenario, bins, json.as_deref()),
        Command::Reference { out, scenarios } => commands::reference(out.as_deref(), scenarios.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
