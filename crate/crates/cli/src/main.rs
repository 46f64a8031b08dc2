//! `axc`: generate, evaluate, evolve and curate approximate arithmetic
//! circuits, and measure how quantized networks tolerate them.

mod curate;
mod eval;
mod evolve;
mod gen;
mod lut;
mod report;
mod resilience;
mod util;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (cgp text v1, library manifest v1, network format v1, dataset format v1, lut format v1)"
);

#[derive(Parser)]
#[command(name = "axc", version = LONG_VERSION, about = "Approximate arithmetic circuit toolkit")]
struct Cli {
    /// Worker threads for simulation, search and inference; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seed or baseline circuits as .cgp files.
    Gen(gen::Args),
    /// Error and cost report of a circuit against a reference.
    Eval(eval::Args),
    /// Single- or multi-objective CGP search.
    Evolve(evolve::Args),
    /// Pareto filtering and selection over library manifests.
    Curate(curate::Args),
    /// Tabulate a library entry or circuit as a multiplier LUT.
    Lut(lut::Args),
    /// Quantized-network resilience experiments.
    #[command(subcommand)]
    Resilience(resilience::Command),
    /// CSV views of manifests and sweep results.
    Report(report::Args),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = match cli.workers {
        Some(0) => return Err(util::usage("--workers must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| match cli.command {
        Command::Gen(a) => gen::run(a, workers),
        Command::Eval(a) => eval::run(a, workers),
        Command::Evolve(a) => evolve::run(a, workers),
        Command::Curate(a) => curate::run(a, workers),
        Command::Lut(a) => lut::run(a, workers),
        Command::Resilience(c) => resilience::run(c, workers),
        Command::Report(a) => report::run(a, workers),
    })
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<util::Usage>().is_some() => {
            eprintln!("usage error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
