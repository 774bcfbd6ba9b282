mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};

/// Reynolds expansions of Navier-Stokes on the 3-torus and the
/// a-posteriori control problem.
#[derive(Parser, Debug)]
#[command(name = "reynolds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the expansion up to order N and store it in the cache
    Expand(commands::ExpandArgs),
    /// Sobolev norms, scales, symmetries and classical bounds of a datum
    Norms(commands::NormsArgs),
    /// Sample the growth and error estimators at one R
    Estimate(commands::EstimateArgs),
    /// Solve the control problem at one R
    Control(commands::ControlArgs),
    /// Bracket the critical R by bisection
    Critical(commands::CriticalArgs),
    /// Plot data and a summary for a `control` run directory
    Report(commands::ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Expand(a) => commands::expand(a),
        Command::Norms(a) => commands::norms(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Control(a) => commands::control(a),
        Command::Critical(a) => commands::critical(a),
        Command::Report(a) => commands::report(a),
    };
    if let Err(e) = res {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
