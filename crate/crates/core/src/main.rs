//! Command-line front end; the `cli` module does the work.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use lpteich::cli::{run, CliCommand, CliRequest};

#[derive(Parser)]
#[command(
    name = "lpteich",
    version,
    about = "L^p mean distortion minimization and diagnostics on the pinned disk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the configured functional and write the solution artifacts.
    Solve(RunArgs),
    /// Solve a ladder of exponents, warm-starting each from the last.
    Sweep(RunArgs),
    /// Refinement cascade at the pin tracking windowed local masses.
    Blowup(RunArgs),
    /// Ahlfors-Hopf diagnostics of a solved map: field, residuals, pole fit.
    Hopf(RunArgs),
    /// Run the closed-form calibration batteries.
    Oracle(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Cap on the parallel reduction width; default: available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate the config and mesh generation, then exit without solving.
    #[arg(long)]
    dry_run: bool,
}

fn main() {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Command::Solve(args) => (CliCommand::Solve, args),
        Command::Sweep(args) => (CliCommand::Sweep, args),
        Command::Blowup(args) => (CliCommand::Blowup, args),
        Command::Hopf(args) => (CliCommand::Hopf, args),
        Command::Oracle(args) => (CliCommand::Oracle, args),
    };
    let request = CliRequest {
        command,
        config_path: args.config,
        out_dir: args.out,
        threads: args.threads,
        seed: args.seed,
        dry_run: args.dry_run,
    };
    std::process::exit(run(&request));
}
