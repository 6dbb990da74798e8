//! Command-line front end: one subcommand per experiment mode, plus `render`
//! for re-printing an existing report.
//!
//! Exit codes: 0 all enabled checks passed, 1 a check failed (report still
//! written), 2 configuration or validation error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavedecay::config::{ExperimentConfig, Mode};
use wavedecay::report::{render, RunReport};
use wavedecay::runner::{apply_tolerance_override, run};

#[derive(Parser)]
#[command(
    name = "wavedecay",
    about = "Verification lab for space-time decay of wave equations with potentials",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory (default: $WAVEDECAY_OUT or ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// rayon thread count (0 = library default)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// override the mode's primary tolerance
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every explicit constant of the decay estimates
    Constants(RunArgs),
    /// Certify the sphere-average inequalities over a grid
    Lemma1(RunArgs),
    /// Certify the light-cone integral inequality over a grid
    Lemma2(RunArgs),
    /// Fixed-point solve of the wave equation with potential
    Solve(RunArgs),
    /// Fixed-point solve with an additional source term
    SolveSource(RunArgs),
    /// Finite-difference evolution with observer output
    Oracle(RunArgs),
    /// Cross-validate the fixed-point solver against the FD oracle
    Compare(RunArgs),
    /// Fit the late-time power-law tail of an FD evolution
    Tail(RunArgs),
    /// Energy conservation and free-energy growth checks
    Energy(RunArgs),
    /// Re-render an existing report.json as text
    Render {
        #[arg(long)]
        report: PathBuf,
    },
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os("WAVEDECAY_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(mode: Mode, args: &RunArgs) -> ExitCode {
    let mut config = match ExperimentConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(tol) = args.tolerance {
        apply_tolerance_override(&mut config, mode, tol);
    }
    match run(&config, mode, &out_dir(args), args.threads) {
        Ok(outcome) => {
            print!("{}", outcome.rendered);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Constants(a) => execute(Mode::Constants, a),
        Command::Lemma1(a) => execute(Mode::Lemma1, a),
        Command::Lemma2(a) => execute(Mode::Lemma2, a),
        Command::Solve(a) => execute(Mode::Solve, a),
        Command::SolveSource(a) => execute(Mode::SolveSource, a),
        Command::Oracle(a) => execute(Mode::Oracle, a),
        Command::Compare(a) => execute(Mode::Compare, a),
        Command::Tail(a) => execute(Mode::Tail, a),
        Command::Energy(a) => execute(Mode::Energy, a),
        Command::Render { report } => match RunReport::read_json(report) {
            Ok(r) => {
                print!("{}", render(&r));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
