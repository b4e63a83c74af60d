use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use randsplit::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use randsplit::Error;

#[derive(Parser)]
#[command(name = "randsplit", version, about = "Randomized splitting of non-smooth subgradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Terminal law of the scalar sparse problem for a ladder of rates.
    Table1(RunArgs),
    /// 1D classification ensembles.
    Class1d(RunArgs),
    /// 2D classification ensembles (Crank–Nicolson linear steps).
    Class2d(RunArgs),
    /// Distance to the deterministic flow along a rate ladder.
    LambdaStudy(RunArgs),
    /// A single switched trajectory.
    Simulate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Cap seeds and problem sizes.
    #[arg(long)]
    smoke: bool,
    /// Output directory (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidInput(_)
        | Error::Json(_)
        | Error::DenseThresholdExceeded { .. }
        | Error::DimensionMismatch { .. }
        | Error::NotSymmetric { .. } => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Table1(a) => (ExperimentKind::Table1, a),
        Command::Class1d(a) => (ExperimentKind::Class1d, a),
        Command::Class2d(a) => (ExperimentKind::Class2d, a),
        Command::LambdaStudy(a) => (ExperimentKind::LambdaStudy, a),
        Command::Simulate(a) => (ExperimentKind::Sparse1d, a),
    };

    let mut cfg = match &args.config {
        Some(path) => match ExperimentConfig::from_json_file(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if args.smoke {
        cfg.smoke = true;
    }
    if let Some(o) = args.out {
        cfg.output_dir = Some(o);
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let kind = match (kind, cfg.experiment) {
        (ExperimentKind::Sparse1d, Some(ExperimentKind::Custom)) => ExperimentKind::Custom,
        _ => kind,
    };

    match run_experiment(kind, &cfg) {
        Ok((files, summary)) => {
            print!("{summary}");
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
