use clap::{Args, Parser, Subcommand};
use kerrcat_cli::{run, Experiment, QptSpace};
use std::path::PathBuf;
use std::process::ExitCode;

/// Kerr-cat initialization experiments under pump-induced frequency shift.
#[derive(Parser)]
#[command(name = "kerrcat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenlevel diagrams over detuning and pump amplitude.
    Levels(Common),
    /// Single initializations with fidelity report.
    Ramp(Common),
    /// Process tomography sweep.
    Qpt {
        #[arg(long, value_enum)]
        space: QptSpace,
        #[command(flatten)]
        common: Common,
    },
    /// Circuit-model parameter extraction and pump-shift curve.
    Nems(Common),
    /// Gate and compensation calibrations.
    Calibrate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides io.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs serially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Master seed (overrides io.seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Levels(c) => (Experiment::Levels, c),
        Command::Ramp(c) => (Experiment::Ramp, c),
        Command::Qpt { space, common } => (Experiment::Qpt(space), common),
        Command::Nems(c) => (Experiment::Nems, c),
        Command::Calibrate(c) => (Experiment::Calibrate, c),
    };
    match run(
        experiment,
        &common.config,
        common.out,
        common.jobs,
        common.seed,
    ) {
        Ok(dir) => {
            log::info!("wrote {}", dir.display());
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kerrcat {}: {e}", experiment.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
