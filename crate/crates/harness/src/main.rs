use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dcpf_harness::experiment::{self, summary, timing_table};
use dcpf_harness::{ExperimentConfig, Result, RunOptions};

#[derive(Parser)]
#[command(name = "dcpf", version, about = "Distributed projection-free dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for relative output paths.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Override the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the single configured algorithm.
    Run { config: PathBuf },
    /// Run two or more algorithms on one shared instance.
    Compare { config: PathBuf },
    /// Time the LMO against the projection over a list of dimensions.
    Bench { config: PathBuf },
}

fn execute(cli: &Cli) -> Result<()> {
    let opts = RunOptions {
        output_dir: cli.output_dir.clone(),
        seed: cli.seed,
    };
    let (path, cmd): (_, fn(&ExperimentConfig, &RunOptions) -> Result<_>) = match &cli.command {
        Command::Run { config } => (config, experiment::run),
        Command::Compare { config } => (config, experiment::compare),
        Command::Bench { config } => (config, experiment::bench),
    };
    let cfg = ExperimentConfig::from_path(path)?;
    let out = cmd(&cfg, &opts)?;
    if !cli.quiet {
        for rec in &out.records {
            println!("{}", summary(rec));
        }
        if !out.timings.is_empty() {
            print!("{}", timing_table(&out.timings));
        }
        for file in &out.files {
            println!("wrote {}", file.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
