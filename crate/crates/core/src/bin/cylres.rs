use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cylres::runner::{run, Command, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Thresholds,
    Portrait,
    Resonances,
    SweepLambda,
    SweepProfile,
    Trace,
    Selftest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Thresholds => Command::Thresholds,
            Cmd::Portrait => Command::Portrait,
            Cmd::Resonances => Command::Resonances,
            Cmd::SweepLambda => Command::SweepLambda,
            Cmd::SweepProfile => Command::SweepProfile,
            Cmd::Trace => Command::Trace,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

/// Complex-scaling spectra and resonances on cylindrical ends.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    command: Cmd,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave timestamps and thread counts out of the report.
    #[arg(long)]
    reproducible: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let opts = RunOptions { out: cli.out, reproducible: cli.reproducible };
    ExitCode::from(run(cli.command.into(), &cli.config, &opts) as u8)
}
