// Copyright 2026 eitlab Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eitlab_cli::{run, Mode, Overrides};

#[derive(Parser)]
#[command(name = "eitlab", version = env!("EITLAB_VERSION"), about = "EIT and feedback cooling scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON scenario file; optional for the figure presets
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.directory)
    #[arg(long)]
    out: Option<String>,

    /// Seed (overrides run.seed)
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for ensembles and sweeps
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sideband and feedback rates at one detuning
    Rates(Common),
    /// Steady state from the closed forms and the master equation
    Steady(Common),
    /// Steady state against the feedback gain
    SweepGain(Common),
    /// Rates and occupation against the dressing detuning
    SweepDetuning(Common),
    /// Conditioned trajectory ensemble
    Trajectory(Common),
    /// Three-level model against the reduced motional model
    ValidateElimination(Common),
    /// Energy against gain for several collection efficiencies
    Fig3(Common),
    /// Occupation against detuning with and without feedback
    Fig5(Common),
    /// Feedback rates against detuning
    Fig6(Common),
}

impl Command {
    fn split(self) -> (Mode, Common) {
        match self {
            Command::Rates(c) => (Mode::Rates, c),
            Command::Steady(c) => (Mode::Steady, c),
            Command::SweepGain(c) => (Mode::SweepGain, c),
            Command::SweepDetuning(c) => (Mode::SweepDetuning, c),
            Command::Trajectory(c) => (Mode::Trajectory, c),
            Command::ValidateElimination(c) => (Mode::ValidateElimination, c),
            Command::Fig3(c) => (Mode::Fig3, c),
            Command::Fig5(c) => (Mode::Fig5, c),
            Command::Fig6(c) => (Mode::Fig6, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = cli.command.split();
    let presets = [Mode::Fig3, Mode::Fig5, Mode::Fig6, Mode::ValidateElimination];
    if common.config.is_none() && !presets.contains(&mode) {
        eprintln!("eitlab: `{mode}` needs --config");
        return ExitCode::from(2);
    }
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("eitlab: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let overrides = Overrides {
        out: common.out,
        seed: common.seed,
    };
    match run(common.config.as_deref(), mode, &overrides) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("eitlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
