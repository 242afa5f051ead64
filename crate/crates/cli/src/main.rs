//! `graspgame` binary: searches for hand configurations that hold an object
//! against every small rigid escape motion, audits stored grasps, and
//! replays morphing-object sequences.
//!
//! Set `RUST_LOG` (e.g. `RUST_LOG=info`) to control log verbosity.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use graspgame_cli::{
    apply_overrides, cmd_morph, cmd_solve, cmd_verify, load_run_config, parse_epsilon, Overrides,
    RunConfig, EXIT_ERROR,
};

#[derive(Parser, Debug)]
#[command(
    name = "graspgame",
    version,
    about = "Grasp synthesis by a hand-object game"
)]
struct Cli {
    /// Run configuration file (JSON). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Hand description file (JSON).
    #[arg(long, global = true)]
    hand: Option<PathBuf>,
    /// Object point cloud file (.xyz or .ply).
    #[arg(long, global = true)]
    object: Option<PathBuf>,
    /// Escape box half-widths, TRANS,ROT (m, rad) or one value for both.
    #[arg(long, global = true, value_parser = parse_epsilon)]
    epsilon: Option<graspgame::object::EscapeBounds>,
    /// Cap on game rounds.
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Seed recorded with the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for trace.json, grasp.txt, deltanorm.csv.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play the game and write the grasp with its trace.
    Solve,
    /// Search for escapes from a stored grasp; exit 0 means none found.
    Verify {
        /// grasp.txt written by solve.
        grasp: PathBuf,
    },
    /// Re-solve a sequence of cloud files with warm starts.
    Morph {
        /// Directory of ordered .xyz/.ply cloud files.
        steps: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match load_run_config(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(EXIT_ERROR);
            }
        },
        None => RunConfig::default(),
    };
    apply_overrides(
        &mut cfg,
        &Overrides {
            hand: cli.hand,
            object: cli.object,
            epsilon: cli.epsilon,
            rounds: cli.rounds,
            seed: cli.seed,
            out: cli.out,
        },
    );

    let code = match cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Verify { grasp } => cmd_verify(&cfg, &grasp),
        Command::Morph { steps } => cmd_morph(&cfg, &steps),
    };
    std::process::exit(code);
}
