mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use brickseq::mask::MaskVariant;

/// Physics-aware brick assembly sequence planning.
#[derive(Debug, Parser)]
#[command(name = "brickseq", version)]
pub struct Cli {
    /// Worker threads for mask enumeration (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    Intuitive,
    Operable,
    Heuristic,
    Full,
    Robot,
}

impl From<MaskArg> for MaskVariant {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::Intuitive => MaskVariant::Intuitive,
            MaskArg::Operable => MaskVariant::Operable,
            MaskArg::Heuristic => MaskVariant::Heuristic,
            MaskArg::Full => MaskVariant::Full,
            MaskArg::Robot => MaskVariant::Robot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Mcts,
    Policy,
}

#[derive(Debug, Clone, Args)]
pub struct Problem {
    /// Target shape JSON.
    #[arg(long)]
    pub shape: PathBuf,
    /// Inventory JSON.
    #[arg(long)]
    pub inv: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate buildable random shapes with witness sequences.
    GenShapes {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid dimensions as HxWxD.
        #[arg(long, default_value = "6x6x4")]
        dims: String,
        /// Inventory JSON; defaults to 10 bricks of every type.
        #[arg(long)]
        inv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Config override `key=value` (repeatable).
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Plan an assembly sequence for one shape.
    Plan {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_enum, default_value_t = Engine::Mcts)]
        engine: Engine,
        #[arg(long, value_enum, default_value_t = MaskArg::Full)]
        mask: MaskArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trained policy file, required for `--engine policy`.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Train a masked (or vanilla) PPO policy for one shape.
    Train {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_enum, default_value_t = MaskArg::Full)]
        mask: MaskArg,
        /// Sample over the unmasked action space and punish violations.
        #[arg(long)]
        vanilla: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment step budget.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Replay a sequence, auditing every constraint at every step.
    Validate {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, value_enum, default_value_t = MaskArg::Full)]
        mask: MaskArg,
        /// The sequence is claimed to end in a dead end.
        #[arg(long)]
        dead_end: bool,
        /// Write the full replay report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Static stability analysis of the structure built by a sequence.
    CheckStability {
        /// Shape JSON supplying the grid dimensions.
        #[arg(long)]
        shape: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Mask verdict for one action, or every valid action, after a prefix.
    MaskAudit {
        #[command(flatten)]
        problem: Problem,
        /// Prefix sequence applied before auditing.
        #[arg(long)]
        seq: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MaskArg::Full)]
        mask: MaskArg,
        /// Action as `brick,x,y,z,orient`, e.g. `1x4,0,0,0,1`.
        #[arg(long)]
        action: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Run a planner over a directory of shapes, arbitrated by full-mask replay.
    Bench {
        /// Planner as `<engine>-<mask>`, engine `mcts` or `rl`.
        #[arg(long)]
        planner: String,
        #[arg(long)]
        shapes: PathBuf,
        /// Inventory JSON; defaults to `<shapes>/inventory.json`.
        #[arg(long)]
        inv: Option<PathBuf>,
        /// Number of seeds per shape (0..N).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Render or re-emit a shape, optionally with a sequence applied.
    Export {
        #[arg(long)]
        shape: PathBuf,
        #[arg(long)]
        seq: Option<PathBuf>,
        /// Print per-layer ASCII.
        #[arg(long)]
        layers: bool,
        /// Write the (built) shape as canonical JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
