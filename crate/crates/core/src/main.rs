use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsc_core::cli::{self, RunConfig};
use rsc_core::Result;

#[derive(Parser)]
#[command(name = "rsc", version, about = "Semantic bit allocation for intra coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// `key = value` file applied before the flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// proxy or files
    #[arg(long, global = true)]
    oracle: Option<String>,
    #[arg(long, global = true)]
    frames: Option<PathBuf>,
    #[arg(long, global = true)]
    maps: Option<PathBuf>,
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Model file, or a directory of models for `sweep` and `eval`
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    uniform_qp: Option<u8>,
    #[arg(long, global = true)]
    no_global_branch: bool,
    /// linear or nonlinear
    #[arg(long, global = true)]
    baseline: Option<String>,
    /// Training steps
    #[arg(long, global = true)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode every frame at every QP and cache bits and map deltas
    BuildDataset,
    /// Train one agent on the cached training split
    Train,
    /// Train one agent per configured alpha into the --model directory
    Sweep,
    /// Encode one frame with the agent, a baseline curve or a uniform QP
    Encode { frame: PathBuf },
    /// BD tables, curves and the correlation check on the test split
    Eval,
}

fn config(flags: &Flags) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let pairs = [
        ("seed", flags.seed.map(|v| v.to_string())),
        ("alpha", flags.alpha.map(|v| v.to_string())),
        ("oracle", flags.oracle.clone()),
        ("frames", path(&flags.frames)),
        ("maps", path(&flags.maps)),
        ("cache", path(&flags.cache)),
        ("model", path(&flags.model)),
        ("out", path(&flags.out)),
        ("uniform_qp", flags.uniform_qp.map(|v| v.to_string())),
        ("baseline", flags.baseline.clone()),
        ("steps", flags.steps.map(|v| v.to_string())),
        ("global_branch", flags.no_global_branch.then(|| "false".to_string())),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = config(&cli.flags)?;
    match &cli.command {
        Command::BuildDataset => cli::cmd_build_dataset(&cfg),
        Command::Train => cli::cmd_train(&cfg),
        Command::Sweep => cli::cmd_sweep(&cfg),
        Command::Encode { frame } => {
            let o = cli::cmd_encode(&cfg, frame)?;
            Ok(format!("bpp fidelity\n{:e} {:e}", o.bpp, o.fidelity))
        }
        Command::Eval => cli::cmd_eval(&cfg).map(|r| cli::summarize(&r)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rsc: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
