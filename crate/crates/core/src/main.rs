use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hgam::harness::{evaluate, PolicyKind};
use hgam::neural::checkpoint;
use hgam::training::{train_with, TrainConfig};
use hgam::world::WorldConfig;
use hgam::{HgamError, Result};

#[derive(Parser)]
#[command(name = "hgam", version, about = "Multi-UAV data collection and charging: training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train actors and critics, writing a report CSV and a checkpoint.
    Train(TrainArgs),
    /// Run noise-free episodes and print an aggregated metrics report.
    Evaluate(EvalArgs),
    /// Like evaluate, but also writes per-episode trajectory files.
    ExportTraj(EvalArgs),
    /// List the tensors stored in a checkpoint.
    InspectCheckpoint {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// World configuration (TOML); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training configuration (TOML); defaults when omitted.
    #[arg(long)]
    train_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides max_episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Checkpoint path; defaults to OUT/checkpoint.hgam.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Train without the attention message.
    #[arg(long)]
    no_gat: bool,
    /// Print one line per episode to stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    /// One of hgam, hgam_no_gat, greedy, random.
    #[arg(long, default_value = "greedy")]
    policy: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory; evaluate prints to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate a learned policy with the attention message zeroed.
    #[arg(long)]
    no_gat: bool,
}

fn world_config(path: Option<&Path>) -> Result<WorldConfig> {
    match path {
        Some(p) => WorldConfig::load(p),
        None => Ok(WorldConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HgamError::io(dir, e))
}

fn run_train(args: TrainArgs) -> Result<()> {
    let world = world_config(args.config.as_deref())?;
    let mut cfg = match &args.train_config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(n) = args.episodes {
        cfg.max_episodes = n;
    }
    if args.no_gat {
        cfg.use_gat = false;
    }
    create_dir(&args.out)?;
    let ckpt = args.checkpoint.clone().unwrap_or_else(|| args.out.join("checkpoint.hgam"));
    let verbose = args.verbose;
    let (_, report) = train_with(&world, &cfg, args.seed, Some(&ckpt), |row| {
        if verbose {
            eprintln!(
                "episode {:>5}  steps {:>4}  r_muav {:>10.3}  C {:.3}  sigma {:.3}  loss {:.3e}",
                row.episode, row.steps, row.reward_muav_mean, row.c, row.sigma, row.loss_critic_mean
            );
        }
    })?;
    let csv = args.out.join("training_report.csv");
    report.write_csv(&csv)?;
    println!("wrote {} and {}", csv.display(), ckpt.display());
    Ok(())
}

fn run_evaluate(args: EvalArgs, export: bool) -> Result<()> {
    let world = world_config(args.config.as_deref())?;
    let mut policy = PolicyKind::parse(&args.policy, args.checkpoint.as_deref())?;
    if args.no_gat {
        if let PolicyKind::Hgam(p) = policy {
            policy = PolicyKind::HgamNoGat(p);
        }
    }
    let traj_dir = if export {
        let dir = args.out.clone().ok_or_else(|| HgamError::config("export-traj needs --out"))?;
        create_dir(&dir)?;
        Some(dir)
    } else {
        None
    };
    let report = evaluate(&policy, &world, args.episodes, args.seed, traj_dir.as_deref())?;
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join("report.json");
            std::fs::write(&path, report.to_json()).map_err(|e| HgamError::io(&path, e))?;
            println!("wrote {}", path.display());
        }
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn run_inspect(path: &Path) -> Result<()> {
    let entries = checkpoint::load(path)?;
    let mut total = 0;
    for (name, t) in &entries {
        println!("{name}\t{}x{}", t.rows(), t.cols());
        total += t.rows() * t.cols();
    }
    println!("{} tensors, {total} values", entries.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a, false),
        Command::ExportTraj(a) => run_evaluate(a, true),
        Command::InspectCheckpoint { checkpoint } => run_inspect(&checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
