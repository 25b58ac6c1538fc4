//! `nbv`: run view-planning benchmarks, serve the environment over the wire
//! protocol, generate procedural scenes and replay recorded trajectories.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "nbv", version, about = "Next-best-view reconstruction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Environment and grid options shared by every command that loads scenes.
#[derive(Args, Debug, Clone)]
pub struct EnvArgs {
    /// JSON environment config; missing fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Occupancy grid dimensions as NX,NY,NZ.
    #[arg(long, value_parser = commands::parse_dims)]
    pub grid_dims: Option<[usize; 3]>,
    /// Voxel edge length in meters.
    #[arg(long)]
    pub voxel_size: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate policies on every scene of a manifest.
    Run(RunArgs),
    /// Serve episodes over the newline-delimited JSON protocol.
    Serve(ServeArgs),
    /// Write procedural house meshes and a scene manifest.
    GenScenes(GenArgs),
    /// Re-run a trajectory JSONL and recompute its metrics.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    pub scenes: PathBuf,
    /// Policies to evaluate, comma separated: random, random-hemisphere,
    /// uniform-hemisphere, greedy, fixed:<poses.json>, or `all` for the
    /// four baselines.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub policy: Vec<String>,
    /// View budget per episode.
    #[arg(long, default_value_t = 30)]
    pub views: usize,
    /// Seeds as `a..b` (inclusive) or a comma list. Defaults to 0..4 for
    /// stochastic policies and 0 for deterministic ones.
    #[arg(long, value_parser = commands::parse_seeds)]
    pub seeds: Option<commands::SeedList>,
    /// Output directory, created if needed.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each episode's scanned cloud as PLY.
    #[arg(long)]
    pub ply: bool,
    /// Skip the per-episode trajectory files.
    #[arg(long)]
    pub no_trajectories: bool,
    /// Run everything on the calling thread.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub env: EnvArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    pub scenes: PathBuf,
    /// Listen address; defaults to $NBV_BIND, then 127.0.0.1:5555.
    #[arg(long)]
    pub bind: Option<String>,
    /// Serve a single session on stdin/stdout instead of TCP.
    #[arg(long, conflicts_with = "bind")]
    pub stdio: bool,
    #[command(flatten)]
    pub env: EnvArgs,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Number of houses.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Seed of the first house; house i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the OBJ files and scenes.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Scene manifest (JSON).
    #[arg(long)]
    pub scenes: PathBuf,
    /// Scene id; may be omitted when the manifest holds a single scene.
    #[arg(long)]
    pub scene: Option<String>,
    /// Trajectory JSONL written by `run`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// View budget for the metrics; defaults to the trajectory length.
    #[arg(long)]
    pub views: Option<usize>,
    /// Directory for reports.csv and the replayed trajectory; prints the
    /// report to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub env: EnvArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Serve(a) => commands::serve(a),
        Command::GenScenes(a) => commands::gen_scenes(a),
        Command::Replay(a) => commands::replay(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
