use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::Point3;
use nbv_core::env::{load_scenes, EnvConfig, Scene};
use nbv_core::harness::{episode_report, read_trajectory, replay as replay_records, run_benchmark_until, BenchmarkSpec, EpisodeOutput};
use nbv_core::mapping::write_point_ply;
use nbv_core::metrics::{aggregate, write_reports_csv, write_summary_csv, write_summary_json, CoverageReport};
use nbv_core::policy::PolicyKind;
use nbv_core::procgen::write_house_set;
use nbv_core::protocol::{serve_stream, Server, Session, BIND_ENV};
use nbv_core::Execution;

use crate::{EnvArgs, GenArgs, ReplayArgs, RunArgs, ServeArgs};

const DEFAULT_BIND: &str = "127.0.0.1:5555";
const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Conventional exit status after SIGINT.
const INTERRUPTED: u8 = 130;

pub fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected NX,NY,NZ, got {s:?}"));
    };
    let p = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([p(x)?, p(y)?, p(z)?])
}

/// Parsed `--seeds` value; a newtype so clap treats it as one argument.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedList(pub Vec<u64>);

/// `a..b` and `a..=b` are inclusive ranges; anything else is a comma list.
pub fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let p = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("seed {v:?}: {e}"));
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (p(a)?, p(b.strip_prefix('=').unwrap_or(b))?);
        if a > b {
            return Err(format!("empty seed range {s:?}"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(p).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(seeds))
}

/// Loads the config and applies grid overrides. The grid keeps spanning the
/// action box from its min corner: with only `--grid-dims` the voxel size
/// follows from the box's x extent, with only `--voxel-size` the dims do.
fn load_config(args: &EnvArgs) -> Result<Arc<EnvConfig>> {
    let mut config = match &args.config {
        Some(path) => EnvConfig::load(path).with_context(|| format!("invalid config {}", path.display()))?,
        None => EnvConfig::default(),
    };
    if args.grid_dims.is_some() || args.voxel_size.is_some() {
        let b = config.action_box;
        let extent = b.max - b.min;
        let (voxel, dims) = match (args.voxel_size, args.grid_dims) {
            (Some(v), Some(d)) => (v, d),
            (None, Some(d)) => (extent.x / d[0] as f64, d),
            (Some(v), None) => {
                ensure!(v > 0.0 && v.is_finite(), "voxel size {v} must be positive");
                (v, [0, 1, 2].map(|k| (extent[k] / v).round().max(1.0) as usize))
            }
            (None, None) => unreachable!(),
        };
        config.grid = config
            .grid
            .clone()
            .with_geometry(Point3::from(b.min.coords), voxel, dims)
            .context("invalid grid override")?;
    }
    config.validate().context("invalid config")?;
    Ok(Arc::new(config))
}

fn scenes(manifest: &Path, config: &EnvConfig) -> Result<Vec<Arc<Scene>>> {
    load_scenes(manifest, config).with_context(|| format!("cannot load scenes from {}", manifest.display()))
}

/// Installs a SIGINT handler: the first interrupt sets the returned flag,
/// a second one exits immediately.
fn interrupt_flag() -> Result<Arc<AtomicBool>> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    ctrlc::set_handler(move || {
        if f.swap(true, Ordering::SeqCst) {
            std::process::exit(INTERRUPTED.into());
        }
        log::warn!("interrupted; finishing open episodes as aborted");
    })
    .context("cannot install the interrupt handler")?;
    Ok(flag)
}

fn policies(names: &[String]) -> Result<Vec<PolicyKind>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend([
                PolicyKind::Random,
                PolicyKind::RandomHemisphere,
                PolicyKind::UniformHemisphere,
                PolicyKind::Greedy,
            ]);
        } else {
            out.push(name.parse()?);
        }
    }
    ensure!(!out.is_empty(), "no policy given");
    Ok(out)
}

/// File-name-safe form of a policy or scene name.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_episode_files(out: &Path, o: &EpisodeOutput, ply: bool, trajectories: bool) -> Result<()> {
    let stem = format!("{}_seed{}", slug(&o.scene), o.seed);
    let dir = |kind: &str| -> Result<PathBuf> {
        let d = out.join(kind).join(slug(&o.policy));
        fs::create_dir_all(&d).with_context(|| format!("cannot create {}", d.display()))?;
        Ok(d)
    };
    if trajectories {
        let path = dir("trajectories")?.join(format!("{stem}.jsonl"));
        let mut w = create(&path)?;
        for r in &o.trajectory {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    if ply {
        let path = dir("clouds")?.join(format!("{stem}.ply"));
        let mut w = create(&path)?;
        write_point_ply(o.scanned.points.iter(), &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn write_reports(out: &Path, reports: &[CoverageReport]) -> Result<()> {
    let mut w = create(&out.join("reports.csv"))?;
    write_reports_csv(reports, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn run(args: RunArgs) -> Result<ExitCode> {
    ensure!(args.views >= 1, "--views must be at least 1");
    let config = load_config(&args.env)?;
    ensure!(
        args.views <= config.max_steps,
        "--views {} exceeds max_steps {}",
        args.views,
        config.max_steps
    );
    let kinds = policies(&args.policy)?;
    let scenes = scenes(&args.scenes, &config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let interrupted = interrupt_flag()?;

    let mut outputs = Vec::new();
    for kind in &kinds {
        let seeds = match &args.seeds {
            Some(s) => s.0.clone(),
            None if kind.is_stochastic() => DEFAULT_SEEDS.to_vec(),
            None => vec![0],
        };
        let spec = BenchmarkSpec {
            policies: vec![kind.clone()],
            view_budget: args.views,
            seeds,
        };
        log::info!("{}: {} scenes x {} seeds", kind.name(), scenes.len(), spec.seeds.len());
        let mut out = run_benchmark_until(&config, &scenes, &spec, exec, &interrupted)?;
        // Aggregation order must not depend on scheduling.
        out.sort_by(|a, b| (&a.scene, a.seed).cmp(&(&b.scene, b.seed)));
        outputs.extend(out);
        if interrupted.load(Ordering::SeqCst) {
            break;
        }
    }

    for o in &outputs {
        write_episode_files(&args.out, o, args.ply, !args.no_trajectories)?;
    }
    let reports: Vec<CoverageReport> = outputs.iter().map(|o| o.report.clone()).collect();
    write_reports(&args.out, &reports)?;
    if !reports.is_empty() {
        let summary = aggregate(&reports)?;
        let mut w = create(&args.out.join("summary.csv"))?;
        write_summary_csv(&summary, &mut w)?;
        w.flush()?;
        let mut w = create(&args.out.join("summary.json"))?;
        write_summary_json(&summary, &mut w)?;
        w.flush()?;
        for s in &summary {
            log::info!(
                "{}: AUC {:.2}, final CR {:.2}%, chamfer {:.2} cm over {} episodes",
                s.policy,
                s.auc,
                s.final_cr,
                s.chamfer_cm,
                s.episodes
            );
        }
    }
    if interrupted.load(Ordering::SeqCst) {
        log::warn!("run interrupted; wrote {} finished or aborted episodes", outputs.len());
        return Ok(ExitCode::from(INTERRUPTED));
    }
    log::info!("wrote results to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn serve(args: ServeArgs) -> Result<ExitCode> {
    let config = load_config(&args.env)?;
    let scenes: Arc<[Arc<Scene>]> = scenes(&args.scenes, &config)?.into();
    let exec = Execution::default();
    if args.stdio {
        let interrupted = interrupt_flag()?;
        let mut session = Session::new(config, scenes, exec);
        let stdin = io::stdin().lock();
        let stdout = io::stdout().lock();
        serve_stream(&mut session, stdin, stdout, &interrupted).context("stdio session failed")?;
        return Ok(ExitCode::SUCCESS);
    }
    let addr = args
        .bind
        .or_else(|| std::env::var(BIND_ENV).ok())
        .unwrap_or_else(|| DEFAULT_BIND.to_string());
    let server = Server::bind(addr.as_str(), config, scenes, exec).with_context(|| format!("cannot bind {addr}"))?;
    let shutdown = server.shutdown_handle();
    ctrlc::set_handler(move || {
        if shutdown.swap(true, Ordering::SeqCst) {
            std::process::exit(INTERRUPTED.into());
        }
        log::warn!("interrupted; shutting down");
    })
    .context("cannot install the interrupt handler")?;
    // Scripts read the bound address from this line, e.g. after --bind 127.0.0.1:0.
    println!("listening on {}", server.local_addr()?);
    io::stdout().flush()?;
    server.run().context("server failed")?;
    Ok(ExitCode::SUCCESS)
}

pub fn gen_scenes(args: GenArgs) -> Result<ExitCode> {
    let count = usize::try_from(args.count)?;
    let manifest = write_house_set(count, args.seed, &args.out)?;
    log::info!(
        "wrote {} houses and {}",
        manifest.scenes.len(),
        args.out.join("scenes.json").display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn replay(args: ReplayArgs) -> Result<ExitCode> {
    let config = load_config(&args.env)?;
    let scenes = scenes(&args.scenes, &config)?;
    let scene = match &args.scene {
        Some(id) => scenes
            .iter()
            .find(|s| s.id() == id)
            .with_context(|| format!("scene {id:?} is not in {}", args.scenes.display()))?,
        None if scenes.len() == 1 => &scenes[0],
        None => bail!("the manifest holds {} scenes; pick one with --scene", scenes.len()),
    };
    let file = File::open(&args.trajectory).with_context(|| format!("cannot open {}", args.trajectory.display()))?;
    let records = read_trajectory(BufReader::new(file)).with_context(|| format!("in {}", args.trajectory.display()))?;
    let env = replay_records(&config, scene, &records, Execution::default())?;
    let views = args.views.unwrap_or(records.len().saturating_sub(1).max(1));
    let report = episode_report(&env, "replay", 0, views)?;
    if env.state().trajectory != records {
        log::warn!("replayed trajectory differs from the recording (different config or scene?)");
    }
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            write_reports(dir, std::slice::from_ref(&report))?;
            let mut w = create(&dir.join("trajectory.jsonl"))?;
            env.write_trajectory(&mut w)?;
            w.flush()?;
        }
        None => write_reports_csv(std::slice::from_ref(&report), io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}
