//! Benchmark driver: runs every (policy, scene, seed) episode, scores it,
//! and replays recorded trajectories.

use std::io::BufRead;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::env::{run_episode_until, run_episode_with, EnvConfig, EnvError, Environment, Scene, StepRecord, TerminationReason};
use crate::exec::Execution;
use crate::mapping::PointCloud;
use crate::metrics::{budget_curve, chamfer_indexed, mean_auc, CoverageReport, KdTree, MetricsError};
use crate::policy::{FixedSequencePolicy, PolicyError, PolicyKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scene {scene}, policy {policy}, seed {seed}: {source}")]
    Episode {
        scene: String,
        policy: String,
        seed: u64,
        #[source]
        source: EnvError,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("trajectory line {line}: {message}")]
    Trajectory { line: usize, message: String },
    #[error("nothing to run: {0}")]
    Empty(&'static str),
}

/// Which episodes to run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub policies: Vec<PolicyKind>,
    pub view_budget: usize,
    pub seeds: Vec<u64>,
}

/// Result of one episode, without the heavy per-episode map state.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutput {
    pub scene: String,
    pub policy: String,
    pub seed: u64,
    pub report: CoverageReport,
    /// `CR_0..CR_t` as recorded by the environment.
    pub coverage: Vec<f64>,
    pub trajectory: Vec<StepRecord>,
    pub scanned: PointCloud,
}

/// Scores a finished episode over `view_budget` views.
///
/// Chamfer accuracy compares the downsampled scanned cloud with the
/// ground-truth surface samples; it is NaN if nothing was scanned.
pub fn episode_report(
    env: &Environment,
    policy: &str,
    seed: u64,
    view_budget: usize,
) -> Result<CoverageReport, HarnessError> {
    let state = env.state();
    let curve = budget_curve(&state.coverage, view_budget)?;
    let auc = mean_auc(&curve)?;
    let final_cr = *curve.last().expect("budget is positive");
    let scanned = state.scanned_cloud();
    let scene = env.scene();
    let chamfer_cm = if scanned.is_empty() {
        f64::NAN
    } else {
        let tree = KdTree::build(&scanned.points);
        chamfer_indexed(
            &scanned.points,
            &tree,
            &scene.ground_truth().points.points,
            scene.ground_truth_index(),
            Execution::Sequential,
        )?
    };
    Ok(CoverageReport {
        scene: format!("{}#{}", scene.id(), seed),
        policy: policy.to_string(),
        views: view_budget,
        auc,
        final_cr,
        chamfer_cm,
        reason: state
            .reason()
            .unwrap_or(TerminationReason::ViewBudget)
            .to_string(),
    })
}

fn output_of(env: &Environment, policy: &str, seed: u64, view_budget: usize) -> Result<EpisodeOutput, HarnessError> {
    Ok(EpisodeOutput {
        scene: env.scene().id().to_string(),
        policy: policy.to_string(),
        seed,
        report: episode_report(env, policy, seed, view_budget)?,
        coverage: env.state().coverage.clone(),
        trajectory: env.state().trajectory.clone(),
        scanned: env.state().scanned_cloud(),
    })
}

/// Runs one episode of `kind` on `scene`.
pub fn run_single(
    config: &Arc<EnvConfig>,
    scene: &Arc<Scene>,
    kind: &PolicyKind,
    view_budget: usize,
    seed: u64,
    exec: Execution,
) -> Result<EpisodeOutput, HarnessError> {
    run_single_until(config, scene, kind, view_budget, seed, exec, &AtomicBool::new(false))
}

/// [`run_single`] that ends the episode as aborted once `cancel` is set.
pub fn run_single_until(
    config: &Arc<EnvConfig>,
    scene: &Arc<Scene>,
    kind: &PolicyKind,
    view_budget: usize,
    seed: u64,
    exec: Execution,
    cancel: &AtomicBool,
) -> Result<EpisodeOutput, HarnessError> {
    let name = kind.name();
    let wrap = |source: EnvError| HarnessError::Episode {
        scene: scene.id().to_string(),
        policy: name.clone(),
        seed,
        source,
    };
    let mut policy = kind.build(&scene.bounds(), view_budget, seed)?;
    let env = run_episode_until(config.clone(), scene.clone(), policy.as_mut(), view_budget, None, exec, cancel)
        .map_err(wrap)?;
    output_of(&env, &name, seed, view_budget)
}

/// Runs every (policy, scene, seed) combination. Episodes may run in
/// parallel; outputs are ordered by policy, then scene, then seed, as
/// listed in the inputs.
pub fn run_benchmark(
    config: &Arc<EnvConfig>,
    scenes: &[Arc<Scene>],
    spec: &BenchmarkSpec,
    exec: Execution,
) -> Result<Vec<EpisodeOutput>, HarnessError> {
    run_benchmark_until(config, scenes, spec, exec, &AtomicBool::new(false))
}

/// [`run_benchmark`] with cooperative cancellation: once `cancel` is set,
/// running episodes end as aborted and episodes not yet started are left
/// out of the result.
pub fn run_benchmark_until(
    config: &Arc<EnvConfig>,
    scenes: &[Arc<Scene>],
    spec: &BenchmarkSpec,
    exec: Execution,
    cancel: &AtomicBool,
) -> Result<Vec<EpisodeOutput>, HarnessError> {
    if scenes.is_empty() {
        return Err(HarnessError::Empty("no scenes"));
    }
    if spec.policies.is_empty() {
        return Err(HarnessError::Empty("no policies"));
    }
    if spec.seeds.is_empty() {
        return Err(HarnessError::Empty("no seeds"));
    }
    let mut jobs = Vec::new();
    for kind in &spec.policies {
        for scene in scenes {
            for &seed in &spec.seeds {
                jobs.push((kind, scene, seed));
            }
        }
    }
    // One level of parallelism: across episodes when available.
    let inner = match exec {
        Execution::Parallel => Execution::Sequential,
        Execution::Sequential => Execution::Sequential,
    };
    let results = exec.map_indexed(jobs.len(), |i| {
        let (kind, scene, seed) = jobs[i];
        if cancel.load(Ordering::Relaxed) {
            return None;
        }
        let out = run_single_until(config, scene, kind, spec.view_budget, seed, inner, cancel);
        if let Ok(o) = &out {
            log::info!(
                "episode {} {} seed {}: final CR {:.2}% ({})",
                o.scene,
                o.policy,
                o.seed,
                o.report.final_cr,
                o.report.reason
            );
        }
        Some(out)
    });
    results.into_iter().flatten().collect()
}

/// Parses trajectory JSON lines.
pub fn read_trajectory(input: impl BufRead) -> Result<Vec<StepRecord>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| HarnessError::Trajectory {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: StepRecord = serde_json::from_str(&line).map_err(|e| HarnessError::Trajectory {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    if out.is_empty() {
        return Err(HarnessError::Empty("trajectory has no steps"));
    }
    Ok(out)
}

/// Re-runs a recorded trajectory: resets at its step-0 pose and applies the
/// remaining poses in order.
pub fn replay(
    config: &Arc<EnvConfig>,
    scene: &Arc<Scene>,
    records: &[StepRecord],
    exec: Execution,
) -> Result<Environment, HarnessError> {
    let (first, rest) = records.split_first().ok_or(HarnessError::Empty("trajectory has no steps"))?;
    let mut policy = FixedSequencePolicy::new(rest.iter().map(|r| r.pose).collect()).named("replay");
    let budget = rest.len().clamp(1, config.max_steps);
    Ok(run_episode_with(
        config.clone(),
        scene.clone(),
        &mut policy,
        budget,
        Some(first.pose),
        exec,
    )?)
}
