//! Checkpoint evaluation, baselines and baseline normalization.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swarmtrack_core::encoding::mask_k_nearest;
use swarmtrack_core::trace::write_record;
use swarmtrack_core::{Environment, FeatureSet, SeededStream, WorldConfig, N_ACTIONS};
use swarmtrack_trainer::{argmax, q_values, select_from_values, Exploration, PolicyMode, QNets};
use swarmtrack_valuenet::{Checkpoint, NetParams};

use crate::{Error, Result, TaskSpec};

const ENV_STREAM: u64 = 0;
const ACTION_STREAM: u64 = 1;

/// Name used for the random baseline in reports and result rows.
pub const RANDOM_POLICY: &str = "random";

/// Which pair of nets in a checkpoint acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetSource {
    #[default]
    Online,
    /// The slowly averaged target copies.
    Target,
}

/// What picks the actions during evaluation.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Uniform over the action set, independently per pursuer and step.
    Random,
    Learned { name: String, nets: [NetParams<f32>; 2], mode: PolicyMode },
}

impl Policy {
    /// One net pair of `ck`. The policy mode comes from `mode` if given,
    /// otherwise from the checkpoint's `meta.mode`.
    pub fn from_checkpoint(name: impl Into<String>, ck: &Checkpoint, mode: Option<PolicyMode>, source: NetSource) -> Result<Self> {
        let mode = match mode {
            Some(m) => m,
            None => {
                let recorded = ck.meta.get("mode").cloned().ok_or_else(|| {
                    Error::InvalidArgument("checkpoint does not record a policy mode; pass one explicitly".into())
                })?;
                serde_json::from_value(recorded)?
            }
        };
        let nets = QNets::from_checkpoint(ck)?;
        let nets = match source {
            NetSource::Online => nets.online,
            NetSource::Target => nets.target,
        };
        Ok(Self::Learned { name: name.into(), nets, mode })
    }

    pub fn load(path: impl AsRef<Path>, mode: Option<PolicyMode>, source: NetSource) -> Result<Self> {
        let path = path.as_ref();
        let ck = Checkpoint::load(path).map_err(|source| Error::Checkpoint { path: path.display().to_string(), source })?;
        Self::from_checkpoint(path.display().to_string(), &ck, mode, source)
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Random => RANDOM_POLICY,
            Self::Learned { name, .. } => name,
        }
    }

    fn act(&self, fs: &FeatureSet, settings: &EvalSettings, rng: &mut impl Rng) -> Result<usize> {
        match self {
            Self::Random => Ok(rng.gen_range(0..N_ACTIONS)),
            Self::Learned { nets, mode, .. } => {
                let q1 = q_values(&nets[0], fs)?;
                let q2 = q_values(&nets[1], fs)?;
                if *mode == PolicyMode::Stochastic && !settings.greedy && settings.alpha > 0.0 {
                    let how = Exploration { mode: PolicyMode::Stochastic, alpha: settings.alpha, epsilon: 0.0 };
                    Ok(select_from_values(&q1, &q2, &how, rng)?)
                } else {
                    let qmin: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| a.min(*b)).collect();
                    Ok(argmax(&qmin))
                }
            }
        }
    }
}

/// Protocol shared by every cell of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    /// Template world; each task resizes it with the density rule.
    pub world: WorldConfig,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Sampling temperature for stochastic checkpoints.
    pub alpha: f64,
    /// Take the argmax of the minimum Q even for stochastic checkpoints.
    pub greedy: bool,
    /// Fill `wall_time_s`. Off by default so repeated runs write identical files.
    pub record_timing: bool,
    /// Write one JSON-lines trace per episode here.
    pub trace_dir: Option<PathBuf>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            episodes: 50,
            seeds: (0..5).collect(),
            alpha: 0.05,
            greedy: false,
            record_timing: false,
            trace_dir: None,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        if self.episodes == 0 || self.seeds.is_empty() {
            return Err(Error::InvalidArgument("need at least one episode and one seed".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("evaluation alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// One evaluated episode; also the results-file row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub checkpoint: String,
    pub task_label: String,
    pub n: usize,
    pub m: usize,
    pub mask_k: Option<usize>,
    pub seed: u64,
    pub episode: usize,
    /// Undiscounted sum of team rewards.
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub duplicate_assignment_rate: f64,
    pub wall_time_s: Option<f64>,
}

/// Summary of one (policy, task, mask) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub checkpoint: String,
    pub task: TaskSpec,
    /// Mean over every episode of every seed.
    pub mean_return: f64,
    /// Sample standard deviation of the per-seed means; zero for one seed.
    pub std_across_seeds: f64,
    pub seed_means: Vec<f64>,
    pub episodes_per_seed: usize,
    pub n_seeds: usize,
    pub mean_duplicate_assignment_rate: f64,
    /// Score against the greedy baseline on the same task, when one was run.
    pub normalized: Option<f64>,
}

impl EvalReport {
    /// Aggregates records ordered seed-major, `episodes_per_seed` per seed.
    pub fn from_records(checkpoint: &str, task: &TaskSpec, episodes_per_seed: usize, records: &[EpisodeRecord]) -> Result<Self> {
        if episodes_per_seed == 0 || records.is_empty() || records.len() % episodes_per_seed != 0 {
            return Err(Error::InvalidArgument("records do not split evenly into seeds".into()));
        }
        let seed_means: Vec<f64> = records
            .chunks(episodes_per_seed)
            .map(|c| c.iter().map(|r| r.episode_return).sum::<f64>() / c.len() as f64)
            .collect();
        let k = seed_means.len() as f64;
        let mean_return = seed_means.iter().sum::<f64>() / k;
        let std_across_seeds = if seed_means.len() > 1 {
            (seed_means.iter().map(|m| (m - mean_return).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let dup = records.iter().map(|r| r.duplicate_assignment_rate).sum::<f64>() / records.len() as f64;
        Ok(Self {
            checkpoint: checkpoint.to_string(),
            task: task.clone(),
            mean_return,
            std_across_seeds,
            n_seeds: seed_means.len(),
            seed_means,
            episodes_per_seed,
            mean_duplicate_assignment_rate: dup,
            normalized: None,
        })
    }
}

/// Fraction of pursuers whose nearest target belief is also some other
/// pursuer's nearest: `(n - distinct nearest targets) / n`.
pub fn duplicate_assignment_rate(features: &[FeatureSet]) -> f64 {
    if features.is_empty() {
        return 0.0;
    }
    let distinct: HashSet<usize> = features.iter().filter_map(FeatureSet::nearest_target).collect();
    (features.len() - distinct.len()) as f64 / features.len() as f64
}

fn trace_path(dir: &Path, policy: &str, task: &TaskSpec, seed: u64, episode: usize) -> PathBuf {
    let stem = Path::new(policy).file_stem().map_or_else(|| policy.to_string(), |s| s.to_string_lossy().into_owned());
    let mask = task.mask_k.map_or_else(|| "none".to_string(), |k| k.to_string());
    dir.join(format!("{stem}_{}_k{mask}_s{seed}_e{episode}.jsonl", task.label))
}

/// Runs one full episode. Environment and action randomness are keyed by
/// `(seed, episode)` alone, so cells that differ only in policy or mask start
/// from identical worlds.
pub fn run_episode(policy: &Policy, task: &TaskSpec, settings: &EvalSettings, seed: u64, episode: usize) -> Result<EpisodeRecord> {
    let start = Instant::now();
    let world = settings.world.for_task(task.n_agents, task.m_targets)?;
    let root = SeededStream::new(seed);
    let (mut env, mut obs) = Environment::reset(&world, &root.derive_path(&[ENV_STREAM, episode as u64]))?;
    let mut rng = root.derive_path(&[ACTION_STREAM, episode as u64]);
    let mut trace = match &settings.trace_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(BufWriter::new(File::create(trace_path(dir, policy.name(), task, seed, episode))?))
        }
        None => None,
    };

    let mut episode_return = 0.0;
    let mut dup_sum = 0.0;
    let mut steps = 0usize;
    while !env.state().done {
        dup_sum += duplicate_assignment_rate(&obs.features);
        let actions = obs
            .features
            .iter()
            .map(|fs| {
                let fs = match task.mask_k {
                    Some(k) => Cow::Owned(mask_k_nearest(fs, k)?),
                    None => Cow::Borrowed(fs),
                };
                policy.act(&fs, settings, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let next = env.step(&actions)?;
        if let Some(w) = trace.as_mut() {
            write_record(w, &env.trace_record(&actions, &next)?)?;
        }
        episode_return += next.reward;
        steps += 1;
        obs = next;
    }
    Ok(EpisodeRecord {
        checkpoint: policy.name().to_string(),
        task_label: task.label.clone(),
        n: task.n_agents,
        m: task.m_targets,
        mask_k: task.mask_k,
        seed,
        episode,
        episode_return,
        duplicate_assignment_rate: dup_sum / steps.max(1) as f64,
        wall_time_s: settings.record_timing.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Every episode of every seed for one cell, in parallel. Records come back
/// seed-major regardless of scheduling.
pub fn evaluate(policy: &Policy, task: &TaskSpec, settings: &EvalSettings) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    settings.validate()?;
    let jobs: Vec<(u64, usize)> =
        settings.seeds.iter().flat_map(|&s| (0..settings.episodes).map(move |e| (s, e))).collect();
    let records = jobs
        .into_par_iter()
        .map(|(seed, episode)| run_episode(policy, task, settings, seed, episode))
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::from_records(policy.name(), task, settings.episodes, &records)?;
    log::info!(
        "{} on {task}: mean return {:.3} (seed std {:.3})",
        policy.name(),
        report.mean_return,
        report.std_across_seeds
    );
    Ok((report, records))
}

/// Nearest-target-only execution of a set-capable checkpoint.
pub fn greedy_baseline(policy: &Policy, task: &TaskSpec, settings: &EvalSettings) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    evaluate(policy, &task.with_mask(Some(1))?, settings)
}

pub fn random_baseline(task: &TaskSpec, settings: &EvalSettings) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    evaluate(&Policy::Random, task, settings)
}

/// `(policy - baseline) / |baseline|`: zero at parity, positive when the
/// policy does better.
pub fn normalized_score(policy_mean: f64, baseline_mean: f64) -> Option<f64> {
    (baseline_mean != 0.0).then(|| (policy_mean - baseline_mean) / baseline_mean.abs())
}

/// Normalized score of each policy report against the baseline report for
/// the same task size.
pub fn normalize_vs_baseline(policy: &[EvalReport], baseline: &[EvalReport]) -> Result<Vec<f64>> {
    policy
        .iter()
        .map(|p| {
            let b = baseline
                .iter()
                .find(|b| (b.task.n_agents, b.task.m_targets) == (p.task.n_agents, p.task.m_targets))
                .ok_or_else(|| Error::InvalidArgument(format!("no baseline for task {}", p.task.label)))?;
            normalized_score(p.mean_return, b.mean_return).ok_or_else(|| Error::UndefinedNormalization(p.task.label.clone()))
        })
        .collect()
}
