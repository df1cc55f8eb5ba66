use std::fs;
use std::path::Path;

use rand::Rng;
use serde::Serialize;
use swarmtrack_core::{Environment, SeededStream, WorldConfig};
use swarmtrack_valuenet::{Checkpoint, NetConfig};

use crate::policy::Exploration;
use crate::rollout::collect_episode;
use crate::{Error, Learner, QNets, ReplayBuffer, Result, TrainConfig};

const NET_STREAM: u64 = 0;
const TASK_STREAM: u64 = 1;
const EPISODE_STREAM: u64 = 2;
const ACTION_STREAM: u64 = 3;
const REPLAY_STREAM: u64 = 4;

/// Team size and target count for one training episode, each uniform on
/// `min..=max`.
pub fn sample_task(cfg: &TrainConfig, rng: &mut impl Rng) -> Result<(usize, usize)> {
    if cfg.n_min == 0 || cfg.m_min == 0 || cfg.n_min > cfg.n_max || cfg.m_min > cfg.m_max {
        return Err(Error::InvalidArgument("task size ranges need 1 <= min <= max".into()));
    }
    Ok((rng.gen_range(cfg.n_min..=cfg.n_max), rng.gen_range(cfg.m_min..=cfg.m_max)))
}

/// One line of the training curve, written after every episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub env_steps: u64,
    pub episode: u64,
    pub n: usize,
    pub m: usize,
    pub online_return: f64,
    /// Mean loss of the updates following this episode; empty before learning starts.
    pub loss: Option<f64>,
    pub alpha: f64,
    pub epsilon: f64,
}

pub struct TrainOutcome {
    pub curves: Vec<CurveRow>,
    /// Snapshots keyed by the environment steps seen when they were taken.
    pub checkpoints: Vec<(u64, Checkpoint)>,
    pub nets: QNets,
}

pub fn checkpoint_name(env_steps: u64) -> String {
    format!("ckpt_{env_steps:010}.qnet")
}

/// Runs the full collect/update loop. Episode task sizes are drawn with
/// [`sample_task`] and the map is resized to keep the per-pursuer area of
/// `world`'s density rule. When `out_dir` is given, `curves.csv` and every
/// checkpoint are written there as they are produced.
pub fn train(
    cfg: &TrainConfig,
    world: &WorldConfig,
    net: &NetConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    world.validate()?;
    let root = SeededStream::new(seed);
    let mut learner = Learner::new(QNets::init(net, &root.derive(NET_STREAM))?, cfg);
    let mut task_rng = root.derive(TASK_STREAM);
    let mut replay_rng = root.derive(REPLAY_STREAM);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;

    let mut writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(csv::Writer::from_path(dir.join("curves.csv"))?)
        }
        None => None,
    };
    let mode = serde_json::to_value(cfg.mode).expect("mode serializes");
    let snapshot = |learner: &Learner, env_steps: u64, episode: u64| -> Result<Checkpoint> {
        let meta = serde_json::json!({
            "env_steps": env_steps,
            "episode": episode,
            "updates": learner.updates(),
            "mode": mode,
            "seed": seed,
        });
        let ck = learner.nets.to_checkpoint(meta)?;
        if let Some(dir) = out_dir {
            ck.save(dir.join(checkpoint_name(env_steps)))?;
        }
        Ok(ck)
    };

    let mut checkpoints = vec![(0, snapshot(&learner, 0, 0)?)];
    let mut curves = Vec::new();
    let mut env_steps = 0u64;
    let mut episode = 0u64;
    let mut pending = 0usize;
    let mut next_checkpoint = cfg.eval_interval;

    while env_steps < cfg.total_env_steps {
        let (n, m) = sample_task(cfg, &mut task_rng)?;
        let task = world.for_task(n, m)?;
        let alpha = cfg.alpha.value(env_steps);
        let epsilon = cfg.epsilon.value(env_steps);
        let how = Exploration { mode: cfg.mode, alpha, epsilon };

        let (mut env, first) = Environment::reset(&task, &root.derive_path(&[EPISODE_STREAM, episode]))?;
        let mut act_rng = root.derive_path(&[ACTION_STREAM, episode]);
        let stats = collect_episode(
            &mut env,
            first,
            learner.nets.online_refs(),
            &how,
            cfg.reward_scale,
            &mut act_rng,
            &mut buffer,
        )?;
        env_steps += stats.steps as u64;
        episode += 1;

        pending += stats.steps;
        let n_updates = pending / cfg.steps_per_update;
        pending %= cfg.steps_per_update;
        let mut loss_sum = 0.0;
        let mut done_updates = 0;
        if buffer.len() >= cfg.learning_starts.max(1) {
            for _ in 0..n_updates {
                loss_sum += learner.update_from(&buffer, cfg, alpha, &mut replay_rng)?.loss;
                done_updates += 1;
            }
        }
        let row = CurveRow {
            env_steps,
            episode: episode - 1,
            n,
            m,
            online_return: stats.episode_return,
            loss: (done_updates > 0).then(|| loss_sum / done_updates as f64),
            alpha,
            epsilon,
        };
        log::debug!("{row:?}");
        if let Some(w) = writer.as_mut() {
            w.serialize(&row)?;
            w.flush()?;
        }
        curves.push(row);

        if env_steps >= next_checkpoint || env_steps >= cfg.total_env_steps {
            checkpoints.push((env_steps, snapshot(&learner, env_steps, episode)?));
            next_checkpoint = (env_steps / cfg.eval_interval + 1) * cfg.eval_interval;
        }
    }
    Ok(TrainOutcome { curves, checkpoints, nets: learner.nets })
}
