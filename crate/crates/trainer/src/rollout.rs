use rand::Rng;
use swarmtrack_core::{Environment, StepResult};
use swarmtrack_valuenet::NetParams;

use crate::policy::{select_action, Exploration};
use crate::{ReplayBuffer, Result, Transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    /// Undiscounted sum of team rewards.
    pub episode_return: f64,
    pub steps: usize,
    pub transitions: usize,
}

/// Runs `env` to its horizon. Every pursuer picks its action from its own
/// feature set through the shared online nets; each step appends one
/// transition per pursuer, all carrying the same team reward.
pub fn collect_episode(
    env: &mut Environment,
    first: StepResult,
    online: [&NetParams<f32>; 2],
    how: &Exploration,
    reward_scale: f64,
    rng: &mut impl Rng,
    buffer: &mut ReplayBuffer,
) -> Result<EpisodeStats> {
    let mut obs = first;
    let mut stats = EpisodeStats { episode_return: 0.0, steps: 0, transitions: 0 };
    while !env.state().done {
        let actions = obs
            .features
            .iter()
            .map(|fs| select_action(fs, online, how, rng))
            .collect::<Result<Vec<_>>>()?;
        let next = env.step(&actions)?;
        let r = next.reward * reward_scale;
        for ((s, s_next), &a) in obs.features.into_iter().zip(&next.features).zip(&actions) {
            buffer.push(Transition { s, a, r, s_next: s_next.clone(), done: next.done });
            stats.transitions += 1;
        }
        stats.episode_return += next.reward;
        stats.steps += 1;
        obs = next;
    }
    Ok(stats)
}
