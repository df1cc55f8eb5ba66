use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Soft double Q-learning; actions sampled from the Boltzmann policy.
    Stochastic,
    /// Clipped double Q-learning with epsilon-greedy exploration.
    Deterministic,
}

/// Which network pair induces the policy inside the soft target's expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftPolicySource {
    Target,
    Online,
}

fn linear(start: f64, end: f64, decay_steps: u64, step: u64) -> f64 {
    if decay_steps == 0 || step >= decay_steps {
        return end;
    }
    start + (end - start) * step as f64 / decay_steps as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaSchedule {
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub decay_steps: u64,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        Self { alpha_start: 0.5, alpha_end: 0.05, decay_steps: 100_000 }
    }
}

impl AlphaSchedule {
    /// Temperature after `env_steps` environment steps.
    pub fn value(&self, env_steps: u64) -> f64 {
        linear(self.alpha_start, self.alpha_end, self.decay_steps, env_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonSchedule {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { epsilon_start: 1.0, epsilon_end: 0.05, decay_steps: 100_000 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, env_steps: u64) -> f64 {
        linear(self.epsilon_start, self.epsilon_end, self.decay_steps, env_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Smallest team size sampled per episode.
    pub n_min: usize,
    /// Largest team size sampled per episode.
    pub n_max: usize,
    pub m_min: usize,
    /// Largest target count sampled per episode.
    pub m_max: usize,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: AlphaSchedule,
    pub epsilon: EpsilonSchedule,
    pub mode: PolicyMode,
    pub soft_policy_source: SoftPolicySource,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip_norm: f64,
    pub huber_delta: f64,
    /// Environment steps per gradient update. One step stores `n` transitions.
    pub steps_per_update: usize,
    /// Transitions stored before the first update.
    pub learning_starts: usize,
    /// Multiplier applied to rewards before they are stored.
    pub reward_scale: f64,
    pub total_env_steps: u64,
    /// Environment steps between checkpoints.
    pub eval_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 4,
            m_min: 1,
            m_max: 4,
            gamma: 0.99,
            tau: 0.005,
            alpha: AlphaSchedule::default(),
            epsilon: EpsilonSchedule::default(),
            mode: PolicyMode::Stochastic,
            soft_policy_source: SoftPolicySource::Target,
            batch_size: 256,
            buffer_capacity: 500_000,
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip_norm: 10.0,
            huber_delta: 1.0,
            steps_per_update: 1,
            learning_starts: 1_000,
            reward_scale: 1.0,
            total_env_steps: 200_000,
            eval_interval: 20_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.n_min == 0 || self.m_min == 0 || self.n_min > self.n_max || self.m_min > self.m_max {
            return bad("task size ranges need 1 <= n_min <= n_max and 1 <= m_min <= m_max");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        let a = &self.alpha;
        if !(a.alpha_end > 0.0 && a.alpha_end <= a.alpha_start && a.alpha_start.is_finite()) {
            return bad("alpha schedule needs 0 < alpha_end <= alpha_start");
        }
        let e = &self.epsilon;
        if !((0.0..=1.0).contains(&e.epsilon_start) && (0.0..=1.0).contains(&e.epsilon_end)) {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.steps_per_update == 0 {
            return bad("batch_size, buffer_capacity and steps_per_update must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("grad_clip_norm", self.grad_clip_norm),
            ("huber_delta", self.huber_delta),
            ("adam_eps", self.adam_eps),
            ("reward_scale", self.reward_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("adam betas must lie in [0, 1)");
        }
        Ok(())
    }
}
