use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use swarmtrack_core::{FeatureSet, N_ACTIONS};
use swarmtrack_valuenet::NetParams;

use crate::learner::q_values;
use crate::{Error, PolicyMode, Result};

/// Boltzmann distribution `softmax(q / alpha)`.
pub fn policy_distribution(q: &[f64], alpha: f64) -> Result<Vec<f64>> {
    Ok(log_policy(q, alpha)?.into_iter().map(f64::exp).collect())
}

/// `log softmax(q / alpha)`, finite even where the probability underflows.
pub(crate) fn log_policy(q: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if q.is_empty() || q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Q-values must be finite and non-empty".into()));
    }
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = q.iter().map(|v| (v - max) / alpha).collect();
    let lse = scaled.iter().map(|s| s.exp()).sum::<f64>().ln();
    Ok(scaled.into_iter().map(|s| s - lse).collect())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// First index of the largest value.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical(p: &[f64], rng: &mut impl Rng) -> Result<usize> {
    let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidArgument(format!("bad distribution: {e}")))?;
    Ok(dist.sample(rng))
}

/// How actions are drawn during collection or evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    pub mode: PolicyMode,
    pub alpha: f64,
    pub epsilon: f64,
}

impl Exploration {
    pub fn greedy(mode: PolicyMode) -> Self {
        Self { mode, alpha: 0.0, epsilon: 0.0 }
    }
}

/// Action choice from the two online nets' values. Stochastic mode samples
/// from the Boltzmann policy over the elementwise minimum (or takes its argmax
/// when `alpha` is zero); deterministic mode is epsilon-greedy on the sum.
pub fn select_from_values(q1: &[f64], q2: &[f64], how: &Exploration, rng: &mut impl Rng) -> Result<usize> {
    match how.mode {
        PolicyMode::Stochastic => {
            let qmin: Vec<f64> = q1.iter().zip(q2).map(|(a, b)| a.min(*b)).collect();
            if how.alpha == 0.0 {
                Ok(argmax(&qmin))
            } else {
                sample_categorical(&policy_distribution(&qmin, how.alpha)?, rng)
            }
        }
        PolicyMode::Deterministic => {
            let u: f64 = rng.gen();
            if u < how.epsilon {
                Ok(rng.gen_range(0..q1.len()))
            } else {
                let sum: Vec<f64> = q1.iter().zip(q2).map(|(a, b)| a + b).collect();
                Ok(argmax(&sum))
            }
        }
    }
}

pub fn select_action(
    fs: &FeatureSet,
    online: [&NetParams<f32>; 2],
    how: &Exploration,
    rng: &mut impl Rng,
) -> Result<usize> {
    let q1 = q_values(online[0], fs)?;
    let q2 = q_values(online[1], fs)?;
    debug_assert_eq!(q1.len(), N_ACTIONS);
    select_from_values(&q1, &q2, how, rng)
}
