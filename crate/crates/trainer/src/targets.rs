//! Bootstrapped regression targets and the robust loss.

use crate::policy::{argmax, log_policy};
use crate::Result;

fn elementwise_min(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).collect()
}

/// Clipped double Q target: the action is chosen by the sum of the online
/// nets and valued by the smaller of the two target nets.
pub fn hard_double_q_target(r: f64, done: bool, gamma: f64, online_next: [&[f64]; 2], target_next: [&[f64]; 2]) -> f64 {
    if done {
        return r;
    }
    let sum: Vec<f64> = online_next[0].iter().zip(online_next[1]).map(|(a, b)| a + b).collect();
    let a = argmax(&sum);
    r + gamma * target_next[0][a].min(target_next[1][a])
}

/// Entropy-regularised target. The expectation is taken under the Boltzmann
/// policy of `policy_q` (the elementwise minimum of the target nets when
/// `None`), separately for each target net, and the smaller value is kept.
pub fn soft_double_q_target(
    r: f64,
    done: bool,
    gamma: f64,
    alpha: f64,
    target_next: [&[f64]; 2],
    policy_q: Option<&[f64]>,
) -> Result<f64> {
    if done {
        return Ok(r);
    }
    let owned;
    let pq = match policy_q {
        Some(q) => q,
        None => {
            owned = elementwise_min(target_next[0], target_next[1]);
            &owned
        }
    };
    let logp = log_policy(pq, alpha)?;
    let value = |q: &[f64]| -> f64 {
        q.iter()
            .zip(&logp)
            .map(|(qa, lp)| {
                let p = lp.exp();
                if p == 0.0 {
                    0.0
                } else {
                    p * (qa - alpha * lp)
                }
            })
            .sum()
    };
    Ok(r + gamma * value(target_next[0]).min(value(target_next[1])))
}

/// The soft target's zero-temperature limit: greedy in the minimum of the
/// target nets, valued by the smaller target net.
pub fn greedy_min_target(r: f64, done: bool, gamma: f64, target_next: [&[f64]; 2]) -> f64 {
    if done {
        return r;
    }
    let a = argmax(&elementwise_min(target_next[0], target_next[1]));
    r + gamma * target_next[0][a].min(target_next[1][a])
}

pub fn huber(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(e: f64, delta: f64) -> f64 {
    e.clamp(-delta, delta)
}
