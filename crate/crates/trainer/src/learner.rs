use rand::Rng;
use swarmtrack_core::{FeatureSet, SeededStream};
use swarmtrack_valuenet::{Checkpoint, Gradients, NetConfig, NetParams};

use crate::optim::{clip_global_norm, Adam};
use crate::targets::{hard_double_q_target, huber, huber_grad, soft_double_q_target};
use crate::{Error, PolicyMode, Result, SoftPolicySource, TrainConfig, Transition};

pub fn q_values(net: &NetParams<f32>, fs: &FeatureSet) -> Result<Vec<f64>> {
    Ok(net.q_values(fs)?.into_iter().map(f64::from).collect())
}

/// The two online Q-networks and their slowly tracking target copies. These
/// are the only parameters in the system, whatever the team size.
#[derive(Debug, Clone, PartialEq)]
pub struct QNets {
    pub online: [NetParams<f32>; 2],
    pub target: [NetParams<f32>; 2],
}

impl QNets {
    pub fn init(cfg: &NetConfig, stream: &SeededStream) -> Result<Self> {
        let q1 = NetParams::init(cfg, &mut stream.derive(1))?;
        let q2 = NetParams::init(cfg, &mut stream.derive(2))?;
        Ok(Self { target: [q1.clone(), q2.clone()], online: [q1, q2] })
    }

    pub fn online_refs(&self) -> [&NetParams<f32>; 2] {
        [&self.online[0], &self.online[1]]
    }

    pub fn to_checkpoint(&self, meta: serde_json::Value) -> Result<Checkpoint> {
        let [q1, q2] = self.online.clone();
        let [t1, t2] = self.target.clone();
        Ok(Checkpoint::new(q1.config.clone(), meta)
            .with_net("q1", q1)?
            .with_net("q2", q2)?
            .with_net("q1_target", t1)?
            .with_net("q2_target", t2)?)
    }

    /// Online nets from a checkpoint; target nets default to copies of them.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |name: &str| {
            ck.net(name)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no net {name:?}")))
        };
        let (q1, q2) = (get("q1")?, get("q2")?);
        let t1 = ck.net("q1_target").cloned().unwrap_or_else(|| q1.clone());
        let t2 = ck.net("q2_target").cloned().unwrap_or_else(|| q2.clone());
        Ok(Self { online: [q1, q2], target: [t1, t2] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub loss: f64,
    /// Joint gradient norm of both online nets before clipping.
    pub grad_norm: f64,
    pub clipped_norm: f64,
}

/// Owns the networks and optimizer state of one training run.
pub struct Learner {
    pub nets: QNets,
    adam: [Adam; 2],
    updates: u64,
}

impl Learner {
    pub fn new(nets: QNets, cfg: &TrainConfig) -> Self {
        let mk = |n: usize| Adam::new(n, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        let adam = [mk(nets.online[0].len()), mk(nets.online[1].len())];
        Self { nets, adam, updates: 0 }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Regression targets for a batch, computed from the current nets.
    pub fn td_targets(&self, batch: &[&Transition], cfg: &TrainConfig, alpha: f64) -> Result<Vec<f64>> {
        let nets = &self.nets;
        batch
            .iter()
            .map(|t| {
                if t.done {
                    return Ok(t.r);
                }
                let t1 = q_values(&nets.target[0], &t.s_next)?;
                let t2 = q_values(&nets.target[1], &t.s_next)?;
                match cfg.mode {
                    PolicyMode::Deterministic => {
                        let o1 = q_values(&nets.online[0], &t.s_next)?;
                        let o2 = q_values(&nets.online[1], &t.s_next)?;
                        Ok(hard_double_q_target(t.r, false, cfg.gamma, [&o1, &o2], [&t1, &t2]))
                    }
                    PolicyMode::Stochastic => {
                        let pq = match cfg.soft_policy_source {
                            SoftPolicySource::Target => None,
                            SoftPolicySource::Online => {
                                let o1 = q_values(&nets.online[0], &t.s_next)?;
                                let o2 = q_values(&nets.online[1], &t.s_next)?;
                                Some(o1.iter().zip(&o2).map(|(a, b)| a.min(*b)).collect::<Vec<_>>())
                            }
                        };
                        soft_double_q_target(t.r, false, cfg.gamma, alpha, [&t1, &t2], pq.as_deref())
                    }
                }
            })
            .collect()
    }

    /// Loss and joint gradients of both online nets against fixed targets `y`.
    pub fn loss_and_gradients(
        &self,
        batch: &[&Transition],
        y: &[f64],
        delta: f64,
    ) -> Result<(f64, [Gradients; 2])> {
        if batch.is_empty() || batch.len() != y.len() {
            return Err(Error::InvalidArgument("batch must be non-empty with one target per transition".into()));
        }
        let inv_b = 1.0 / batch.len() as f64;
        let mut grads = [self.nets.online[0].zeros_like::<f64>(), self.nets.online[1].zeros_like::<f64>()];
        let mut loss = 0.0;
        let mut dq = vec![0.0; self.nets.online[0].config.n_actions];
        for (t, &yt) in batch.iter().zip(y) {
            let rows = t.s.rows();
            for (net, g) in self.nets.online.iter().zip(grads.iter_mut()) {
                let cache = net.forward_cached(&rows)?;
                let e = cache.q_values[t.a] as f64 - yt;
                loss += huber(e, delta) * inv_b;
                dq.iter_mut().for_each(|v| *v = 0.0);
                dq[t.a] = huber_grad(e, delta) * inv_b;
                net.backward_cached(&cache, &dq, g)?;
            }
        }
        Ok((loss, grads))
    }

    /// One clipped gradient step on both online nets followed by Polyak
    /// averaging of the target nets.
    pub fn update(&mut self, batch: &[&Transition], cfg: &TrainConfig, alpha: f64) -> Result<UpdateStats> {
        let y = self.td_targets(batch, cfg, alpha)?;
        let (loss, [mut g1, mut g2]) = self.loss_and_gradients(batch, &y, cfg.huber_delta)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { update: self.updates, detail: format!("loss is {loss}") });
        }
        let (grad_norm, clipped_norm) = clip_global_norm(&mut [&mut g1, &mut g2], cfg.grad_clip_norm);
        if !grad_norm.is_finite() {
            return Err(Error::Divergence { update: self.updates, detail: format!("gradient norm is {grad_norm}") });
        }
        for ((net, adam), g) in self.nets.online.iter_mut().zip(&mut self.adam).zip([&g1, &g2]) {
            adam.step(&mut net.data, &g.data)?;
            if !net.all_finite() {
                return Err(Error::Divergence { update: self.updates, detail: "non-finite parameters".into() });
            }
        }
        for (target, online) in self.nets.target.iter_mut().zip(&self.nets.online) {
            target.polyak_from(online, cfg.tau)?;
        }
        self.updates += 1;
        Ok(UpdateStats { loss, grad_norm, clipped_norm })
    }

    /// Samples a batch from `buffer` and applies [`Learner::update`].
    pub fn update_from(
        &mut self,
        buffer: &crate::ReplayBuffer,
        cfg: &TrainConfig,
        alpha: f64,
        rng: &mut impl Rng,
    ) -> Result<UpdateStats> {
        let batch = buffer.sample(cfg.batch_size, rng)?;
        self.update(&batch, cfg, alpha)
    }
}
