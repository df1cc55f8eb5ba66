use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use swarmtrack_core::SeededStream;

use crate::{Error, NetConfig, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset into the flat parameter vector.
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offsets of one dense layer's weight (`out x in`) and bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSlot {
    pub w: usize,
    pub b: usize,
    pub out_dim: usize,
    pub in_dim: usize,
}

impl DenseSlot {
    pub fn w_range(&self) -> std::ops::Range<usize> {
        self.w..self.w + self.out_dim * self.in_dim
    }

    pub fn b_range(&self) -> std::ops::Range<usize> {
        self.b..self.b + self.out_dim
    }
}

/// Names, shapes and offsets of every tensor of a network, in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
    pub psi: [DenseSlot; 2],
    /// Query, key, value and output projections of each attention block.
    pub blocks: Vec<[DenseSlot; 4]>,
    pub rho: [DenseSlot; 2],
    pub len: usize,
}

struct LayoutBuilder {
    tensors: Vec<TensorSpec>,
    len: usize,
}

impl LayoutBuilder {
    fn dense(&mut self, name: &str, out_dim: usize, in_dim: usize) -> DenseSlot {
        let w = self.push(format!("{name}.weight"), vec![out_dim, in_dim]);
        let b = self.push(format!("{name}.bias"), vec![out_dim]);
        DenseSlot { w, b, out_dim, in_dim }
    }

    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.len;
        self.len += shape.iter().product::<usize>();
        self.tensors.push(TensorSpec { name, shape, offset });
        offset
    }
}

impl Layout {
    pub fn for_config(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let (e, h) = (cfg.embed_dim, cfg.decoder_hidden);
        let mut lb = LayoutBuilder { tensors: Vec::new(), len: 0 };
        let psi = [lb.dense("psi.0", e, cfg.feature_dim), lb.dense("psi.1", e, e)];
        let blocks = (0..cfg.n_attention_blocks)
            .map(|k| {
                ["q", "k", "v", "o"].map(|p| lb.dense(&format!("mab.{k}.{p}"), e, e))
            })
            .collect();
        let rho = [lb.dense("rho.0", h, e), lb.dense("rho.1", cfg.n_actions, h)];
        Ok(Self { tensors: lb.tensors, psi, blocks, rho, len: lb.len })
    }

    /// Weight tensors as (slot) for fan-in/fan-out based initialisation.
    fn dense_slots(&self) -> impl Iterator<Item = &DenseSlot> {
        self.psi.iter().chain(self.blocks.iter().flatten()).chain(self.rho.iter())
    }
}

/// All weights of one set network, stored flat in [`Layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<S> {
    pub config: NetConfig,
    pub layout: Arc<Layout>,
    pub data: Vec<S>,
}

/// Reverse-mode derivatives, shaped like the parameters they belong to.
pub type Gradients = NetParams<f64>;

impl<S: Scalar> NetParams<S> {
    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        let layout = Layout::for_config(cfg)?;
        Ok(Self { config: cfg.clone(), data: vec![S::ZERO; layout.len], layout: Arc::new(layout) })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(cfg: &NetConfig, stream: &mut SeededStream) -> Result<Self> {
        let mut p = Self::zeros(cfg)?;
        let layout = p.layout.clone();
        for slot in layout.dense_slots() {
            let bound = (6.0 / (slot.in_dim + slot.out_dim) as f64).sqrt();
            for v in &mut p.data[slot.w_range()] {
                *v = S::from_f64(stream.gen_range(-bound..bound));
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[S]> {
        let t = self.layout.tensors.iter().find(|t| t.name == name)?;
        Some(&self.data[t.offset..t.offset + t.len()])
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&TensorSpec, &[S])> {
        self.layout.tensors.iter().map(move |t| (t, &self.data[t.offset..t.offset + t.len()]))
    }

    pub(crate) fn dense(&self, slot: &DenseSlot) -> (&[S], &[S]) {
        (&self.data[slot.w_range()], &self.data[slot.b_range()])
    }

    pub fn same_shape<T>(&self, other: &NetParams<T>) -> bool {
        self.config == other.config && self.data.len() == other.data.len()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-wise cast into another precision.
    pub fn cast<T: Scalar>(&self) -> NetParams<T> {
        NetParams {
            config: self.config.clone(),
            layout: self.layout.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn zeros_like<T: Scalar>(&self) -> NetParams<T> {
        NetParams { config: self.config.clone(), layout: self.layout.clone(), data: vec![T::ZERO; self.data.len()] }
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().powi(2)).sum::<f64>().sqrt()
    }
}

/// `tau * online + (1 - tau) * target`, element-wise.
pub fn polyak_update<S: Scalar>(target: &NetParams<S>, online: &NetParams<S>, tau: f64) -> Result<NetParams<S>> {
    let mut out = target.clone();
    polyak_in_place(&mut out, online, tau)?;
    Ok(out)
}

pub(crate) fn polyak_in_place<S: Scalar>(target: &mut NetParams<S>, online: &NetParams<S>, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    if !target.same_shape(online) {
        return Err(Error::Shape("target and online networks differ".into()));
    }
    let (a, b) = (S::from_f64(tau), S::from_f64(1.0 - tau));
    for (t, o) in target.data.iter_mut().zip(&online.data) {
        *t = a * *o + b * *t;
    }
    Ok(())
}

impl<S: Scalar> NetParams<S> {
    pub fn polyak_from(&mut self, online: &NetParams<S>, tau: f64) -> Result<()> {
        polyak_in_place(self, online, tau)
    }
}
