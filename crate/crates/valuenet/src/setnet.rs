//! Encoder, attention blocks, pooling and decoder, with the matching
//! reverse pass.

use swarmtrack_core::{FeatureSet, FEATURE_DIM};

use crate::config::Activation;
use crate::linalg::{
    axpy, axpy_f64, dense_backward_vec, dense_rows, dense_vec, dot, dot_f64, gemm, transpose, Rows, View, GEMM_FROM,
};
use crate::params::DenseSlot;
use crate::{Error, Gradients, NetParams, Result, Scalar};

fn activate<S: Scalar>(act: Activation, x: S) -> S {
    match act {
        Activation::Relu => {
            if x > S::ZERO {
                x
            } else {
                S::ZERO
            }
        }
        Activation::Tanh => x.tanh(),
    }
}

/// Derivative expressed through the pre-activation `x` and output `y`.
fn activate_grad<S: Scalar>(act: Activation, x: S, y: S) -> S {
    match act {
        Activation::Relu => {
            if x > S::ZERO {
                S::ONE
            } else {
                S::ZERO
            }
        }
        Activation::Tanh => S::ONE - y * y,
    }
}

struct BlockCache<S> {
    input: Rows<S>,
    q: Rows<S>,
    k: Rows<S>,
    v: Rows<S>,
    /// Attention weights per head, `n x n` row-major.
    attn: Vec<Vec<f64>>,
    concat: Rows<S>,
}

/// Intermediate values of one forward pass, consumed by the reverse pass.
pub struct ForwardCache<S> {
    u: Rows<S>,
    pre1: Rows<S>,
    h1: Rows<S>,
    blocks: Vec<BlockCache<S>>,
    pooled: Vec<S>,
    pre_g: Vec<S>,
    g: Vec<S>,
    pub q_values: Vec<S>,
}

impl<S: Scalar> ForwardCache<S> {
    /// Signs of every pre-activation feeding a nonlinearity. Two passes with
    /// equal patterns lie on the same smooth piece of a rectifier network.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre1.data.iter().chain(&self.pre_g).map(|&x| x > S::ZERO).collect()
    }
}

impl<S: Scalar> NetParams<S> {
    fn scaled_input(&self, rows: &[[f64; FEATURE_DIM]]) -> Result<Rows<S>> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty feature set".into()));
        }
        let scale = &self.config.input_scale;
        let mut u = Rows::zeros(rows.len(), FEATURE_DIM);
        for (i, r) in rows.iter().enumerate() {
            for (k, dst) in u.row_mut(i).iter_mut().enumerate() {
                *dst = S::from_f64(r[k] * scale[k]);
            }
        }
        Ok(u)
    }

    fn act_rows(&self, pre: &Rows<S>) -> Rows<S> {
        let act = self.config.activation;
        Rows { n: pre.n, d: pre.d, data: pre.data.iter().map(|&x| activate(act, x)).collect() }
    }

    fn apply(&self, slot: &DenseSlot, x: &Rows<S>) -> Rows<S> {
        let (w, b) = self.dense(slot);
        dense_rows(w, b, x, slot.out_dim)
    }

    /// Multi-head scaled dot-product attention without the output projection.
    /// Returns the concatenated head outputs and, when `keep_weights`, the
    /// attention weights of every head.
    fn attend(&self, q: &Rows<S>, k: &Rows<S>, v: &Rows<S>, keep_weights: bool) -> (Rows<S>, Vec<Vec<f64>>) {
        let n = q.n;
        let e = q.d;
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        // key and value columns laid out contiguously over set elements
        let kt = transpose(&k.data, n, e);
        let vt: Vec<f64> = transpose(&v.data, n, e).into_iter().map(|x| x.to_f64()).collect();
        if n >= GEMM_FROM {
            return self.attend_blocked(q, k, v, keep_weights);
        }
        let mut concat = Rows::zeros(n, e);
        let mut weights = Vec::new();
        let mut raw = vec![S::ZERO; n];
        let mut a_row = vec![0.0f64; n];
        for h in 0..self.config.n_heads {
            let mut a = if keep_weights { vec![0.0f64; n * n] } else { Vec::new() };
            for i in 0..n {
                raw.iter_mut().for_each(|x| *x = S::ZERO);
                for d in h * hd..(h + 1) * hd {
                    axpy(q.row(i)[d], &kt[d * n..(d + 1) * n], &mut raw);
                }
                let max = raw.iter().map(|x| x.to_f64()).fold(f64::NEG_INFINITY, f64::max) * scale;
                let mut z = 0.0;
                for (w, &s) in a_row.iter_mut().zip(&raw) {
                    *w = S::from_f64(s.to_f64() * scale - max).exp().to_f64();
                    z += *w;
                }
                let inv = 1.0 / z;
                a_row.iter_mut().for_each(|w| *w *= inv);
                for d in h * hd..(h + 1) * hd {
                    concat.row_mut(i)[d] = S::from_f64(dot_f64(&a_row, &vt[d * n..(d + 1) * n]));
                }
                if keep_weights {
                    a[i * n..(i + 1) * n].copy_from_slice(&a_row);
                }
            }
            if keep_weights {
                weights.push(a);
            }
        }
        (concat, weights)
    }

    /// [`Self::attend`] for larger sets, with both products on the blocked
    /// matrix kernels.
    fn attend_blocked(&self, q: &Rows<S>, k: &Rows<S>, v: &Rows<S>, keep_weights: bool) -> (Rows<S>, Vec<Vec<f64>>) {
        let n = q.n;
        let e = q.d;
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let vf: Vec<f64> = v.data.iter().map(|x| x.to_f64()).collect();
        let mut concat = vec![0.0f64; n * e];
        let mut weights = Vec::new();
        let mut scores = vec![S::ZERO; n * n];
        let mut a = vec![0.0f64; n * n];
        for h in 0..self.config.n_heads {
            let off = h * hd;
            gemm(
                n,
                hd,
                n,
                View::new(&q.data, off, e, 1),
                View::new(&k.data, off, 1, e),
                S::ZERO,
                &mut scores,
                0,
                n,
            );
            for (srow, arow) in scores.chunks_exact(n).zip(a.chunks_exact_mut(n)) {
                let max = srow.iter().map(|x| x.to_f64()).fold(f64::NEG_INFINITY, f64::max) * scale;
                let mut z = 0.0;
                for (w, &s) in arow.iter_mut().zip(srow) {
                    *w = S::from_f64(s.to_f64() * scale - max).exp().to_f64();
                    z += *w;
                }
                let inv = 1.0 / z;
                arow.iter_mut().for_each(|w| *w *= inv);
            }
            gemm(n, n, hd, View::new(&a, 0, n, 1), View::new(&vf, off, e, 1), 0.0, &mut concat, off, e);
            if keep_weights {
                weights.push(a.clone());
            }
        }
        let concat = Rows { n, d: e, data: concat.into_iter().map(S::from_f64).collect() };
        (concat, weights)
    }

    fn block_forward(&self, block: usize, x: Rows<S>, keep_weights: bool) -> (Rows<S>, BlockCache<S>) {
        let [sq, sk, sv, so] = &self.layout.blocks[block];
        let q = self.apply(sq, &x);
        let k = self.apply(sk, &x);
        let v = self.apply(sv, &x);
        let (concat, attn) = self.attend(&q, &k, &v, keep_weights);
        let mut out = self.apply(so, &concat);
        for (o, xi) in out.data.iter_mut().zip(&x.data) {
            *o += *xi;
        }
        (out, BlockCache { input: x, q, k, v, attn, concat })
    }

    /// Output of attention block `block` for input rows `x` (residual included).
    pub fn attention_block(&self, block: usize, x: &Rows<S>) -> Result<Rows<S>> {
        self.check_block(block, x)?;
        Ok(self.block_forward(block, x.clone(), false).0)
    }

    /// Head outputs of block `block` before the output projection and residual,
    /// together with the per-head attention weights.
    pub fn attention_heads(&self, block: usize, x: &Rows<S>) -> Result<(Rows<S>, Vec<Vec<f64>>)> {
        self.check_block(block, x)?;
        let [sq, sk, sv, _] = &self.layout.blocks[block];
        Ok(self.attend(&self.apply(sq, x), &self.apply(sk, x), &self.apply(sv, x), true))
    }

    /// Value projection of block `block`.
    pub fn value_projection(&self, block: usize, x: &Rows<S>) -> Result<Rows<S>> {
        self.check_block(block, x)?;
        Ok(self.apply(&self.layout.blocks[block][2], x))
    }

    fn check_block(&self, block: usize, x: &Rows<S>) -> Result<()> {
        if block >= self.layout.blocks.len() {
            return Err(Error::InvalidArgument(format!("no attention block {block}")));
        }
        if x.n == 0 || x.d != self.config.embed_dim {
            return Err(Error::Shape(format!("expected n >= 1 rows of width {}", self.config.embed_dim)));
        }
        Ok(())
    }

    /// Q-values for a set of raw feature rows, keeping intermediates.
    pub fn forward_cached(&self, rows: &[[f64; FEATURE_DIM]]) -> Result<ForwardCache<S>> {
        self.run(rows, true)
    }

    fn run(&self, rows: &[[f64; FEATURE_DIM]], keep_weights: bool) -> Result<ForwardCache<S>> {
        let act = self.config.activation;
        let u = self.scaled_input(rows)?;
        let pre1 = self.apply(&self.layout.psi[0], &u);
        let h1 = self.act_rows(&pre1);
        let mut z = self.apply(&self.layout.psi[1], &h1);

        let mut blocks = Vec::with_capacity(self.layout.blocks.len());
        for b in 0..self.layout.blocks.len() {
            let (out, cache) = self.block_forward(b, z, keep_weights);
            blocks.push(cache);
            z = out;
        }

        let mut sum = vec![0.0f64; z.d];
        for i in 0..z.n {
            axpy_f64(1.0, z.row(i), &mut sum);
        }
        let pooled: Vec<S> = sum.into_iter().map(S::from_f64).collect();

        let [r0, r1] = &self.layout.rho;
        let mut pre_g = vec![S::ZERO; r0.out_dim];
        let (w, b) = self.dense(r0);
        dense_vec(w, b, &pooled, &mut pre_g);
        let g: Vec<S> = pre_g.iter().map(|&x| activate(act, x)).collect();
        let mut q_values = vec![S::ZERO; r1.out_dim];
        let (w, b) = self.dense(r1);
        dense_vec(w, b, &g, &mut q_values);

        Ok(ForwardCache { u, pre1, h1, blocks, pooled, pre_g, g, q_values })
    }

    pub fn forward(&self, rows: &[[f64; FEATURE_DIM]]) -> Result<Vec<S>> {
        Ok(self.run(rows, false)?.q_values)
    }

    pub fn q_values(&self, fs: &FeatureSet) -> Result<Vec<S>> {
        self.forward(&fs.rows())
    }

    /// Adds `dQ/dparams` contracted with `dq` into `grad`.
    pub fn backward_cached(&self, cache: &ForwardCache<S>, dq: &[f64], grad: &mut Gradients) -> Result<()> {
        if dq.len() != self.config.n_actions {
            return Err(Error::Shape(format!("dq has {} entries, expected {}", dq.len(), self.config.n_actions)));
        }
        if !grad.same_shape(self) {
            return Err(Error::Shape("gradient buffer does not match network".into()));
        }
        let act = self.config.activation;
        let gbuf = &mut grad.data;

        // decoder
        let [r0, r1] = &self.layout.rho;
        let dq_s: Vec<S> = dq.iter().map(|&v| S::from_f64(v)).collect();
        let mut dg = vec![S::ZERO; r1.in_dim];
        backward_dense_vec(self, r1, &cache.g, &dq_s, gbuf, Some(&mut dg));
        let dpre_g: Vec<S> = dg
            .iter()
            .zip(cache.pre_g.iter().zip(&cache.g))
            .map(|(&d, (&x, &y))| d * activate_grad(act, x, y))
            .collect();
        let mut dpooled = vec![S::ZERO; r0.in_dim];
        backward_dense_vec(self, r0, &cache.pooled, &dpre_g, gbuf, Some(&mut dpooled));

        // sum pooling broadcasts the same gradient to every element
        let n = cache.u.n;
        let mut dz = Rows::zeros(n, self.config.embed_dim);
        for i in 0..n {
            dz.row_mut(i).copy_from_slice(&dpooled);
        }

        for (b, bc) in cache.blocks.iter().enumerate().rev() {
            dz = self.block_backward(b, bc, dz, gbuf);
        }

        let [p0, p1] = &self.layout.psi;
        let dh1 = backward_dense_rows(self, p1, &cache.h1, &dz, gbuf, true).unwrap();
        let mut dpre1 = dh1;
        for ((d, &x), &y) in dpre1.data.iter_mut().zip(&cache.pre1.data).zip(&cache.h1.data) {
            *d = *d * activate_grad(act, x, y);
        }
        backward_dense_rows(self, p0, &cache.u, &dpre1, gbuf, false);
        Ok(())
    }

    fn block_backward(&self, block: usize, c: &BlockCache<S>, dout: Rows<S>, gbuf: &mut [f64]) -> Rows<S> {
        let [sq, sk, sv, so] = &self.layout.blocks[block];
        let n = c.input.n;
        let e = self.config.embed_dim;
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();

        let dconcat = backward_dense_rows(self, so, &c.concat, &dout, gbuf, true).unwrap();
        let mut dq = vec![0.0f64; n * e];
        let mut dk = vec![0.0f64; n * e];
        let mut dv = vec![0.0f64; n * e];
        let mut da = vec![0.0f64; n];
        for (h, a) in c.attn.iter().enumerate() {
            let cols = h * hd..(h + 1) * hd;
            for i in 0..n {
                let d_out = &dconcat.row(i)[cols.clone()];
                let arow = &a[i * n..(i + 1) * n];
                let mut inner = 0.0;
                for j in 0..n {
                    da[j] = dot(d_out, &c.v.row(j)[cols.clone()]).to_f64();
                    inner += da[j] * arow[j];
                    axpy_f64(arow[j], d_out, &mut dv[j * e + cols.start..j * e + cols.end]);
                }
                let qi = &c.q.row(i)[cols.clone()];
                for j in 0..n {
                    let ds = arow[j] * (da[j] - inner) * scale;
                    axpy_f64(ds, &c.k.row(j)[cols.clone()], &mut dq[i * e + cols.start..i * e + cols.end]);
                    axpy_f64(ds, qi, &mut dk[j * e + cols.start..j * e + cols.end]);
                }
            }
        }
        let cast = |v: Vec<f64>| Rows { n, d: e, data: v.into_iter().map(S::from_f64).collect() };
        let mut dx = dout;
        for (slot, d) in [(sq, cast(dq)), (sk, cast(dk)), (sv, cast(dv))] {
            let part = backward_dense_rows(self, slot, &c.input, &d, gbuf, true).unwrap();
            for (x, p) in dx.data.iter_mut().zip(&part.data) {
                *x += *p;
            }
        }
        dx
    }

    /// Convenience wrapper: fresh gradients of `dq . Q(rows)`.
    pub fn backward(&self, rows: &[[f64; FEATURE_DIM]], dq: &[f64]) -> Result<Gradients> {
        let cache = self.forward_cached(rows)?;
        let mut g = self.zeros_like::<f64>();
        self.backward_cached(&cache, dq, &mut g)?;
        Ok(g)
    }
}

fn split_slot<'a>(gbuf: &'a mut [f64], slot: &DenseSlot) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(slot.w + slot.out_dim * slot.in_dim == slot.b);
    let (head, tail) = gbuf.split_at_mut(slot.b);
    (&mut head[slot.w..], &mut tail[..slot.out_dim])
}

fn backward_dense_vec<S: Scalar>(
    p: &NetParams<S>,
    slot: &DenseSlot,
    x: &[S],
    dy: &[S],
    gbuf: &mut [f64],
    dx: Option<&mut [S]>,
) {
    let (w, _) = p.dense(slot);
    let (dw, db) = split_slot(gbuf, slot);
    dense_backward_vec(w, x, dy, dw, db, dx);
}

fn backward_dense_rows<S: Scalar>(
    p: &NetParams<S>,
    slot: &DenseSlot,
    x: &Rows<S>,
    dy: &Rows<S>,
    gbuf: &mut [f64],
    need_dx: bool,
) -> Option<Rows<S>> {
    let (w, _) = p.dense(slot);
    let (dw, db) = split_slot(gbuf, slot);
    let mut dx = need_dx.then(|| Rows::zeros(x.n, slot.in_dim));
    for i in 0..x.n {
        let dxi = dx.as_mut().map(|d| d.row_mut(i));
        dense_backward_vec(w, x.row(i), dy.row(i), dw, db, dxi);
    }
    dx
}
