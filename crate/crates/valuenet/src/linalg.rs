//! Minimal dense kernels used by the networks.

use crate::Scalar;

/// Row-major `n x d` matrix; one row per set element.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows<S> {
    pub n: usize,
    pub d: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Rows<S> {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![S::ZERO; n * d] }
    }

    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Self {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            assert_eq!(r.as_ref().len(), d, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self { n: rows.len(), d, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    /// Rows in the order given by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, self.d);
        for (dst, &src) in perm.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }
}

/// Eight-lane dot product; fixed summation order.
#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::ZERO; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = S::ZERO;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * *xv;
    }
}

#[inline]
pub(crate) fn axpy_f64<S: Scalar>(alpha: f64, x: &[S], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv.to_f64();
    }
}

/// `y = W x + b` with `W` stored `out x in`, row-major.
pub(crate) fn dense_vec<S: Scalar>(w: &[S], b: &[S], x: &[S], y: &mut [S]) {
    let in_dim = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        *yo = b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], x);
    }
}

/// Row count from which products go through the blocked matrix kernels.
pub(crate) const GEMM_FROM: usize = 16;

/// A strided matrix view: element `(i, j)` is `data[off + i * rs + j * cs]`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, S> {
    pub data: &'a [S],
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a, S> View<'a, S> {
    pub fn new(data: &'a [S], off: usize, rs: usize, cs: usize) -> Self {
        Self { data, off, rs, cs }
    }
}

fn check_extent(len: usize, off: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        assert!(off + (rows - 1) * rs + (cols - 1) * cs < len, "strided view out of bounds");
    }
}

/// `C = A B + beta C` for an `m x k` view `a`, a `k x n` view `b` and a
/// row-major `m x n` block of `c` starting at `c_off` with row stride `rsc`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: View<S>,
    b: View<S>,
    beta: S,
    c: &mut [S],
    c_off: usize,
    rsc: usize,
) {
    check_extent(a.data.len(), a.off, m, k, a.rs, a.cs);
    check_extent(b.data.len(), b.off, k, n, b.rs, b.cs);
    check_extent(c.len(), c_off, m, n, rsc, 1);
    // SAFETY: extents checked above; `c` is a unique borrow, so it cannot
    // alias the shared views.
    unsafe {
        S::gemm(
            m,
            k,
            n,
            a.data.as_ptr().add(a.off),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.off),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr().add(c_off),
            rsc as isize,
            1,
        )
    }
}

/// `Y = X W^T + b` for every row of `x`.
pub(crate) fn dense_rows<S: Scalar>(w: &[S], b: &[S], x: &Rows<S>, out_dim: usize) -> Rows<S> {
    let in_dim = x.d;
    let mut y = Rows::zeros(x.n, out_dim);
    if x.n < GEMM_FROM {
        for i in 0..x.n {
            dense_vec(w, b, x.row(i), y.row_mut(i));
        }
        return y;
    }
    for i in 0..x.n {
        y.row_mut(i).copy_from_slice(b);
    }
    gemm(
        x.n,
        in_dim,
        out_dim,
        View::new(&x.data, 0, in_dim, 1),
        View::new(w, 0, 1, in_dim),
        S::ONE,
        &mut y.data,
        0,
        out_dim,
    );
    y
}

/// Transpose of a row-major `rows x cols` matrix.
pub(crate) fn transpose<S: Copy + Default>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut t = vec![S::default(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// Eight-lane `f64` dot product; fixed summation order.
#[inline]
pub(crate) fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Accumulates `dW += dy x^T`, `db += dy` into f64 buffers and returns
/// `W^T dy` when `need_dx`.
pub(crate) fn dense_backward_vec<S: Scalar>(
    w: &[S],
    x: &[S],
    dy: &[S],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [S]>,
) {
    let in_dim = x.len();
    for (o, &g) in dy.iter().enumerate() {
        let g64 = g.to_f64();
        db[o] += g64;
        axpy_f64(g64, x, &mut dw[o * in_dim..(o + 1) * in_dim]);
    }
    if let Some(dx) = dx {
        for (o, &g) in dy.iter().enumerate() {
            axpy(g, &w[o * in_dim..(o + 1) * in_dim], dx);
        }
    }
}
