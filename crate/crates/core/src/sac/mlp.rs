//! Dense ReLU network with manual backprop over row-major batches.

use rand::Rng;

use super::SacError;
use crate::par::{for_each_chunk_mut, Exec};

/// Batch rows per parallel work item.
const ROW_CHUNK: usize = 64;
/// Output units per parallel work item in the weight gradient.
const OUT_CHUNK: usize = 32;

/// `c = alpha * a * b + beta * c` with explicit strides; `a` is `m x k`,
/// `b` is `k x n`, `c` is `m x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(k == 0 || a.len() > last(m, k, rsa, csa));
    assert!(k == 0 || b.len() > last(k, n, rsb, csb));
    assert!(c.len() > last(m, n, rsc, 1));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Per layer, `out x in` row-major.
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

/// Layer activations from the last forward pass, input first.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
    batch: usize,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` init for weights and biases; the last layer
    /// is additionally multiplied by `out_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let layers = sizes.len() - 1;
        let mut w = Vec::with_capacity(layers);
        let mut b = Vec::with_capacity(layers);
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            let scale = if l + 1 == layers { out_scale } else { 1.0 };
            w.push((0..n_in * n_out).map(|_| scale * rng.random_range(-bound..bound)).collect());
            b.push((0..n_out).map(|_| scale * rng.random_range(-bound..bound)).collect());
        }
        Mlp { sizes: sizes.to_vec(), w, b }
    }

    pub fn from_parts(sizes: Vec<usize>, w: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self, SacError> {
        let layers = sizes.len().saturating_sub(1);
        if layers == 0 || w.len() != layers || b.len() != layers {
            return Err(SacError::Shape("layer count mismatch".into()));
        }
        for l in 0..layers {
            if w[l].len() != sizes[l] * sizes[l + 1] || b[l].len() != sizes[l + 1] {
                return Err(SacError::Shape(format!("layer {l} has inconsistent shape")));
            }
        }
        let m = Mlp { sizes, w, b };
        if !m.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(SacError::NonFinite("network parameters".into()));
        }
        Ok(m)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_in(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.w.len()
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        &self.w[l]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.b[l]
    }

    pub fn num_params(&self) -> usize {
        self.w.iter().chain(&self.b).map(Vec::len).sum()
    }

    /// Parameter tensors in the order `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.w.iter().zip(&self.b).flat_map(|(w, b)| [w.as_slice(), b.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.w.iter_mut().zip(self.b.iter_mut()).flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()]).collect()
    }

    /// Zeroed gradient buffers matching [`Mlp::tensors`].
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }

    /// Forward a `batch x n_in` input; the output stays in `cache`.
    pub fn forward<'c>(&self, exec: Exec, x: &[f64], batch: usize, cache: &'c mut MlpCache) -> &'c [f64] {
        assert_eq!(x.len(), batch * self.n_in(), "input shape");
        let layers = self.layers();
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.batch = batch;
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            out.resize(batch * n_out, 0.0);
            let (w, b) = (&self.w[l], &self.b[l]);
            let relu = l + 1 < layers;
            for_each_chunk_mut(exec, out, ROW_CHUNK * n_out, |ci, chunk| {
                let rows = chunk.len() / n_out;
                let r0 = ci * ROW_CHUNK;
                for row in chunk.chunks_mut(n_out) {
                    row.copy_from_slice(b);
                }
                gemm(rows, n_in, n_out, 1.0, &input[r0 * n_in..], n_in, 1, w, 1, n_in, 1.0, chunk, n_out);
                if relu {
                    for v in chunk.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            });
        }
        cache.output()
    }

    /// Convenience forward without a persistent cache.
    pub fn predict(&self, exec: Exec, x: &[f64], batch: usize) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward(exec, x, batch, &mut cache).to_vec()
    }

    /// Backpropagate `d_out` (`batch x n_out`) through the cached pass.
    ///
    /// Parameter gradients are accumulated into `grads` when given; the input
    /// gradient is returned when `want_dx` is set.
    pub fn backward(&self, exec: Exec, cache: &MlpCache, d_out: &[f64], mut grads: Option<&mut [Vec<f64>]>, want_dx: bool) -> Option<Vec<f64>> {
        let batch = cache.batch;
        let layers = self.layers();
        assert_eq!(cache.acts.len(), layers + 1, "backward without forward");
        assert_eq!(d_out.len(), batch * self.n_out(), "output gradient shape");
        let mut dy = d_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                // ReLU mask from this layer's output
                for (g, &a) in dy.iter_mut().zip(&cache.acts[l + 1]) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let x = &cache.acts[l];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, rest) = g[2 * l..].split_at_mut(1);
                let gw = &mut gw[0];
                let gb = &mut rest[0];
                let dy_ref = &dy;
                for_each_chunk_mut(exec, gw, OUT_CHUNK * n_in, |ci, chunk| {
                    let rows = chunk.len() / n_in;
                    let o0 = ci * OUT_CHUNK;
                    gemm(rows, batch, n_in, 1.0, &dy_ref[o0..], 1, n_out, x, n_in, 1, 1.0, chunk, n_in);
                });
                for row in dy.chunks(n_out) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            if l == 0 && !want_dx {
                return None;
            }
            let mut dx = vec![0.0; batch * n_in];
            let w = &self.w[l];
            let dy_ref = &dy;
            for_each_chunk_mut(exec, &mut dx, ROW_CHUNK * n_in, |ci, chunk| {
                let rows = chunk.len() / n_in;
                let r0 = ci * ROW_CHUNK;
                gemm(rows, n_out, n_in, 1.0, &dy_ref[r0 * n_out..], n_out, 1, w, n_in, 1, 0.0, chunk, n_in);
            });
            dy = dx;
        }
        Some(dy)
    }
}

/// `target <- (1 - tau) * target + tau * online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), SacError> {
    if target.sizes != online.sizes {
        return Err(SacError::Shape("soft update between different architectures".into()));
    }
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        for (a, &b) in t.iter_mut().zip(o) {
            *a = (1.0 - tau) * *a + tau * b;
        }
    }
    Ok(())
}
