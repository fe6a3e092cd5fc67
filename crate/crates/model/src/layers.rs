//! Network layers expressed as tape subgraphs. Points are rows of ambient
//! Lorentz coordinates (time first); a batch of B sequences of length L is a
//! (B*L, 1+channels) matrix with position-major rows per sequence.

use crate::tape::{NodeId, Tape};
use hge_core::{Manifold, Real};
use std::sync::Arc;

/// Convolution output length: floor((L + 2p - kernel)/stride) + 1.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (len + 2 * padding - kernel) / stride + 1
}

/// Window row indices for a strided 1-D convolution over a (batch*len) row
/// layout; -1 marks padding slots.
pub fn conv_windows(
    batch: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Arc<Vec<Vec<isize>>> {
    let out_len = conv_out_len(len, kernel, stride, padding);
    let mut windows = Vec::with_capacity(batch * out_len);
    for b in 0..batch {
        for l in 0..out_len {
            let start = (l * stride) as isize - padding as isize;
            let win: Vec<isize> = (0..kernel as isize)
                .map(|t| {
                    let pos = start + t;
                    if pos < 0 || pos >= len as isize {
                        -1
                    } else {
                        (b * len) as isize + pos
                    }
                })
                .collect();
            windows.push(win);
        }
    }
    Arc::new(windows)
}

/// One window per batch item covering every position (flattening).
pub fn flatten_windows(batch: usize, len: usize) -> Arc<Vec<Vec<isize>>> {
    Arc::new(
        (0..batch)
            .map(|b| (0..len).map(|l| (b * len + l) as isize).collect())
            .collect(),
    )
}

/// [sqrt(||x_s||^2 - 1/K), x_s] per row.
pub fn lift_rows<T: Real>(t: &mut Tape<T>, space: NodeId, k: NodeId) -> NodeId {
    let sq = t.mul(space, space);
    let norm2 = t.row_sum(sq);
    let neg_one = t.scalar(-1.0);
    let neg_inv_k = t.div(neg_one, k); // -1/K = 1/(-K) > 0
    let tsq = t.add(norm2, neg_inv_k);
    let time = t.sqrt(tsq);
    t.concat_cols(&[time, space])
}

/// Row-wise Minkowski inner product with broadcasting; (R,1) output.
pub fn mink_rows<T: Real>(t: &mut Tape<T>, a: NodeId, b: NodeId) -> NodeId {
    let prod = t.mul(a, b);
    let full = t.row_sum(prod);
    let at = t.slice_cols(a, 0, 1);
    let bt = t.slice_cols(b, 0, 1);
    let tt = t.mul(at, bt);
    let two = t.scalar(2.0);
    let twice = t.mul(two, tt);
    t.sub(full, twice)
}

/// exp_x(z) = cosh(a) x + sinhc(a) z with a^2 = -K <z,z>_L.
pub fn exp_rows<T: Real>(t: &mut Tape<T>, base: NodeId, z: NodeId, k: NodeId) -> NodeId {
    let zz = mink_rows(t, z, z);
    let neg_k = t.neg(k);
    let s_raw = t.mul(neg_k, zz);
    let s = t.clamp_min(s_raw, 0.0);
    let ch = t.cosh_sqrt(s);
    let sc = t.sinhc_sqrt(s);
    let a = t.mul(ch, base);
    let b = t.mul(sc, z);
    t.add(a, b)
}

/// log_x(y) = acosh_ratio(b) (y - b x) with b = K <x,y>_L clamped to >= 1.
pub fn log_rows<T: Real>(t: &mut Tape<T>, base: NodeId, y: NodeId, k: NodeId) -> NodeId {
    let xy = mink_rows(t, base, y);
    let b_raw = t.mul(k, xy);
    let b = t.clamp_min(b_raw, 1.0);
    let coef = t.acosh_ratio(b);
    let bx = t.mul(b, base);
    let diff = t.sub(y, bx);
    t.mul(coef, diff)
}

/// PT_{x->y}(v) = v + <y,v>_L / (1/(-K) - <x,y>_L) (x + y).
pub fn pt_rows<T: Real>(t: &mut Tape<T>, x: NodeId, y: NodeId, v: NodeId, k: NodeId) -> NodeId {
    let yv = mink_rows(t, y, v);
    let neg_one = t.scalar(-1.0);
    let neg_inv_k = t.div(neg_one, k);
    let xy = mink_rows(t, x, y);
    let denom = t.sub(neg_inv_k, xy);
    let coef = t.div(yv, denom);
    let xpy = t.add(x, y);
    let shift = t.mul(coef, xpy);
    t.add(v, shift)
}

/// The origin [sqrt(-1/K), 0...0] as a (1, 1+space_dim) node (K-differentiable).
pub fn origin_row<T: Real>(t: &mut Tape<T>, space_dim: usize, k: NodeId) -> NodeId {
    let neg_one = t.scalar(-1.0);
    let neg_inv_k = t.div(neg_one, k);
    let time = t.sqrt(neg_inv_k);
    let zeros = t.constant(1, space_dim, vec![T::zero(); space_dim]);
    t.concat_cols(&[time, zeros])
}

/// Lorentz fully-connected: y = [sqrt(||psi(Wx+b)||^2 - 1/K), psi(Wx+b)].
pub fn lorentz_fc<T: Real>(
    t: &mut Tape<T>,
    x: NodeId,
    w: NodeId,
    b: NodeId,
    k: NodeId,
    rectify: bool,
) -> NodeId {
    let u = t.matmul_rt(x, w);
    let u = t.add(u, b);
    let u = if rectify { t.relu(u) } else { u };
    lift_rows(t, u, k)
}

/// Re-project rows onto the manifold by recomputing the time coordinate.
pub fn reproject_rows<T: Real>(t: &mut Tape<T>, x: NodeId, k: NodeId) -> NodeId {
    let c = t.cols(x);
    let space = t.slice_cols(x, 1, c - 1);
    lift_rows(t, space, k)
}

pub const LBN_EPS: f64 = 1e-5;

/// Batch statistics produced by a train-mode batch norm, used to update
/// running state off-tape.
pub struct BnBatchStats<T> {
    pub mean: Vec<T>,
    pub var: T,
}

pub enum BnMode<'a, T> {
    Train,
    /// (running mean point or per-feature mean, running variance).
    Infer(&'a [T], T),
}

/// Lorentz batch norm: exp_beta(PT_{0->beta}(gamma * PT_{mu->0}(log_mu x) /
/// sqrt(var + eps))). The converged Fréchet mean is treated as a constant
/// base point and only the final tangent-average step stays on the tape.
pub fn lorentz_batch_norm<T: Real>(
    t: &mut Tape<T>,
    x: NodeId,
    gamma: NodeId,
    beta_tangent: NodeId,
    k: NodeId,
    mode: BnMode<T>,
) -> (NodeId, Option<BnBatchStats<T>>) {
    let rows = t.rows(x);
    let cols = t.cols(x);
    let space = cols - 1;
    let o = origin_row(t, space, k);

    let (mu, stats_mean) = match &mode {
        BnMode::Train => {
            // converged Fréchet mean, computed off-tape
            let kv: T = t.value(k)[0];
            let manifold = Manifold::new(kv).expect("negative curvature");
            let points: Vec<hge_core::LorentzPoint<T>> = (0..rows)
                .map(|i| {
                    hge_core::LorentzPoint::new(
                        t.value(x)[i * cols..(i + 1) * cols].to_vec(),
                        manifold,
                    )
                })
                .collect();
            let fm = hge_core::frechet_mean(&points).expect("non-empty batch");
            // freeze the mean's space coordinates only; lifting the time
            // component on-tape keeps the base point on the manifold as the
            // curvature varies, which the curvature gradient needs
            let mu0_space = t.constant(1, space, fm.mean.coords[1..].to_vec());
            let mu0 = lift_rows(t, mu0_space, k);
            // final tangent-average step (differentiable)
            let logs = log_rows(t, mu0, x, k);
            let sum = t.col_sum(logs);
            let n = t.scalar(rows as f64);
            let avg = t.div(sum, n);
            (exp_rows(t, mu0, avg, k), Some(fm.mean.coords))
        }
        BnMode::Infer(mean, _) => (t.constant(1, cols, mean.to_vec()), None),
    };

    let u = log_rows(t, mu, x, k);
    let var = match &mode {
        BnMode::Train => {
            let uu = mink_rows(t, u, u);
            let total = t.col_sum(uu);
            let n = t.scalar(rows as f64);
            t.div(total, n)
        }
        BnMode::Infer(_, rv) => t.constant(1, 1, vec![*rv]),
    };
    let eps = t.scalar(LBN_EPS);
    let var_eps = t.add(var, eps);
    let sd = t.sqrt(var_eps);
    let factor = t.div(gamma, sd);

    let v = pt_rows(t, mu, o, u, k);
    let w = t.mul(factor, v);

    let zero = t.constant(1, 1, vec![T::zero()]);
    let beta_full = t.concat_cols(&[zero, beta_tangent]);
    let beta = exp_rows(t, o, beta_full, k);
    let z = pt_rows(t, o, beta, w, k);
    let out = exp_rows(t, beta, z, k);
    let out = reproject_rows(t, out, k);

    let stats = stats_mean.map(|mean| BnBatchStats { mean, var: t.value(var)[0] });
    (out, stats)
}

pub const MLR_NORM_FLOOR: f64 = 1e-24;

/// Lorentz MLR logits: (1/sqrt(-K)) beta asinh(sqrt(-K) alpha / beta) with
/// alpha = cosh(sqrt(-K) a) <z, x_s> - sinh(sqrt(-K) a) ||z|| x_t and
/// beta = ||z|| (floored so z = 0 yields logit 0).
pub fn lorentz_mlr<T: Real>(
    t: &mut Tape<T>,
    x: NodeId,
    z: NodeId,
    a: NodeId,
    k: NodeId,
) -> NodeId {
    let cols = t.cols(x);
    let space = cols - 1;
    let neg_k = t.neg(k);
    let sqrt_mk = t.sqrt(neg_k); // (1,1)
    let arg = t.mul(sqrt_mk, a); // (1,C)
    let ch = t.cosh(arg);
    let sh = t.sinh(arg);

    let x_t = t.slice_cols(x, 0, 1); // (R,1)
    let x_s = t.slice_cols(x, 1, space); // (R,space)
    let zx = t.matmul_rt(x_s, z); // (R,C)

    let zsq = t.mul(z, z);
    let znorm2_col = t.row_sum(zsq); // (C,1)
    let c_classes = t.rows(z);
    let znorm2 = t.reshape(znorm2_col, 1, c_classes);
    let znorm2 = t.clamp_min(znorm2, MLR_NORM_FLOOR);
    let beta = t.sqrt(znorm2); // (1,C)

    let term1 = t.mul(ch, zx);
    let shn = t.mul(sh, beta);
    let term2 = t.mul(shn, x_t); // (1,C) x (R,1) -> (R,C)
    let alpha = t.sub(term1, term2);

    let scaled = t.mul(sqrt_mk, alpha);
    let inner = t.div(scaled, beta);
    let asin = t.asinh(inner);
    let coef = t.div(beta, sqrt_mk);
    t.mul(coef, asin)
}

/// Euclidean MLR: logit_c = <w_c, x> - ||w_c|| a_c (so w_c = 0 gives 0).
pub fn euclidean_mlr<T: Real>(t: &mut Tape<T>, x: NodeId, w: NodeId, a: NodeId) -> NodeId {
    let wx = t.matmul_rt(x, w);
    let wsq = t.mul(w, w);
    let wn2_col = t.row_sum(wsq);
    let classes = t.rows(w);
    let wn2 = t.reshape(wn2_col, 1, classes);
    let wn2 = t.clamp_min(wn2, MLR_NORM_FLOOR);
    let wnorm = t.sqrt(wn2);
    let offset = t.mul(wnorm, a);
    t.sub(wx, offset)
}

pub enum EBnMode<'a, T> {
    Train,
    /// (running per-feature mean, running per-feature variance).
    Infer(&'a [T], &'a [T]),
}

pub struct EBnStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Per-feature Euclidean batch norm over rows.
pub fn euclidean_batch_norm<T: Real>(
    t: &mut Tape<T>,
    x: NodeId,
    gamma: NodeId,
    beta: NodeId,
    mode: EBnMode<T>,
) -> (NodeId, Option<EBnStats<T>>) {
    let rows = t.rows(x);
    let cols = t.cols(x);
    let (mean, var) = match &mode {
        EBnMode::Train => {
            let n = t.scalar(rows as f64);
            let sum = t.col_sum(x);
            let mean = t.div(sum, n);
            let xc = t.sub(x, mean);
            let sq = t.mul(xc, xc);
            let var_sum = t.col_sum(sq);
            let var = t.div(var_sum, n);
            (mean, var)
        }
        EBnMode::Infer(m, v) => {
            let mean = t.constant(1, cols, m.to_vec());
            let var = t.constant(1, cols, v.to_vec());
            (mean, var)
        }
    };
    let eps = t.scalar(LBN_EPS);
    let var_eps = t.add(var, eps);
    let sd = t.sqrt(var_eps);
    let xc = t.sub(x, mean);
    let xhat = t.div(xc, sd);
    let scaled = t.mul(gamma, xhat);
    let out = t.add(scaled, beta);

    let stats = match mode {
        EBnMode::Train => Some(EBnStats {
            mean: t.value(mean).to_vec(),
            var: t.value(var).to_vec(),
        }),
        EBnMode::Infer(..) => None,
    };
    (out, stats)
}
