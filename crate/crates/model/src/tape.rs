//! Reverse-mode autodiff over matrix-valued nodes.
//!
//! Every node holds a row-major (rows x cols) value. Binary arithmetic
//! broadcasts along either axis (a dimension of 1 stretches), and the
//! backward pass sums gradients over broadcast axes. Geometry-specific
//! primitives (`CoshSqrt`, `SinhcSqrt`, `AcoshRatio`, `HcatWindows`) carry
//! the series-stabilized derivative branches needed near their singular
//! arguments.

use hge_core::{acosh_ratio, sinhc, Real};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Cosh,
    Sinh,
    Asinh,
    Relu,
    ClampMin(f64),
    /// cosh(sqrt(s)) — analytic in s >= 0.
    CoshSqrt,
    /// sinh(sqrt(s))/sqrt(s) — analytic in s >= 0.
    SinhcSqrt,
    /// arcosh(b)/sqrt(b^2 - 1) for b >= 1.
    AcoshRatio,
    /// y = x w^T with x (R, n), w (m, n).
    MatmulRT,
    ConcatCols,
    SliceCols {
        start: usize,
        len: usize,
    },
    Reshape,
    RowSum,
    ColSum,
    /// Hyperbolic window concatenation. Inputs: [points (R_in, 1+c), K (1,1)].
    /// Each output row hcats `windows[r]` input rows; index -1 denotes an
    /// origin-padding slot contributing zero space and 1/(-K) squared time.
    HcatWindows {
        windows: Arc<Vec<Vec<isize>>>,
        space: usize,
    },
    /// Euclidean window concatenation; -1 pads with zeros.
    WindowsConcat {
        windows: Arc<Vec<Vec<isize>>>,
    },
    /// Mean cross-entropy of logits (R, C) against integer labels.
    CrossEntropyMean {
        labels: Arc<Vec<usize>>,
    },
}

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub op: Op,
    pub inputs: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<T>,
    pub needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    pub nodes: Vec<Node<T>>,
}

#[inline]
fn bidx(rows: usize, cols: usize, i: usize, j: usize) -> usize {
    let r = if rows == 1 { 0 } else { i };
    let c = if cols == 1 { 0 } else { j };
    r * cols + c
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    assert!(
        (a.0 == b.0 || a.0 == 1 || b.0 == 1) && (a.1 == b.1 || a.1 == 1 || b.1 == 1),
        "incompatible shapes {a:?} and {b:?}"
    );
    (a.0.max(b.0), a.1.max(b.1))
}

/// Threshold above which matmul loops fan out across rayon workers. Output
/// elements are each written by exactly one task, so the parallel result is
/// bit-identical to the serial one.
const PAR_FLOPS: usize = 1 << 21;

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn rows(&self, id: NodeId) -> usize {
        self.nodes[id.0].rows
    }

    pub fn cols(&self, id: NodeId) -> usize {
        self.nodes[id.0].cols
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, inputs: Vec<usize>, rows: usize, cols: usize, value: Vec<T>) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        let needs_grad = inputs.iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node { op, inputs, rows, cols, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, value: Vec<T>, needs_grad: bool) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { op: Op::Leaf, inputs: vec![], rows, cols, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<T>) -> NodeId {
        self.leaf(rows, cols, value, false)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.constant(1, 1, vec![T::c(v)])
    }

    fn binary(&mut self, op: Op, a: NodeId, b: NodeId) -> NodeId {
        let (ar, ac) = (self.rows(a), self.cols(a));
        let (br, bc) = (self.rows(b), self.cols(b));
        let (r, c) = broadcast_shape((ar, ac), (br, bc));
        let mut out = vec![T::zero(); r * c];
        {
            let av = &self.nodes[a.0].value;
            let bv = &self.nodes[b.0].value;
            for i in 0..r {
                for j in 0..c {
                    let x = av[bidx(ar, ac, i, j)];
                    let y = bv[bidx(br, bc, i, j)];
                    out[i * c + j] = match op {
                        Op::Add => x + y,
                        Op::Sub => x - y,
                        Op::Mul => x * y,
                        Op::Div => x / y,
                        _ => unreachable!(),
                    };
                }
            }
        }
        self.push(op, vec![a.0, b.0], r, c, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Div, a, b)
    }

    fn unary(&mut self, op: Op, a: NodeId, f: impl Fn(T) -> T) -> NodeId {
        let value: Vec<T> = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        let (r, c) = (self.rows(a), self.cols(a));
        self.push(op, vec![a.0], r, c, value)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Neg, a, |x| -x)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Sqrt, a, |x| x.sqrt())
    }

    pub fn cosh(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Cosh, a, |x| x.cosh())
    }

    pub fn sinh(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Sinh, a, |x| x.sinh())
    }

    pub fn asinh(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Asinh, a, |x| x.asinh())
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Relu, a, |x| if x > T::zero() { x } else { T::zero() })
    }

    pub fn clamp_min(&mut self, a: NodeId, min: f64) -> NodeId {
        let m = T::c(min);
        self.unary(Op::ClampMin(min), a, |x| if x < m { m } else { x })
    }

    pub fn cosh_sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::CoshSqrt, a, |s| s.max(T::zero()).sqrt().cosh())
    }

    pub fn sinhc_sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::SinhcSqrt, a, |s| sinhc(s.max(T::zero()).sqrt()))
    }

    pub fn acosh_ratio(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::AcoshRatio, a, |b| acosh_ratio(b.max(T::one())))
    }

    pub fn matmul_rt(&mut self, x: NodeId, w: NodeId) -> NodeId {
        let (r, n) = (self.rows(x), self.cols(x));
        let (m, wn) = (self.rows(w), self.cols(w));
        assert_eq!(n, wn, "matmul_rt: x cols {n} vs w cols {wn}");
        let mut out = vec![T::zero(); r * m];
        {
            let xv = &self.nodes[x.0].value;
            let wv = &self.nodes[w.0].value;
            let body = |i: usize, row: &mut [T]| {
                let xr = &xv[i * n..(i + 1) * n];
                for (j, slot) in row.iter_mut().enumerate() {
                    let wr = &wv[j * n..(j + 1) * n];
                    let mut acc = T::zero();
                    for k in 0..n {
                        acc += xr[k] * wr[k];
                    }
                    *slot = acc;
                }
            };
            if r * m * n > PAR_FLOPS {
                out.par_chunks_mut(m).enumerate().for_each(|(i, row)| body(i, row));
            } else {
                for (i, row) in out.chunks_mut(m).enumerate() {
                    body(i, row);
                }
            }
        }
        self.push(Op::MatmulRT, vec![x.0, w.0], r, m, out)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let r = self.rows(parts[0]);
        let total: usize = parts.iter().map(|&p| self.cols(p)).sum();
        let mut out = vec![T::zero(); r * total];
        let mut offset = 0;
        for &p in parts {
            assert_eq!(self.rows(p), r, "concat_cols: row mismatch");
            let c = self.cols(p);
            let pv = &self.nodes[p.0].value;
            for i in 0..r {
                out[i * total + offset..i * total + offset + c]
                    .copy_from_slice(&pv[i * c..(i + 1) * c]);
            }
            offset += c;
        }
        self.push(Op::ConcatCols, parts.iter().map(|p| p.0).collect(), r, total, out)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let (r, c) = (self.rows(a), self.cols(a));
        assert!(start + len <= c);
        let mut out = vec![T::zero(); r * len];
        let av = &self.nodes[a.0].value;
        for i in 0..r {
            out[i * len..(i + 1) * len].copy_from_slice(&av[i * c + start..i * c + start + len]);
        }
        self.push(Op::SliceCols { start, len }, vec![a.0], r, len, out)
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(rows * cols, self.rows(a) * self.cols(a));
        let value = self.nodes[a.0].value.clone();
        self.push(Op::Reshape, vec![a.0], rows, cols, value)
    }

    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let (r, c) = (self.rows(a), self.cols(a));
        let av = &self.nodes[a.0].value;
        let out: Vec<T> = (0..r)
            .map(|i| av[i * c..(i + 1) * c].iter().fold(T::zero(), |s, &v| s + v))
            .collect();
        self.push(Op::RowSum, vec![a.0], r, 1, out)
    }

    pub fn col_sum(&mut self, a: NodeId) -> NodeId {
        let (r, c) = (self.rows(a), self.cols(a));
        let av = &self.nodes[a.0].value;
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            for j in 0..c {
                out[j] += av[i * c + j];
            }
        }
        self.push(Op::ColSum, vec![a.0], 1, c, out)
    }

    /// Hyperbolic windowed concatenation (HCat over each window). `points` is
    /// (R_in, 1+space); `k` the (1,1) curvature node. Padding slots (-1) act
    /// as the manifold origin.
    pub fn hcat_windows(
        &mut self,
        points: NodeId,
        k: NodeId,
        windows: Arc<Vec<Vec<isize>>>,
    ) -> NodeId {
        let (r_in, cin) = (self.rows(points), self.cols(points));
        let space = cin - 1;
        let n_tap = windows.first().map_or(0, |w| w.len());
        assert!(n_tap >= 1);
        let out_cols = 1 + n_tap * space;
        let kv = self.nodes[k.0].value[0];
        let inv_neg_k = -(T::one() / kv); // 1/(-K) > 0
        let pv = &self.nodes[points.0].value;
        let mut out = vec![T::zero(); windows.len() * out_cols];
        for (r, win) in windows.iter().enumerate() {
            assert_eq!(win.len(), n_tap);
            let row = &mut out[r * out_cols..(r + 1) * out_cols];
            let mut tsq = T::zero();
            for (tap, &src) in win.iter().enumerate() {
                if src < 0 {
                    tsq += inv_neg_k; // origin: t^2 = 1/(-K), space = 0
                } else {
                    let src = src as usize;
                    assert!(src < r_in);
                    let p = &pv[src * cin..(src + 1) * cin];
                    tsq += p[0] * p[0];
                    row[1 + tap * space..1 + (tap + 1) * space].copy_from_slice(&p[1..]);
                }
            }
            // t_out^2 = sum t_i^2 + (N-1)/K
            row[0] = (tsq - T::c((n_tap - 1) as f64) * inv_neg_k).sqrt();
        }
        let rows = windows.len();
        self.push(Op::HcatWindows { windows, space }, vec![points.0, k.0], rows, out_cols, out)
    }

    /// Euclidean windowed concatenation; padding slots are zero.
    pub fn windows_concat(&mut self, x: NodeId, windows: Arc<Vec<Vec<isize>>>) -> NodeId {
        let (r_in, c) = (self.rows(x), self.cols(x));
        let n_tap = windows.first().map_or(0, |w| w.len());
        let out_cols = n_tap * c;
        let xv = &self.nodes[x.0].value;
        let mut out = vec![T::zero(); windows.len() * out_cols];
        for (r, win) in windows.iter().enumerate() {
            let row = &mut out[r * out_cols..(r + 1) * out_cols];
            for (tap, &src) in win.iter().enumerate() {
                if src >= 0 {
                    let src = src as usize;
                    assert!(src < r_in);
                    row[tap * c..(tap + 1) * c].copy_from_slice(&xv[src * c..(src + 1) * c]);
                }
            }
        }
        let rows = windows.len();
        self.push(Op::WindowsConcat { windows }, vec![x.0], rows, out_cols, out)
    }

    /// Mean cross-entropy with max-subtraction stabilization. Output (1,1).
    pub fn cross_entropy_mean(&mut self, logits: NodeId, labels: Arc<Vec<usize>>) -> NodeId {
        let (r, c) = (self.rows(logits), self.cols(logits));
        assert_eq!(labels.len(), r);
        let lv = &self.nodes[logits.0].value;
        let mut total = T::zero();
        for i in 0..r {
            assert!(labels[i] < c, "label out of range");
            let row = &lv[i * c..(i + 1) * c];
            let mx = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = row.iter().fold(T::zero(), |s, &v| s + (v - mx).exp()).ln() + mx;
            total += lse - row[labels[i]];
        }
        let value = vec![total / T::c(r as f64)];
        self.push(Op::CrossEntropyMean { labels }, vec![logits.0], 1, 1, value)
    }

    /// Reverse pass from a scalar output. Returns one gradient buffer per
    /// node (None where no gradient flows).
    pub fn backward(&mut self, output: NodeId) -> Vec<Option<Vec<T>>> {
        assert_eq!(self.nodes[output.0].value.len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![T::one()]);
        for idx in (0..=output.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.accumulate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        grads
    }

    fn ensure<'a>(grads: &'a mut [Option<Vec<T>>], idx: usize, len: usize) -> &'a mut [T] {
        grads[idx].get_or_insert_with(|| vec![T::zero(); len])
    }

    fn accumulate(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let (r, c) = (node.rows, node.cols);
        let inputs = &node.inputs;
        let in_shape = |i: usize| (self.nodes[inputs[i]].rows, self.nodes[inputs[i]].cols);
        let in_live = |i: usize| self.nodes[inputs[i]].needs_grad;
        match &node.op {
            Op::Leaf => {}
            Op::Add | Op::Sub | Op::Mul | Op::Div => {
                let (ar, ac) = in_shape(0);
                let (br, bc) = in_shape(1);
                let av = &self.nodes[inputs[0]].value;
                let bv = &self.nodes[inputs[1]].value;
                if in_live(0) {
                    let ga = Self::ensure(grads, inputs[0], ar * ac);
                    for i in 0..r {
                        for j in 0..c {
                            let gv = g[i * c + j];
                            let d = match node.op {
                                Op::Add | Op::Sub => gv,
                                Op::Mul => gv * bv[bidx(br, bc, i, j)],
                                Op::Div => gv / bv[bidx(br, bc, i, j)],
                                _ => unreachable!(),
                            };
                            ga[bidx(ar, ac, i, j)] += d;
                        }
                    }
                }
                if in_live(1) {
                    let gb = Self::ensure(grads, inputs[1], br * bc);
                    for i in 0..r {
                        for j in 0..c {
                            let gv = g[i * c + j];
                            let d = match node.op {
                                Op::Add => gv,
                                Op::Sub => -gv,
                                Op::Mul => gv * av[bidx(ar, ac, i, j)],
                                Op::Div => {
                                    let b = bv[bidx(br, bc, i, j)];
                                    -gv * av[bidx(ar, ac, i, j)] / (b * b)
                                }
                                _ => unreachable!(),
                            };
                            gb[bidx(br, bc, i, j)] += d;
                        }
                    }
                }
            }
            Op::Neg
            | Op::Sqrt
            | Op::Cosh
            | Op::Sinh
            | Op::Asinh
            | Op::Relu
            | Op::ClampMin(_)
            | Op::CoshSqrt
            | Op::SinhcSqrt
            | Op::AcoshRatio => {
                if !in_live(0) {
                    return;
                }
                let xv = &self.nodes[inputs[0]].value;
                let yv = &node.value;
                let ga = Self::ensure(grads, inputs[0], r * c);
                for i in 0..r * c {
                    let x = xv[i];
                    let d = match &node.op {
                        Op::Neg => -g[i],
                        // y = sqrt(x): dy/dx = 1/(2y)
                        Op::Sqrt => g[i] / (T::c(2.0) * yv[i]),
                        Op::Cosh => g[i] * x.sinh(),
                        Op::Sinh => g[i] * x.cosh(),
                        Op::Asinh => g[i] / (T::one() + x * x).sqrt(),
                        Op::Relu => {
                            if x > T::zero() {
                                g[i]
                            } else {
                                T::zero()
                            }
                        }
                        Op::ClampMin(m) => {
                            if x > T::c(*m) {
                                g[i]
                            } else {
                                T::zero()
                            }
                        }
                        // d/ds cosh(sqrt(s)) = sinhc(sqrt(s))/2
                        Op::CoshSqrt => {
                            let s = x.max(T::zero());
                            g[i] * sinhc(s.sqrt()) / T::c(2.0)
                        }
                        // d/ds sinhc(sqrt(s)) = (cosh(sqrt(s)) - sinhc(sqrt(s)))/(2s)
                        Op::SinhcSqrt => {
                            let s = x.max(T::zero());
                            let d = if s < T::c(1e-4) {
                                // series 1/6 + s/60 + s^2/1680
                                T::c(1.0 / 6.0) + s * T::c(1.0 / 60.0) + s * s * T::c(1.0 / 1680.0)
                            } else {
                                let a = s.sqrt();
                                (a.cosh() - sinhc(a)) / (T::c(2.0) * s)
                            };
                            g[i] * d
                        }
                        // f(b) = acosh(b)/sqrt(b^2-1); f'(b) = (1 - b f)/(b^2-1)
                        Op::AcoshRatio => {
                            let b = x.max(T::one());
                            let d = b - T::one();
                            let deriv = if d < T::c(1e-4) {
                                T::c(-1.0 / 3.0) + d * T::c(4.0 / 15.0)
                            } else {
                                (T::one() - b * acosh_ratio(b)) / (b * b - T::one())
                            };
                            g[i] * deriv
                        }
                        _ => unreachable!(),
                    };
                    ga[i] += d;
                }
            }
            Op::MatmulRT => {
                let (_, n) = in_shape(0);
                let m = c;
                let xv = &self.nodes[inputs[0]].value;
                let wv = &self.nodes[inputs[1]].value;
                if in_live(0) {
                    // dX = G W
                    let gx = Self::ensure(grads, inputs[0], r * n);
                    let body = |i: usize, row: &mut [T]| {
                        for j in 0..m {
                            let gv = g[i * m + j];
                            if gv != T::zero() {
                                let wr = &wv[j * n..(j + 1) * n];
                                for k in 0..n {
                                    row[k] += gv * wr[k];
                                }
                            }
                        }
                    };
                    if r * m * n > PAR_FLOPS {
                        gx.par_chunks_mut(n).enumerate().for_each(|(i, row)| body(i, row));
                    } else {
                        for (i, row) in gx.chunks_mut(n).enumerate() {
                            body(i, row);
                        }
                    }
                }
                if in_live(1) {
                    // dW = G^T X
                    let gw = Self::ensure(grads, inputs[1], m * n);
                    let body = |j: usize, row: &mut [T]| {
                        for i in 0..r {
                            let gv = g[i * m + j];
                            if gv != T::zero() {
                                let xr = &xv[i * n..(i + 1) * n];
                                for k in 0..n {
                                    row[k] += gv * xr[k];
                                }
                            }
                        }
                    };
                    if r * m * n > PAR_FLOPS {
                        gw.par_chunks_mut(n).enumerate().for_each(|(j, row)| body(j, row));
                    } else {
                        for (j, row) in gw.chunks_mut(n).enumerate() {
                            body(j, row);
                        }
                    }
                }
            }
            Op::ConcatCols => {
                let mut offset = 0;
                for pos in 0..inputs.len() {
                    let (pr, pc) = in_shape(pos);
                    debug_assert_eq!(pr, r);
                    if in_live(pos) {
                        let gp = Self::ensure(grads, inputs[pos], pr * pc);
                        for i in 0..r {
                            for j in 0..pc {
                                gp[i * pc + j] += g[i * c + offset + j];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::SliceCols { start, len } => {
                if in_live(0) {
                    let (_, ic) = in_shape(0);
                    let ga = Self::ensure(grads, inputs[0], r * ic);
                    for i in 0..r {
                        for j in 0..*len {
                            ga[i * ic + start + j] += g[i * len + j];
                        }
                    }
                }
            }
            Op::Reshape => {
                if in_live(0) {
                    let (ir, ic) = in_shape(0);
                    let ga = Self::ensure(grads, inputs[0], ir * ic);
                    for (slot, &gv) in ga.iter_mut().zip(g) {
                        *slot += gv;
                    }
                }
            }
            Op::RowSum => {
                if in_live(0) {
                    let (_, ic) = in_shape(0);
                    let ga = Self::ensure(grads, inputs[0], r * ic);
                    for i in 0..r {
                        for j in 0..ic {
                            ga[i * ic + j] += g[i];
                        }
                    }
                }
            }
            Op::ColSum => {
                if in_live(0) {
                    let (ir, ic) = in_shape(0);
                    let ga = Self::ensure(grads, inputs[0], ir * ic);
                    for i in 0..ir {
                        for j in 0..ic {
                            ga[i * ic + j] += g[j];
                        }
                    }
                }
            }
            Op::HcatWindows { windows, space } => {
                let space = *space;
                let n_tap = windows[0].len();
                let cin = space + 1;
                let kv = self.nodes[inputs[1]].value[0];
                let pv = &self.nodes[inputs[0]].value;
                let yv = &node.value;
                let points_live = in_live(0);
                let k_live = in_live(1);
                let mut k_grad = T::zero();
                for (row, win) in windows.iter().enumerate() {
                    let gt = g[row * c]; // grad wrt output time
                    let t_out = yv[row * c];
                    let n_pad = win.iter().filter(|&&s| s < 0).count();
                    // t_out^2 = sum_real t_i^2 + (n_pad - N + 1)/(-K)
                    if k_live && gt != T::zero() {
                        // d t_out / dK = (n_pad - N + 1)/(2 t_out K^2)
                        let coeff = T::c((n_pad as f64) - (n_tap as f64) + 1.0);
                        k_grad += gt * coeff / (T::c(2.0) * t_out * kv * kv);
                    }
                    if points_live {
                        let gp = Self::ensure(grads, inputs[0], pv.len());
                        for (tap, &src) in win.iter().enumerate() {
                            if src < 0 {
                                continue;
                            }
                            let src = src as usize;
                            // time chain: d t_out/d t_i = t_i/t_out
                            if gt != T::zero() {
                                gp[src * cin] += gt * pv[src * cin] / t_out;
                            }
                            for j in 0..space {
                                gp[src * cin + 1 + j] += g[row * c + 1 + tap * space + j];
                            }
                        }
                    }
                }
                if k_live {
                    let gk = Self::ensure(grads, inputs[1], 1);
                    gk[0] += k_grad;
                }
            }
            Op::WindowsConcat { windows } => {
                if in_live(0) {
                    let (_, ic) = in_shape(0);
                    let ga = Self::ensure(grads, inputs[0], self.nodes[inputs[0]].value.len());
                    for (row, win) in windows.iter().enumerate() {
                        for (tap, &src) in win.iter().enumerate() {
                            if src >= 0 {
                                let src = src as usize;
                                for j in 0..ic {
                                    ga[src * ic + j] += g[row * c + tap * ic + j];
                                }
                            }
                        }
                    }
                }
            }
            Op::CrossEntropyMean { labels } => {
                if in_live(0) {
                    let (lr, lc) = in_shape(0);
                    let lv = &self.nodes[inputs[0]].value;
                    let ga = Self::ensure(grads, inputs[0], lr * lc);
                    let scale = g[0] / T::c(lr as f64);
                    for i in 0..lr {
                        let row = &lv[i * lc..(i + 1) * lc];
                        let mx = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                        let denom = row.iter().fold(T::zero(), |s, &v| s + (v - mx).exp());
                        for j in 0..lc {
                            let p = (row[j] - mx).exp() / denom;
                            let ind = if labels[i] == j { T::one() } else { T::zero() };
                            ga[i * lc + j] += scale * (p - ind);
                        }
                    }
                }
            }
        }
    }
}
