use crate::error::{ModelError, Result};
use crate::layers::*;
use crate::tape::{NodeId, Tape};
use hge_core::{softplus, softplus_inv, Manifold, Real};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Cnn,
    HcnnS,
    HcnnM,
    E2h,
    H2e,
}

impl Geometry {
    /// Whether the convolutional body runs on the hyperboloid.
    pub fn hyperbolic_body(self) -> bool {
        matches!(self, Geometry::HcnnS | Geometry::HcnnM | Geometry::H2e)
    }

    /// Whether the classifier head is a Lorentz MLR.
    pub fn hyperbolic_head(self) -> bool {
        matches!(self, Geometry::HcnnS | Geometry::HcnnM | Geometry::E2h)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_len: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ModelSpec {
    pub geometry: Geometry,
    pub seq_len: usize,
    pub num_classes: usize,
    pub blocks: Vec<ConvSpec>,
    pub dense_dim: usize,
}

impl ModelSpec {
    /// Default body: 3 blocks, channels 4->16->32->64, kernel 8, stride 2,
    /// origin-padding 3, dense space dimension 128.
    pub fn with_defaults(geometry: Geometry, seq_len: usize, num_classes: usize) -> Self {
        let channels = [4usize, 16, 32, 64];
        let blocks = (0..3)
            .map(|i| ConvSpec {
                kernel_len: 8,
                stride: 2,
                in_channels: channels[i],
                out_channels: channels[i + 1],
                padding: 3,
            })
            .collect();
        ModelSpec { geometry, seq_len, num_classes, blocks, dense_dim: 128 }
    }

    /// One curvature for single-manifold models, one per block plus one for
    /// the head for HCNN-M, none for the pure CNN.
    pub fn n_curvatures(&self) -> usize {
        match self.geometry {
            Geometry::Cnn => 0,
            Geometry::HcnnS | Geometry::E2h | Geometry::H2e => 1,
            Geometry::HcnnM => self.blocks.len() + 1,
        }
    }

    /// Sequence length after each block.
    pub fn block_lens(&self) -> Vec<usize> {
        let mut lens = Vec::with_capacity(self.blocks.len());
        let mut len = self.seq_len;
        for b in &self.blocks {
            len = conv_out_len(len, b.kernel_len, b.stride, b.padding);
            lens.push(len);
        }
        lens
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(ModelError::Config("num_classes must be >= 2".into()));
        }
        if self.blocks.is_empty() {
            return Err(ModelError::Config("at least one conv block required".into()));
        }
        if self.blocks[0].in_channels != 4 {
            return Err(ModelError::Config("first block must take 4 input channels".into()));
        }
        let mut len = self.seq_len;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel_len == 0 || b.stride == 0 || b.out_channels == 0 {
                return Err(ModelError::Config(format!("block {i} has zero-sized field")));
            }
            if i > 0 && b.in_channels != self.blocks[i - 1].out_channels {
                return Err(ModelError::Config(format!("block {i} channel mismatch")));
            }
            if len + 2 * b.padding < b.kernel_len {
                return Err(ModelError::Config(format!("block {i} kernel exceeds padded input")));
            }
            len = conv_out_len(len, b.kernel_len, b.stride, b.padding);
            if len == 0 {
                return Err(ModelError::Config(format!("block {i} produces empty output")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    /// Weight matrices: subject to weight decay.
    Weight,
    /// Biases, BN gains/offsets, MLR offsets: no decay.
    Bias,
    /// Raw curvature kappa with K = -softplus(kappa); manifold learning rate.
    Curvature,
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<T>,
    pub kind: ParamKind,
}

#[derive(Debug, Clone)]
pub enum BnState<T> {
    Lorentz { mean: Vec<T>, var: T },
    Euclid { mean: Vec<T>, var: Vec<T> },
}

pub enum BnUpdate<T> {
    Lorentz(BnBatchStats<T>),
    Euclid(EBnStats<T>),
}

pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct ModelInstance<T> {
    pub spec: ModelSpec,
    pub params: Vec<Param<T>>,
    pub bn: Vec<BnState<T>>,
    pub init_seed: u64,
}

pub struct ForwardPass<T> {
    pub tape: Tape<T>,
    pub logits: NodeId,
    pub embedding: NodeId,
    /// One tape leaf per parameter; curvature leaves hold K = -softplus(kappa).
    pub param_nodes: Vec<NodeId>,
    pub bn_updates: Vec<BnUpdate<T>>,
}

/// One-hot encode over {A,C,G,T,N}; N becomes the all-zero row (the origin
/// after lifting).
pub fn one_hot<T: Real>(seqs: &[&str], seq_len: usize) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); seqs.len() * seq_len * 4];
    for (s, seq) in seqs.iter().enumerate() {
        if seq.len() != seq_len {
            return Err(ModelError::Config(format!(
                "sequence length {} != expected {seq_len}",
                seq.len()
            )));
        }
        for (pos, ch) in seq.chars().enumerate() {
            let row = (s * seq_len + pos) * 4;
            match ch.to_ascii_uppercase() {
                'A' => out[row] = T::one(),
                'C' => out[row + 1] = T::one(),
                'G' => out[row + 2] = T::one(),
                'T' => out[row + 3] = T::one(),
                'N' => {}
                other => return Err(ModelError::InvalidSequence { ch: other, pos }),
            }
        }
    }
    Ok(out)
}

impl<T: Real> ModelInstance<T> {
    /// Deterministic seeded initialization.
    pub fn assemble(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params: Vec<Param<T>> = Vec::new();
        let mut bn: Vec<BnState<T>> = Vec::new();
        let hyp_body = spec.geometry.hyperbolic_body();

        let mut uniform = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| -> Vec<T> {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..rows * cols).map(|_| T::c(rng.gen_range(-lim..lim))).collect()
        };

        for (i, b) in spec.blocks.iter().enumerate() {
            let in_dim = b.kernel_len * b.in_channels + usize::from(hyp_body);
            let out_c = b.out_channels;
            params.push(Param {
                name: format!("block{i}.w"),
                rows: out_c,
                cols: in_dim,
                value: uniform(out_c, in_dim, in_dim, out_c),
                kind: ParamKind::Weight,
            });
            params.push(Param {
                name: format!("block{i}.b"),
                rows: 1,
                cols: out_c,
                value: vec![T::zero(); out_c],
                kind: ParamKind::Bias,
            });
            let gamma_len = if hyp_body { 1 } else { out_c };
            params.push(Param {
                name: format!("block{i}.bn.gamma"),
                rows: 1,
                cols: gamma_len,
                value: vec![T::one(); gamma_len],
                kind: ParamKind::Bias,
            });
            params.push(Param {
                name: format!("block{i}.bn.beta"),
                rows: 1,
                cols: out_c,
                value: vec![T::zero(); out_c],
                kind: ParamKind::Bias,
            });
            bn.push(if hyp_body {
                // origin at the initial K = -1
                let mut mean = vec![T::zero(); out_c + 1];
                mean[0] = T::one();
                BnState::Lorentz { mean, var: T::one() }
            } else {
                BnState::Euclid { mean: vec![T::zero(); out_c], var: vec![T::one(); out_c] }
            });
        }

        let flat_len = *spec.block_lens().last().expect("blocks validated");
        let flat_dim = flat_len * spec.blocks.last().unwrap().out_channels + usize::from(hyp_body);
        params.push(Param {
            name: "dense.w".into(),
            rows: spec.dense_dim,
            cols: flat_dim,
            value: uniform(spec.dense_dim, flat_dim, flat_dim, spec.dense_dim),
            kind: ParamKind::Weight,
        });
        params.push(Param {
            name: "dense.b".into(),
            rows: 1,
            cols: spec.dense_dim,
            value: vec![T::zero(); spec.dense_dim],
            kind: ParamKind::Bias,
        });
        params.push(Param {
            name: "mlr.z".into(),
            rows: spec.num_classes,
            cols: spec.dense_dim,
            value: uniform(spec.num_classes, spec.dense_dim, spec.dense_dim, spec.num_classes),
            kind: ParamKind::Weight,
        });
        params.push(Param {
            name: "mlr.a".into(),
            rows: 1,
            cols: spec.num_classes,
            value: vec![T::zero(); spec.num_classes],
            kind: ParamKind::Bias,
        });
        for j in 0..spec.n_curvatures() {
            params.push(Param {
                name: format!("curvature{j}"),
                rows: 1,
                cols: 1,
                // K = -softplus(kappa) = -1 initially
                value: vec![softplus_inv(T::one())],
                kind: ParamKind::Curvature,
            });
        }
        Ok(ModelInstance { spec, params, bn, init_seed: seed })
    }

    pub fn param_index(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    /// Current curvature values K_j = -softplus(kappa_j).
    pub fn curvatures(&self) -> Vec<T> {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::Curvature)
            .map(|p| -softplus(p.value[0]))
            .collect()
    }

    /// Build the forward tape for a batch of sequences. In train mode,
    /// parameters are differentiable leaves and batch-norm batch statistics
    /// are returned for the running-state update.
    pub fn forward(&self, seqs: &[&str], train: bool) -> Result<ForwardPass<T>> {
        let spec = &self.spec;
        let batch = seqs.len();
        if batch == 0 {
            return Err(ModelError::Config("empty batch".into()));
        }
        let mut tape = Tape::new();
        let mut param_nodes = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let node = match p.kind {
                ParamKind::Curvature => tape.leaf(1, 1, vec![-softplus(p.value[0])], train),
                _ => tape.leaf(p.rows, p.cols, p.value.clone(), train),
            };
            param_nodes.push(node);
        }
        let k_nodes: Vec<NodeId> = self
            .params
            .iter()
            .zip(&param_nodes)
            .filter(|(p, _)| p.kind == ParamKind::Curvature)
            .map(|(_, &n)| n)
            .collect();
        let block_k = |i: usize| -> NodeId {
            match spec.geometry {
                Geometry::HcnnM => k_nodes[i],
                _ => k_nodes[0],
            }
        };
        let head_k = || -> NodeId {
            match spec.geometry {
                Geometry::HcnnM => k_nodes[spec.blocks.len()],
                _ => k_nodes[0],
            }
        };

        let onehot = one_hot::<T>(seqs, spec.seq_len)?;
        let input = tape.constant(batch * spec.seq_len, 4, onehot);

        let mut bn_updates = Vec::new();
        let hyp_body = spec.geometry.hyperbolic_body();
        let mut len = spec.seq_len;

        let mut x = if hyp_body {
            lift_rows(&mut tape, input, block_k(0))
        } else {
            input
        };

        for (i, b) in spec.blocks.iter().enumerate() {
            let last = i + 1 == spec.blocks.len();
            let windows = conv_windows(batch, len, b.kernel_len, b.stride, b.padding);
            len = conv_out_len(len, b.kernel_len, b.stride, b.padding);
            let w = param_nodes[self.param_index(&format!("block{i}.w"))];
            let bias = param_nodes[self.param_index(&format!("block{i}.b"))];
            let gamma = param_nodes[self.param_index(&format!("block{i}.bn.gamma"))];
            let beta = param_nodes[self.param_index(&format!("block{i}.bn.beta"))];
            if hyp_body {
                let k = block_k(i);
                let win = tape.hcat_windows(x, k, windows);
                let conv = lorentz_fc(&mut tape, win, w, bias, k, !last);
                let mode = if train {
                    BnMode::Train
                } else {
                    let BnState::Lorentz { mean, var } = &self.bn[i] else { unreachable!() };
                    BnMode::Infer(mean, *var)
                };
                let (out, stats) = lorentz_batch_norm(&mut tape, conv, gamma, beta, k, mode);
                if let Some(s) = stats {
                    bn_updates.push(BnUpdate::Lorentz(s));
                }
                x = out;
                if spec.geometry == Geometry::HcnnM && !last {
                    x = layer_map_rows(&mut tape, x, k, block_k(i + 1));
                }
            } else {
                let win = tape.windows_concat(x, windows);
                let u = tape.matmul_rt(win, w);
                let u = tape.add(u, bias);
                let mode = if train {
                    EBnMode::Train
                } else {
                    let BnState::Euclid { mean, var } = &self.bn[i] else { unreachable!() };
                    EBnMode::Infer(mean, var)
                };
                let (out, stats) = euclidean_batch_norm(&mut tape, u, gamma, beta, mode);
                if let Some(s) = stats {
                    bn_updates.push(BnUpdate::Euclid(s));
                }
                x = if last { out } else { tape.relu(out) };
            }
        }

        // flatten + dense
        let dense_w = param_nodes[self.param_index("dense.w")];
        let dense_b = param_nodes[self.param_index("dense.b")];
        let embedding = if hyp_body {
            let k_body = block_k(spec.blocks.len() - 1);
            let k_head = head_k();
            if spec.geometry == Geometry::HcnnM {
                x = layer_map_rows(&mut tape, x, k_body, k_head);
            }
            let windows = flatten_windows(batch, len);
            let flat = tape.hcat_windows(x, k_head, windows);
            lorentz_fc(&mut tape, flat, dense_w, dense_b, k_head, true)
        } else {
            let c_out = spec.blocks.last().unwrap().out_channels;
            let flat = tape.reshape(x, batch, len * c_out);
            let u = tape.matmul_rt(flat, dense_w);
            let u = tape.add(u, dense_b);
            let dense = tape.relu(u);
            if spec.geometry == Geometry::E2h {
                lift_rows(&mut tape, dense, head_k())
            } else {
                dense
            }
        };

        let z = param_nodes[self.param_index("mlr.z")];
        let a = param_nodes[self.param_index("mlr.a")];
        let logits = if spec.geometry.hyperbolic_head() {
            lorentz_mlr(&mut tape, embedding, z, a, head_k())
        } else if spec.geometry == Geometry::H2e {
            // log at the origin, keep space components
            let k = head_k();
            let cols = tape.cols(embedding);
            let o = origin_row(&mut tape, cols - 1, k);
            let u = log_rows(&mut tape, o, embedding, k);
            let eu = tape.slice_cols(u, 1, cols - 1);
            euclidean_mlr(&mut tape, eu, z, a)
        } else {
            euclidean_mlr(&mut tape, embedding, z, a)
        };

        Ok(ForwardPass { tape, logits, embedding, param_nodes, bn_updates })
    }

    /// Fold a train-mode batch's BN statistics into the running state:
    /// geodesic interpolation toward the batch mean for Lorentz layers,
    /// exponential moving average otherwise.
    pub fn apply_bn_updates(&mut self, updates: &[BnUpdate<T>]) {
        let momentum = T::c(BN_MOMENTUM);
        let ks = self.curvatures();
        let mut k_iter = 0;
        for (state, update) in self.bn.iter_mut().zip(updates) {
            match (state, update) {
                (BnState::Lorentz { mean, var }, BnUpdate::Lorentz(stats)) => {
                    let k = if ks.len() > 1 { ks[k_iter] } else { ks[0] };
                    let manifold = Manifold::new(k).expect("negative curvature");
                    let current = manifold.reproject(mean);
                    let target = manifold.reproject(&stats.mean);
                    let log = manifold.log_map(&current, &target).expect("valid points");
                    let step: Vec<T> = log.iter().map(|&v| v * momentum).collect();
                    let moved = manifold.exp_map(&current, &step).expect("valid step");
                    *mean = manifold.reproject(&moved);
                    *var = (T::one() - momentum) * *var + momentum * stats.var;
                }
                (BnState::Euclid { mean, var }, BnUpdate::Euclid(stats)) => {
                    for (m, &b) in mean.iter_mut().zip(&stats.mean) {
                        *m = (T::one() - momentum) * *m + momentum * b;
                    }
                    for (v, &b) in var.iter_mut().zip(&stats.var) {
                        *v = (T::one() - momentum) * *v + momentum * b;
                    }
                }
                _ => unreachable!("bn state/update kind mismatch"),
            }
            k_iter += 1;
        }
    }

    /// Inference logits for a batch.
    pub fn logits(&self, seqs: &[&str]) -> Result<Vec<Vec<T>>> {
        let pass = self.forward(seqs, false)?;
        let c = pass.tape.cols(pass.logits);
        let v = pass.tape.value(pass.logits);
        Ok((0..seqs.len()).map(|i| v[i * c..(i + 1) * c].to_vec()).collect())
    }

    pub fn predict(&self, seqs: &[&str]) -> Result<Vec<usize>> {
        Ok(self
            .logits(seqs)?
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            })
            .collect())
    }

    /// Pre-MLR embeddings (full Lorentz coordinates for hyperbolic heads).
    pub fn embed(&self, seqs: &[&str]) -> Result<Vec<Vec<T>>> {
        let pass = self.forward(seqs, false)?;
        let c = pass.tape.cols(pass.embedding);
        let v = pass.tape.value(pass.embedding);
        Ok((0..seqs.len()).map(|i| v[i * c..(i + 1) * c].to_vec()).collect())
    }
}

/// Map a batch of points between manifolds: exp0_{K2}(log0_{K1}(x)) with the
/// tangent's time component zeroed.
pub fn layer_map_rows<T: Real>(t: &mut Tape<T>, x: NodeId, k1: NodeId, k2: NodeId) -> NodeId {
    let cols = t.cols(x);
    let space = cols - 1;
    let o1 = origin_row(t, space, k1);
    let u = log_rows(t, o1, x, k1);
    let u_space = t.slice_cols(u, 1, space);
    let u_time = t.slice_cols(u, 0, 1);
    let zero = t.scalar(0.0);
    let zero_col = t.mul(u_time, zero);
    let tangent = t.concat_cols(&[zero_col, u_space]);
    let o2 = origin_row(t, space, k2);
    let out = exp_rows(t, o2, tangent, k2);
    reproject_rows(t, out, k2)
}
