use crate::error::{ModelError, Result};
use crate::metrics::mcc;
use crate::model::{ModelInstance, ParamKind};
use crate::optim::{adam_step, riemannian_adam_step, AdamState, TrainConfig};
use hge_core::Real;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct SeqDataset {
    pub sequences: Vec<String>,
    pub labels: Vec<usize>,
}

impl SeqDataset {
    pub fn new(sequences: Vec<String>, labels: Vec<usize>) -> Self {
        assert_eq!(sequences.len(), labels.len());
        SeqDataset { sequences, labels }
    }

    /// CSV with header `sequence,label`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "sequence,label" => {}
            other => {
                return Err(ModelError::Config(format!(
                    "{}: expected header 'sequence,label', got {other:?}",
                    path.display()
                )))
            }
        }
        let mut sequences = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (seq, label) = line.split_once(',').ok_or_else(|| {
                ModelError::Config(format!("{}:{}: missing comma", path.display(), lineno + 2))
            })?;
            sequences.push(seq.to_string());
            labels.push(label.trim().parse::<usize>().map_err(|e| {
                ModelError::Config(format!("{}:{}: bad label: {e}", path.display(), lineno + 2))
            })?);
        }
        if sequences.is_empty() {
            return Err(ModelError::Config(format!("{}: no records", path.display())));
        }
        Ok(SeqDataset { sequences, labels })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_mcc: f64,
    pub wall_s: f64,
    /// Learned curvatures after this epoch (empty for Euclidean models).
    pub curvatures: Vec<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome<T> {
    /// Parameters/BN state at the best dev-MCC epoch.
    pub best_model: ModelInstance<T>,
    pub best_epoch: usize,
    pub best_dev_mcc: f64,
    pub log: Vec<EpochRecord>,
    /// Set when the loss went non-finite; `best_model` is the last good state.
    pub diverged: Option<String>,
}

/// Batched inference predictions.
pub fn predict_all<T: Real>(
    model: &ModelInstance<T>,
    ds: &SeqDataset,
    batch_size: usize,
) -> Result<Vec<usize>> {
    let mut preds = Vec::with_capacity(ds.len());
    for chunk in ds.sequences.chunks(batch_size.max(1)) {
        let refs: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
        preds.extend(model.predict(&refs)?);
    }
    Ok(preds)
}

pub fn evaluate_mcc<T: Real>(
    model: &ModelInstance<T>,
    ds: &SeqDataset,
    batch_size: usize,
) -> Result<f64> {
    let preds = predict_all(model, ds, batch_size)?;
    Ok(mcc(&preds, &ds.labels)?.0)
}

/// Epoch loop with shuffled mini-batches, best-dev-MCC model selection, and
/// fully deterministic behavior given (seed, config, data).
pub fn train<T: Real>(
    model: &mut ModelInstance<T>,
    train_ds: &SeqDataset,
    dev_ds: &SeqDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_ds.is_empty() || dev_ds.is_empty() {
        return Err(ModelError::Config("train and dev splits must be non-empty".into()));
    }
    let riemannian = model.spec.n_curvatures() > 0;
    let mut state = AdamState::for_params(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let started = Instant::now();

    let mut best_model = model.clone();
    let mut best_epoch = 0;
    let mut best_dev_mcc = f64::NEG_INFINITY;
    let mut log = Vec::new();
    let mut since_best = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_ds.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let seqs: Vec<&str> = chunk.iter().map(|&i| train_ds.sequences[i].as_str()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_ds.labels[i]).collect();
            let mut pass = model.forward(&seqs, true)?;
            let loss = pass.tape.cross_entropy_mean(pass.logits, Arc::new(labels));
            let loss_val = pass.tape.value(loss)[0].to_f64().unwrap();
            if !loss_val.is_finite() {
                return Ok(TrainOutcome {
                    best_model,
                    best_epoch,
                    best_dev_mcc,
                    log,
                    diverged: Some(format!("non-finite loss at epoch {epoch}")),
                });
            }
            epoch_loss += loss_val;
            batches += 1;

            let grads_by_node = pass.tape.backward(loss);
            let mut grads: Vec<Vec<T>> = Vec::with_capacity(model.params.len());
            for (p, node) in model.params.iter().zip(&pass.param_nodes) {
                let mut g = grads_by_node[node.0]
                    .clone()
                    .unwrap_or_else(|| vec![T::zero(); p.value.len()]);
                if p.kind == ParamKind::Curvature {
                    // chain rule through K = -softplus(kappa)
                    let kappa = p.value[0];
                    let sig = T::one() / (T::one() + (-kappa).exp());
                    g[0] = g[0] * -sig;
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Ok(TrainOutcome {
                        best_model,
                        best_epoch,
                        best_dev_mcc,
                        log,
                        diverged: Some(format!(
                            "non-finite gradient for {} at epoch {epoch}",
                            p.name
                        )),
                    });
                }
                grads.push(g);
            }

            // global-norm gradient clipping
            let norm2: f64 = grads
                .iter()
                .flat_map(|g| g.iter())
                .map(|v| {
                    let f = v.to_f64().unwrap();
                    f * f
                })
                .sum();
            let norm = norm2.sqrt();
            if norm > cfg.grad_clip {
                let scale = T::c(cfg.grad_clip / norm);
                for g in &mut grads {
                    for v in g.iter_mut() {
                        *v = *v * scale;
                    }
                }
            }

            if riemannian {
                riemannian_adam_step(&mut model.params, &grads, &mut state, cfg)?;
            } else {
                adam_step(&mut model.params, &grads, &mut state, cfg)?;
            }
            // an oversized manifold step can push a learnable curvature onto
            // (or past) K = 0, where the geometry is no longer hyperbolic
            if model.curvatures().iter().any(|k| {
                let k = k.to_f64().unwrap();
                !k.is_finite() || k >= 0.0
            }) {
                return Ok(TrainOutcome {
                    best_model,
                    best_epoch,
                    best_dev_mcc,
                    log,
                    diverged: Some(format!("curvature left the hyperbolic regime at epoch {epoch}")),
                });
            }
            model.apply_bn_updates(&pass.bn_updates);
        }

        let dev_mcc = evaluate_mcc(model, dev_ds, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            dev_mcc,
            wall_s: started.elapsed().as_secs_f64(),
            curvatures: model.curvatures().iter().map(|k| k.to_f64().unwrap()).collect(),
        };
        log.push(record);

        if dev_mcc > best_dev_mcc {
            best_dev_mcc = dev_mcc;
            best_epoch = epoch;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if let Some(patience) = cfg.patience {
                if since_best >= patience {
                    break;
                }
            }
        }
    }

    Ok(TrainOutcome { best_model, best_epoch, best_dev_mcc, log, diverged: None })
}

/// Standalone stabilized cross-entropy for evaluation paths.
pub fn cross_entropy<T: Real>(logits: &[T], label: usize) -> T {
    let mx = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let lse = logits.iter().fold(T::zero(), |s, &v| s + (v - mx).exp()).ln() + mx;
    lse - logits[label]
}
