use crate::error::{ModelError, Result};
use crate::model::{Param, ParamKind};
use hge_core::{Manifold, Real};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub manifold_learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub patience: Option<usize>,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            manifold_learning_rate: 2e-2,
            batch_size: 100,
            weight_decay: 0.1,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            seed: 0,
            patience: None,
            grad_clip: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.manifold_learning_rate <= 0.0 {
            return Err(ModelError::Config("learning rates must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::Config("batch_size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ModelError::Config("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn for_params(params: &[Param<T>]) -> Self {
        AdamState {
            m: params.iter().map(|p| vec![T::zero(); p.value.len()]).collect(),
            v: params.iter().map(|p| vec![T::zero(); p.value.len()]).collect(),
            step: 0,
        }
    }
}

fn adam_update<T: Real>(
    params: &mut [Param<T>],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
    manifold_lr_for_curvature: bool,
) -> Result<()> {
    cfg.validate()?;
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::c(cfg.beta1);
    let b2 = T::c(cfg.beta2);
    let eps = T::c(ADAM_EPS);
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let lr = if manifold_lr_for_curvature && p.kind == ParamKind::Curvature {
            T::c(cfg.manifold_learning_rate)
        } else {
            T::c(cfg.learning_rate)
        };
        let decay = if p.kind == ParamKind::Weight {
            T::c(cfg.weight_decay)
        } else {
            T::zero()
        };
        for j in 0..p.value.len() {
            let g = grads[i][j];
            state.m[i][j] = b1 * state.m[i][j] + (T::one() - b1) * g;
            state.v[i][j] = b2 * state.v[i][j] + (T::one() - b2) * g * g;
            let m_hat = state.m[i][j] / bias1;
            let v_hat = state.v[i][j] / bias2;
            // decoupled weight decay
            p.value[j] = p.value[j] - lr * decay * p.value[j] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Decoupled-weight-decay Adam; every parameter uses the general rate.
pub fn adam_step<T: Real>(
    params: &mut [Param<T>],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    adam_update(params, grads, state, cfg, false)
}

/// Adam with curvature parameters stepped at the manifold learning rate.
/// Reduces bit-for-bit to `adam_step` when no curvature parameters exist.
pub fn riemannian_adam_step<T: Real>(
    params: &mut [Param<T>],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    adam_update(params, grads, state, cfg, true)
}

/// Riemannian Adam step for a manifold-valued point parameter: the ambient
/// gradient is converted to a Riemannian one, first moments live in tangent
/// space (parallel-transported after the move), the second moment is the
/// scalar squared tangent norm.
pub struct PointAdamState<T> {
    pub m: Vec<T>,
    pub v: T,
    pub step: u64,
}

pub fn riemannian_point_step<T: Real>(
    manifold: &Manifold<T>,
    point: &mut Vec<T>,
    ambient_grad: &[T],
    state: &mut PointAdamState<T>,
    lr: T,
    beta1: T,
    beta2: T,
) -> Result<()> {
    state.step += 1;
    // Riemannian gradient: metric-inverse then tangent projection
    let mut g: Vec<T> = ambient_grad.to_vec();
    g[0] = -g[0];
    let rgrad = manifold.project_tangent(point, &g);
    let norm2 = hge_core::minkowski_inner(&rgrad, &rgrad)?.max(T::zero());
    for (m, &gi) in state.m.iter_mut().zip(&rgrad) {
        *m = beta1 * *m + (T::one() - beta1) * gi;
    }
    state.v = beta2 * state.v + (T::one() - beta2) * norm2;
    let bias1 = T::one() - beta1.powi(state.step as i32);
    let bias2 = T::one() - beta2.powi(state.step as i32);
    let denom = (state.v / bias2).sqrt() + T::c(ADAM_EPS);
    let step: Vec<T> = state.m.iter().map(|&m| -(lr * m / bias1 / denom)).collect();
    let new_point = manifold.exp_map(point, &step)?;
    let new_point = manifold.reproject(&new_point);
    state.m = manifold.parallel_transport(point, &new_point, &state.m);
    *point = new_point;
    Ok(())
}
