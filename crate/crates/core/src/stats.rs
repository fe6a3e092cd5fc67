use crate::error::{GeometryError, Result};
use crate::manifold::lorentz_norm;
use crate::point::LorentzPoint;
use crate::scalar::Real;

/// Numerically stable concatenation of hyperbolic points: the output lives in
/// L^{nN} with timelike component sqrt(sum x_{i,t}^2 + (N-1)/K) and space
/// components the concatenation of all x_{i,s}.
pub fn hcat<T: Real>(points: &[LorentzPoint<T>]) -> Result<LorentzPoint<T>> {
    let first = points.first().ok_or(GeometryError::EmptyInput)?;
    let manifold = first.manifold;
    let mut time_sq = T::zero();
    let mut space = Vec::new();
    for p in points {
        manifold.same_curvature(&p.manifold)?;
        time_sq += p.time() * p.time();
        space.extend_from_slice(p.space());
    }
    let n_minus_1 = T::from_usize(points.len() - 1).unwrap();
    let t = (time_sq + n_minus_1 * manifold.inv_k()).max(T::zero()).sqrt();
    let mut coords = Vec::with_capacity(space.len() + 1);
    coords.push(t);
    coords.extend_from_slice(&space);
    Ok(LorentzPoint::new(coords, manifold))
}

/// Result of the Fréchet-mean fixed-point iteration.
#[derive(Debug, Clone)]
pub struct FrechetResult<T: Real> {
    pub mean: LorentzPoint<T>,
    pub converged: bool,
    pub iterations: usize,
}

pub const FRECHET_TOL: f64 = 1e-6;
pub const FRECHET_MAX_ITERS: usize = 100;

/// Minimizer of mean squared geodesic distance, by iterated tangent-space
/// averaging: log at the current estimate, average, exp back. Deterministic
/// given input order.
pub fn frechet_mean<T: Real>(points: &[LorentzPoint<T>]) -> Result<FrechetResult<T>> {
    let first = points.first().ok_or(GeometryError::EmptyInput)?;
    let manifold = first.manifold;
    for p in points {
        manifold.same_curvature(&p.manifold)?;
    }
    if points.len() == 1 {
        return Ok(FrechetResult {
            mean: first.clone(),
            converged: true,
            iterations: 0,
        });
    }
    let inv_n = T::from_usize(points.len()).unwrap().recip();
    let tol = T::c(FRECHET_TOL);
    let mut mu = first.coords.clone();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=FRECHET_MAX_ITERS {
        iterations = it;
        let mut step = vec![T::zero(); mu.len()];
        for p in points {
            let l = manifold.log_map(&mu, &p.coords)?;
            for (s, v) in step.iter_mut().zip(l) {
                *s += v * inv_n;
            }
        }
        mu = manifold.exp_map(&mu, &step)?;
        mu = manifold.reproject(&mu);
        if lorentz_norm(&step) < tol {
            converged = true;
            break;
        }
    }
    Ok(FrechetResult {
        mean: LorentzPoint::new(mu, manifold),
        converged,
        iterations,
    })
}

/// Mean squared geodesic distance to `mean`.
pub fn frechet_variance<T: Real>(points: &[LorentzPoint<T>], mean: &LorentzPoint<T>) -> Result<T> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut acc = T::zero();
    for p in points {
        mean.manifold.same_curvature(&p.manifold)?;
        let d = mean.manifold.distance(&mean.coords, &p.coords);
        acc += d * d;
    }
    Ok(acc / T::from_usize(points.len()).unwrap())
}
