//! Curvature-parameterized Lorentz-model geometry kernel: inner products,
//! projections, exp/log maps, parallel transport, concatenation, Fréchet
//! statistics, and inter-manifold maps.
//!
//! All operations are pure functions of their inputs and are generic over the
//! scalar type (f32/f64). Manifold objects are immutable once constructed.

mod error;
mod manifold;
mod point;
mod scalar;
mod stats;

pub use error::{GeometryError, Result};
pub use manifold::{
    acosh_ratio, lorentz_norm, minkowski_inner, sinhc, stable_acosh, Manifold,
};
pub use point::{points_to_csv, LorentzPoint, LorentzTensor, TangentVector};
pub use scalar::{softplus, softplus_inv, Real};
pub use stats::{frechet_mean, frechet_variance, hcat, FrechetResult, FRECHET_MAX_ITERS, FRECHET_TOL};

/// Concrete aliases for the common 64-bit configuration used in tests.
pub type Manifold64 = Manifold<f64>;
pub type Point64 = LorentzPoint<f64>;
pub type Tangent64 = TangentVector<f64>;

/// Concrete aliases for the 32-bit configuration used in layer math.
pub type Manifold32 = Manifold<f32>;
pub type Point32 = LorentzPoint<f32>;
pub type Tangent32 = TangentVector<f32>;

/// K = -softplus(kappa): guarantees K < 0 for any unconstrained kappa.
pub fn curvature_from_raw<T: Real>(kappa: T) -> T {
    -softplus(kappa)
}

/// kappa such that -softplus(kappa) = k, for k < 0.
pub fn raw_from_curvature<T: Real>(k: T) -> T {
    softplus_inv(-k)
}
