use crate::error::{GeometryError, Result};
use crate::scalar::Real;

/// A Lorentz-model hyperbolic space: curvature K < 0 plus numerical tolerances.
///
/// Points live on the forward sheet of the hyperboloid <x,x>_L = 1/K in
/// (n+1)-dimensional Minkowski space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manifold<T: Real> {
    k: T,
    pub eps_on_manifold: T,
    pub eps_arg: T,
}

impl<T: Real> Manifold<T> {
    pub fn new(k: T) -> Result<Self> {
        if !(k < T::zero()) || !k.is_finite() {
            return Err(GeometryError::InvalidCurvature(
                k.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self {
            k,
            eps_on_manifold: T::eps_membership(),
            eps_arg: T::eps_arg(),
        })
    }

    pub fn with_tolerances(k: T, eps_on_manifold: T, eps_arg: T) -> Result<Self> {
        let mut m = Self::new(k)?;
        m.eps_on_manifold = eps_on_manifold;
        m.eps_arg = eps_arg;
        Ok(m)
    }

    pub fn curvature(&self) -> T {
        self.k
    }

    /// 1/K (negative).
    pub fn inv_k(&self) -> T {
        self.k.recip()
    }

    /// [sqrt(-1/K), 0, ..., 0] with `space_dim` space components.
    pub fn origin(&self, space_dim: usize) -> Vec<T> {
        let mut o = vec![T::zero(); space_dim + 1];
        o[0] = (-self.inv_k()).sqrt();
        o
    }

    pub fn same_curvature(&self, other: &Self) -> Result<()> {
        if self.k != other.k {
            return Err(GeometryError::ManifoldMismatch {
                left: self.k.to_f64().unwrap_or(f64::NAN),
                right: other.k.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Lift space components to the hyperboloid: [sqrt(||x_s||^2 - 1/K), x_s].
    pub fn lift_space(&self, xs: &[T]) -> Vec<T> {
        let sq: T = xs.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b);
        let mut out = Vec::with_capacity(xs.len() + 1);
        out.push((sq - self.inv_k()).sqrt());
        out.extend_from_slice(xs);
        out
    }

    /// Recompute the timelike coordinate from the space components.
    pub fn reproject(&self, x: &[T]) -> Vec<T> {
        self.lift_space(&x[1..])
    }

    /// |<x,x>_L - 1/K| < eps * max(1, ||x||^2) and x_t > 0.
    pub fn is_on_manifold(&self, x: &[T]) -> bool {
        let inner = minkowski_inner_unchecked(x, x);
        let sq: T = x.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b);
        let scale = T::one().max(sq);
        (inner - self.inv_k()).abs() < self.eps_on_manifold * scale && x[0] > T::zero()
    }

    /// |<x,v>_L| < eps * max(1, ||x|| ||v||).
    pub fn is_tangent(&self, x: &[T], v: &[T]) -> bool {
        let inner = minkowski_inner_unchecked(x, v);
        let nx = x.iter().map(|&a| a * a).fold(T::zero(), |a, b| a + b).sqrt();
        let nv = v.iter().map(|&a| a * a).fold(T::zero(), |a, b| a + b).sqrt();
        inner.abs() < self.eps_on_manifold * T::one().max(nx * nv)
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at x:
    /// u - K <x,u>_L x.
    pub fn project_tangent(&self, x: &[T], u: &[T]) -> Vec<T> {
        let c = self.k * minkowski_inner_unchecked(x, u);
        u.iter().zip(x).map(|(&ui, &xi)| ui - c * xi).collect()
    }

    /// exp_x(z) = cosh(a) x + sinh(a) z / a, a = sqrt(-K) ||z||_L.
    pub fn exp_map(&self, x: &[T], z: &[T]) -> Result<Vec<T>> {
        if z.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("exp_map"));
        }
        let zz = minkowski_inner_unchecked(z, z).max(T::zero());
        let alpha = ((-self.k) * zz).sqrt();
        if alpha < self.eps_arg {
            // series limit: cosh(a) -> 1, sinh(a)/a -> 1, so exp_x(0) = x exactly
            return Ok(x.iter().zip(z).map(|(&xi, &zi)| xi + zi).collect());
        }
        let ch = alpha.cosh();
        let sh_over = alpha.sinh() / alpha;
        Ok(x.iter().zip(z).map(|(&xi, &zi)| ch * xi + sh_over * zi).collect())
    }

    /// log_x(y) = (arcosh(b)/sqrt(b^2-1)) (y - b x), b = K <x,y>_L.
    pub fn log_map(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        if x.len() != y.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let beta = (self.k * minkowski_inner_unchecked(x, y)).max(T::one());
        let coef = acosh_ratio(beta);
        Ok(y.iter().zip(x).map(|(&yi, &xi)| coef * (yi - beta * xi)).collect())
    }

    /// PT_{x->y}(v) = v + <y,v>_L / (1/(-K) - <x,y>_L) (x + y).
    pub fn parallel_transport(&self, x: &[T], y: &[T], v: &[T]) -> Vec<T> {
        let denom = (-self.k).recip() - minkowski_inner_unchecked(x, y);
        if denom.abs() < self.eps_arg {
            // only reachable off-manifold; rebase v at y unchanged
            return v.to_vec();
        }
        let c = minkowski_inner_unchecked(y, v) / denom;
        v.iter()
            .zip(x.iter().zip(y))
            .map(|(&vi, (&xi, &yi))| vi + c * (xi + yi))
            .collect()
    }

    /// Geodesic distance sqrt(-1/K) arcosh(K <x,y>_L).
    pub fn distance(&self, x: &[T], y: &[T]) -> T {
        let beta = (self.k * minkowski_inner_unchecked(x, y)).max(T::one());
        (-self.inv_k()).sqrt() * stable_acosh(beta)
    }

    /// Map a point between manifolds through the shared tangent space at the
    /// origin: exp0_{K2}(log0_{K1}(x)). Identity when the curvatures agree.
    pub fn layer_map(&self, x: &[T], to: &Manifold<T>) -> Result<Vec<T>> {
        if self.k == to.k {
            return Ok(x.to_vec());
        }
        let o1 = self.origin(x.len() - 1);
        let mut v = self.log_map(&o1, x)?;
        // tangent vectors at the origin have zero timelike component
        v[0] = T::zero();
        let o2 = to.origin(x.len() - 1);
        to.exp_map(&o2, &v)
    }
}

/// Lorentzian inner product -x_t y_t + x_s . y_s.
pub fn minkowski_inner<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(GeometryError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(minkowski_inner_unchecked(x, y))
}

pub(crate) fn minkowski_inner_unchecked<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = -(x[0] * y[0]);
    for i in 1..x.len() {
        acc = acc + x[i] * y[i];
    }
    acc
}

/// ||v||_L = sqrt(max(<v,v>_L, 0)) for tangent vectors.
pub fn lorentz_norm<T: Real>(v: &[T]) -> T {
    minkowski_inner_unchecked(v, v).max(T::zero()).sqrt()
}

/// arcosh(b) / sqrt(b^2 - 1) with a 2-term series below the branch point.
pub fn acosh_ratio<T: Real>(beta: T) -> T {
    let d = beta - T::one();
    if d < T::c(1e-4) {
        let d = d.max(T::zero());
        T::one() - d / T::c(3.0) + d * d * T::c(2.0 / 15.0)
    } else {
        beta.acosh() / (beta * beta - T::one()).sqrt()
    }
}

/// arcosh(1 + d) evaluated stably near d = 0.
pub fn stable_acosh<T: Real>(beta: T) -> T {
    let d = (beta - T::one()).max(T::zero());
    if d < T::c(1e-4) {
        (T::c(2.0) * d).sqrt() * (T::one() - d / T::c(12.0))
    } else {
        beta.acosh()
    }
}

/// sinh(a) / a with series for small a.
pub fn sinhc<T: Real>(a: T) -> T {
    if a.abs() < T::c(1e-4) {
        let a2 = a * a;
        T::one() + a2 / T::c(6.0) + a2 * a2 / T::c(120.0)
    } else {
        a.sinh() / a
    }
}
