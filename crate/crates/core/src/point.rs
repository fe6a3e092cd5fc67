use crate::error::{GeometryError, Result};
use crate::manifold::{lorentz_norm, minkowski_inner, Manifold};
use crate::scalar::Real;

/// A point on a Lorentz manifold, stored with its (redundant) timelike
/// coordinate so membership checks stay O(1).
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint<T: Real> {
    pub coords: Vec<T>,
    pub manifold: Manifold<T>,
}

impl<T: Real> LorentzPoint<T> {
    pub fn new(coords: Vec<T>, manifold: Manifold<T>) -> Self {
        Self { coords, manifold }
    }

    pub fn from_space(xs: &[T], manifold: Manifold<T>) -> Self {
        Self::new(manifold.lift_space(xs), manifold)
    }

    pub fn origin(space_dim: usize, manifold: Manifold<T>) -> Self {
        Self::new(manifold.origin(space_dim), manifold)
    }

    pub fn time(&self) -> T {
        self.coords[0]
    }

    pub fn space(&self) -> &[T] {
        &self.coords[1..]
    }

    pub fn space_dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn is_valid(&self) -> bool {
        self.manifold.is_on_manifold(&self.coords)
    }

    pub fn distance(&self, other: &Self) -> Result<T> {
        self.manifold.same_curvature(&other.manifold)?;
        Ok(self.manifold.distance(&self.coords, &other.coords))
    }

    pub fn log(&self, target: &Self) -> Result<TangentVector<T>> {
        self.manifold.same_curvature(&target.manifold)?;
        let coords = self.manifold.log_map(&self.coords, &target.coords)?;
        Ok(TangentVector {
            coords,
            base: self.clone(),
        })
    }

    pub fn exp(&self, z: &TangentVector<T>) -> Result<LorentzPoint<T>> {
        let coords = self.manifold.exp_map(&self.coords, &z.coords)?;
        Ok(LorentzPoint::new(coords, self.manifold))
    }
}

/// A vector in the tangent space of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Real> {
    pub coords: Vec<T>,
    pub base: LorentzPoint<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(coords: Vec<T>, base: LorentzPoint<T>) -> Self {
        Self { coords, base }
    }

    pub fn norm(&self) -> T {
        lorentz_norm(&self.coords)
    }

    pub fn inner(&self, other: &TangentVector<T>) -> Result<T> {
        minkowski_inner(&self.coords, &other.coords)
    }

    pub fn is_tangent(&self) -> bool {
        self.base.manifold.is_tangent(&self.base.coords, &self.coords)
    }

    /// Parallel transport to the tangent space of `to`.
    pub fn transport(&self, to: &LorentzPoint<T>) -> Result<TangentVector<T>> {
        self.base.manifold.same_curvature(&to.manifold)?;
        let coords =
            self.base
                .manifold
                .parallel_transport(&self.base.coords, &to.coords, &self.coords);
        Ok(TangentVector {
            coords,
            base: to.clone(),
        })
    }
}

/// An ordered set of Lorentz points sharing one manifold, laid out as
/// (position/channel) entries of equal space dimension.
#[derive(Debug, Clone)]
pub struct LorentzTensor<T: Real> {
    pub entries: Vec<LorentzPoint<T>>,
    pub manifold: Manifold<T>,
}

impl<T: Real> LorentzTensor<T> {
    pub fn new(entries: Vec<LorentzPoint<T>>) -> Result<Self> {
        let first = entries.first().ok_or(GeometryError::EmptyInput)?;
        let manifold = first.manifold;
        let dim = first.coords.len();
        for p in &entries {
            manifold.same_curvature(&p.manifold)?;
            if p.coords.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.coords.len(),
                });
            }
        }
        Ok(Self { entries, manifold })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Debug dump: one CSV row `x_t,x_s1,...,x_sn` per point.
pub fn points_to_csv<T: Real>(points: &[LorentzPoint<T>]) -> String {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.coords.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
