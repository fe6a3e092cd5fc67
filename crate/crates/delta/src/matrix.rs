use crate::error::{DeltaError, Result};
use hge_core::Manifold;
use serde::{Deserialize, Serialize};

/// Which metric produced a distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricTag {
    Euclidean,
    LorentzGeodesic,
    SphericalGeodesic,
    GraphShortestPath,
}

/// Symmetric n x n non-negative matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
    pub metric: MetricTag,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, metric: MetricTag) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(DeltaError::Shape(format!(
                    "expected {n} columns, got {}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let m = Self { n, data, metric };
        m.validate()?;
        Ok(m)
    }

    pub fn from_fn(n: usize, metric: MetricTag, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data, metric }
    }

    /// Pairwise Euclidean distances of a point cloud (rows are points).
    pub fn euclidean(points: &[Vec<f64>]) -> Self {
        Self::from_fn(points.len(), MetricTag::Euclidean, |i, j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
    }

    /// Pairwise Lorentz geodesic distances; points carry full ambient
    /// coordinates (timelike first).
    pub fn lorentz(points: &[Vec<f64>], manifold: Manifold<f64>) -> Self {
        Self::from_fn(points.len(), MetricTag::LorentzGeodesic, |i, j| {
            manifold.distance(&points[i], &points[j])
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Restrict to a subset of indices, preserving their order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.metric, |i, j| self.get(idx[i], idx[j]))
    }

    /// Maximal pairwise distance (set diameter).
    pub fn max_distance(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// Average off-diagonal distance.
    pub fn avg_distance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let sum: f64 = self.data.iter().sum();
        sum / (self.n * (self.n - 1)) as f64
    }

    /// Multiply all distances by a positive factor.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|d| d * lambda).collect(),
            metric: self.metric,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return Err(DeltaError::Shape(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                if (a - b).abs() > 1e-9 * a.abs().max(1.0) || a < 0.0 {
                    return Err(DeltaError::Shape(format!(
                        "matrix not symmetric non-negative at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }
}
