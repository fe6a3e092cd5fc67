use crate::error::{DeltaError, Result};
use crate::matrix::{DistanceMatrix, MetricTag};
use hge_core::Manifold;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Euclidean,
    Hyperbolic,
    Spherical,
}

/// A sampled Gaussian cloud with its geodesic distance matrix.
pub struct SampledCloud {
    pub points: Vec<Vec<f64>>,
    pub distances: DistanceMatrix,
}

/// Gaussian sampling on a constant-curvature manifold: standard normal in the
/// Euclidean case, wrapped normal (tangent Gaussian at the origin pushed
/// through the exponential map) in the curved cases.
pub fn sample_manifold(
    kind: ManifoldKind,
    k: f64,
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<SampledCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ManifoldKind::Euclidean => {
            if k != 0.0 {
                return Err(DeltaError::CurvatureMismatch { kind: "euclidean", k });
            }
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let distances = DistanceMatrix::euclidean(&points);
            Ok(SampledCloud { points, distances })
        }
        ManifoldKind::Hyperbolic => {
            if k >= 0.0 {
                return Err(DeltaError::CurvatureMismatch { kind: "hyperbolic", k });
            }
            let manifold = Manifold::new(k)?;
            let origin = manifold.origin(dim);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut v = vec![0.0; dim + 1];
                    for c in v.iter_mut().skip(1) {
                        *c = rng.sample(StandardNormal);
                    }
                    manifold.exp_map(&origin, &v).expect("finite tangent")
                })
                .collect();
            let distances = DistanceMatrix::lorentz(&points, manifold);
            Ok(SampledCloud { points, distances })
        }
        ManifoldKind::Spherical => {
            if k <= 0.0 {
                return Err(DeltaError::CurvatureMismatch { kind: "spherical", k });
            }
            let radius = k.sqrt().recip();
            let mut pole = vec![0.0; dim + 1];
            pole[0] = radius;
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut v = vec![0.0; dim + 1];
                    for c in v.iter_mut().skip(1) {
                        *c = rng.sample(StandardNormal);
                    }
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return pole.clone();
                    }
                    let theta = norm / radius;
                    pole.iter()
                        .zip(&v)
                        .map(|(&p, &vi)| theta.cos() * p + radius * theta.sin() * vi / norm)
                        .collect()
                })
                .collect();
            let r2 = radius * radius;
            let distances = DistanceMatrix::from_fn(n, MetricTag::SphericalGeodesic, |i, j| {
                let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
                radius * (dot / r2).clamp(-1.0, 1.0).acos()
            });
            Ok(SampledCloud { points, distances })
        }
    }
}

/// Shortest-path metric of a random weighted tree graph: an exactly
/// 0-hyperbolic reference space.
pub fn sample_tree_metric(n_nodes: usize, seed: u64) -> DistanceMatrix {
    assert!(n_nodes >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // random recursive tree: node i attaches to a uniform earlier node
    let mut parent = vec![0usize; n_nodes];
    let mut weight = vec![0.0f64; n_nodes];
    for i in 1..n_nodes {
        parent[i] = rng.gen_range(0..i);
        weight[i] = rng.gen_range(0.1..2.0);
    }
    // depth-accumulated distances via LCA on the recursive structure
    let mut depth = vec![0.0f64; n_nodes];
    let mut level = vec![0usize; n_nodes];
    for i in 1..n_nodes {
        depth[i] = depth[parent[i]] + weight[i];
        level[i] = level[parent[i]] + 1;
    }
    let dist = |mut a: usize, mut b: usize| {
        let (da, db) = (depth[a], depth[b]);
        while level[a] > level[b] {
            a = parent[a];
        }
        while level[b] > level[a] {
            b = parent[b];
        }
        while a != b {
            a = parent[a];
            b = parent[b];
        }
        da + db - 2.0 * depth[a]
    };
    DistanceMatrix::from_fn(n_nodes, MetricTag::GraphShortestPath, |i, j| dist(i, j))
}
