use crate::error::{DeltaError, Result};
use crate::gromov::{entries, mean_entries, slack_matrix, AvgMode};
use crate::matrix::{DistanceMatrix, MetricTag};
use hge_core::Manifold;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A dataset whose pairwise distances can be evaluated on demand.
pub enum PointCloud {
    /// Rows are Euclidean coordinates.
    Euclidean(Vec<Vec<f64>>),
    /// Rows are full Lorentz ambient coordinates (timelike first).
    Lorentz(Vec<Vec<f64>>, Manifold<f64>),
    /// Precomputed distances.
    Precomputed(DistanceMatrix),
}

impl PointCloud {
    pub fn len(&self) -> usize {
        match self {
            PointCloud::Euclidean(p) | PointCloud::Lorentz(p, _) => p.len(),
            PointCloud::Precomputed(d) => d.n(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metric(&self) -> MetricTag {
        match self {
            PointCloud::Euclidean(_) => MetricTag::Euclidean,
            PointCloud::Lorentz(..) => MetricTag::LorentzGeodesic,
            PointCloud::Precomputed(d) => d.metric,
        }
    }

    fn distances_for(&self, idx: &[usize]) -> DistanceMatrix {
        match self {
            PointCloud::Euclidean(p) => {
                let sub: Vec<Vec<f64>> = idx.iter().map(|&i| p[i].clone()).collect();
                DistanceMatrix::euclidean(&sub)
            }
            PointCloud::Lorentz(p, m) => {
                let sub: Vec<Vec<f64>> = idx.iter().map(|&i| p[i].clone()).collect();
                DistanceMatrix::lorentz(&sub, *m)
            }
            PointCloud::Precomputed(d) => d.subset(idx),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaConfig {
    /// Points per sampling run.
    pub n_s: usize,
    /// Independent sampling runs.
    pub n_runs: usize,
    pub seed: u64,
    /// Position of the fixed base point within each subsample.
    pub base_position: usize,
    /// Average over all C entries instead of the default
    /// upper-triangle-excluding-base selection.
    pub avg_all_entries: bool,
    /// Cap on pooled distribution values kept per run (deterministic stride).
    pub max_distribution_per_run: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        Self {
            n_s: 1000,
            n_runs: 10,
            seed: 0,
            base_position: 0,
            avg_all_entries: false,
            max_distribution_per_run: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

fn stat(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stat { mean, sd }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub delta_worst_raw: f64,
    pub delta_avg_raw: f64,
    pub d_max: f64,
    pub d_avg: f64,
    pub delta_worst_rel: f64,
    pub delta_avg_rel: f64,
    pub sample_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaReport {
    pub n_s: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub metric: MetricTag,
    pub base_position: usize,
    pub avg_all_entries: bool,
    /// 2 * delta_worst / D_max per run, summarized.
    pub delta_worst_rel: Stat,
    /// 2 * delta_avg / D_avg per run, summarized.
    pub delta_avg_rel: Stat,
    pub runs: Vec<RunRecord>,
    /// Pooled scaled C entries (2 C_ij / D_max) across runs.
    pub distribution: Vec<f64>,
    pub distribution_subsampled: bool,
}

/// Subsample-and-estimate procedure: per run, draw `n_s` points, anchor the
/// Gromov products at the configured base position, and collect worst/average
/// slack along with the full scaled slack sample.
pub fn delta_distribution(cloud: &PointCloud, cfg: &DeltaConfig) -> Result<DeltaReport> {
    let n = cloud.len();
    if n < 4 {
        return Err(DeltaError::TooFewPoints { need: 4, got: n });
    }
    let n_s = cfg.n_s.min(n);
    if cfg.base_position >= n_s {
        return Err(DeltaError::Shape(format!(
            "base position {} outside subsample of {n_s}",
            cfg.base_position
        )));
    }
    let mode = if cfg.avg_all_entries {
        AvgMode::AllEntries
    } else {
        AvgMode::UpperTriangleExcludingBase
    };

    // one independent, seeded stream per run: parallel execution merges by
    // run index and reproduces the serial result
    let runs: Vec<(RunRecord, Vec<f64>, bool)> = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(run + 1);
            let idx: Vec<usize> = if n_s == n {
                (0..n).collect()
            } else {
                rand::seq::index::sample(&mut rng, n, n_s).into_vec()
            };
            let d = cloud.distances_for(&idx);
            let c = slack_matrix(&d, cfg.base_position)?;
            let worst = c.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let avg = mean_entries(&c, cfg.base_position, mode);
            let d_max = d.max_distance();
            let d_avg = d.avg_distance();
            let rec = RunRecord {
                delta_worst_raw: worst,
                delta_avg_raw: avg,
                d_max,
                d_avg,
                delta_worst_rel: if d_max > 0.0 { 2.0 * worst / d_max } else { 0.0 },
                delta_avg_rel: if d_avg > 0.0 { 2.0 * avg / d_avg } else { 0.0 },
                sample_size: n_s,
            };
            let mut sample = entries(&c, cfg.base_position, mode);
            if d_max > 0.0 {
                for v in sample.iter_mut() {
                    *v *= 2.0 / d_max;
                }
            }
            let subsampled = sample.len() > cfg.max_distribution_per_run;
            if subsampled {
                let stride = sample.len().div_ceil(cfg.max_distribution_per_run);
                sample = sample.into_iter().step_by(stride).collect();
            }
            Ok((rec, sample, subsampled))
        })
        .collect::<Result<Vec<_>>>()?;

    let worst_rels: Vec<f64> = runs.iter().map(|(r, _, _)| r.delta_worst_rel).collect();
    let avg_rels: Vec<f64> = runs.iter().map(|(r, _, _)| r.delta_avg_rel).collect();
    let distribution_subsampled = runs.iter().any(|(_, _, s)| *s);
    let mut distribution = Vec::new();
    let mut records = Vec::with_capacity(runs.len());
    for (rec, sample, _) in runs {
        distribution.extend(sample);
        records.push(rec);
    }

    Ok(DeltaReport {
        n_s,
        n_runs: cfg.n_runs,
        seed: cfg.seed,
        metric: cloud.metric(),
        base_position: cfg.base_position,
        avg_all_entries: cfg.avg_all_entries,
        delta_worst_rel: stat(&worst_rels),
        delta_avg_rel: stat(&avg_rels),
        runs: records,
        distribution,
        distribution_subsampled,
    })
}

/// Histogram with `bins` equal-width bins over [min, max]; rows (bin_left, count).
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, c))
        .collect()
}
