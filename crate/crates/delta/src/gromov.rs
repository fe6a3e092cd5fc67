use crate::error::{DeltaError, Result};
use crate::matrix::DistanceMatrix;
use rayon::prelude::*;

/// Dense square matrix of Gromov products (or their min-max composites).
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// A_ij = 1/2 (d(i, base) + d(j, base) - d(i, j)).
pub fn gromov_products(d: &DistanceMatrix, base: usize) -> SquareMatrix {
    let n = d.n();
    assert!(base < n, "base index out of range");
    let mut data = vec![0.0; n * n];
    let db = d.row(base);
    for i in 0..n {
        let di = d.row(i);
        for j in 0..n {
            data[i * n + j] = 0.5 * (db[i] + db[j] - di[j]);
        }
    }
    SquareMatrix { n, data }
}

/// (A (x) B)_ij = max_k min(A_ik, B_kj). Rows are computed independently so
/// the parallel result is identical to the serial one.
pub fn minmax_product(a: &SquareMatrix, b: &SquareMatrix) -> Result<SquareMatrix> {
    if a.n != b.n {
        return Err(DeltaError::Shape(format!(
            "minmax product of {}x{} and {}x{}",
            a.n, a.n, b.n, b.n
        )));
    }
    let n = a.n;
    let mut data = vec![f64::NEG_INFINITY; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let arow = &a.data[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = arow[k];
            let brow = &b.data[k * n..(k + 1) * n];
            for j in 0..n {
                let v = aik.min(brow[j]);
                if v > row[j] {
                    row[j] = v;
                }
            }
        }
    });
    Ok(SquareMatrix { n, data })
}

/// C = (A (x) A) - A for the Gromov-product matrix anchored at `base`.
pub fn slack_matrix(d: &DistanceMatrix, base: usize) -> Result<SquareMatrix> {
    let a = gromov_products(d, base);
    let mut c = minmax_product(&a, &a)?;
    for (cv, av) in c.data.iter_mut().zip(&a.data) {
        *cv -= av;
    }
    Ok(c)
}

/// Raw (unscaled) delta_worst: the maximum entry of C.
pub fn delta_worst(d: &DistanceMatrix, base: usize) -> Result<f64> {
    if d.n() < 2 {
        return Err(DeltaError::TooFewPoints { need: 2, got: d.n() });
    }
    let c = slack_matrix(d, base)?;
    Ok(c.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Which entries of C feed the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgMode {
    /// Strict upper triangle, excluding the base point's row and column.
    UpperTriangleExcludingBase,
    /// Every entry of C.
    AllEntries,
}

/// Raw (unscaled) delta_avg over the selected entries of C.
pub fn delta_avg(d: &DistanceMatrix, base: usize, mode: AvgMode) -> Result<f64> {
    if d.n() < 2 {
        return Err(DeltaError::TooFewPoints { need: 2, got: d.n() });
    }
    let c = slack_matrix(d, base)?;
    Ok(mean_entries(&c, base, mode))
}

pub(crate) fn mean_entries(c: &SquareMatrix, base: usize, mode: AvgMode) -> f64 {
    match mode {
        AvgMode::AllEntries => c.data.iter().sum::<f64>() / (c.n * c.n) as f64,
        AvgMode::UpperTriangleExcludingBase => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..c.n {
                if i == base {
                    continue;
                }
                for j in (i + 1)..c.n {
                    if j == base {
                        continue;
                    }
                    sum += c.get(i, j);
                    count += 1;
                }
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        }
    }
}

pub(crate) fn entries(c: &SquareMatrix, base: usize, mode: AvgMode) -> Vec<f64> {
    match mode {
        AvgMode::AllEntries => c.data.clone(),
        AvgMode::UpperTriangleExcludingBase => {
            let mut out = Vec::new();
            for i in 0..c.n {
                if i == base {
                    continue;
                }
                for j in (i + 1)..c.n {
                    if j != base {
                        out.push(c.get(i, j));
                    }
                }
            }
            out
        }
    }
}
