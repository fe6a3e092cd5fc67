use crate::error::{PhyloError, Result};
use nalgebra::{Matrix4, SymmetricEigen};

pub const NUCLEOTIDES: [char; 4] = ['A', 'C', 'G', 'T'];

pub fn encode_nucleotide(c: char) -> Result<usize> {
    match c.to_ascii_uppercase() {
        'A' => Ok(0),
        'C' => Ok(1),
        'G' => Ok(2),
        'T' => Ok(3),
        other => Err(PhyloError::InvalidNucleotide(other)),
    }
}

/// General time-reversible substitution model: Q_ij = r_ij pi_j for i != j,
/// diagonal fixed by zero row sums, scaled so the expected rate
/// -sum_i pi_i Q_ii equals 1.
#[derive(Debug, Clone)]
pub struct GTRModel {
    pub pi: [f64; 4],
    /// Upper-triangle exchangeabilities (AC, AG, AT, CG, CT, GT).
    pub rates: [f64; 6],
    pub q: Matrix4<f64>,
}

fn rate_at(rates: &[f64; 6], i: usize, j: usize) -> f64 {
    debug_assert!(i != j);
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 1) => rates[0],
        (0, 2) => rates[1],
        (0, 3) => rates[2],
        (1, 2) => rates[3],
        (1, 3) => rates[4],
        _ => rates[5],
    }
}

pub fn gtr_rate_matrix(pi: [f64; 4], rates: [f64; 6]) -> Result<GTRModel> {
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 || pi.iter().any(|&p| p <= 0.0) {
        return Err(PhyloError::OffSimplex(total));
    }
    if rates.iter().any(|&r| r <= 0.0) {
        return Err(PhyloError::NonPositiveRate);
    }
    let mut q = Matrix4::zeros();
    for i in 0..4 {
        let mut row_sum = 0.0;
        for j in 0..4 {
            if i != j {
                let v = rate_at(&rates, i, j) * pi[j];
                q[(i, j)] = v;
                row_sum += v;
            }
        }
        q[(i, i)] = -row_sum;
    }
    // unit expected substitution rate
    let mu: f64 = -(0..4).map(|i| pi[i] * q[(i, i)]).sum::<f64>();
    q /= mu;
    Ok(GTRModel { pi, rates, q })
}

impl Default for GTRModel {
    fn default() -> Self {
        gtr_rate_matrix([0.25; 4], [1.0; 6]).expect("default parameters are valid")
    }
}

impl GTRModel {
    /// P(t) = exp(Qt) via the symmetrized eigendecomposition
    /// S = D^{1/2} Q D^{-1/2} with D = diag(pi); S is symmetric by detailed
    /// balance. Returns the stochastic matrix and whether the
    /// scaling-and-squaring fallback had to be used.
    pub fn transition_matrix(&self, t: f64) -> Result<(Matrix4<f64>, bool)> {
        if t < 0.0 {
            return Err(PhyloError::NegativeBranch(t));
        }
        if t == 0.0 {
            return Ok((Matrix4::identity(), false));
        }
        let d_half = Matrix4::from_diagonal(&self.pi.map(f64::sqrt).into());
        let d_half_inv = Matrix4::from_diagonal(&self.pi.map(|p| p.sqrt().recip()).into());
        let s = d_half * self.q * d_half_inv;
        let s = (s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let mut p = if eig.eigenvalues.iter().all(|v| v.is_finite()) {
            let exp_l = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| (l * t).exp()));
            let m = d_half_inv * eig.eigenvectors * exp_l * eig.eigenvectors.transpose() * d_half;
            (m, false)
        } else {
            (expm_scaling_squaring(self.q * t), true)
        };
        // clean up rounding: clamp into [0,1] and renormalize rows
        for i in 0..4 {
            let mut row_sum = 0.0;
            for j in 0..4 {
                p.0[(i, j)] = p.0[(i, j)].clamp(0.0, 1.0);
                row_sum += p.0[(i, j)];
            }
            for j in 0..4 {
                p.0[(i, j)] /= row_sum;
            }
        }
        Ok(p)
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
fn expm_scaling_squaring(a: Matrix4<f64>) -> Matrix4<f64> {
    let norm = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let s = norm.log2().ceil().max(0.0) as u32 + 4;
    let b = a / 2f64.powi(s as i32);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..20 {
        term = term * b / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}
