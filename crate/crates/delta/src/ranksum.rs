use crate::error::{DeltaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    TwoSided,
    /// First sample tends to be less than the second.
    Less,
    /// First sample tends to be greater than the second.
    Greater,
}

#[derive(Debug, Clone)]
pub struct RankSumResult {
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sample Mann-Whitney U (Wilcoxon rank-sum) test with tie correction and
/// normal approximation.
pub fn rank_sum_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<RankSumResult> {
    if a.is_empty() || b.is_empty() {
        return Err(DeltaError::EmptySample);
    }
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let n = n1 + n2;

    let mut combined: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    combined.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite samples"));

    // midranks with tie correction term
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < combined.len() {
        let mut j = i;
        while j + 1 < combined.len() && combined[j + 1].0 == combined[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for item in &combined[i..=j] {
            if item.1 {
                rank_sum_a += midrank;
            }
        }
        tie_term += t * t * t - t;
        i = j + 1;
    }

    let u1 = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let mean_u = n1 * n2 / 2.0;
    let var_u = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var_u <= 0.0 {
        // all observations identical
        return Ok(RankSumResult {
            u: u1,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let sd = var_u.sqrt();
    // continuity correction toward the mean
    let cc = |x: f64| {
        if x > mean_u {
            x - 0.5
        } else if x < mean_u {
            x + 0.5
        } else {
            x
        }
    };
    let z = (cc(u1) - mean_u) / sd;
    let p = match alternative {
        Alternative::TwoSided => 2.0 * normal_sf(z.abs()),
        // small U1 means a-values rank low
        Alternative::Less => normal_cdf(z),
        Alternative::Greater => normal_sf(z),
    };
    Ok(RankSumResult {
        u: u1,
        z,
        p_value: p.min(1.0),
    })
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Complementary error function, rational Chebyshev approximation
/// (fractional error below 1.2e-7 everywhere).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
