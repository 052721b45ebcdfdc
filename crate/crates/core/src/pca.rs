//! Principal-component scores for 4-D metric vectors.
//!
//! Each dimension is standardized to zero mean and unit variance
//! (population convention, constant dimensions map to zero), the principal
//! eigenvector of the covariance matrix is found with cyclic Jacobi
//! rotations, its sign is fixed so the largest-magnitude loading is
//! positive, and every sample is projected onto it.

use thiserror::Error;

use crate::metrics::MetricVector;

pub const DIMENSIONS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 vectors, got {0}")]
    InsufficientData(usize),
}

/// Project every vector onto the principal component of the standardized
/// input. All-identical input has no direction to find and scores
/// collapse to zero rather than erroring.
pub fn pca_scores(vectors: &[MetricVector]) -> Result<Vec<f64>, PcaError> {
    let n = vectors.len();
    if n < 2 {
        return Err(PcaError::InsufficientData(n));
    }
    let data: Vec<[f64; DIMENSIONS]> = vectors.iter().map(|v| v.as_array()).collect();

    let mut means = [0.0f64; DIMENSIONS];
    for row in &data {
        for d in 0..DIMENSIONS {
            means[d] += row[d];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = [0.0f64; DIMENSIONS];
    for row in &data {
        for d in 0..DIMENSIONS {
            let c = row[d] - means[d];
            stds[d] += c * c;
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt();
    }

    let standardized: Vec<[f64; DIMENSIONS]> = data
        .iter()
        .map(|row| {
            let mut z = [0.0f64; DIMENSIONS];
            for d in 0..DIMENSIONS {
                z[d] = if stds[d] > 0.0 {
                    (row[d] - means[d]) / stds[d]
                } else {
                    0.0
                };
            }
            z
        })
        .collect();

    let mut covariance = [[0.0f64; DIMENSIONS]; DIMENSIONS];
    for z in &standardized {
        for i in 0..DIMENSIONS {
            for j in 0..DIMENSIONS {
                covariance[i][j] += z[i] * z[j];
            }
        }
    }
    for row in &mut covariance {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }

    let (eigenvalues, eigenvectors) = jacobi_eigen(covariance);
    let principal = orient(principal_column(&eigenvalues, &eigenvectors));

    Ok(standardized
        .iter()
        .map(|z| (0..DIMENSIONS).map(|d| z[d] * principal[d]).sum())
        .collect())
}

/// Column of the largest eigenvalue (first index wins ties).
fn principal_column(
    eigenvalues: &[f64; DIMENSIONS],
    eigenvectors: &[[f64; DIMENSIONS]; DIMENSIONS],
) -> [f64; DIMENSIONS] {
    let mut best = 0;
    for i in 1..DIMENSIONS {
        if eigenvalues[i] > eigenvalues[best] {
            best = i;
        }
    }
    let mut column = [0.0f64; DIMENSIONS];
    for d in 0..DIMENSIONS {
        column[d] = eigenvectors[d][best];
    }
    column
}

/// Fix the arbitrary eigenvector sign: the largest-magnitude loading
/// (lowest index on ties) must be positive.
pub fn orient(mut v: [f64; DIMENSIONS]) -> [f64; DIMENSIONS] {
    let mut pivot = 0;
    for d in 1..DIMENSIONS {
        if v[d].abs() > v[pivot].abs() {
            pivot = d;
        }
    }
    if v[pivot] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvector columns); vectors[i][j] is component
/// i of eigenvector j.
pub fn jacobi_eigen(
    mut a: [[f64; DIMENSIONS]; DIMENSIONS],
) -> ([f64; DIMENSIONS], [[f64; DIMENSIONS]; DIMENSIONS]) {
    let mut v = [[0.0f64; DIMENSIONS]; DIMENSIONS];
    for (d, row) in v.iter_mut().enumerate() {
        row[d] = 1.0;
    }
    let scale: f64 = (0..DIMENSIONS)
        .map(|i| a[i][i].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..DIMENSIONS {
            for q in (p + 1)..DIMENSIONS {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..DIMENSIONS {
            for q in (p + 1)..DIMENSIONS {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..DIMENSIONS {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..DIMENSIONS {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..DIMENSIONS {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut eigenvalues = [0.0f64; DIMENSIONS];
    for d in 0..DIMENSIONS {
        eigenvalues[d] = a[d][d];
    }
    (eigenvalues, v)
}
