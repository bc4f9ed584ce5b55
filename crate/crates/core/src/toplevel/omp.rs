//! Orthogonal matching pursuit over a dense Gaussian matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::sparse::SparseVector;

/// `m x n` matrix with i.i.d. `N(0, 1/m)` entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    let scale = 1.0 / (m.max(1) as f64).sqrt();
    DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

/// Least-squares coefficients of `y` on the columns `support` of `phi`,
/// least-norm when the submatrix is rank deficient.
fn refit(phi: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    let sub = phi.select_columns(support);
    sub.svd(true, true).solve(y, 1e-12).map_err(|e| Error::Numerical(e.to_string()))
}

/// `2k` rounds of greedy column selection with a least-squares refit after
/// each; stops early once the residual vanishes.
pub fn omp_baseline(phi: &DMatrix<f64>, y: &[f64], k: usize) -> Result<SparseVector> {
    let (m, n) = phi.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if m > n {
        return Err(invalid(format!("need m <= N, got {m} x {n}")));
    }
    if phi.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix or measurements have non-finite entries".into()));
    }
    let norms: Vec<f64> = phi.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(invalid(format!("column {j} is zero")));
    }
    let y = DVector::from_column_slice(y);
    let stop = 1e-12 * y.norm();
    let mut support: Vec<usize> = Vec::new();
    let mut coef = DVector::zeros(0);
    let mut residual = y.clone();
    for _ in 0..2 * k {
        if residual.norm() <= stop {
            break;
        }
        let corr = phi.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if support.contains(&j) {
                continue;
            }
            let score = corr[j].abs() / norms[j];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        coef = refit(phi, &y, &support)?;
        residual = &y - phi.select_columns(&support) * &coef;
    }
    Ok(SparseVector::from_pairs(support.iter().zip(coef.iter()).map(|(&j, &c)| (j as u64, c))))
}
