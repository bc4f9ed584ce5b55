//! Geometry behind the measurement lower bound: the null-space projector of a
//! sketching matrix, its spike coordinate, and reflected signal pairs that no
//! decoder can tell apart.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{infeasible, invalid, Error, Result};
use crate::sparse::{tail_norm, SparseVector};

/// Largest `N` the dense verifier accepts.
pub const MAX_DENSE: usize = 2000;

#[derive(Clone, Debug)]
pub struct Orthoprojector {
    /// `N x N` projector onto the null space of `phi`.
    pub p: DMatrix<f64>,
    pub rank: usize,
}

/// `I - V V^T`, with `V` the right singular vectors of `phi` for nonzero
/// singular values. Rank-deficient inputs are reduced to their numerical rank.
pub fn null_projector(phi: &DMatrix<f64>) -> Result<Orthoprojector> {
    let (m, n) = phi.shape();
    if n == 0 || n > MAX_DENSE {
        return Err(invalid(format!("need 1 <= N <= {MAX_DENSE}, got {n}")));
    }
    if m > n {
        return Err(invalid(format!("need m <= N, got {m} x {n}")));
    }
    if m == 0 {
        return Ok(Orthoprojector { p: DMatrix::identity(n, n), rank: 0 });
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let svd = phi.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = smax * n as f64 * f64::EPSILON;
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
    if keep.len() < m {
        warn!("matrix has numerical rank {} < {m}; projecting onto the null space of its row space", keep.len());
    }
    let v = v_t.select_rows(&keep);
    let p = DMatrix::identity(n, n) - v.tr_mul(&v);
    Ok(Orthoprojector { p, rank: keep.len() })
}

/// Coordinate with the largest diagonal entry of `P` (smallest index on ties).
pub fn find_spike(proj: &Orthoprojector) -> (usize, f64) {
    let d = proj.p.diagonal();
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &v) in d.iter().enumerate() {
        if v > best.1 {
            best = (j, v);
        }
    }
    best
}

/// `1 - 2g - 2d - 2 sqrt(2 g d) > C / sqrt(1 + C^2)`.
pub fn gammadelta_check(gamma: f64, delta: f64, c: f64) -> bool {
    1.0 - 2.0 * gamma - 2.0 * delta - 2.0 * (2.0 * gamma * delta).sqrt() > c / (1.0 + c * c).sqrt()
}

/// Upper bound on `<v', e_j*>` implied by the construction.
pub fn reflected_spike_bound(gamma: f64, delta: f64) -> f64 {
    -1.0 + 2.0 * gamma + 2.0 * delta + 2.0 * (2.0 * gamma * delta).sqrt()
}

#[derive(Clone, Debug)]
pub struct AdversarialPair {
    pub spike: usize,
    pub spike_value: f64,
    pub v: DVector<f64>,
    pub v_reflected: DVector<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub c: f64,
}

/// `v` on the boundary of the `(1 - gamma)`-cap about the spike coordinate,
/// and its reflection `v' = (I - 2P) v` through the row space of `phi`.
pub fn adversarial_pair<R: Rng + ?Sized>(phi: &DMatrix<f64>, gamma: f64, c: f64, rng: &mut R) -> Result<AdversarialPair> {
    let (m, n) = phi.shape();
    let delta = m as f64 / n as f64;
    if !(gamma >= 0.0 && c >= 1.0) {
        return Err(invalid(format!("need gamma >= 0 and C >= 1, got gamma={gamma} C={c}")));
    }
    if !gammadelta_check(gamma, delta, c) {
        return Err(infeasible(format!(
            "1 - 2g - 2d - 2sqrt(2gd) = {:.6} does not exceed C/sqrt(1+C^2) = {:.6} (g={gamma}, d={delta}, C={c})",
            1.0 - 2.0 * gamma - 2.0 * delta - 2.0 * (2.0 * gamma * delta).sqrt(),
            c / (1.0 + c * c).sqrt()
        )));
    }
    if n < 2 {
        return Err(invalid("need N >= 2"));
    }
    let proj = null_projector(phi)?;
    let (spike, spike_value) = find_spike(&proj);
    let tau = (1.0 - (1.0 - gamma) * (1.0 - gamma)).max(0.0).sqrt();
    for _ in 0..64 {
        let mut w = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        w[spike] = 0.0;
        let norm = w.norm();
        if norm == 0.0 {
            continue;
        }
        w /= norm;
        let mut v = w * tau;
        v[spike] = 1.0 - gamma;
        let pv = &proj.p * &v;
        if pv.norm() < 1e-12 {
            continue;
        }
        let v_reflected = &v - pv * 2.0;
        return Ok(AdversarialPair { spike, spike_value, v, v_reflected, gamma, delta, c });
    }
    Err(Error::Numerical("cap sampler kept landing in the row space".into()))
}

/// Whether `w` passes `||w - x_hat||_2 <= C ||w - w_k||_2`.
pub fn meets_guarantee(w: &DVector<f64>, x_hat: &SparseVector, k: usize, c: f64) -> bool {
    let dense = x_hat.to_dense(w.len());
    let err = w.iter().zip(&dense).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    err <= c * tail_norm(w.as_slice(), k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dichotomy {
    pub v_ok: bool,
    pub v_reflected_ok: bool,
}

impl Dichotomy {
    pub fn both_ok(&self) -> bool {
        self.v_ok && self.v_reflected_ok
    }
}

/// Runs `decoder` on the sketches of both signals of the pair.
pub fn dichotomy<F>(phi: &DMatrix<f64>, pair: &AdversarialPair, k: usize, mut decoder: F) -> Result<Dichotomy>
where
    F: FnMut(&DMatrix<f64>, &[f64]) -> Result<SparseVector>,
{
    let y = phi * &pair.v;
    let y2 = phi * &pair.v_reflected;
    let a = decoder(phi, y.as_slice())?;
    let b = decoder(phi, y2.as_slice())?;
    Ok(Dichotomy {
        v_ok: meets_guarantee(&pair.v, &a, k, pair.c),
        v_reflected_ok: meets_guarantee(&pair.v_reflected, &b, k, pair.c),
    })
}

/// Smallest `n'` with `n'^2 >= s / b`.
pub fn submatrix_width(s: u64, b: u64) -> u64 {
    let mut n = ((s as f64 / b as f64).sqrt()).floor() as u64;
    while n * n * b < s {
        n += 1;
    }
    while n > 0 && (n - 1) * (n - 1) * b >= s {
        n -= 1;
    }
    n
}

/// A unit null vector of the first `n'` columns of `phi`, spiked at the
/// projector's best coordinate and zero-padded to length `N`.
pub fn bounded_adversary_signal(phi: &DMatrix<f64>, s: u64, b: u64) -> Result<DVector<f64>> {
    let (m, n) = phi.shape();
    if b == 0 {
        return Err(invalid("b must be positive"));
    }
    let width = submatrix_width(s, b) as usize;
    if width == 0 || width > n {
        return Err(infeasible(format!("sub-matrix width {width} outside 1..={n}")));
    }
    if width <= m && m > 0 {
        return Err(infeasible(format!("sub-matrix width {width} <= m = {m}: no spiked null vector")));
    }
    let sub = phi.columns(0, width).into_owned();
    let proj = null_projector(&sub)?;
    let (j, _) = find_spike(&proj);
    let col = proj.p.column(j);
    let norm = col.norm();
    if norm < 1e-12 {
        return Err(Error::Numerical("spike column of the projector vanished".into()));
    }
    let mut x = DVector::zeros(n);
    x.rows_mut(0, width).copy_from(&(col / norm));
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toplevel::gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_rows() {
        let mut phi = DMatrix::zeros(3, 8);
        for i in 0..3 {
            phi[(i, i)] = 1.0;
        }
        let p = null_projector(&phi).unwrap();
        for j in 0..8 {
            assert!((p.p[(j, j)] - if j < 3 { 0.0 } else { 1.0 }).abs() < 1e-12);
        }
        let (j, v) = find_spike(&p);
        assert!(j >= 3 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_square_gives_zero() {
        let phi = gaussian_matrix(6, 6, &mut ChaCha8Rng::seed_from_u64(4));
        let p = null_projector(&phi).unwrap();
        assert!(p.p.norm() < 1e-9);
        let p0 = null_projector(&DMatrix::zeros(0, 5)).unwrap();
        assert_eq!(find_spike(&p0), (0, 1.0));
    }

    #[test]
    fn trace_of_random_projector() {
        let phi = gaussian_matrix(10, 50, &mut ChaCha8Rng::seed_from_u64(8));
        let p = null_projector(&phi).unwrap();
        assert!((p.p.trace() - 40.0).abs() < 1e-6);
        assert!(find_spike(&p).1 >= 0.8 - 1e-9);
    }

    #[test]
    fn gammadelta_examples() {
        for c in [1.0, 2.0, 5.0, 30.0] {
            let g = 1.0 / (12.0 + 16.0 * c * c);
            assert!(gammadelta_check(g, g, c));
        }
        assert!(!gammadelta_check(0.5, 0.5, 1.0));
        assert!(gammadelta_check(0.0, 0.0, 1.0));
    }

    #[test]
    fn submatrix_widths() {
        assert_eq!(submatrix_width(3200, 8), 20);
        assert_eq!(submatrix_width(3201, 8), 21);
        assert_eq!(submatrix_width(1, 1), 1);
    }

    #[test]
    fn bounded_adversary_example() {
        let phi = gaussian_matrix(5, 200, &mut ChaCha8Rng::seed_from_u64(10));
        let x = bounded_adversary_signal(&phi, 3200, 8).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-9);
        assert!((&phi * &x).norm() < 1e-9);
        assert!(x.rows(20, 180).iter().all(|&v| v == 0.0));
        assert!(x.amax() >= 0.75);
        let e = bounded_adversary_signal(&DMatrix::zeros(0, 10), 4, 1).unwrap();
        assert_eq!(e[0], 1.0);
        assert!(bounded_adversary_signal(&phi, 16, 1).is_err());
    }
}
