//! Polynomial hash families and the ±1 sign family used by signed sketches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{bits_for, FieldSpec, MAX_BINARY_WIDTH};
use crate::seed::SeedTree;

/// A polynomial over a finite field evaluated on `[0, domain_size)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyHash {
    pub field: FieldSpec,
    /// Coefficients, constant term first.
    pub coefficients: Vec<u64>,
    pub domain_size: u64,
}

impl PolyHash {
    pub fn new(field: FieldSpec, coefficients: Vec<u64>, domain_size: u64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(invalid("polynomial needs at least one coefficient"));
        }
        if domain_size > field.q {
            return Err(invalid(format!("domain {domain_size} exceeds field size {}", field.q)));
        }
        for &c in &coefficients {
            field.check(c)?;
        }
        Ok(PolyHash { field, coefficients, domain_size })
    }

    /// Uniformly random polynomial of the given degree.
    pub fn random<R: Rng + ?Sized>(field: FieldSpec, degree: usize, domain_size: u64, rng: &mut R) -> Result<Self> {
        let coefficients = (0..=degree).map(|_| rng.random_range(0..field.q)).collect();
        PolyHash::new(field, coefficients, domain_size)
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, i: u64) -> Result<u64> {
        if i >= self.domain_size {
            return Err(Error::OutOfDomain { index: i, size: self.domain_size });
        }
        Ok(self.eval_unchecked(i))
    }

    #[inline]
    pub fn eval_unchecked(&self, i: u64) -> u64 {
        let f = &self.field;
        self.coefficients.iter().rev().fold(0, |acc, &c| f.add(f.mul(acc, i), c))
    }
}

/// `±1` values on pairs `(i, j)` with `i < left`, `j < right`.
///
/// The pair is packed as `i * right + j` and fed to a random polynomial of
/// degree `independence - 1` over the smallest binary field that holds the
/// packed domain; the sign is the low bit of the value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignFamily {
    pub seed: u64,
    pub independence: usize,
    pub left: u64,
    pub right: u64,
    hash: PolyHash,
}

impl SignFamily {
    pub fn new(seed: u64, independence: usize, left: u64, right: u64) -> Result<Self> {
        if independence == 0 {
            return Err(invalid("independence degree must be at least 1"));
        }
        let size = left
            .checked_mul(right)
            .filter(|&s| bits_for(s) <= MAX_BINARY_WIDTH)
            .ok_or_else(|| invalid(format!("sign domain {left}x{right} too large")))?;
        let field = FieldSpec::binary(bits_for(size).max(1))?;
        let mut rng = SeedTree::new(seed).rng();
        let hash = PolyHash::random(field, independence - 1, size, &mut rng)?;
        Ok(SignFamily { seed, independence, left, right, hash })
    }

    #[inline]
    pub fn sign(&self, i: u64, j: u64) -> f64 {
        debug_assert!(i < self.left && j < self.right);
        if self.hash.eval_unchecked(i * self.right + j) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn sign_checked(&self, i: u64, j: u64) -> Result<f64> {
        if i >= self.left {
            return Err(Error::OutOfDomain { index: i, size: self.left });
        }
        if j >= self.right {
            return Err(Error::OutOfDomain { index: j, size: self.right });
        }
        Ok(self.sign(i, j))
    }
}
