//! Prime fields and binary extension fields GF(2^w), elements stored as `u64`.
//!
//! GF(2^w) uses the numerically smallest irreducible polynomial of degree `w`
//! with nonzero constant term (`x^4+x+1` for w = 4, `x^8+x^4+x^3+x+1` for w = 8).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Prime,
    BinaryExtension,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldOp {
    Add,
    Mul,
    Inv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    /// Field size.
    pub q: u64,
    /// Extension degree for binary fields, 0 for prime fields.
    pub width: u32,
    /// Full reduction polynomial (including the `x^w` term) for binary fields.
    pub poly: u64,
}

pub const MAX_BINARY_WIDTH: u32 = 63;

impl FieldSpec {
    pub fn prime(q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(invalid(format!("{q} is not prime")));
        }
        Ok(FieldSpec { kind: FieldKind::Prime, q, width: 0, poly: 0 })
    }

    pub fn binary(w: u32) -> Result<Self> {
        if w == 0 || w > MAX_BINARY_WIDTH {
            return Err(invalid(format!("binary field width {w} outside 1..={MAX_BINARY_WIDTH}")));
        }
        Ok(FieldSpec {
            kind: FieldKind::BinaryExtension,
            q: 1u64 << w,
            width: w,
            poly: default_poly(w),
        })
    }

    pub fn binary_with_poly(w: u32, poly: u64) -> Result<Self> {
        if w == 0 || w > MAX_BINARY_WIDTH || poly >> w != 1 {
            return Err(invalid(format!("polynomial {poly:#x} does not have degree {w}")));
        }
        if !is_irreducible(poly, w) {
            return Err(invalid(format!("polynomial {poly:#x} is reducible")));
        }
        Ok(FieldSpec { kind: FieldKind::BinaryExtension, q: 1u64 << w, width: w, poly })
    }

    /// Smallest binary field with at least `n` elements.
    pub fn binary_at_least(n: u64) -> Result<Self> {
        let w = bits_for(n).max(1);
        FieldSpec::binary(w)
    }

    pub fn contains(&self, a: u64) -> bool {
        a < self.q
    }

    pub fn check(&self, a: u64) -> Result<u64> {
        if a < self.q {
            Ok(a)
        } else {
            Err(Error::OutOfDomain { index: a, size: self.q })
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        match self.kind {
            FieldKind::BinaryExtension => a ^ b,
            FieldKind::Prime => {
                let s = a as u128 + b as u128;
                (s % self.q as u128) as u64
            }
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        match self.kind {
            FieldKind::BinaryExtension => a,
            FieldKind::Prime => {
                if a == 0 {
                    0
                } else {
                    self.q - a
                }
            }
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        match self.kind {
            FieldKind::Prime => ((a as u128 * b as u128) % self.q as u128) as u64,
            FieldKind::BinaryExtension => reduce(clmul(a, b), self.poly, self.width),
        }
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a;
        let mut acc = 1 % self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        // a^(q-2) = a^(-1) for both kinds of field.
        Ok(self.pow(a, self.q - 2))
    }

    pub fn div(&self, a: u64, b: u64) -> Result<u64> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Checked arithmetic entry point; `b` is ignored for `Inv`.
    pub fn arith(&self, a: u64, b: u64, op: FieldOp) -> Result<u64> {
        self.check(a)?;
        match op {
            FieldOp::Add => Ok(self.add(a, self.check(b)?)),
            FieldOp::Mul => Ok(self.mul(a, self.check(b)?)),
            FieldOp::Inv => self.inv(a),
        }
    }
}

/// Number of bits needed to write values in `[0, n)`.
pub fn bits_for(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Carry-less product of two 64-bit polynomials, four bits at a time.
#[inline]
pub(crate) fn clmul(a: u64, b: u64) -> u128 {
    let mut table = [0u128; 16];
    let a = a as u128;
    table[1] = a;
    for n in 2..16 {
        table[n] = if n % 2 == 0 { table[n / 2] << 1 } else { table[n - 1] ^ a };
    }
    let mut acc = 0u128;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        acc ^= table[(b & 15) as usize] << shift;
        b >>= 4;
        shift += 4;
    }
    acc
}

#[inline]
fn reduce(mut p: u128, poly: u64, w: u32) -> u64 {
    let low = poly ^ (1u64 << w);
    let mask = (1u128 << w) - 1;
    while p >> w != 0 {
        let hi = (p >> w) as u64;
        p = (p & mask) ^ clmul(hi, low);
    }
    p as u64
}

fn poly_deg(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        // a mod b over GF(2)
        let db = poly_deg(b);
        while a != 0 && poly_deg(a) >= db {
            a ^= b << (poly_deg(a) - db);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

/// Rabin's irreducibility test for a degree-`w` polynomial over GF(2).
pub fn is_irreducible(poly: u64, w: u32) -> bool {
    if w == 0 || poly >> w != 1 {
        return false;
    }
    if w == 1 {
        return true;
    }
    let mulmod = |a: u64, b: u64| reduce(clmul(a, b), poly, w);
    // x^(2^j) mod poly
    let frob = |j: u32| {
        let mut t = 2u64;
        for _ in 0..j {
            t = mulmod(t, t);
        }
        t
    };
    if frob(w) != 2 {
        return false;
    }
    let mut n = w;
    let mut p = 2;
    let mut primes = Vec::new();
    while p * p <= n {
        if n.is_multiple_of(p) {
            primes.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        primes.push(n);
    }
    primes.into_iter().all(|p| poly_gcd(poly, frob(w / p) ^ 2) == 1)
}

fn default_poly(w: u32) -> u64 {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=MAX_BINARY_WIDTH)
            .map(|w| {
                if w == 0 {
                    return 0;
                }
                let mut c = (1u64 << w) | 1;
                while !is_irreducible(c, w) {
                    c += 2;
                }
                c
            })
            .collect()
    });
    table[w as usize]
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulm = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powm = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulm(r, b);
            }
            b = mulm(b, b);
            e >>= 1;
        }
        r
    };
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powm(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulm(x, x);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}
