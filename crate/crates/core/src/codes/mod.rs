//! List-recoverable codes: split, Loomis-Whitney and Reed-Solomon.
//!
//! Every code can be applied "in layers": a message of `t` layers (each one a
//! message of the base code) is encoded layer by layer and the `t` symbols of
//! each coordinate are packed into one symbol, low layer first. With one layer
//! this is the plain code.
//!
//! Conventions, per layer:
//! * split over `[s^2]`: `x = x1 * s + x2`, codeword `(x1, x2)`.
//! * LW(d) over `[s^d]`: `x = sum_j x_j s^(d-1-j)` (first coordinate most
//!   significant); coordinate `i` carries `x` with digit `i` deleted, packed
//!   the same way.
//! * RS over `F_q`: `x = sum_s u_s q^s`, coordinate `j` is
//!   `sum_s u_s beta_j^s`.

pub mod lw;
pub mod rs;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::FieldSpec;

pub use lw::{join_bound, lw_join, lw_join_tolerant, tolerant_bound, Tuple};
pub use rs::{agreement_threshold, rs_list_recover};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CodeKind {
    Split,
    LoomisWhitney { d: usize },
    ReedSolomon { field: FieldSpec, b: usize, points: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDescriptor {
    pub kind: CodeKind,
    /// Digit base of one layer: `s` for split and LW, `q` for RS.
    pub base: u64,
    pub layers: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListRecoveryInstance {
    pub sets: Vec<Vec<u64>>,
    pub rho: f64,
    pub ell: usize,
}

impl ListRecoveryInstance {
    pub fn new(sets: Vec<Vec<u64>>, rho: f64, ell: usize) -> Result<Self> {
        for (i, s) in sets.iter().enumerate() {
            let n = s.iter().collect::<BTreeSet<_>>().len();
            if n > ell {
                return Err(invalid(format!("set {i} has {n} symbols, more than l = {ell}")));
            }
        }
        Ok(ListRecoveryInstance { sets, rho, ell })
    }
}

fn exact_root(n: u64, d: u32) -> Option<u64> {
    let guess = (n as f64).powf(1.0 / d as f64).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|&s| s.checked_pow(d) == Some(n))
}

impl CodeDescriptor {
    pub fn split(n: u64) -> Result<Self> {
        let s = exact_root(n, 2).filter(|&s| s >= 1).ok_or_else(|| invalid(format!("split needs a perfect square, got {n}")))?;
        Ok(CodeDescriptor { kind: CodeKind::Split, base: s, layers: 1 })
    }

    pub fn loomis_whitney(d: usize, n: u64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("LW(d) needs d >= 2"));
        }
        let s = exact_root(n, d as u32).ok_or_else(|| invalid(format!("LW({d}) needs N = s^{d}, got {n}")))?;
        Ok(CodeDescriptor { kind: CodeKind::LoomisWhitney { d }, base: s, layers: 1 })
    }

    /// LW code whose per-layer digit alphabet is `[s]`.
    pub fn loomis_whitney_base(d: usize, s: u64) -> Result<Self> {
        let n = s.checked_pow(d as u32).ok_or_else(|| invalid("LW message space overflows"))?;
        Self::loomis_whitney(d, n)
    }

    /// RS code with evaluation points `0, 1, ..., r-1`.
    pub fn reed_solomon(field: FieldSpec, b: usize, r: usize) -> Result<Self> {
        if r as u64 > field.q {
            return Err(invalid(format!("block length {r} exceeds field size {}", field.q)));
        }
        Self::reed_solomon_with_points(field, b, (0..r as u64).collect())
    }

    pub fn reed_solomon_with_points(field: FieldSpec, b: usize, points: Vec<u64>) -> Result<Self> {
        if b == 0 {
            return Err(invalid("RS needs b >= 1"));
        }
        if points.is_empty() || points.len() as u64 > field.q {
            return Err(invalid("RS needs 1 <= r <= q evaluation points"));
        }
        let distinct: BTreeSet<u64> = points.iter().copied().collect();
        if distinct.len() != points.len() {
            return Err(invalid("RS evaluation points must be distinct"));
        }
        for &p in &points {
            field.check(p)?;
        }
        field.q.checked_pow(b as u32).ok_or_else(|| invalid("RS message space overflows"))?;
        Ok(CodeDescriptor { kind: CodeKind::ReedSolomon { field, b, points }, base: field.q, layers: 1 })
    }

    pub fn with_layers(mut self, layers: u32) -> Result<Self> {
        if layers == 0 {
            return Err(invalid("need at least one layer"));
        }
        self.layers = layers;
        self.layer_messages()
            .checked_pow(layers)
            .ok_or_else(|| invalid(format!("{layers} layers overflow the 64-bit message space")))?;
        Ok(self)
    }

    /// Block length `r`.
    pub fn block_length(&self) -> usize {
        match &self.kind {
            CodeKind::Split => 2,
            CodeKind::LoomisWhitney { d } => *d,
            CodeKind::ReedSolomon { points, .. } => points.len(),
        }
    }

    /// Message-space size of one layer.
    pub fn layer_messages(&self) -> u64 {
        match &self.kind {
            CodeKind::Split => self.base * self.base,
            CodeKind::LoomisWhitney { d } => self.base.pow(*d as u32),
            CodeKind::ReedSolomon { b, .. } => self.base.pow(*b as u32),
        }
    }

    /// Alphabet size of one layer.
    pub fn layer_alphabet(&self) -> u64 {
        match &self.kind {
            CodeKind::Split | CodeKind::ReedSolomon { .. } => self.base,
            CodeKind::LoomisWhitney { d } => self.base.pow(*d as u32 - 1),
        }
    }

    /// Message-space size `N`.
    pub fn messages(&self) -> u64 {
        self.layer_messages().pow(self.layers)
    }

    /// Alphabet size `q`.
    pub fn alphabet(&self) -> u64 {
        self.layer_alphabet().pow(self.layers)
    }

    /// Compression exponent `b` with `q = N^(1/b)`.
    pub fn compression(&self) -> f64 {
        match &self.kind {
            CodeKind::Split => 2.0,
            CodeKind::LoomisWhitney { d } => *d as f64 / (*d as f64 - 1.0),
            CodeKind::ReedSolomon { b, .. } => *b as f64,
        }
    }

    pub fn encode(&self, x: u64) -> Result<Vec<u64>> {
        let n = self.messages();
        if x >= n {
            return Err(Error::OutOfDomain { index: x, size: n });
        }
        Ok(self.encode_unchecked(x))
    }

    pub fn encode_unchecked(&self, x: u64) -> Vec<u64> {
        let r = self.block_length();
        let mut out = vec![0u64; r];
        self.encode_into(x, &mut out);
        out
    }

    /// Writes the codeword of `x` into `out` (length `r`).
    pub fn encode_into(&self, x: u64, out: &mut [u64]) {
        out.iter_mut().for_each(|o| *o = 0);
        let ln = self.layer_messages();
        let lq = self.layer_alphabet();
        let mut rest = x;
        let mut scale = 1u64;
        for _ in 0..self.layers {
            let layer = rest % ln;
            rest /= ln;
            self.encode_layer(layer, scale, out);
            scale = scale.wrapping_mul(lq);
        }
    }

    fn encode_layer(&self, x: u64, scale: u64, out: &mut [u64]) {
        let s = self.base;
        match &self.kind {
            CodeKind::Split => {
                out[0] += (x / s) * scale;
                out[1] += (x % s) * scale;
            }
            CodeKind::LoomisWhitney { d } => {
                let d = *d;
                let mut digits = [0u64; 64];
                let mut c = x;
                for j in (0..d).rev() {
                    digits[j] = c % s;
                    c /= s;
                }
                for (i, o) in out.iter_mut().enumerate().take(d) {
                    let mut sym = 0u64;
                    for (j, &dg) in digits.iter().enumerate().take(d) {
                        if j != i {
                            sym = sym * s + dg;
                        }
                    }
                    *o += sym * scale;
                }
            }
            CodeKind::ReedSolomon { field, b, points } => {
                let mut coeffs = [0u64; 64];
                let mut c = x;
                for slot in coeffs.iter_mut().take(*b) {
                    *slot = c % s;
                    c /= s;
                }
                for (o, &beta) in out.iter_mut().zip(points) {
                    let v = coeffs[..*b].iter().rev().fold(0, |acc, &u| field.add(field.mul(acc, beta), u));
                    *o += v * scale;
                }
            }
        }
    }

    /// Number of coordinates whose symbol lies in the matching set.
    pub fn agreement(&self, x: u64, sets: &[Vec<u64>]) -> usize {
        self.encode_unchecked(x).iter().zip(sets).filter(|(c, s)| s.contains(c)).count()
    }

    /// All messages agreeing with `sets` on at least `ceil((1 - rho) r)`
    /// coordinates, sorted. LW codes tolerate `floor(rho d)` missing
    /// projections (at most `d - 2`); split tolerates none.
    pub fn list_recover(&self, sets: &[Vec<u64>], rho: f64) -> Result<Vec<u64>> {
        let r = self.block_length();
        if sets.len() != r {
            return Err(Error::DimensionMismatch { expected: r, got: sets.len() });
        }
        let out = match &self.kind {
            CodeKind::ReedSolomon { .. } => {
                let ell = sets.iter().map(|s| s.len()).max().unwrap_or(0);
                rs_list_recover(self, &ListRecoveryInstance { sets: sets.to_vec(), rho, ell })?
            }
            CodeKind::Split => {
                if rho * 2.0 >= 1.0 - 1e-12 {
                    return Err(invalid("split code tolerates no erased coordinate"));
                }
                self.lw_recover(sets, 0)?
            }
            CodeKind::LoomisWhitney { d } => {
                let e = (rho * *d as f64 + 1e-9).floor() as usize;
                if e + 2 > *d {
                    return Err(invalid(format!("rho = {rho} allows {e} errors, LW({d}) tolerates at most {}", d - 2)));
                }
                self.lw_recover(sets, e)?
            }
        };
        let need = agreement_threshold(rho, r);
        debug_assert!(out.iter().all(|&x| self.agreement(x, sets) >= need));
        Ok(out)
    }

    /// Digits of one coordinate's symbol, with layers interleaved into a
    /// single digit of base `s^layers`.
    fn symbol_digits(&self, sym: u64, width: usize) -> Tuple {
        let s = self.base;
        let lq = self.layer_alphabet();
        let mut out = vec![0u64; width];
        let mut rest = sym;
        let mut weight = 1u64;
        for _ in 0..self.layers {
            let mut layer = rest % lq;
            rest /= lq;
            for j in (0..width).rev() {
                out[j] += (layer % s) * weight;
                layer /= s;
            }
            weight *= s;
        }
        out
    }

    fn message_from_digits(&self, digits: &[u64]) -> u64 {
        let s = self.base;
        let ln = self.layer_messages();
        let mut msg = 0u64;
        let mut scale = 1u64;
        let mut weight = 1u64;
        for _ in 0..self.layers {
            let layer = digits.iter().fold(0u64, |acc, &c| acc * s + (c / weight) % s);
            msg += layer * scale;
            scale = scale.wrapping_mul(ln);
            weight = weight.wrapping_mul(s);
        }
        msg
    }

    fn lw_recover(&self, sets: &[Vec<u64>], e: usize) -> Result<Vec<u64>> {
        let q = self.alphabet();
        let mut out: Vec<u64> = match &self.kind {
            CodeKind::Split => {
                let a: Vec<u64> = sets[0].iter().copied().filter(|&v| v < q).collect::<BTreeSet<_>>().into_iter().collect();
                let b: Vec<u64> = sets[1].iter().copied().filter(|&v| v < q).collect::<BTreeSet<_>>().into_iter().collect();
                let mut out = Vec::with_capacity(a.len() * b.len());
                for &x1 in &a {
                    for &x2 in &b {
                        let d1 = self.symbol_digits(x1, 1)[0];
                        let d2 = self.symbol_digits(x2, 1)[0];
                        out.push(self.message_from_digits(&[d1, d2]));
                    }
                }
                out
            }
            CodeKind::LoomisWhitney { d } => {
                let projections: Vec<Vec<Tuple>> = sets
                    .iter()
                    .map(|s| s.iter().filter(|&&v| v < q).map(|&v| self.symbol_digits(v, d - 1)).collect())
                    .collect();
                let full = if e == 0 { lw_join(&projections)? } else { lw_join_tolerant(&projections, e)? };
                full.iter().map(|v| self.message_from_digits(v)).collect()
            }
            CodeKind::ReedSolomon { .. } => unreachable!(),
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}
