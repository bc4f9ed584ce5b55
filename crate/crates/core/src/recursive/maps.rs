//! Root-domain maps: how an index `i < N` enters the recursion tree.
//!
//! Root elements are laid out as `layers` chunks of `log2 N` bits each. The
//! identity map uses one layer. Scheme 2 stores `i` in the low chunk and a
//! polynomial hash `g(i)` in the others, so inversion is a projection plus a
//! consistency check. Scheme 1 draws a fully random injection candidate into
//! `[N^2]` and inverts it through a sorted table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::FieldSpec;
use crate::hash::PolyHash;
use crate::seed::SeedTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum RootScheme {
    Identity,
    Scheme1,
    /// `alpha` sets the layer count `ceil(1/alpha)`; `degree` is the degree of `g`.
    Scheme2 { alpha: f64, degree: usize },
}

impl Default for RootScheme {
    fn default() -> Self {
        RootScheme::Scheme2 { alpha: 0.5, degree: 16 }
    }
}

#[derive(Clone, Debug)]
pub struct Scheme2Map {
    pub log_n: u32,
    pub layers: u32,
    pub g: PolyHash,
}

impl Scheme2Map {
    pub fn new(log_n: u32, alpha: f64, degree: usize, seeds: &SeedTree) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let layers = (1.0 / alpha - 1e-9).ceil().max(1.0) as u32;
        if layers < 2 {
            return Err(invalid("scheme 2 needs at least two layers (alpha < 1)"));
        }
        if log_n == 0 || log_n * layers > 62 {
            return Err(invalid(format!("root domain of {layers} x {log_n} bits does not fit in 62 bits")));
        }
        let field = FieldSpec::binary((layers - 1) * log_n)?;
        let g = PolyHash::random(field, degree, 1u64 << log_n, &mut seeds.rng())?;
        Ok(Scheme2Map { log_n, layers, g })
    }

    pub fn forward(&self, i: u64) -> u64 {
        i | (self.g.eval_unchecked(i) << self.log_n)
    }

    /// Projection onto the low chunk, rejected if the hash part disagrees.
    pub fn inverse(&self, e: u64) -> Option<u64> {
        let i = e & ((1u64 << self.log_n) - 1);
        (self.forward(i) == e).then_some(i)
    }
}

#[derive(Clone, Debug)]
pub struct Scheme1Table {
    pub log_n: u32,
    images: Vec<u64>,
    /// `(f(i), i)` sorted by image.
    table: Vec<(u64, u64)>,
    /// Number of indices whose image is shared with another index.
    pub collisions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lookup {
    Found(u64),
    Collision,
    Missing,
}

impl Scheme1Table {
    pub fn new(log_n: u32, seeds: &SeedTree) -> Result<Self> {
        if log_n == 0 || log_n > 31 {
            return Err(invalid(format!("scheme 1 supports 1 <= log2 N <= 31, got {log_n}")));
        }
        let n = 1u64 << log_n;
        let mut rng = seeds.rng();
        let images: Vec<u64> = (0..n).map(|_| rng.random_range(0..n * n)).collect();
        let mut table: Vec<(u64, u64)> = images.iter().enumerate().map(|(i, &f)| (f, i as u64)).collect();
        table.sort_unstable();
        let collisions = (0..table.len())
            .filter(|&p| {
                (p > 0 && table[p - 1].0 == table[p].0) || (p + 1 < table.len() && table[p + 1].0 == table[p].0)
            })
            .count();
        Ok(Scheme1Table { log_n, images, table, collisions })
    }

    pub fn forward(&self, i: u64) -> u64 {
        self.images[i as usize]
    }

    pub fn lookup(&self, e: u64) -> Lookup {
        let lo = self.table.partition_point(|p| p.0 < e);
        match self.table.get(lo) {
            Some(&(f, i)) if f == e => {
                if self.table.get(lo + 1).is_some_and(|p| p.0 == e) {
                    Lookup::Collision
                } else {
                    Lookup::Found(i)
                }
            }
            _ => Lookup::Missing,
        }
    }
}

#[derive(Clone, Debug)]
pub enum RootMap {
    Identity { log_n: u32 },
    Scheme1(Scheme1Table),
    Scheme2(Scheme2Map),
}

impl RootMap {
    pub fn new(scheme: RootScheme, log_n: u32, seeds: &SeedTree) -> Result<Self> {
        Ok(match scheme {
            RootScheme::Identity => RootMap::Identity { log_n },
            RootScheme::Scheme1 => RootMap::Scheme1(Scheme1Table::new(log_n, seeds)?),
            RootScheme::Scheme2 { alpha, degree } => RootMap::Scheme2(Scheme2Map::new(log_n, alpha, degree, seeds)?),
        })
    }

    /// Number of `log2 N`-bit chunks in a root element.
    pub fn layers(&self) -> u32 {
        match self {
            RootMap::Identity { .. } => 1,
            RootMap::Scheme1(_) => 2,
            RootMap::Scheme2(m) => m.layers,
        }
    }

    pub fn forward(&self, i: u64) -> u64 {
        match self {
            RootMap::Identity { .. } => i,
            RootMap::Scheme1(t) => t.forward(i),
            RootMap::Scheme2(m) => m.forward(i),
        }
    }

    pub fn inverse(&self, e: u64) -> Option<u64> {
        match self {
            RootMap::Identity { log_n } => (e >> log_n == 0).then_some(e),
            RootMap::Scheme1(t) => match t.lookup(e) {
                Lookup::Found(i) => Some(i),
                _ => None,
            },
            RootMap::Scheme2(m) => m.inverse(e),
        }
    }
}

/// Maps root-domain elements back to indices; returns the sorted indices and
/// the number of elements dropped (collisions or non-images).
pub fn invert_indices(mapped: &[u64], map: &RootMap) -> (Vec<u64>, usize) {
    let mut out = Vec::with_capacity(mapped.len());
    let mut dropped = 0;
    for &e in mapped {
        match map.inverse(e) {
            Some(i) => out.push(i),
            None => dropped += 1,
        }
    }
    out.sort_unstable();
    out.dedup();
    (out, dropped)
}
