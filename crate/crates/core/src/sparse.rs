use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Sparse real vector with entries sorted by index and no explicit zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u64, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary `(index, value)` pairs; repeated indices are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut m: BTreeMap<u64, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *m.entry(i).or_insert(0.0) += v;
        }
        SparseVector { entries: m.into_iter().filter(|&(_, v)| v != 0.0).collect() }
    }

    pub fn from_dense(x: &[f64]) -> Self {
        SparseVector {
            entries: x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i as u64, v)).collect(),
        }
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn get(&self, i: u64) -> f64 {
        match self.entries.binary_search_by_key(&i, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => 0.0,
        }
    }

    pub fn add(&self, other: &SparseVector) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().chain(other.entries.iter()).copied())
    }

    pub fn scale(&self, a: f64) -> SparseVector {
        SparseVector::from_pairs(self.entries.iter().map(|&(i, v)| (i, a * v)))
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for &(i, v) in &self.entries {
            x[i as usize] = v;
        }
        x
    }

    pub fn norm2(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }
}

/// Lower median (order statistic `ceil(n/2)`); 0 for an empty slice.
pub fn lower_median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *m
}

/// Indices of the `count` largest `|value|`, ties broken by smaller index.
/// Result is sorted by index.
pub fn top_by_magnitude(mut items: Vec<(u64, f64)>, count: usize) -> Vec<(u64, f64)> {
    items.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    items.truncate(count);
    items.sort_by_key(|e| e.0);
    items
}

/// Indices of the `k` largest-magnitude entries of a dense vector.
pub fn head_indices(x: &[f64], k: usize) -> Vec<u64> {
    let items = x.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect();
    top_by_magnitude(items, k).into_iter().map(|e| e.0).collect()
}

/// `||x - x_k||_2` where `x_k` keeps the `k` largest-magnitude entries.
pub fn tail_norm(x: &[f64], k: usize) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[k.min(mags.len())..].iter().map(|v| v * v).sum::<f64>().sqrt()
}
