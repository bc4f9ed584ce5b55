//! Weak identification and estimation from signed expander sketches.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::expander::{OperatorSpec, SignedSketchOperator};
use crate::seed::SeedTree;
use crate::sparse::{lower_median, top_by_magnitude, SparseVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakParams {
    pub k: usize,
    /// Tolerated fraction of lost heavy hitters.
    pub gamma: f64,
    pub eta: f64,
    /// Expansion slack the analysis asks for; informational, defaults to `gamma^3 eta / 2`.
    pub expander_eps: f64,
    /// Left degree `l`.
    pub degree: usize,
    /// Amplification copies `s`.
    pub copies: usize,
    /// Identification list length, `k + ceil(k/eta)` by default.
    pub identify_len: usize,
    /// Estimation support, `k + ceil(k/sqrt(eta))` by default.
    pub estimate_len: usize,
    /// Support cap of the weak-system output, `k + ceil(k/eta)` by default.
    pub support_cap: usize,
}

impl WeakParams {
    pub fn new(k: usize, gamma: f64, eta: f64, degree: usize, copies: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if !(gamma > 0.0 && gamma < 1.0 && eta > 0.0 && eta < 1.0) {
            return Err(invalid(format!("need 0 < gamma, eta < 1, got gamma={gamma} eta={eta}")));
        }
        if copies == 0 || degree == 0 {
            return Err(invalid("degree and copies must be positive"));
        }
        let identify_len = k + (k as f64 / eta).ceil() as usize;
        Ok(WeakParams {
            k,
            gamma,
            eta,
            expander_eps: gamma.powi(3) * eta / 2.0,
            degree,
            copies,
            identify_len,
            estimate_len: k + (k as f64 / eta.sqrt()).ceil() as usize,
            support_cap: identify_len,
        })
    }
}

/// Sizing rule for sketch operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SketchRecipe {
    /// `c` in `l = max(min_degree, ceil(c log2(domain / k)))`.
    pub degree_factor: f64,
    pub min_degree: usize,
    /// Buckets per heavy hitter per edge: `M = ceil(bucket_factor * k * l)`.
    pub bucket_factor: f64,
    /// Independence degree of the sign family.
    pub independence: usize,
}

impl Default for SketchRecipe {
    fn default() -> Self {
        SketchRecipe { degree_factor: 1.25, min_degree: 5, bucket_factor: 4.0, independence: 8 }
    }
}

impl SketchRecipe {
    pub fn degree(&self, domain: u64, k: usize) -> usize {
        let ratio = (domain as f64 / k.max(1) as f64).max(2.0);
        self.min_degree.max((self.degree_factor * ratio.log2()).ceil() as usize)
    }

    pub fn buckets(&self, k: usize, degree: usize) -> usize {
        degree.max((self.bucket_factor * k as f64 * degree as f64).ceil() as usize)
    }

    /// Operator over `[domain]` sized for `k` heavy hitters, seeded from `seeds`.
    pub fn operator(&self, domain: u64, k: usize, degree: Option<usize>, seeds: &SeedTree) -> OperatorSpec {
        let degree = degree.unwrap_or_else(|| self.degree(domain, k));
        OperatorSpec {
            left: domain,
            degree,
            buckets: self.buckets(k, degree),
            graph_seed: seeds.derive("graph"),
            sign_seed: seeds.derive("signs"),
            independence: self.independence,
        }
    }
}

/// Lower median of the `l` signed readings of `i`.
pub fn median_estimate(op: &SignedSketchOperator, u: &[f64], i: u64) -> f64 {
    let mut r = op.readings(u, i);
    lower_median(&mut r)
}

/// Median estimates for every index of `candidates`.
pub fn estimates(op: &SignedSketchOperator, u: &[f64], candidates: impl IntoIterator<Item = u64>) -> Vec<(u64, f64)> {
    let mut buf = Vec::with_capacity(op.degree());
    candidates
        .into_iter()
        .map(|i| {
            op.readings_into(u, i, &mut buf);
            (i, lower_median(&mut buf))
        })
        .collect()
}

/// The `identify_len` candidates with the largest `|estimate|` (nonzero
/// estimates only), sorted by index.
pub fn weak_identify(
    op: &SignedSketchOperator,
    u: &[f64],
    candidates: impl IntoIterator<Item = u64>,
    params: &WeakParams,
) -> Vec<u64> {
    select(estimates(op, u, candidates), params.identify_len).into_iter().map(|e| e.0).collect()
}

/// The `estimate_len` largest median estimates over `candidates`, as values.
pub fn weak_estimate(
    op: &SignedSketchOperator,
    u: &[f64],
    candidates: impl IntoIterator<Item = u64>,
    params: &WeakParams,
) -> SparseVector {
    SparseVector::from_pairs(select(estimates(op, u, candidates), params.estimate_len))
}

fn select(est: Vec<(u64, f64)>, count: usize) -> Vec<(u64, f64)> {
    top_by_magnitude(est.into_iter().filter(|e| e.1 != 0.0).collect(), count)
}

/// Items present in more than half of the lists, sorted.
pub fn majority_amplify(lists: &[Vec<u64>]) -> Vec<u64> {
    let s = lists.len();
    let mut all: Vec<u64> = lists
        .iter()
        .flat_map(|l| {
            let mut l = l.clone();
            l.sort_unstable();
            l.dedup();
            l
        })
        .collect();
    all.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j] == all[i] {
            j += 1;
        }
        if 2 * (j - i) > s {
            out.push(all[i]);
        }
        i = j;
    }
    out
}

/// A plain weak system over `[n]`: `s` identification operators scanned over
/// the whole domain, majority vote, then one estimation operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakSystem {
    pub n: u64,
    pub params: WeakParams,
    pub identify: Vec<OperatorSpec>,
    pub estimate: OperatorSpec,
}

#[derive(Clone, Debug)]
pub struct WeakOperators {
    pub identify: Vec<SignedSketchOperator>,
    pub estimate: SignedSketchOperator,
}

impl WeakSystem {
    pub fn new(n: u64, params: WeakParams, recipe: &SketchRecipe, seeds: &SeedTree) -> Self {
        let identify = (0..params.copies)
            .map(|c| recipe.operator(n, params.k, Some(params.degree), &seeds.child(&format!("identify/{c}"))))
            .collect();
        let estimate = recipe.operator(n, params.k, Some(params.degree), &seeds.child("estimate"));
        WeakSystem { n, params, identify, estimate }
    }

    pub fn operators(&self) -> Result<WeakOperators> {
        Ok(WeakOperators {
            identify: self.identify.iter().map(|s| s.build()).collect::<Result<_>>()?,
            estimate: self.estimate.build()?,
        })
    }

    pub fn measurements(&self) -> usize {
        self.identify.iter().map(|o| o.buckets).sum::<usize>() + self.estimate.buckets
    }
}

/// Counts of the four bad-bucket classes over `Gamma(i)`, for diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BucketClasses {
    pub heavy_collision: usize,
    pub heavy_tail_collision: usize,
    pub light_energy: usize,
    pub light_sum: usize,
    pub good: usize,
}

/// Classifies every bucket of `i` on a planted instance. `head` is `H_k(x)`;
/// heavy tail elements are non-head entries above `sqrt(zeta^2 eta / k) ||z||`.
pub fn bucket_classes(op: &SignedSketchOperator, x: &[f64], head: &[u64], i: u64, zeta: f64, eta: f64) -> BucketClasses {
    let k = head.len().max(1) as f64;
    let in_head = |b: u64| head.binary_search(&b).is_ok();
    let z2: f64 = x.iter().enumerate().filter(|(b, _)| !in_head(*b as u64)).map(|(_, v)| v * v).sum();
    let heavy_tail = (zeta * zeta * eta / k * z2).sqrt();
    let m = op.rows();
    let mut heavy = vec![false; m];
    let mut tail_heavy = vec![false; m];
    let mut energy = vec![0.0; m];
    let mut light = vec![0.0; m];
    for (b, &v) in x.iter().enumerate() {
        let b = b as u64;
        if v == 0.0 || b == i {
            continue;
        }
        for (j, s) in op.column(b) {
            if in_head(b) {
                heavy[j] = true;
            } else if v.abs() > heavy_tail {
                tail_heavy[j] = true;
            } else {
                energy[j] += v * v;
                light[j] += s * v;
            }
        }
    }
    let mut out = BucketClasses::default();
    for e in 0..op.degree() {
        let j = op.graph.neighbor(i, e);
        let mut bad = false;
        if heavy[j] {
            out.heavy_collision += 1;
            bad = true;
        }
        if tail_heavy[j] {
            out.heavy_tail_collision += 1;
            bad = true;
        }
        if energy[j] > zeta * eta / k * z2 {
            out.light_energy += 1;
            bad = true;
        }
        if light[j].abs() > (eta / k * z2).sqrt() {
            out.light_sum += 1;
            bad = true;
        }
        if !bad {
            out.good += 1;
        }
    }
    out
}
