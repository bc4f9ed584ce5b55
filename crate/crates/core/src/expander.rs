//! Random left-regular bipartite multigraphs and the signed sketch operator.
//!
//! Hashed graphs are never materialized: the `e`-th neighbor of left vertex
//! `i` is a pure function of `(seed, i, e)`, so operators over huge domains
//! cost O(1) memory.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{infeasible, invalid, Error, Result};
use crate::hash::SignFamily;
use crate::seed::mix64;

/// Largest number of subsets `verify_expansion` agrees to enumerate.
pub const MAX_ENUMERATION: f64 = 1e7;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    Hashed { seed: u64 },
    /// Row-major `left * degree` bucket list.
    Explicit { lists: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub left: u64,
    pub degree: usize,
    pub right: usize,
    pub adjacency: Adjacency,
}

/// Draws each of the `degree` neighbors of every left vertex uniformly from
/// `[0, m)`, with repetition.
pub fn build_graph(n: u64, degree: usize, m: usize, seed: u64) -> Result<BipartiteGraph> {
    if n == 0 || degree == 0 || degree > m {
        return Err(invalid(format!("need N >= 1 and 1 <= l <= M, got N={n} l={degree} M={m}")));
    }
    if n.checked_mul(degree as u64).is_none() {
        return Err(invalid("N * l overflows"));
    }
    Ok(BipartiteGraph { left: n, degree, right: m, adjacency: Adjacency::Hashed { seed } })
}

impl BipartiteGraph {
    pub fn from_lists(right: usize, lists: &[Vec<u32>]) -> Result<Self> {
        let degree = lists.first().map_or(0, |l| l.len());
        if lists.is_empty() || degree == 0 {
            return Err(invalid("empty adjacency"));
        }
        let mut flat = Vec::with_capacity(lists.len() * degree);
        for l in lists {
            if l.len() != degree {
                return Err(Error::DimensionMismatch { expected: degree, got: l.len() });
            }
            if let Some(&j) = l.iter().find(|&&j| j as usize >= right) {
                return Err(Error::OutOfDomain { index: j as u64, size: right as u64 });
            }
            flat.extend_from_slice(l);
        }
        Ok(BipartiteGraph { left: lists.len() as u64, degree, right, adjacency: Adjacency::Explicit { lists: flat } })
    }

    #[inline]
    pub fn neighbor(&self, i: u64, e: usize) -> usize {
        match &self.adjacency {
            Adjacency::Hashed { seed } => {
                let key = i.wrapping_mul(self.degree as u64).wrapping_add(e as u64);
                let h = mix64(seed ^ mix64(key));
                ((h as u128 * self.right as u128) >> 64) as usize
            }
            Adjacency::Explicit { lists } => lists[i as usize * self.degree + e] as usize,
        }
    }

    /// The multiset `Gamma(i)` in edge order.
    pub fn neighbors(&self, i: u64) -> Vec<usize> {
        (0..self.degree).map(|e| self.neighbor(i, e)).collect()
    }

    /// `Gamma(S)` as a set, sorted.
    pub fn neighborhood(&self, set: &[u64]) -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().flat_map(|&i| self.neighbors(i)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// One `i: j1 j2 ... jl` line per left vertex.
    pub fn adjacency_dump(&self) -> String {
        let mut s = String::new();
        for i in 0..self.left {
            let _ = write!(s, "{i}:");
            for j in self.neighbors(i) {
                let _ = write!(s, " {j}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_adjacency_dump(text: &str, right: usize) -> Result<Self> {
        let mut lists = Vec::new();
        for (line_no, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let (head, rest) = line.split_once(':').ok_or_else(|| Error::Format(format!("line {line_no}: missing ':'")))?;
            let idx: usize = head.trim().parse().map_err(|_| Error::Format(format!("line {line_no}: bad vertex")))?;
            if idx != line_no {
                return Err(Error::Format(format!("line {line_no}: vertex {idx} out of order")));
            }
            let list = rest
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| Error::Format(format!("line {line_no}: bad bucket {t}"))))
                .collect::<Result<Vec<_>>>()?;
            lists.push(list);
        }
        Self::from_lists(right, &lists)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCertificate {
    pub t: usize,
    pub eps: f64,
    pub verified: bool,
    /// Smallest `|Gamma(S)| / (|S| l)` over all nonempty `|S| <= t`.
    pub worst_ratio: f64,
    pub worst_set: Vec<u64>,
}

/// `C(n, t)` as a float, saturating.
pub fn binomial(n: u64, t: u64) -> f64 {
    if t > n {
        return 0.0;
    }
    let t = t.min(n - t);
    (0..t).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustively checks `|Gamma(S)| >= |S| l (1 - eps)` for every `S` with
/// `1 <= |S| <= t`.
pub fn verify_expansion(g: &BipartiteGraph, t: usize, eps: f64) -> Result<ExpansionCertificate> {
    if t == 0 {
        return Err(invalid("t must be positive"));
    }
    let t_eff = (t as u64).min(g.left) as usize;
    let count = binomial(g.left, t_eff as u64);
    let n = g.left;
    if count > MAX_ENUMERATION {
        return Err(infeasible(format!(
            "C({n}, {t_eff}) = {count:.3e} subsets exceeds the enumeration limit {MAX_ENUMERATION:e}; reduce t or N"
        )));
    }
    let n = g.left as usize;
    let nbrs: Vec<Vec<usize>> = (0..g.left).map(|i| g.neighbors(i)).collect();
    let mut state = Enum {
        nbrs: &nbrs,
        degree: g.degree,
        counts: vec![0u32; g.right],
        distinct: 0,
        stack: Vec::with_capacity(t_eff),
        worst: f64::INFINITY,
        worst_set: Vec::new(),
    };
    state.search(0, n, t_eff);
    let verified = state.worst >= 1.0 - eps - 1e-12;
    Ok(ExpansionCertificate {
        t,
        eps,
        verified,
        worst_ratio: state.worst,
        worst_set: state.worst_set.into_iter().map(|i| i as u64).collect(),
    })
}

struct Enum<'a> {
    nbrs: &'a [Vec<usize>],
    degree: usize,
    counts: Vec<u32>,
    distinct: usize,
    stack: Vec<usize>,
    worst: f64,
    worst_set: Vec<usize>,
}

impl Enum<'_> {
    fn search(&mut self, start: usize, n: usize, t: usize) {
        for v in start..n {
            for &j in &self.nbrs[v] {
                if self.counts[j] == 0 {
                    self.distinct += 1;
                }
                self.counts[j] += 1;
            }
            self.stack.push(v);
            let ratio = self.distinct as f64 / (self.stack.len() * self.degree) as f64;
            if ratio < self.worst {
                self.worst = ratio;
                self.worst_set = self.stack.clone();
            }
            if self.stack.len() < t {
                self.search(v + 1, n, t);
            }
            self.stack.pop();
            for &j in &self.nbrs[v] {
                self.counts[j] -= 1;
                if self.counts[j] == 0 {
                    self.distinct -= 1;
                }
            }
        }
    }
}

/// Number of buckets adjacent to exactly one vertex of `set`.
pub fn unique_neighbor_count(g: &BipartiteGraph, set: &[u64]) -> usize {
    let mut verts = set.to_vec();
    verts.sort_unstable();
    verts.dedup();
    let mut hits: HashMap<usize, usize> = HashMap::new();
    for &v in &verts {
        let mut b = g.neighbors(v);
        b.sort_unstable();
        b.dedup();
        for j in b {
            *hits.entry(j).or_default() += 1;
        }
    }
    hits.values().filter(|&&c| c == 1).count()
}

/// Reproducible description of a signed sketch operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub left: u64,
    pub degree: usize,
    pub buckets: usize,
    pub graph_seed: u64,
    pub sign_seed: u64,
    pub independence: usize,
}

impl OperatorSpec {
    pub fn build(&self) -> Result<SignedSketchOperator> {
        let graph = build_graph(self.left, self.degree, self.buckets, self.graph_seed)?;
        SignedSketchOperator::new(graph, self.sign_seed, self.independence)
    }
}

/// The implicit `M x N` matrix with entry `sign(i, j)` for every edge `(i, j)`.
#[derive(Clone, Debug)]
pub struct SignedSketchOperator {
    pub graph: BipartiteGraph,
    pub signs: SignFamily,
}

impl SignedSketchOperator {
    pub fn new(graph: BipartiteGraph, sign_seed: u64, independence: usize) -> Result<Self> {
        let signs = SignFamily::new(sign_seed, independence, graph.left, graph.right as u64)?;
        Ok(SignedSketchOperator { graph, signs })
    }

    pub fn domain(&self) -> u64 {
        self.graph.left
    }

    pub fn rows(&self) -> usize {
        self.graph.right
    }

    pub fn degree(&self) -> usize {
        self.graph.degree
    }

    /// Nonzeros of column `i` as `(bucket, sign)` in edge order.
    pub fn column(&self, i: u64) -> Vec<(usize, f64)> {
        (0..self.graph.degree)
            .map(|e| {
                let j = self.graph.neighbor(i, e);
                (j, self.signs.sign(i, j as u64))
            })
            .collect()
    }

    /// Adds `value * column(i)` to `u`.
    #[inline]
    pub fn accumulate(&self, u: &mut [f64], i: u64, value: f64) {
        for e in 0..self.graph.degree {
            let j = self.graph.neighbor(i, e);
            u[j] += self.signs.sign(i, j as u64) * value;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() as u64 != self.graph.left {
            return Err(Error::DimensionMismatch { expected: self.graph.left as usize, got: x.len() });
        }
        let mut u = vec![0.0; self.graph.right];
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                self.accumulate(&mut u, i as u64, v);
            }
        }
        Ok(u)
    }

    pub fn apply_sparse(&self, entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Vec<f64>> {
        let mut u = vec![0.0; self.graph.right];
        for (i, v) in entries {
            if i >= self.graph.left {
                return Err(Error::OutOfDomain { index: i, size: self.graph.left });
            }
            self.accumulate(&mut u, i, v);
        }
        Ok(u)
    }

    /// The `l` signed readings `sign(i, j) * u_j`, one per edge.
    #[inline]
    pub fn readings_into(&self, u: &[f64], i: u64, out: &mut Vec<f64>) {
        out.clear();
        for e in 0..self.graph.degree {
            let j = self.graph.neighbor(i, e);
            out.push(self.signs.sign(i, j as u64) * u[j]);
        }
    }

    pub fn readings(&self, u: &[f64], i: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.graph.degree);
        self.readings_into(u, i, &mut out);
        out
    }

    /// Dense row-major `M x N` matrix; only for small operators.
    pub fn materialize(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.graph.left;
        if n as f64 * self.graph.right as f64 > 1e8 {
            return Err(infeasible("matrix too large to materialize"));
        }
        let mut m = vec![vec![0.0; n as usize]; self.graph.right];
        for i in 0..n {
            for (j, s) in self.column(i) {
                m[j][i as usize] += s;
            }
        }
        Ok(m)
    }
}
