//! Sublinear-time identification over an `r`-ary tree of shrinking domains.
//!
//! Every node owns a domain of `layers` chunks of `width` bits (element
//! `sum_a chunk_a << (a * width)`) and a signed sketch of the signal pushed
//! into that domain. An internal node's code maps its domain onto its
//! children: the node's element is padded chunk-wise to the code's message
//! width, encoded, and codeword coordinate `u` becomes the element seen by
//! child `u`. Leaves scan their whole domain; internal nodes list-recover the
//! children's outputs and keep the best candidates by median estimate.
//!
//! Node ids are breadth-first: the children of `v` are `v*r + 1 ..= v*r + r`.

pub mod maps;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::codes::CodeDescriptor;
use crate::error::{infeasible, invalid, Error, Result};
use crate::expander::SignedSketchOperator;
use crate::field::FieldSpec;
use crate::seed::{mix64, SeedTree};
use crate::weak::{weak_identify, SketchRecipe, WeakParams};

pub use maps::{invert_indices, Lookup, RootMap, RootScheme, Scheme1Table, Scheme2Map};

/// Hard limit on the number of tree nodes.
pub const MAX_NODES: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "kebab-case")]
pub enum CodeFamily {
    Split,
    LoomisWhitney { d: usize },
    ReedSolomon { b: usize, r: usize },
}

impl CodeFamily {
    pub fn arity(&self) -> usize {
        match self {
            CodeFamily::Split => 2,
            CodeFamily::LoomisWhitney { d } => *d,
            CodeFamily::ReedSolomon { r, .. } => *r,
        }
    }

    /// Digits per message chunk, and how many of them a symbol keeps.
    fn digits(&self) -> (u32, u32) {
        match self {
            CodeFamily::Split => (2, 1),
            CodeFamily::LoomisWhitney { d } => (*d as u32, *d as u32 - 1),
            CodeFamily::ReedSolomon { b, .. } => (*b as u32, 1),
        }
    }

    /// `(padded, child)` chunk widths for a node chunk width `w`.
    pub fn widths(&self, w: u32) -> (u32, u32) {
        let (parts, keep) = self.digits();
        let padded = w.div_ceil(parts) * parts;
        (padded, padded / parts * keep)
    }

    fn descriptor(&self, padded: u32, layers: u32) -> Result<CodeDescriptor> {
        let digit = padded / self.digits().0;
        let code = match self {
            CodeFamily::Split => CodeDescriptor::split(1u64 << padded)?,
            CodeFamily::LoomisWhitney { d } => CodeDescriptor::loomis_whitney_base(*d, 1u64 << digit)?,
            CodeFamily::ReedSolomon { b, r } => CodeDescriptor::reed_solomon(FieldSpec::binary(digit)?, *b, *r)?,
        };
        code.with_layers(layers)
    }

    fn validate(&self) -> Result<()> {
        match self {
            CodeFamily::LoomisWhitney { d } if *d < 2 => Err(invalid("LW(d) needs d >= 2")),
            CodeFamily::ReedSolomon { b, r } if *b == 0 || r <= b => Err(invalid("RS needs 1 <= b < r")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightRule {
    /// `h = ceil(log_r log_A |root domain|)`.
    Formula,
    /// Smallest `h` whose leaf domains hold at most `A` elements.
    #[default]
    LeafBound,
}

/// Serializable tree description: parameters and seed, no materialized data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    /// Root domain size, a power of two.
    pub n: u64,
    /// Leaf domain threshold `A`.
    pub leaf_max: u64,
    pub code: CodeFamily,
    #[serde(default)]
    pub scheme: RootScheme,
    #[serde(default)]
    pub height: HeightRule,
    pub k: usize,
    pub gamma: f64,
    pub eta: f64,
    /// List-recovery tolerance.
    pub rho: f64,
    /// Candidate cap `L` after list recovery; defaults per code family.
    #[serde(default)]
    pub list_cap: Option<usize>,
    #[serde(default)]
    pub recipe: SketchRecipe,
    pub seed: u64,
}

impl TreeConfig {
    pub fn new(n: u64, k: usize, code: CodeFamily, seed: u64) -> Self {
        TreeConfig {
            n,
            leaf_max: 256,
            code,
            scheme: RootScheme::default(),
            height: HeightRule::default(),
            k,
            gamma: 0.1,
            eta: 0.5,
            rho: match code {
                CodeFamily::LoomisWhitney { d } if d >= 3 => 1.0 / d as f64,
                CodeFamily::ReedSolomon { b, r } => 0.25 * (1.0 - b as f64 / r as f64),
                _ => 0.0,
            },
            list_cap: None,
            recipe: SketchRecipe::default(),
            seed,
        }
    }
}

/// Height from the closed-form rule.
pub fn formula_height(root_bits: u32, leaf_max: u64, arity: usize) -> u32 {
    let log_a = (leaf_max as f64).log2();
    if root_bits as f64 <= log_a {
        return 0;
    }
    let ratio = root_bits as f64 / log_a;
    (ratio.ln() / (arity as f64).ln() - 1e-9).ceil().max(0.0) as u32
}

/// `(r^(h+1) - 1) / (r - 1)`, or `None` on overflow.
pub fn node_count(arity: usize, height: u32) -> Option<usize> {
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..=height {
        total = total.checked_add(level)?;
        level = level.checked_mul(arity)?;
    }
    Some(total)
}

#[derive(Clone, Debug)]
pub struct Level {
    /// Chunk width of the nodes at this depth.
    pub width: u32,
    /// Chunk width of the code's messages (`width` rounded up).
    pub padded: u32,
    /// `None` at the leaves.
    pub code: Option<CodeDescriptor>,
}

#[derive(Clone, Debug)]
pub struct RecursionTree {
    pub config: TreeConfig,
    pub params: WeakParams,
    pub map: RootMap,
    pub layers: u32,
    pub height: u32,
    pub arity: usize,
    pub levels: Vec<Level>,
    pub list_cap: usize,
    level_start: Vec<usize>,
    operators: Vec<SignedSketchOperator>,
}

/// Per-node sketches, indexed by node id.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSketch {
    pub nodes: Vec<Vec<f64>>,
}

impl TreeSketch {
    pub fn len(&self) -> usize {
        self.nodes.iter().map(|u| u.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.nodes.concat()
    }

    /// `self - other`, node by node.
    pub fn sub(&self, other: &TreeSketch) -> Result<TreeSketch> {
        if self.nodes.len() != other.nodes.len() {
            return Err(Error::DimensionMismatch { expected: self.nodes.len(), got: other.nodes.len() });
        }
        Ok(TreeSketch {
            nodes: self.nodes.iter().zip(&other.nodes).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Identification {
    /// Recovered root indices, sorted.
    pub indices: Vec<u64>,
    /// Output list of every node, in node-domain elements.
    pub node_lists: Vec<Vec<u64>>,
    /// Candidates cut by the list cap, summed over nodes.
    pub overflow: usize,
    /// Root elements that failed inversion.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    /// Planted items missing from each node's list.
    pub per_node: Vec<usize>,
    pub per_depth: Vec<usize>,
    /// Planted items absent from the final output.
    pub missing: Vec<u64>,
}

/// Fill bits placed above the `w` real bits of a chunk. They are a hash of the
/// chunk rather than zeros: zero fill survives every digit deletion that keeps
/// the top digit, and would drain the entropy of deep nodes.
fn fill(chunk: u64, w: u32, padded: u32) -> u64 {
    mix64(chunk ^ (u64::from(w) << 56) ^ (u64::from(padded) << 48)) & ((1u64 << (padded - w)) - 1)
}

fn pad(e: u64, w: u32, padded: u32, layers: u32) -> u64 {
    if w == padded {
        return e;
    }
    let mask = (1u64 << w) - 1;
    (0..layers).fold(0, |acc, a| {
        let chunk = (e >> (a * w)) & mask;
        acc | ((chunk | fill(chunk, w, padded) << w) << (a * padded))
    })
}

/// Inverse of `pad`; `None` when some chunk's fill bits do not match.
fn unpad(m: u64, w: u32, padded: u32, layers: u32) -> Option<u64> {
    if w == padded {
        return Some(m);
    }
    let mask = (1u64 << padded) - 1;
    let low = (1u64 << w) - 1;
    let mut out = 0u64;
    for a in 0..layers {
        let chunk = (m >> (a * padded)) & mask;
        if chunk >> w != fill(chunk & low, w, padded) {
            return None;
        }
        out |= (chunk & low) << (a * w);
    }
    Some(out)
}

impl RecursionTree {
    pub fn build(config: TreeConfig) -> Result<Self> {
        let n = config.n;
        if n < 2 || !n.is_power_of_two() {
            return Err(invalid(format!("root domain must be a power of two >= 2, got {n}")));
        }
        if config.leaf_max < 2 {
            return Err(invalid("leaf threshold A must be at least 2"));
        }
        config.code.validate()?;
        let params = WeakParams::new(config.k, config.gamma, config.eta, 1, 1)?;
        let seeds = SeedTree::new(config.seed);
        let log_n = n.trailing_zeros();
        let map = RootMap::new(config.scheme, log_n, &seeds.child("root-map"))?;
        let layers = map.layers();
        let arity = config.code.arity();
        let fits = |w: u32| w * layers <= 62 && (1u64 << (w * layers)) <= config.leaf_max;

        let mut widths = vec![log_n];
        let target = match config.height {
            HeightRule::Formula => Some(formula_height(log_n * layers, config.leaf_max, arity)),
            HeightRule::LeafBound => None,
        };
        loop {
            let w = *widths.last().unwrap();
            let done = match target {
                Some(h) => widths.len() as u32 > h,
                None => fits(w),
            };
            if done {
                break;
            }
            let (padded, child) = config.code.widths(w);
            if child >= w || child == 0 || padded * layers > 63 {
                return Err(infeasible(format!(
                    "{:?} cannot shrink {layers} chunks of {w} bits (child width {child})",
                    config.code
                )));
            }
            widths.push(child);
        }
        let height = widths.len() as u32 - 1;
        let total = node_count(arity, height).filter(|&c| c <= MAX_NODES).ok_or_else(|| {
            infeasible(format!("tree with arity {arity} and height {height} exceeds {MAX_NODES} nodes"))
        })?;

        let mut levels = Vec::with_capacity(widths.len());
        for (j, &w) in widths.iter().enumerate() {
            if j as u32 == height {
                levels.push(Level { width: w, padded: w, code: None });
            } else {
                let (padded, _) = config.code.widths(w);
                levels.push(Level { width: w, padded, code: Some(config.code.descriptor(padded, layers)?) });
            }
        }
        let mut level_start = vec![0usize];
        let mut size = 1usize;
        for _ in 0..=height {
            level_start.push(level_start.last().unwrap() + size);
            size *= arity;
        }

        let node_seeds = seeds.child("nodes");
        let mut operators = Vec::with_capacity(total);
        for v in 0..total {
            let depth = level_start.partition_point(|&s| s <= v) - 1;
            let domain = 1u64 << (levels[depth].width * layers);
            let degree = config.recipe.degree(domain.min(n), config.k);
            let mut spec = config.recipe.operator(domain, config.k, Some(degree), &node_seeds.child(&v.to_string()));
            spec.left = domain;
            operators.push(spec.build()?);
        }
        let ell = params.identify_len as f64;
        let list_cap = config.list_cap.unwrap_or(match config.code {
            CodeFamily::LoomisWhitney { d } => ((d as f64 - 1.0) * ell.powf(d as f64 / (d as f64 - 1.0))).ceil() as usize,
            _ => (ell * ell) as usize,
        });
        Ok(RecursionTree { config, params, map, layers, height, arity, levels, list_cap, level_start, operators })
    }

    pub fn node_total(&self) -> usize {
        self.operators.len()
    }

    pub fn depth(&self, v: usize) -> usize {
        self.level_start.partition_point(|&s| s <= v) - 1
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.depth(v) as u32 == self.height
    }

    pub fn children(&self, v: usize) -> std::ops::Range<usize> {
        if self.is_leaf(v) {
            0..0
        } else {
            v * self.arity + 1..v * self.arity + self.arity + 1
        }
    }

    /// Number of elements in a node's domain.
    pub fn domain_size(&self, v: usize) -> u64 {
        1u64 << (self.levels[self.depth(v)].width * self.layers)
    }

    pub fn operator(&self, v: usize) -> &SignedSketchOperator {
        &self.operators[v]
    }

    pub fn measurements(&self) -> usize {
        self.operators.iter().map(|o| o.rows()).sum()
    }

    fn check_index(&self, i: u64) -> Result<()> {
        if i >= self.config.n {
            return Err(Error::OutOfDomain { index: i, size: self.config.n });
        }
        Ok(())
    }

    /// Element of every node reached by root index `i`.
    pub fn node_symbols(&self, i: u64) -> Result<Vec<u64>> {
        self.check_index(i)?;
        let mut syms = vec![0u64; self.node_total()];
        syms[0] = self.map.forward(i);
        let mut cw = vec![0u64; self.arity];
        let internal = self.level_start[self.height as usize];
        for v in 0..internal {
            let level = &self.levels[self.depth(v)];
            let code = level.code.as_ref().expect("internal node has a code");
            code.encode_into(pad(syms[v], level.width, level.padded, self.layers), &mut cw);
            syms[v * self.arity + 1..=v * self.arity + self.arity].copy_from_slice(&cw);
        }
        Ok(syms)
    }

    /// Element of node `v` reached by root index `i`.
    pub fn phi_map(&self, v: usize, i: u64) -> Result<u64> {
        self.check_index(i)?;
        if v >= self.node_total() {
            return Err(invalid(format!("unknown node {v} (tree has {})", self.node_total())));
        }
        let mut path = Vec::new();
        let mut c = v;
        while c > 0 {
            path.push((c - 1) % self.arity);
            c = (c - 1) / self.arity;
        }
        let mut sym = self.map.forward(i);
        for (depth, &u) in path.iter().rev().enumerate() {
            let level = &self.levels[depth];
            let code = level.code.as_ref().expect("internal node has a code");
            sym = code.encode_unchecked(pad(sym, level.width, level.padded, self.layers))[u];
        }
        Ok(sym)
    }

    pub fn encode(&self, entries: &[(u64, f64)]) -> Result<TreeSketch> {
        let mut nodes: Vec<Vec<f64>> = self.operators.iter().map(|o| vec![0.0; o.rows()]).collect();
        for &(i, value) in entries {
            if value == 0.0 {
                continue;
            }
            let syms = self.node_symbols(i)?;
            for (v, op) in self.operators.iter().enumerate() {
                op.accumulate(&mut nodes[v], syms[v], value);
            }
        }
        Ok(TreeSketch { nodes })
    }

    pub fn encode_dense(&self, x: &[f64]) -> Result<TreeSketch> {
        if x.len() as u64 != self.config.n {
            return Err(Error::DimensionMismatch { expected: self.config.n as usize, got: x.len() });
        }
        let entries: Vec<(u64, f64)> = x.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect();
        self.encode(&entries)
    }

    pub fn identify(&self, sketch: &TreeSketch) -> Result<Identification> {
        let total = self.node_total();
        if sketch.nodes.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: sketch.nodes.len() });
        }
        let mut lists: Vec<Vec<u64>> = vec![Vec::new(); total];
        let mut overflow = 0;
        for v in (0..total).rev() {
            let op = &self.operators[v];
            let u = &sketch.nodes[v];
            if u.len() != op.rows() {
                return Err(Error::DimensionMismatch { expected: op.rows(), got: u.len() });
            }
            lists[v] = if self.is_leaf(v) {
                weak_identify(op, u, 0..self.domain_size(v), &self.params)
            } else {
                let level = &self.levels[self.depth(v)];
                let code = level.code.as_ref().expect("internal node has a code");
                let sets = &lists[self.children(v)];
                let msgs = code.list_recover(sets, self.config.rho)?;
                let mut cands: Vec<u64> =
                    msgs.into_iter().filter_map(|m| unpad(m, level.width, level.padded, self.layers)).collect();
                if cands.len() > self.list_cap {
                    overflow += cands.len() - self.list_cap;
                    cands.truncate(self.list_cap);
                }
                weak_identify(op, u, cands, &self.params)
            };
        }
        if overflow > 0 {
            warn!("list recovery overflow: {overflow} candidates cut at cap {}", self.list_cap);
        }
        let (indices, dropped) = invert_indices(&lists[0], &self.map);
        Ok(Identification { indices, node_lists: lists, overflow, dropped })
    }

    /// Which planted items each node lost.
    pub fn loss_report(&self, ident: &Identification, planted: &[u64]) -> Result<LossReport> {
        let mut per_node = vec![0usize; self.node_total()];
        for &i in planted {
            let syms = self.node_symbols(i)?;
            for (v, s) in syms.iter().enumerate() {
                if ident.node_lists[v].binary_search(s).is_err() {
                    per_node[v] += 1;
                }
            }
        }
        let mut per_depth = vec![0usize; self.height as usize + 1];
        for (v, &c) in per_node.iter().enumerate() {
            per_depth[self.depth(v)] += c;
        }
        let missing = planted.iter().copied().filter(|i| ident.indices.binary_search(i).is_err()).collect();
        Ok(LossReport { per_node, per_depth, missing })
    }
}

/// One-step combination: list recovery over `r` identification outputs, cut
/// at `cap` (lowest messages kept). Returns the list and the overflow count.
pub fn rs_one_step_combine(lists: &[Vec<u64>], code: &CodeDescriptor, rho: f64, cap: usize) -> Result<(Vec<u64>, usize)> {
    let mut out = code.list_recover(lists, rho)?;
    let overflow = out.len().saturating_sub(cap);
    out.truncate(cap);
    Ok((out, overflow))
}
