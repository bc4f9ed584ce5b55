//! Top-level recovery: a schedule of weak stages with halving sparsity,
//! decoded in sequence on residual sketches.

pub mod omp;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expander::SignedSketchOperator;
use crate::recursive::{CodeFamily, HeightRule, RecursionTree, RootScheme, TreeConfig, TreeSketch};
use crate::seed::SeedTree;
use crate::sparse::{lower_median, SparseVector};
use crate::weak::{majority_amplify, weak_estimate, weak_identify, SketchRecipe, WeakParams};

pub use omp::{gaussian_matrix, omp_baseline};

/// Entries below this fraction of the largest magnitude do not count as support.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// 1-based stage number.
    pub index: u32,
    pub sparsity: usize,
    pub eta: f64,
    pub zeta: f64,
    pub copies: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
}

impl StageSchedule {
    /// Stages `i = 1, 2, ...` with sparsity `floor(k / 2^(i-1))` while it is at
    /// least 1, precision `eps / i^(1+alpha)` and
    /// `max(1, ceil(2^i / i^((1+alpha)c + 2 + alpha)))` identification copies.
    pub fn new(k: usize, eps: f64, alpha: f64, c: f64, zeta: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if !(eps > 0.0 && alpha > 0.0 && zeta > 0.0 && zeta < 1.0) {
            return Err(invalid(format!("need eps, alpha > 0 and 0 < zeta < 1 (eps={eps}, alpha={alpha}, zeta={zeta})")));
        }
        let mut stages = Vec::new();
        let mut i = 1u32;
        while k >> (i - 1) >= 1 {
            let fi = i as f64;
            let eta = (eps / fi.powf(1.0 + alpha)).min(0.999);
            let copies = ((2f64.powi(i as i32) / fi.powf((1.0 + alpha) * c + 2.0 + alpha)).ceil() as usize).max(1);
            stages.push(Stage { index: i, sparsity: k >> (i - 1), eta, zeta, copies });
            i += 1;
        }
        Ok(StageSchedule { stages })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum EngineConfig {
    /// Identification scans the whole domain.
    #[default]
    Plain,
    /// Identification through a recursion tree per copy.
    Recursive {
        code: CodeFamily,
        leaf_max: u64,
        #[serde(default)]
        scheme: RootScheme,
        #[serde(default)]
        height: HeightRule,
        #[serde(default)]
        rho: Option<f64>,
    },
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToplevelConfig {
    pub n: u64,
    pub k: usize,
    pub eps: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    pub engine: EngineConfig,
    #[serde(default)]
    pub recipe: SketchRecipe,
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.5
}
fn default_c() -> f64 {
    4.0
}
fn default_d() -> f64 {
    6.0
}
fn default_zeta() -> f64 {
    0.5
}

impl ToplevelConfig {
    pub fn new(n: u64, k: usize, eps: f64, engine: EngineConfig, seed: u64) -> Self {
        ToplevelConfig {
            n,
            k,
            eps,
            alpha: default_alpha(),
            c: default_c(),
            d: default_d(),
            zeta: default_zeta(),
            engine,
            recipe: SketchRecipe::default(),
            seed,
        }
    }
}

#[derive(Clone, Debug)]
enum Identifier {
    Plain(SignedSketchOperator),
    Tree(Box<RecursionTree>),
}

#[derive(Clone, Debug)]
pub struct StageSystem {
    pub stage: Stage,
    pub params: WeakParams,
    identifiers: Vec<Identifier>,
    estimate: SignedSketchOperator,
}

impl StageSystem {
    /// Rows of one identification copy.
    pub fn copy_measurements(&self, copy: usize) -> usize {
        match &self.identifiers[copy] {
            Identifier::Plain(op) => op.rows(),
            Identifier::Tree(t) => t.measurements(),
        }
    }

    pub fn estimate_measurements(&self) -> usize {
        self.estimate.rows()
    }

    pub fn measurements(&self) -> usize {
        (0..self.identifiers.len()).map(|c| self.copy_measurements(c)).sum::<usize>() + self.estimate_measurements()
    }

    fn encode(&self, entries: &[(u64, f64)]) -> Result<StageSketch> {
        let identify = self
            .identifiers
            .iter()
            .map(|id| match id {
                Identifier::Plain(op) => op.apply_sparse(entries.iter().copied()).map(CopySketch::Plain),
                Identifier::Tree(t) => t.encode(entries).map(CopySketch::Tree),
            })
            .collect::<Result<_>>()?;
        Ok(StageSketch { identify, estimate: self.estimate.apply_sparse(entries.iter().copied())? })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CopySketch {
    Plain(Vec<f64>),
    Tree(TreeSketch),
}

impl CopySketch {
    pub fn len(&self) -> usize {
        match self {
            CopySketch::Plain(u) => u.len(),
            CopySketch::Tree(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            CopySketch::Plain(u) => out.extend_from_slice(u),
            CopySketch::Tree(t) => t.nodes.iter().for_each(|u| out.extend_from_slice(u)),
        }
    }

    fn sub(&self, other: &CopySketch) -> Result<CopySketch> {
        match (self, other) {
            (CopySketch::Plain(a), CopySketch::Plain(b)) if a.len() == b.len() => {
                Ok(CopySketch::Plain(a.iter().zip(b).map(|(x, y)| x - y).collect()))
            }
            (CopySketch::Tree(a), CopySketch::Tree(b)) => Ok(CopySketch::Tree(a.sub(b)?)),
            _ => Err(Error::DimensionMismatch { expected: self.len(), got: other.len() }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageSketch {
    pub identify: Vec<CopySketch>,
    pub estimate: Vec<f64>,
}

impl StageSketch {
    fn sub(&self, other: &StageSketch) -> Result<StageSketch> {
        if self.identify.len() != other.identify.len() || self.estimate.len() != other.estimate.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(StageSketch {
            identify: self.identify.iter().zip(&other.identify).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?,
            estimate: self.estimate.iter().zip(&other.estimate).map(|(x, y)| x - y).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.identify.iter().map(|c| c.len()).sum::<usize>() + self.estimate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All measurements of one signal, grouped by stage.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchBundle {
    pub stages: Vec<StageSketch>,
}

impl SketchBundle {
    pub fn len(&self) -> usize {
        self.stages.iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stage by stage: identification copies in order, then the estimation rows.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for s in &self.stages {
            s.identify.iter().for_each(|c| c.flatten_into(&mut out));
            out.extend_from_slice(&s.estimate);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageTrace {
    /// Candidates surviving the majority vote.
    pub candidates: usize,
    /// Support of the stage's estimate.
    pub estimated: usize,
    /// Planted heavy hitters not yet in the accumulated support, when known.
    pub missing: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct TopLevelSystem {
    pub config: ToplevelConfig,
    pub schedule: StageSchedule,
    pub stages: Vec<StageSystem>,
}

impl TopLevelSystem {
    pub fn build(config: ToplevelConfig) -> Result<Self> {
        let n = config.n;
        if config.k as u64 > n || n == 0 {
            return Err(invalid(format!("need 1 <= k <= N, got k={} N={n}", config.k)));
        }
        let schedule = StageSchedule::new(config.k, config.eps, config.alpha, config.c, config.zeta)?;
        let seeds = SeedTree::new(config.seed);
        let recipe = config.recipe;
        let mut stages = Vec::with_capacity(schedule.stages.len());
        for st in &schedule.stages {
            let stage_seeds = seeds.child(&format!("stage/{}", st.index));
            let degree = recipe.degree(n, st.sparsity);
            let params = WeakParams::new(st.sparsity, st.zeta, st.eta, degree, st.copies)?;
            let mut identifiers = Vec::with_capacity(st.copies);
            for c in 0..st.copies {
                let copy_seeds = stage_seeds.child(&format!("identify/{c}"));
                identifiers.push(match &config.engine {
                    EngineConfig::Plain => Identifier::Plain(recipe.operator(n, st.sparsity, Some(degree), &copy_seeds).build()?),
                    EngineConfig::Recursive { code, leaf_max, scheme, height, rho } => {
                        let mut tc = TreeConfig::new(n, st.sparsity, *code, copy_seeds.seed);
                        tc.leaf_max = *leaf_max;
                        tc.scheme = *scheme;
                        tc.height = *height;
                        tc.gamma = st.zeta;
                        tc.eta = st.eta;
                        tc.recipe = recipe;
                        if let Some(r) = rho {
                            tc.rho = *r;
                        }
                        Identifier::Tree(Box::new(RecursionTree::build(tc)?))
                    }
                });
            }
            let estimate = recipe.operator(n, st.sparsity, Some(degree), &stage_seeds.child("estimate")).build()?;
            stages.push(StageSystem { stage: *st, params, identifiers, estimate });
        }
        Ok(TopLevelSystem { config, schedule, stages })
    }

    /// Total rows: per stage, every identification copy plus the estimation rows.
    pub fn measurements(&self) -> usize {
        self.stages.iter().map(|s| s.measurements()).sum()
    }

    /// The analysis' count `sum_i s_i zeta^-d eta_i^-c k_i log2(N/k_i)`.
    pub fn theoretical_measurements(&self) -> f64 {
        let n = self.config.n as f64;
        self.schedule
            .stages
            .iter()
            .map(|s| {
                let k = s.sparsity as f64;
                s.copies as f64 * s.zeta.powf(-self.config.d) * s.eta.powf(-self.config.c) * k * (n / k).max(2.0).log2()
            })
            .sum()
    }

    pub fn encode(&self, entries: &[(u64, f64)]) -> Result<SketchBundle> {
        for &(i, _) in entries {
            if i >= self.config.n {
                return Err(Error::OutOfDomain { index: i, size: self.config.n });
            }
        }
        Ok(SketchBundle { stages: self.stages.iter().map(|s| s.encode(entries)).collect::<Result<_>>()? })
    }

    pub fn encode_dense(&self, x: &[f64]) -> Result<SketchBundle> {
        if x.len() as u64 != self.config.n {
            return Err(Error::DimensionMismatch { expected: self.config.n as usize, got: x.len() });
        }
        self.encode(SparseVector::from_dense(x).entries())
    }

    /// Inverse of `SketchBundle::flatten` for this system's layout.
    pub fn unflatten(&self, flat: &[f64]) -> Result<SketchBundle> {
        if flat.len() != self.measurements() {
            return Err(Error::DimensionMismatch { expected: self.measurements(), got: flat.len() });
        }
        let mut rest = flat;
        let mut take = |len: usize| {
            let (head, tail) = rest.split_at(len);
            rest = tail;
            head.to_vec()
        };
        let stages = self
            .stages
            .iter()
            .map(|sys| {
                let identify = sys
                    .identifiers
                    .iter()
                    .map(|id| match id {
                        Identifier::Plain(op) => CopySketch::Plain(take(op.rows())),
                        Identifier::Tree(t) => {
                            CopySketch::Tree(TreeSketch { nodes: (0..t.node_total()).map(|v| take(t.operator(v).rows())).collect() })
                        }
                    })
                    .collect();
                StageSketch { identify, estimate: take(sys.estimate.rows()) }
            })
            .collect();
        Ok(SketchBundle { stages })
    }

    pub fn decode(&self, bundle: &SketchBundle) -> Result<SparseVector> {
        Ok(self.decode_traced(bundle, None)?.0)
    }

    /// Decodes stage by stage; `head`, if given, is the planted `H_k(x)` used
    /// to record how many heavy hitters are still missing after each stage.
    pub fn decode_traced(&self, bundle: &SketchBundle, head: Option<&[u64]>) -> Result<(SparseVector, Vec<StageTrace>)> {
        if bundle.stages.len() != self.stages.len() {
            return Err(Error::DimensionMismatch { expected: self.stages.len(), got: bundle.stages.len() });
        }
        let n = self.config.n;
        let mut acc = SparseVector::new();
        let mut trace = Vec::with_capacity(self.stages.len());
        for (sys, sketch) in self.stages.iter().zip(&bundle.stages) {
            let residual = if acc.is_empty() { sketch.clone() } else { sketch.sub(&sys.encode(acc.entries())?)? };
            let mut lists = Vec::with_capacity(sys.identifiers.len());
            for (id, cs) in sys.identifiers.iter().zip(&residual.identify) {
                lists.push(match (id, cs) {
                    (Identifier::Plain(op), CopySketch::Plain(u)) => weak_identify(op, u, 0..n, &sys.params),
                    (Identifier::Tree(t), CopySketch::Tree(u)) => t.identify(u)?.indices,
                    _ => return Err(invalid("sketch does not match the stage engine")),
                });
            }
            let candidates = majority_amplify(&lists);
            let est = weak_estimate(&sys.estimate, &residual.estimate, candidates.iter().copied(), &sys.params);
            acc = acc.add(&est);
            let missing = head.map(|h| h.iter().filter(|&&i| acc.get(i) == 0.0).count());
            trace.push(StageTrace { candidates: candidates.len(), estimated: est.len(), missing });
        }
        Ok((acc, trace))
    }
}

/// Support of `x` ignoring entries below `SUPPORT_THRESHOLD` times the largest.
pub fn effective_support(x: &SparseVector) -> Vec<u64> {
    let top = x.entries().iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
    x.entries().iter().filter(|e| e.1.abs() > SUPPORT_THRESHOLD * top).map(|e| e.0).collect()
}

/// Component-wise lower median of several estimates (absent entries are 0).
pub fn componentwise_median(outputs: &[SparseVector]) -> SparseVector {
    let mut idx: Vec<u64> = outputs.iter().flat_map(|o| o.support()).collect();
    idx.sort_unstable();
    idx.dedup();
    let mut vals = Vec::with_capacity(outputs.len());
    SparseVector::from_pairs(idx.into_iter().map(|i| {
        vals.clear();
        vals.extend(outputs.iter().map(|o| o.get(i)));
        (i, lower_median(&mut vals))
    }))
}

/// Decodes each independent copy and returns the component-wise median.
pub fn repeat_median_amplify(systems: &[TopLevelSystem], bundles: &[SketchBundle]) -> Result<SparseVector> {
    if systems.is_empty() || systems.len() != bundles.len() {
        return Err(invalid(format!("need s >= 1 matching copies, got {} systems, {} sketches", systems.len(), bundles.len())));
    }
    let outs = systems.iter().zip(bundles).map(|(s, b)| s.decode(b)).collect::<Result<Vec<_>>>()?;
    Ok(componentwise_median(&outs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shapes() {
        let s = StageSchedule::new(1, 0.5, 0.5, 4.0, 0.5).unwrap();
        assert_eq!(s.stages.len(), 1);
        let s = StageSchedule::new(8, 0.5, 0.5, 4.0, 0.5).unwrap();
        let sp: Vec<usize> = s.stages.iter().map(|x| x.sparsity).collect();
        assert_eq!(sp, vec![8, 4, 2, 1]);
        let copies: Vec<usize> = s.stages.iter().map(|x| x.copies).collect();
        assert_eq!(copies, vec![2, 1, 1, 1]);
        assert!((s.stages[1].eta - 0.5 / 2f64.powf(1.5)).abs() < 1e-15);
        let sp: Vec<usize> = StageSchedule::new(6, 0.5, 0.5, 4.0, 0.5).unwrap().stages.iter().map(|x| x.sparsity).collect();
        assert_eq!(sp, vec![6, 3, 1]);
    }

    #[test]
    fn zero_signal_decodes_to_zero() {
        let sys = TopLevelSystem::build(ToplevelConfig::new(512, 4, 0.5, EngineConfig::Plain, 1)).unwrap();
        let b = sys.encode(&[]).unwrap();
        assert_eq!(b.len(), sys.measurements());
        assert!(sys.decode(&b).unwrap().is_empty());
    }

    #[test]
    fn sparse_signal_recovered_plain() {
        let sys = TopLevelSystem::build(ToplevelConfig::new(1024, 4, 0.5, EngineConfig::Plain, 9)).unwrap();
        let x = [(5u64, 1.0), (300, -2.0), (301, 0.5), (1000, 3.0)];
        let b = sys.encode(&x).unwrap();
        let (xh, trace) = sys.decode_traced(&b, Some(&[5, 300, 301, 1000])).unwrap();
        assert_eq!(effective_support(&xh), vec![5, 300, 301, 1000]);
        for (i, v) in x {
            assert!((xh.get(i) - v).abs() < 1e-9);
        }
        assert_eq!(trace.last().unwrap().missing, Some(0));
    }

    #[test]
    fn median_of_copies() {
        let a = SparseVector::from_pairs([(1, 1.0), (2, 5.0)]);
        let b = SparseVector::from_pairs([(1, 2.0)]);
        let c = SparseVector::from_pairs([(1, 3.0), (2, 4.0)]);
        let m = componentwise_median(&[a.clone(), b, c]);
        assert_eq!(m.entries(), &[(1, 2.0), (2, 4.0)]);
        assert_eq!(componentwise_median(std::slice::from_ref(&a)), a);
    }
}
