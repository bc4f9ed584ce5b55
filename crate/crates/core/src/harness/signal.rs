//! Synthetic signals: a `k`-sparse head plus an optional tail on the rest.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::SeedTree;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportModel {
    #[default]
    UniformRandom,
    /// `k` consecutive indices (cyclically) from a random start.
    AdversarialClustered,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueModel {
    /// Random signs, magnitude 1.
    #[default]
    Unit,
    Gaussian,
    /// The `r`-th head entry (0-based, in sampling order) has magnitude `1/(r+1)`.
    PowerLaw,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailModel {
    #[default]
    None,
    /// i.i.d. `N(0, sigma^2)` on every non-head index.
    Gaussian { sigma: f64 },
    /// Equal magnitudes with random signs, total l2 norm `mass`.
    Flat { mass: f64 },
    /// `count` random non-head indices at `+-level`.
    HeavyTail { count: usize, level: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub n: u64,
    pub k: usize,
    #[serde(default)]
    pub support: SupportModel,
    #[serde(default)]
    pub values: ValueModel,
    #[serde(default)]
    pub tail: TailModel,
    #[serde(default)]
    pub seed: u64,
}

impl SignalSpec {
    pub fn new(n: u64, k: usize) -> Self {
        SignalSpec { n, k, support: SupportModel::default(), values: ValueModel::default(), tail: TailModel::None, seed: 0 }
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub x: Vec<f64>,
    /// Planted head support, sorted.
    pub head: Vec<u64>,
}

impl Signal {
    /// `x` restricted to the complement of the planted head.
    pub fn tail(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        for &i in &self.head {
            z[i as usize] = 0.0;
        }
        z
    }
}

/// Largest signal the generator materializes.
pub const MAX_SIGNAL: u64 = 1 << 26;

pub fn gen_signal(spec: &SignalSpec) -> Result<Signal> {
    let n = spec.n;
    if n == 0 || n > MAX_SIGNAL {
        return Err(invalid(format!("need 1 <= N <= {MAX_SIGNAL}, got {n}")));
    }
    if spec.k as u64 > n {
        return Err(invalid(format!("k = {} exceeds N = {n}", spec.k)));
    }
    let seeds = SeedTree::new(spec.seed);
    let mut rng = seeds.child("support").rng();
    let n_us = n as usize;
    let mut order: Vec<u64> = match spec.support {
        SupportModel::UniformRandom => sample(&mut rng, n_us, spec.k).into_iter().map(|i| i as u64).collect(),
        SupportModel::AdversarialClustered => {
            let start = rng.random_range(0..n);
            (0..spec.k as u64).map(|j| (start + j) % n).collect()
        }
    };
    let mut x = vec![0.0; n_us];
    let mut rng = seeds.child("values").rng();
    for (r, &i) in order.iter().enumerate() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        x[i as usize] = match spec.values {
            ValueModel::Unit => sign,
            ValueModel::Gaussian => loop {
                let g: f64 = rng.sample(StandardNormal);
                if g != 0.0 {
                    break g;
                }
            },
            ValueModel::PowerLaw => sign / (r as f64 + 1.0),
        };
    }
    order.sort_unstable();
    let mut rng = seeds.child("tail").rng();
    let is_head = |i: usize| order.binary_search(&(i as u64)).is_ok();
    match spec.tail {
        TailModel::None => {}
        TailModel::Gaussian { sigma } => {
            check_scale(sigma)?;
            for (i, v) in x.iter_mut().enumerate() {
                let g: f64 = rng.sample(StandardNormal);
                if !is_head(i) {
                    *v = sigma * g;
                }
            }
        }
        TailModel::Flat { mass } => {
            check_scale(mass)?;
            let rest = n_us - order.len();
            if rest > 0 {
                let level = mass / (rest as f64).sqrt();
                for (i, v) in x.iter_mut().enumerate() {
                    let s = rng.random_bool(0.5);
                    if !is_head(i) {
                        *v = if s { level } else { -level };
                    }
                }
            }
        }
        TailModel::HeavyTail { count, level } => {
            check_scale(level)?;
            let free: Vec<usize> = (0..n_us).filter(|&i| !is_head(i)).collect();
            if count > free.len() {
                return Err(invalid(format!("{count} heavy tail entries do not fit in {} free slots", free.len())));
            }
            for p in sample(&mut rng, free.len(), count) {
                x[free[p]] = if rng.random_bool(0.5) { level } else { -level };
            }
        }
    }
    Ok(Signal { x, head: order })
}

fn check_scale(v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("tail scale must be finite and non-negative, got {v}")))
    }
}
