//! Monte-Carlo experiments: generate, encode, decode, score.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::SeedTree;
use crate::sparse::{tail_norm, SparseVector};
use crate::toplevel::{componentwise_median, gaussian_matrix, omp_baseline, EngineConfig, TopLevelSystem, ToplevelConfig};
use crate::weak::SketchRecipe;

use super::signal::{gen_signal, Signal, SignalSpec};

pub const SCHEMA_VERSION: u64 = 1;

/// Relative error below which an exactly sparse signal counts as recovered.
pub const EXACT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decoder", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecoderSpec {
    /// Returns the signal itself.
    Oracle,
    /// OMP on a Gaussian matrix with `m` rows.
    Omp { m: usize },
    /// Top-level system; with `copies > 1`, the component-wise median of
    /// independently seeded copies.
    Toplevel {
        eps: f64,
        #[serde(default)]
        engine: EngineConfig,
        #[serde(default)]
        recipe: SketchRecipe,
        #[serde(default = "one")]
        copies: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u64,
    pub seed: u64,
    pub trials: usize,
    pub signal: SignalSpec,
    pub decoder: DecoderSpec,
    /// Approximation factor a trial must meet when the tail is nonzero.
    pub c: f64,
    /// Adds a decode-time column; off by default so output is reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("schema_version {} unsupported", self.schema_version)));
        }
        if !(self.c >= 1.0) {
            return Err(invalid(format!("C must be at least 1, got {}", self.c)));
        }
        if self.signal.k as u64 > self.signal.n || self.signal.n == 0 {
            return Err(invalid("signal needs 1 <= N and k <= N"));
        }
        match &self.decoder {
            DecoderSpec::Omp { m } if *m == 0 || *m as u64 > self.signal.n => {
                Err(invalid(format!("OMP needs 1 <= m <= N, got m = {m}")))
            }
            DecoderSpec::Toplevel { copies: 0, .. } => Err(invalid("copies must be at least 1")),
            DecoderSpec::Toplevel { .. } if self.signal.k == 0 => Err(invalid("top-level decoding needs k >= 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub l2_error: f64,
    pub tail_norm: f64,
    /// `l2_error / tail_norm`; absent when the tail is zero.
    pub ratio: Option<f64>,
    pub success: bool,
    pub measurements: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub failures: usize,
    /// `None` when there were no trials.
    pub failure_rate: Option<f64>,
    pub wilson_low: Option<f64>,
    pub wilson_high: Option<f64>,
    pub median_decode_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(failures: usize, trials: usize) -> Option<(f64, f64)> {
    if trials == 0 {
        return None;
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    Some(((center - half).max(0.0), (center + half).min(1.0)))
}

pub fn l2_distance(x: &[f64], x_hat: &SparseVector) -> f64 {
    let est = x_hat.entries();
    let mut p = 0;
    let mut d2 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let mut e = xi;
        if p < est.len() && est[p].0 == i as u64 {
            e -= est[p].1;
            p += 1;
        }
        d2 += e * e;
    }
    // estimate entries outside [N]
    d2 += est[p..].iter().map(|e| e.1 * e.1).sum::<f64>();
    d2.sqrt()
}

/// The success rule: ratio at most `c` with a nonzero tail, relative error at
/// most `EXACT_TOLERANCE` otherwise.
pub fn score(x: &[f64], x_hat: &SparseVector, k: usize, c: f64) -> (f64, f64, Option<f64>, bool) {
    let err = l2_distance(x, x_hat);
    let tail = tail_norm(x, k);
    if tail > 0.0 {
        let ratio = err / tail;
        (err, tail, Some(ratio), ratio <= c)
    } else {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (err, tail, None, err <= EXACT_TOLERANCE * norm)
    }
}

/// Seeds of trial `t`: signal and system.
pub fn trial_seeds(master: u64, t: usize) -> (u64, u64) {
    let node = SeedTree::new(master).child(&format!("trial/{t}"));
    (node.derive("signal"), node.derive("system"))
}

/// Decodes one signal with the configured decoder; returns the estimate and
/// the number of measurements used.
pub fn decode_signal(decoder: &DecoderSpec, signal: &Signal, k: usize, system_seed: u64) -> Result<(SparseVector, usize, f64)> {
    let n = signal.x.len();
    match decoder {
        DecoderSpec::Oracle => Ok((SparseVector::from_dense(&signal.x), 0, 0.0)),
        DecoderSpec::Omp { m } => {
            let phi = gaussian_matrix(*m, n, &mut SeedTree::new(system_seed).rng());
            let y = &phi * DVector::from_column_slice(&signal.x);
            let start = Instant::now();
            let est = omp_baseline(&phi, y.as_slice(), k)?;
            Ok((est, *m, start.elapsed().as_secs_f64()))
        }
        DecoderSpec::Toplevel { eps, engine, recipe, copies } => {
            let seeds = SeedTree::new(system_seed);
            let entries = SparseVector::from_dense(&signal.x);
            let mut outs = Vec::with_capacity(*copies);
            let mut total = 0;
            let mut seconds = 0.0;
            for c in 0..*copies {
                let mut cfg = ToplevelConfig::new(n as u64, k, *eps, engine.clone(), seeds.derive(&format!("copy/{c}")));
                cfg.recipe = *recipe;
                let sys = TopLevelSystem::build(cfg)?;
                let bundle = sys.encode(entries.entries())?;
                total += bundle.len();
                let start = Instant::now();
                outs.push(sys.decode(&bundle)?);
                seconds += start.elapsed().as_secs_f64();
            }
            let start = Instant::now();
            let est = if outs.len() == 1 { outs.pop().expect("one copy") } else { componentwise_median(&outs) };
            Ok((est, total, seconds + start.elapsed().as_secs_f64()))
        }
    }
}

pub fn run_trial(config: &ExperimentConfig, t: usize) -> Result<TrialRecord> {
    let (signal_seed, system_seed) = trial_seeds(config.seed, t);
    let spec = SignalSpec { seed: signal_seed, ..config.signal.clone() };
    let signal = gen_signal(&spec)?;
    let (est, measurements, seconds) = decode_signal(&config.decoder, &signal, spec.k, system_seed)?;
    let (l2_error, tail, ratio, success) = score(&signal.x, &est, spec.k, config.c);
    Ok(TrialRecord {
        trial: t,
        seed: signal_seed,
        l2_error,
        tail_norm: tail,
        ratio,
        success,
        measurements,
        decode_seconds: config.record_timing.then_some(seconds),
    })
}

/// Runs every trial (in parallel) and merges the records in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let records = (0..config.trials).into_par_iter().map(|t| run_trial(config, t)).collect::<Result<Vec<_>>>()?;
    let failures = records.iter().filter(|r| !r.success).count();
    let wilson = wilson_interval(failures, records.len());
    let mut times: Vec<f64> = records.iter().filter_map(|r| r.decode_seconds).collect();
    let median_decode_seconds = if times.is_empty() {
        None
    } else {
        times.sort_by(|a, b| a.total_cmp(b));
        Some(times[(times.len() - 1) / 2])
    };
    let summary = Summary {
        trials: records.len(),
        failures,
        failure_rate: (!records.is_empty()).then(|| failures as f64 / records.len() as f64),
        wilson_low: wilson.map(|w| w.0),
        wilson_high: wilson.map(|w| w.1),
        median_decode_seconds,
    };
    Ok(ExperimentResult { records, summary })
}

pub fn write_records_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let timing = records.iter().any(|r| r.decode_seconds.is_some());
    let mut header = vec!["trial", "seed", "l2_error", "tail_norm", "ratio", "success", "measurements"];
    if timing {
        header.push("decode_seconds");
    }
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.l2_error.to_string(),
            r.tail_norm.to_string(),
            r.ratio.map(|v| v.to_string()).unwrap_or_default(),
            r.success.to_string(),
            r.measurements.to_string(),
        ];
        if timing {
            row.push(r.decode_seconds.map(|v| v.to_string()).unwrap_or_default());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn records_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, records)?;
    Ok(buf)
}
