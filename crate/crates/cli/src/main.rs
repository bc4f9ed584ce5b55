use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sprsrec::codes::{lw_join_tolerant, CodeDescriptor, Tuple};
use sprsrec::expander::{build_graph, verify_expansion};
use sprsrec::field::FieldSpec;
use sprsrec::harness::io::{load_config, load_floats, read_matrix_csv, save_floats, write_matrix_csv};
use sprsrec::harness::{gen_signal, run_experiment, write_records_csv, ExperimentConfig, SignalSpec, TailModel, SCHEMA_VERSION};
use sprsrec::lowerbound::{adversarial_pair, dichotomy};
use sprsrec::recursive::{CodeFamily, HeightRule, RootScheme};
use sprsrec::toplevel::{gaussian_matrix, omp_baseline, EngineConfig, TopLevelSystem, ToplevelConfig};
use sprsrec::{SeedTree, SparseVector};

#[derive(Parser)]
#[command(name = "sprsrec", version, about = "Sparse recovery with expander sketches and list-recoverable codes")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent, except for binary outputs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic signal in the binary float format.
    GenSignal {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: usize,
        /// Standard deviation of a Gaussian tail.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Write a Gaussian measurement matrix with N(0, 1/m) entries.
    GenMatrix {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
    },
    /// Sketch a binary signal with the top-level system.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Recover a sparse estimate from a binary sketch.
    Decode {
        #[arg(long)]
        input: PathBuf,
        /// Signal length; required unless given by --config.
        #[arg(long)]
        n: Option<u64>,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Run a Monte-Carlo experiment described by --config.
    Experiment,
    /// Exhaustively check (t, eps) expansion of a hashed graph.
    VerifyExpander {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        buckets: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
    },
    /// Join d projections read from a JSON file.
    LwJoin {
        #[arg(long)]
        input: PathBuf,
    },
    /// Reed-Solomon list recovery from a JSON instance.
    RsRecover {
        #[arg(long)]
        input: PathBuf,
    },
    /// Build an adversarial pair for a Gaussian matrix and run OMP on both.
    LowerboundDemo {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0 / 28.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Orthogonal matching pursuit on a CSV matrix and a binary measurement vector.
    Omp {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// plain, split, lw:<d> or rs:<b>:<r>
    #[arg(long, default_value = "plain", value_parser = parse_engine)]
    engine: EngineConfig,
    #[arg(long, default_value_t = 256)]
    leaf_max: u64,
}

fn parse_engine(s: &str) -> std::result::Result<EngineConfig, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.parse::<usize>().map_err(|e| format!("bad number {p:?} in engine {s:?}: {e}"));
    let code = match parts.as_slice() {
        ["plain"] => return Ok(EngineConfig::Plain),
        ["split"] => CodeFamily::Split,
        ["lw", d] => CodeFamily::LoomisWhitney { d: num(d)? },
        ["rs", b, r] => CodeFamily::ReedSolomon { b: num(b)?, r: num(r)? },
        _ => return Err(format!("unknown engine {s:?}; expected plain, split, lw:<d> or rs:<b>:<r>")),
    };
    Ok(EngineConfig::Recursive { code, leaf_max: 256, scheme: RootScheme::default(), height: HeightRule::default(), rho: None })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LwInput {
    projections: Vec<Vec<Tuple>>,
    #[serde(default)]
    errors: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RsInput {
    /// Binary field GF(2^w).
    #[serde(default)]
    field_width: Option<u32>,
    /// Prime field GF(p).
    #[serde(default)]
    prime: Option<u64>,
    b: usize,
    /// Evaluation points; `0..r` when absent.
    #[serde(default)]
    points: Option<Vec<u64>>,
    sets: Vec<Vec<u64>>,
    rho: f64,
}

#[derive(Serialize)]
struct Entry {
    index: u64,
    value: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<sprsrec::Error>() {
        Some(sprsrec::Error::Infeasible(_)) => 2,
        Some(sprsrec::Error::Numerical(_)) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let seed = c.seed.unwrap_or(0);
    match &cli.command {
        Command::GenSignal { n, k, sigma } => {
            let spec = match &c.config {
                Some(p) => serde_json::from_str::<SignalSpec>(&std::fs::read_to_string(p)?)?,
                None => {
                    let tail = sigma.map_or(TailModel::None, |sigma| TailModel::Gaussian { sigma });
                    SignalSpec::new(*n, *k).with_tail(tail).with_seed(seed)
                }
            };
            let signal = gen_signal(&spec)?;
            let out = c.out.as_deref().context("gen-signal writes a binary file; pass --out")?;
            save_floats(out, &signal.x)?;
            info!("wrote {} values to {}", signal.x.len(), out.display());
            let mut w = io::stdout().lock();
            match c.format {
                Format::Json => writeln!(w, "{}", json!({ "n": spec.n, "head": signal.head }))?,
                Format::Csv => {
                    writeln!(w, "head")?;
                    for i in &signal.head {
                        writeln!(w, "{i}")?;
                    }
                }
            }
        }
        Command::GenMatrix { m, n } => {
            if *m == 0 || *n == 0 {
                bail!(sprsrec::Error::InvalidParameter("matrix needs m, n >= 1".into()));
            }
            let phi = gaussian_matrix(*m, *n, &mut SeedTree::new(seed).rng());
            let w = output(c.out.as_deref())?;
            match c.format {
                Format::Csv => write_matrix_csv(w, &phi)?,
                Format::Json => {
                    let rows: Vec<Vec<f64>> = phi.row_iter().map(|r| r.iter().copied().collect()).collect();
                    serde_json::to_writer(w, &rows)?;
                }
            }
        }
        Command::Encode { input, system } => {
            let x = load_floats(input)?;
            let sys = TopLevelSystem::build(toplevel_config(c, system, Some(x.len() as u64))?)?;
            let bundle = sys.encode_dense(&x)?;
            let out = c.out.as_deref().context("encode writes a binary sketch; pass --out")?;
            save_floats(out, &bundle.flatten())?;
            info!("{} measurements written to {}", bundle.len(), out.display());
        }
        Command::Decode { input, n, system } => {
            let sys = TopLevelSystem::build(toplevel_config(c, system, *n)?)?;
            let bundle = sys.unflatten(&load_floats(input)?)?;
            write_entries(c, &sys.decode(&bundle)?)?;
        }
        Command::Experiment => {
            let path = c.config.as_deref().context("experiment needs --config")?;
            let mut cfg: ExperimentConfig = load_config(path, SCHEMA_VERSION)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let result = run_experiment(&cfg)?;
            let s = &result.summary;
            eprintln!(
                "{} trials, {} failures, rate {}, Wilson 95% [{}, {}]",
                s.trials,
                s.failures,
                fmt_opt(s.failure_rate),
                fmt_opt(s.wilson_low),
                fmt_opt(s.wilson_high)
            );
            let w = output(c.out.as_deref())?;
            match c.format {
                Format::Csv => write_records_csv(w, &result.records)?,
                Format::Json => serde_json::to_writer_pretty(w, &json!({ "records": result.records, "summary": result.summary }))?,
            }
        }
        Command::VerifyExpander { n, degree, buckets, t, eps } => {
            let g = build_graph(*n, *degree, *buckets, seed)?;
            let cert = verify_expansion(&g, *t, *eps)?;
            let mut w = output(c.out.as_deref())?;
            match c.format {
                Format::Json => serde_json::to_writer_pretty(&mut w, &cert)?,
                Format::Csv => {
                    writeln!(w, "t,eps,verified,worst_ratio,worst_set")?;
                    let set: Vec<String> = cert.worst_set.iter().map(|i| i.to_string()).collect();
                    writeln!(w, "{},{},{},{},{}", cert.t, cert.eps, cert.verified, cert.worst_ratio, set.join(" "))?;
                }
            }
            w.flush()?;
        }
        Command::LwJoin { input } => {
            let inst: LwInput = serde_json::from_str(&std::fs::read_to_string(input)?).context("reading the LW instance")?;
            let out = lw_join_tolerant(&inst.projections, inst.errors)?;
            let mut w = output(c.out.as_deref())?;
            match c.format {
                Format::Json => serde_json::to_writer(&mut w, &out)?,
                Format::Csv => {
                    for v in &out {
                        let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                        writeln!(w, "{}", cells.join(","))?;
                    }
                }
            }
            w.flush()?;
        }
        Command::RsRecover { input } => {
            let inst: RsInput = serde_json::from_str(&std::fs::read_to_string(input)?).context("reading the RS instance")?;
            let field = match (inst.field_width, inst.prime) {
                (Some(w), None) => FieldSpec::binary(w)?,
                (None, Some(p)) => FieldSpec::prime(p)?,
                _ => bail!(sprsrec::Error::InvalidParameter("give exactly one of field_width and prime".into())),
            };
            let points = inst.points.unwrap_or_else(|| (0..inst.sets.len() as u64).collect());
            let code = CodeDescriptor::reed_solomon_with_points(field, inst.b, points)?;
            let msgs = code.list_recover(&inst.sets, inst.rho)?;
            let mut w = output(c.out.as_deref())?;
            match c.format {
                Format::Json => serde_json::to_writer(&mut w, &msgs)?,
                Format::Csv => {
                    writeln!(w, "message")?;
                    for m in &msgs {
                        writeln!(w, "{m}")?;
                    }
                }
            }
            w.flush()?;
        }
        Command::LowerboundDemo { m, n, gamma, c: approx, k } => {
            let mut rng = SeedTree::new(seed).rng();
            let phi = gaussian_matrix(*m, *n, &mut rng);
            let pair = adversarial_pair(&phi, *gamma, *approx, &mut rng)?;
            let gap = (&phi * &pair.v - &phi * &pair.v_reflected).norm();
            let d = dichotomy(&phi, &pair, *k, |a, y| omp_baseline(a, y, *k))?;
            let fields = [
                ("spike", pair.spike.to_string()),
                ("spike_value", pair.spike_value.to_string()),
                ("gamma", pair.gamma.to_string()),
                ("delta", pair.delta.to_string()),
                ("v_spike", pair.v[pair.spike].to_string()),
                ("v_reflected_spike", pair.v_reflected[pair.spike].to_string()),
                ("sketch_gap", gap.to_string()),
                ("omp_ok_on_v", d.v_ok.to_string()),
                ("omp_ok_on_v_reflected", d.v_reflected_ok.to_string()),
            ];
            let mut w = output(c.out.as_deref())?;
            match c.format {
                Format::Json => {
                    let obj: serde_json::Map<String, serde_json::Value> = fields
                        .iter()
                        .map(|(key, v)| (key.to_string(), serde_json::from_str(v).unwrap_or_else(|_| json!(v))))
                        .collect();
                    serde_json::to_writer_pretty(&mut w, &obj)?;
                }
                Format::Csv => {
                    writeln!(w, "{}", fields.iter().map(|f| f.0).collect::<Vec<_>>().join(","))?;
                    writeln!(w, "{}", fields.iter().map(|f| f.1.as_str()).collect::<Vec<_>>().join(","))?;
                }
            }
            w.flush()?;
        }
        Command::Omp { matrix, input, k } => {
            let phi = read_matrix_csv(File::open(matrix).with_context(|| format!("opening {}", matrix.display()))?)?;
            let y = load_floats(input)?;
            write_entries(c, &omp_baseline(&phi, &y, *k)?)?;
        }
    }
    Ok(())
}

fn toplevel_config(c: &Common, args: &SystemArgs, n: Option<u64>) -> Result<ToplevelConfig> {
    if let Some(p) = &c.config {
        let cfg: ToplevelConfig = serde_json::from_str(&std::fs::read_to_string(p)?).context("reading the system config")?;
        if let Some(n) = n {
            if n != cfg.n {
                bail!(sprsrec::Error::DimensionMismatch { expected: cfg.n as usize, got: n as usize });
            }
        }
        return Ok(cfg);
    }
    let n = n.context("pass --n or a --config with the system")?;
    let k = args.k.context("pass --k or a --config with the system")?;
    let mut engine = args.engine.clone();
    if let EngineConfig::Recursive { leaf_max, .. } = &mut engine {
        *leaf_max = args.leaf_max;
    }
    Ok(ToplevelConfig::new(n, k, args.eps, engine, c.seed.unwrap_or(0)))
}

fn write_entries(c: &Common, x: &SparseVector) -> Result<()> {
    let mut w = output(c.out.as_deref())?;
    match c.format {
        Format::Json => {
            let entries: Vec<Entry> = x.entries().iter().map(|&(index, value)| Entry { index, value }).collect();
            serde_json::to_writer(&mut w, &entries)?;
        }
        Format::Csv => {
            writeln!(w, "index,value")?;
            for (i, v) in x.entries() {
                writeln!(w, "{i},{v}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}
