//! The `picm` command line.
//!
//! Exit status: 0 when every check passes, 2 when a mathematical check fails,
//! 1 on usage, input or resource errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::atoms::{
    check_invariance_measure, decompose_measure, jump_from_cycle, support_partition, synthesize_jump,
    JumpCoefficients,
};
use crate::cdf::{measure_from_cdf, AtomicMeasure, Cdf};
use crate::cycles::{cycle_of, enumerate_levels, CycleSet};
use crate::dynamics::PadicMap;
use crate::error::Error;
use crate::exact::{fmt_ratio, parse_ratio, sample_rationals, uniform_grid, Budget, Rat01};
use crate::singular::{bernoulli_exact, bernoulli_eval, extract_parts, verify_fesp, BernoulliWeights, Precision};
use crate::transfer::{banach_proxy, transfer_power_padic, Phi, Polynomial};

pub const CYCLES_SCHEMA: &str = "picm.cycles/1";

#[derive(Parser, Debug)]
#[command(name = "picm", version, about = "Invariant measures of x -> px mod 1 in exact arithmetic")]
pub struct RunConfig {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Maximum number of summands for pointwise sums (default: $PICM_BUDGET or 2^26).
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Seed for random point sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true, visible_alias = "csv")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the cycle sets of D by level.
    Cycles {
        #[arg(long)]
        p: u32,
        /// A single level.
        #[arg(long, conflicts_with = "max_level")]
        level: Option<u64>,
        /// All levels 1..=N.
        #[arg(long)]
        max_level: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Build a jump solution from coefficients and list its atoms.
    Jump {
        #[arg(long)]
        p: u32,
        /// Coefficients JSON file.
        #[arg(long, required_unless_present = "coeff")]
        coeffs: Option<PathBuf>,
        /// Inline coefficient `level:label:weight`, repeatable.
        #[arg(long)]
        coeff: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Split an atomic measure into cycle solutions.
    Decompose {
        #[arg(long)]
        p: u32,
        /// JSON file holding `{"atoms": [...]}` or a jump CDF.
        #[arg(long)]
        atoms: PathBuf,
        /// Accepted shortfall of the total mass below 1.
        #[arg(long, default_value = "0")]
        tail: String,
    },
    /// Check the invariance equation at random points.
    Verify {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Largest denominator of sampled points.
        #[arg(long, default_value_t = 1000)]
        max_den: u64,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Tabulate powers of the transfer operator on a grid.
    Iterate {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        phi: String,
        #[arg(long)]
        m: u64,
        /// Emit every power 1..=m rather than m alone.
        #[arg(long)]
        all: bool,
        /// Cesàro window `lo:hi` standing in for a Banach limit; replaces --m.
        #[arg(long)]
        window: Option<String>,
        /// Number of equally spaced points, endpoints included.
        #[arg(long, default_value_t = 101)]
        grid: u64,
    },
    /// Tabulate a Bernoulli digit CDF.
    Bernoulli {
        #[arg(long)]
        p: u32,
        /// Comma separated digit weights.
        #[arg(long)]
        weights: String,
        /// Truncate to this many digits (default: exact).
        #[arg(long)]
        digits: Option<u32>,
        /// Number of equally spaced points, endpoints included.
        #[arg(long, default_value_t = 101)]
        grid: u64,
    },
    /// Estimate the continuous, jump and singular parts of a CDF.
    Extract {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 8)]
        max_level: u64,
        /// Number of equally spaced points, endpoints included.
        #[arg(long, default_value_t = 4097)]
        grid: u64,
    },
    /// List the fixed points k/(p-1) and check their Dirac measures.
    FixedPoints {
        #[arg(long)]
        p: u32,
    },
}

/// The 5-knot ramp used as a piecewise-linear test input.
pub fn ramp() -> Cdf {
    let k = |x: (i64, i64), v: (i64, i64)| {
        (Rat01::new(x.0, x.1).expect("knot"), BigRational::new(v.0.into(), v.1.into()))
    };
    Cdf::piecewise_linear(vec![k((0, 1), (0, 1)), k((1, 5), (1, 10)), k((1, 3), (1, 3)), k((7, 10), (1, 2)), k((1, 1), (1, 1))])
        .expect("valid ramp")
}

fn parse_weights(s: &str) -> anyhow::Result<Vec<BigRational>> {
    s.split(',').map(|w| Ok(parse_ratio(w.trim())?)).collect()
}

/// Resolves a candidate from the built-in registry:
/// `identity`, `square`, `cubic`, `ramp`, `jump:m:l`, `bernoulli:w0,w1,...[:digits]`, `json:path`.
pub fn parse_phi(spec: &str, p: u32) -> anyhow::Result<Phi> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match head {
        "identity" => Phi::Cdf(Cdf::Identity),
        "square" => Phi::Polynomial(Polynomial::square()),
        "cubic" => Phi::Polynomial(Polynomial::cubic()),
        "ramp" => Phi::Cdf(ramp()),
        "jump" => {
            let (m, l) = rest.split_once(':').context("expected jump:<level>:<label>")?;
            let m: u64 = m.parse().context("level")?;
            let c = CycleSet::new(p, m, l.parse().map_err(|_| Error::Parse(format!("bad label `{l}`")))?)?;
            Phi::Cdf(jump_from_cycle(&c)?)
        }
        "bernoulli" => {
            let (ws, digits) = match rest.rsplit_once(':') {
                Some((ws, d)) => (ws, Some(d.parse::<u32>().context("digit count")?)),
                None => (rest, None),
            };
            let w = parse_weights(ws)?;
            let bw = BernoulliWeights::new(w.len() as u32, w)?;
            Phi::Cdf(Cdf::bernoulli(bw, digits.map_or(Precision::Exact, Precision::Digits)))
        }
        "json" => {
            let text = fs::read_to_string(rest).with_context(|| format!("reading {rest}"))?;
            Phi::Cdf(Cdf::from_json(&text)?)
        }
        _ => bail!("unknown phi `{spec}` (expected identity, square, cubic, ramp, jump:m:l, bernoulli:w0,w1,..., json:path)"),
    })
}

fn as_cdf(phi: Phi) -> anyhow::Result<Cdf> {
    match phi {
        Phi::Cdf(c) => Ok(c),
        Phi::Polynomial(_) => bail!("this command needs a CDF, not a polynomial"),
    }
}

fn parse_window(s: &str) -> anyhow::Result<(u64, u64)> {
    let (lo, hi) = s.split_once(':').context("expected a window lo:hi")?;
    Ok((lo.parse().context("window start")?, hi.parse().context("window end")?))
}

fn cells(points: u64) -> anyhow::Result<u64> {
    if points < 2 {
        bail!("a grid needs at least 2 points");
    }
    Ok(points - 1)
}

fn csv(out: &mut Vec<u8>, row: &[String]) {
    writeln!(out, "{}", row.join(",")).expect("write to buffer");
}

fn json<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer_pretty(&mut *out, value).expect("serializable");
    out.push(b'\n');
}

#[derive(Serialize)]
struct CyclesDoc<'a> {
    schema: &'static str,
    p: u32,
    sets: &'a [CycleSet],
}

/// Runs one command, filling `out`; returns whether all checks passed.
pub fn run(config: &RunConfig, out: &mut Vec<u8>) -> anyhow::Result<bool> {
    let budget = config.common.budget.map(Budget::new).unwrap_or_else(Budget::from_env);
    match &config.command {
        Command::Cycles { p, level, max_level, format } => {
            let levels = match (level, max_level) {
                (Some(m), None) => *m..=*m,
                (None, Some(m)) => 1..=*m,
                _ => bail!("give exactly one of --level or --max-level"),
            };
            let mut sets = Vec::new();
            for m in levels {
                sets.extend(enumerate_levels(*p, m, &budget)?);
            }
            match format {
                Format::Csv => {
                    csv(out, &["level".into(), "label".into(), "point_index".into(), "point".into()]);
                    for c in &sets {
                        for (i, y) in c.points().iter().enumerate() {
                            csv(out, &[c.level().to_string(), c.label().to_string(), i.to_string(), y.to_string()]);
                        }
                    }
                }
                Format::Json => json(out, &CyclesDoc { schema: CYCLES_SCHEMA, p: *p, sets: &sets }),
            }
            Ok(true)
        }
        Command::Jump { p, coeffs, coeff, format } => {
            let mut c = match coeffs {
                Some(path) => JumpCoefficients::from_json(&read(path)?)?,
                None => JumpCoefficients::new(),
            };
            for spec in coeff {
                let parts: Vec<&str> = spec.splitn(3, ':').collect();
                let [m, l, w] = parts[..] else { bail!("expected level:label:weight, got `{spec}`") };
                let label = l.parse::<num_bigint::BigUint>().map_err(|_| Error::Parse(format!("bad label `{l}`")))?;
                c.add(m.parse().context("level")?, label, parse_ratio(w)?);
            }
            let cdf = synthesize_jump(*p, &c)?;
            match format {
                Format::Csv => {
                    csv(out, &["location".into(), "mass".into()]);
                    for a in measure_from_cdf(&cdf)?.atoms() {
                        csv(out, &[a.location.to_string(), fmt_ratio(&a.mass)]);
                    }
                }
                Format::Json => out.extend_from_slice((cdf.to_json() + "\n").as_bytes()),
            }
            Ok(true)
        }
        Command::Decompose { p, atoms, tail } => {
            let text = read(atoms)?;
            let mu = match serde_json::from_str::<AtomicMeasure>(&text) {
                Ok(mu) => mu,
                Err(_) => measure_from_cdf(&Cdf::from_json(&text)?)?,
            };
            let tail = parse_ratio(tail)?;
            match decompose_measure(*p, &mu, &tail) {
                Ok(c) => {
                    out.extend_from_slice((c.to_json() + "\n").as_bytes());
                    Ok(true)
                }
                Err(e @ (Error::NotInvariant(_) | Error::Validation(_))) => {
                    eprintln!("{e}");
                    Ok(false)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Verify { p, phi, points, max_den, tol, format } => {
            let phi = parse_phi(phi, *p)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.common.seed);
            let pts = sample_rationals(&mut rng, *points, *max_den);
            let report = verify_fesp(*p, &phi, &pts, *tol)?;
            match format {
                Format::Json => json(out, &report),
                Format::Csv => {
                    csv(out, &["x".into(), "residual".into(), "approximate".into()]);
                    for r in &report.points {
                        csv(out, &[r.x.to_string(), fmt_ratio(&r.residual), r.approximate.to_string()]);
                    }
                }
            }
            Ok(report.pass)
        }
        Command::Iterate { p, phi, m, all, window, grid } => {
            let phi = parse_phi(phi, *p)?;
            PadicMap::new(*p)?;
            csv(out, &["m".into(), "x".into(), "value".into(), "abs_err".into()]);
            let grid = uniform_grid(cells(*grid)?);
            if let Some(w) = window {
                let (lo, hi) = parse_window(w)?;
                for x in &grid {
                    let v = banach_proxy(*p, &phi, x, lo, hi, &budget)?.value;
                    let err = (&v - x.as_ratio()).abs();
                    csv(out, &[format!("cesaro:{lo}-{hi}"), x.to_string(), fmt_ratio(&v), fmt_ratio(&err)]);
                }
            } else {
                let powers = if *all { 1..=*m } else { *m..=*m };
                for k in powers {
                    for x in &grid {
                        let v = transfer_power_padic(*p, &phi, k, x, &budget)?.value;
                        let err = (&v - x.as_ratio()).abs();
                        csv(out, &[k.to_string(), x.to_string(), fmt_ratio(&v), fmt_ratio(&err)]);
                    }
                }
            }
            Ok(true)
        }
        Command::Bernoulli { p, weights, digits, grid } => {
            let bw = BernoulliWeights::new(*p, parse_weights(weights)?)?;
            csv(out, &["x".into(), "value".into()]);
            for x in uniform_grid(cells(*grid)?) {
                let v = match digits {
                    Some(d) => bernoulli_eval(&bw, &x, *d),
                    None => bernoulli_exact(&bw, &x),
                };
                csv(out, &[x.to_string(), fmt_ratio(&v)]);
            }
            Ok(true)
        }
        Command::Extract { p, phi, max_level, grid } => {
            let cdf = as_cdf(parse_phi(phi, *p)?)?;
            let report = extract_parts(*p, &cdf, *max_level, cells(*grid)?, &budget)?;
            json(out, &report);
            if let Some(f) = &report.failure {
                eprintln!("decomposition failure: {f}");
            }
            Ok(report.consistent())
        }
        Command::FixedPoints { p } => {
            let map = PadicMap::new(*p)?;
            csv(out, &["k".into(), "point".into(), "level".into(), "invariant".into()]);
            let mut all_pass = true;
            for (k, x) in map.fixed_points().into_iter().enumerate() {
                let mu = AtomicMeasure::dirac(x.clone())?;
                let pass = map.dirac_invariant(&x)
                    && check_invariance_measure(*p, &mu, &support_partition(*p, &mu)?)?.pass;
                all_pass &= pass;
                let level = cycle_of(*p, &x)?.level();
                csv(out, &[k.to_string(), x.to_string(), level.to_string(), pass.to_string()]);
            }
            Ok(all_pass)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Parses arguments, runs, writes output and maps the outcome to an exit code.
pub fn main_with_args(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> ExitCode {
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut out = Vec::new();
    let outcome = run(&config, &mut out);
    let written = match &config.common.out {
        Some(path) => fs::write(path, &out).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(&out).context("writing stdout"),
    };
    match (outcome, written) {
        (Err(e), _) | (Ok(_), Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        (Ok(true), Ok(())) => ExitCode::SUCCESS,
        (Ok(false), Ok(())) => ExitCode::from(2),
    }
}
