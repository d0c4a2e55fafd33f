//! `wpl`: command-line front end for the wave-packet laboratory.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use wpl::decoupling::{decoupling_growth_fit_with, AmplitudeLaw};
use wpl::exponents::{lookup, named_vertices, ExponentPoint, CONSTRAINTS};
use wpl::extension::{evaluate_extension, evaluate_field};
use wpl::harness::{build_profile, fit_power_law, log_log_svg, run_sweep, FamilyKind, NRule};
use wpl::norms::{lp_norm_ball, weighted_l2_band};
use wpl::partition::{build_partition_with, PartitionOptions, WeightedPoints};
use wpl::profile::ProfileJson;
use wpl::wavepacket::decompose;
use wpl::{FrequencyProfile, SpaceTimeField, SpaceTimeGrid};

#[derive(Parser)]
#[command(name = "wpl", version, about = "Wave-packet laboratory for the parabola extension operator")]
struct Cli {
    /// JSON file with default values for flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "WPL_SEED")]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write a log-log SVG plot (sweep and decouple).
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an example profile to JSON.
    Example(ExampleArgs),
    /// Evaluate Ef at a point or on the grid [-R, R]^2.
    Extend(ExtendArgs),
    /// Wave-packet decomposition to JSON.
    Decompose(DecomposeArgs),
    /// L^p norms over B_R of a stored field.
    Norm(NormArgs),
    /// Constraint report for an exponent point or the named vertices.
    Polytope(PolytopeArgs),
    /// Polynomial partition of a weighted point set.
    Partition(PartitionArgs),
    /// Decoupling-ratio battery to CSV.
    Decouple(DecoupleArgs),
    /// R-sweep of an example family to CSV.
    Sweep(SweepArgs),
    /// Least-squares power-law fit of two CSV columns.
    Fit(FitArgs),
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "R")]
    r: Option<f64>,
    /// Family parameter rule: `sqrt` or an integer.
    #[arg(long = "N")]
    n: Option<String>,
}

#[derive(Args)]
struct ExtendArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long = "R")]
    r: f64,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, default_value_t = 1025)]
    nx: usize,
    #[arg(long, default_value_t = 513)]
    nt: usize,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long = "R")]
    r: f64,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    p: Vec<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
}

#[derive(Args)]
struct PolytopeArgs {
    /// Vertex name (X, U, V, W, Y, F) or `p,alpha,beta` with fractions allowed.
    #[arg(long)]
    point: Option<String>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long = "D")]
    d: Option<usize>,
    #[arg(long, default_value_t = wpl::partition::DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct DecoupleArgs {
    #[arg(long = "delta-list", value_delimiter = ',')]
    delta_list: Option<Vec<String>>,
    #[arg(long)]
    trials: Option<usize>,
    /// `phase` or `gaussian`.
    #[arg(long, default_value = "phase")]
    law: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "R-list", value_delimiter = ',')]
    r_list: Option<Vec<f64>>,
    #[arg(long = "N-rule")]
    n_rule: Option<String>,
    /// Vertex name or `p,alpha,beta`.
    #[arg(long)]
    claimed: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "R")]
    x: String,
    #[arg(long, default_value = "ratio")]
    y: String,
    /// Fit y against x directly instead of in log-log coordinates.
    #[arg(long)]
    linear: bool,
}

/// Defaults read from `--config`; command-line flags take precedence.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    svg: Option<PathBuf>,
    family: Option<String>,
    #[serde(rename = "R")]
    r: Option<f64>,
    #[serde(rename = "N")]
    n: Option<String>,
    p: Option<f64>,
    #[serde(rename = "R_list")]
    r_list: Option<Vec<f64>>,
    #[serde(rename = "N_rule")]
    n_rule: Option<String>,
    claimed: Option<String>,
    #[serde(rename = "D")]
    d: Option<usize>,
    delta_list: Option<Vec<String>>,
    trials: Option<usize>,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg: Config = match &cli.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out = cli.out.clone().or(cfg.out.clone());
    let svg = cli.svg.clone().or(cfg.svg.clone());
    match cli.cmd {
        Command::Example(a) => {
            let family: FamilyKind = a.family.or(cfg.family).context("--family is required")?.parse()?;
            let r = a.r.or(cfg.r).unwrap_or(256.0);
            let rule: NRule = a.n.or(cfg.n).unwrap_or_else(|| "sqrt".into()).parse()?;
            let f = build_profile(family, rule, r)?;
            emit(out.as_deref(), &serde_json::to_vec_pretty(&f.to_json())?)
        }
        Command::Extend(a) => {
            let f = read_profile(&a.profile)?;
            match (a.x, a.t) {
                (Some(x), Some(t)) => {
                    let z = evaluate_extension(&f, x, t)?;
                    emit(out.as_deref(), format!("{}\n", json!({"x": x, "t": t, "re": z.re, "im": z.im, "abs": z.norm()})).as_bytes())
                }
                (None, None) => {
                    let field = evaluate_field(&f, &SpaceTimeGrid::ball(a.r, a.nx, a.nt)?)?;
                    let path = out.context("--out is required when writing a field")?;
                    field.save(&path)?;
                    Ok(())
                }
                _ => bail!("give both --x and --t, or neither"),
            }
        }
        Command::Decompose(a) => {
            let d = decompose(&read_profile(&a.profile)?, a.r)?;
            emit(out.as_deref(), &serde_json::to_vec_pretty(&d.to_json())?)
        }
        Command::Norm(a) => {
            let field = SpaceTimeField::load(&a.field)?;
            let r = a.r.unwrap_or(field.grid().radius());
            let lp = a.p.iter().map(|&p| lp_norm_ball(&field, p, r).map(|v| json!({"p": p, "norm": v}))).collect::<wpl::Result<Vec<_>>>()?;
            let band = weighted_l2_band(&field, r).ok();
            let doc = json!({"R": r, "lp": lp, "band_l2": band, "sup": field.sup_norm()});
            emit(out.as_deref(), format!("{}\n", serde_json::to_string_pretty(&doc)?).as_bytes())
        }
        Command::Polytope(a) => {
            let points: Vec<(String, ExponentPoint)> = match a.point {
                Some(s) => vec![(s.clone(), parse_point(&s)?)],
                None => named_vertices().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            };
            let docs: Vec<_> = points
                .iter()
                .map(|(name, pt)| {
                    let rep = pt.report();
                    json!({
                        "name": name, "p": pt.p, "alpha": pt.alpha, "beta": pt.beta, "exact": rep.exact,
                        "sufficient": rep.sufficient(), "necessary": rep.necessary(),
                        "tight": rep.tight_constraints(), "violated": rep.violated(),
                        "violated_text": rep.violated().iter().map(|&i| CONSTRAINTS[i - 1]).collect::<Vec<_>>(),
                    })
                })
                .collect();
            emit(out.as_deref(), format!("{}\n", serde_json::to_string_pretty(&docs)?).as_bytes())
        }
        Command::Partition(a) => {
            let pts = WeightedPoints::read_csv(&a.points)?;
            let d = a.d.or(cfg.d).context("--D is required")?;
            let part = build_partition_with(&pts, d, PartitionOptions { tolerance: a.tolerance, seed, ..Default::default() })?;
            emit(out.as_deref(), &serde_json::to_vec_pretty(&part)?)
        }
        Command::Decouple(a) => {
            let deltas = a
                .delta_list
                .or(cfg.delta_list)
                .unwrap_or_else(|| vec!["1/16".into(), "1/64".into(), "1/256".into()])
                .iter()
                .map(|s| parse_fraction(s))
                .collect::<Result<Vec<f64>>>()?;
            let law: AmplitudeLaw = a.law.parse()?;
            let fit = decoupling_growth_fit_with(&deltas, a.trials.or(cfg.trials).unwrap_or(100), seed, law)?;
            let mut buf = Vec::new();
            fit.write_csv(&mut buf)?;
            emit(out.as_deref(), &buf)?;
            eprintln!("slope {:.6} (r2 {:.4})", fit.slope, fit.r2);
            if let Some(path) = svg {
                let pts = fit.maxima.iter().map(|&(d, m)| (1.0 / d, m)).collect();
                std::fs::write(path, log_log_svg("max decoupling ratio vs 1/delta", &[("max ratio", pts)])?)?;
            }
            Ok(())
        }
        Command::Sweep(a) => {
            let family: FamilyKind = a.family.or(cfg.family).context("--family is required")?.parse()?;
            let p = a.p.or(cfg.p).context("--p is required")?;
            let r_list = a.r_list.or(cfg.r_list).unwrap_or_else(|| vec![256.0, 1024.0, 4096.0]);
            let rule: NRule = a.n_rule.or(cfg.n_rule).unwrap_or_else(|| "sqrt".into()).parse()?;
            let claimed = parse_point(&a.claimed.or(cfg.claimed).context("--claimed is required")?)?;
            let rep = run_sweep(family, p, &r_list, rule, &claimed, seed)?;
            let mut buf = Vec::new();
            rep.write_csv(&mut buf, true)?;
            emit(out.as_deref(), &buf)?;
            for (r, e) in &rep.errors {
                eprintln!("R = {r}: {e}");
            }
            for row in &rep.rows {
                for v in &row.violations {
                    eprintln!("R = {}: {v}", row.r);
                }
            }
            if let (Some(l), Some(q)) = (rep.lp_fit, rep.ratio_fit) {
                eprintln!("lp slope {:.4} (r2 {:.4}), ratio slope {:.4} (r2 {:.4})", l.slope, l.r2, q.slope, q.r2);
            }
            if let Some(path) = svg {
                let lp = rep.rows.iter().map(|r| (r.r, r.lp_norm)).collect();
                let ratio = rep.rows.iter().map(|r| (r.r, r.lhs_rhs_ratio)).collect();
                std::fs::write(path, log_log_svg(&format!("{} p = {p}", rep.family), &[("lp_norm", lp), ("ratio", ratio)])?)?;
            }
            Ok(())
        }
        Command::Fit(a) => {
            let mut rd = csv::Reader::from_path(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let headers = rd.headers()?.clone();
            let col = |name: &str| headers.iter().position(|h| h == name).with_context(|| format!("no column '{name}'"));
            let (ix, iy) = (col(&a.x)?, col(&a.y)?);
            let mut pairs = Vec::new();
            for rec in rd.records() {
                let rec = rec?;
                pairs.push((rec[ix].parse::<f64>()?, rec[iy].parse::<f64>()?));
            }
            let fit = fit_power_law(&pairs, !a.linear)?;
            let doc = json!({"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2});
            emit(out.as_deref(), format!("{doc}\n").as_bytes())
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn read_profile(path: &Path) -> Result<FrequencyProfile> {
    let doc: ProfileJson = serde_json::from_str(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?;
    Ok(FrequencyProfile::from_json(&doc)?)
}

fn parse_fraction(s: &str) -> Result<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => Ok(n.trim().parse::<f64>()? / d.trim().parse::<f64>()?),
        None => Ok(s.parse()?),
    }
}

/// A vertex name or `p,alpha,beta`; all-rational input stays exact.
fn parse_point(s: &str) -> Result<ExponentPoint> {
    if let Ok(v) = lookup(s) {
        return Ok(v);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("expected a vertex name or p,alpha,beta, got '{s}'");
    }
    let ratio = |t: &str| -> Option<(i64, i64)> {
        match t.split_once('/') {
            Some((n, d)) => Some((n.parse().ok()?, d.parse().ok()?)),
            None => Some((t.parse().ok()?, 1)),
        }
    };
    if let (Some(p), Some(a), Some(b)) = (ratio(parts[0]), ratio(parts[1]), ratio(parts[2])) {
        return Ok(ExponentPoint::ratios(p, a, b)?);
    }
    Ok(ExponentPoint::new(parse_fraction(parts[0])?, parse_fraction(parts[1])?, parse_fraction(parts[2])?)?)
}
