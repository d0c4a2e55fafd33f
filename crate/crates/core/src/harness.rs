//! Experiment orchestration: R-sweeps over the example families, power-law
//! fits, the fixed-inequality report and plain CSV/SVG emission.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, WplError};
use crate::exponents::ExponentPoint;
use crate::extension::map_slices;
use crate::families;
use crate::grid::SpaceTimeGrid;
use crate::norms::{combine_slices, l2_norm_profile, SliceSummary};
use crate::profile::FrequencyProfile;
use crate::wavepacket::decompose;

/// Sweep grid spacing in x and t.
pub const SWEEP_DX: f64 = 0.75;
pub const SWEEP_DT: f64 = 1.5;
/// Quadrature slack on the hard inequalities.
pub const INEQUALITY_SLACK: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    F0,
    F1,
    Many,
    Bundle,
    Star,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::F0 => "f0",
            Self::F1 => "f1",
            Self::Many => "many",
            Self::Bundle => "bundle",
            Self::Star => "star",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = WplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f0" => Ok(Self::F0),
            "f1" => Ok(Self::F1),
            "many" => Ok(Self::Many),
            "bundle" => Ok(Self::Bundle),
            "star" => Ok(Self::Star),
            _ => Err(WplError::InvalidArgument(format!("unknown family '{s}'"))),
        }
    }
}

/// How the family parameter follows R. `SqrtR` picks the largest admissible
/// count near R^{1/2} for bundle/star and width R^{-1/2}/2 for `many`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum NRule {
    Const(usize),
    SqrtR,
}

impl std::str::FromStr for NRule {
    type Err = WplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" | "sqrtR" => Ok(Self::SqrtR),
            k => k.parse().map(Self::Const).map_err(|_| WplError::InvalidArgument(format!("bad N rule '{s}'"))),
        }
    }
}

/// The family parameter at radius `r`: a count for bundle/star, a width for
/// `many`, nothing for f0/f1.
pub fn family_parameter(kind: FamilyKind, rule: NRule, r: f64) -> Option<f64> {
    match (kind, rule) {
        (FamilyKind::F0 | FamilyKind::F1, _) => None,
        (FamilyKind::Many, NRule::SqrtR) => Some(0.5 / r.sqrt()),
        (FamilyKind::Many, NRule::Const(k)) => Some(1.0 / k as f64),
        (FamilyKind::Bundle, NRule::SqrtR) => Some(families::bundle_n(r) as f64),
        (FamilyKind::Star, NRule::SqrtR) => Some(families::star_n(r) as f64),
        (_, NRule::Const(k)) => Some(k as f64),
    }
}

pub fn build_profile(kind: FamilyKind, rule: NRule, r: f64) -> Result<FrequencyProfile> {
    let m = families::default_samples(r);
    let param = family_parameter(kind, rule, r);
    match kind {
        FamilyKind::F0 => families::make_f0(m),
        FamilyKind::F1 => families::make_f1(r, m),
        FamilyKind::Many => families::make_many(param.unwrap(), m),
        FamilyKind::Bundle => families::make_bundle(r, param.unwrap() as usize, m),
        FamilyKind::Star => families::make_star(r, param.unwrap() as usize, m),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub r: f64,
    pub n: Option<f64>,
    pub p: f64,
    pub lp_norm: f64,
    pub l2_norm: f64,
    pub s: f64,
    pub claimed: (f64, f64, f64),
    pub lhs_rhs_ratio: f64,
    pub band_l2: f64,
    pub sup: f64,
    pub l1_norm: f64,
    /// Hard inequalities that failed on this row.
    pub violations: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub family: String,
    pub p: f64,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub lp_fit: Option<PowerFit>,
    pub ratio_fit: Option<PowerFit>,
    /// (R, message) for rows that could not be computed.
    pub errors: Vec<(f64, String)>,
}

/// Least squares line through the pairs, in log-log coordinates if asked.
pub fn fit_power_law(pairs: &[(f64, f64)], log_log: bool) -> Result<PowerFit> {
    if pairs.len() < 3 {
        return Err(WplError::TooFewPoints { have: pairs.len(), need: 3 });
    }
    if log_log && pairs.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(WplError::InvalidArgument("log-log fit needs positive values".into()));
    }
    let pts: Vec<(f64, f64)> = if log_log { pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect() } else { pairs.to_vec() };
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(WplError::InvalidArgument("fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerFit { slope, intercept, r2 })
}

/// Streamed norms of Ef on the sweep grid over [-R, R]^2.
pub struct MeasuredField {
    pub lp: Vec<f64>,
    pub band_l2: f64,
    pub sup: f64,
}

pub fn measure_field(f: &FrequencyProfile, r: f64, ps: &[f64]) -> Result<MeasuredField> {
    let grid = SpaceTimeGrid::ball_with_spacing(r, SWEEP_DX, SWEEP_DT)?;
    let slices = map_slices(f, &grid, |_, t, s| SliceSummary::of_slice(&grid, t, s, ps, r))?;
    let norms = combine_slices(&grid, ps, &slices);
    Ok(MeasuredField { lp: norms.lp, band_l2: norms.band_l2, sup: norms.sup })
}

/// The band and sup inequalities with quadrature slack; returns failures.
pub fn hard_inequality_violations(r: f64, band_l2: f64, sup: f64, l2: f64, l1: f64) -> Vec<String> {
    let mut out = Vec::new();
    let band_bound = (2.0 * std::f64::consts::PI * 2.0 * r).sqrt() * l2;
    if band_l2 > band_bound * (1.0 + INEQUALITY_SLACK) {
        out.push(format!("band L2 {band_l2:.6e} exceeds {band_bound:.6e}"));
    }
    if sup > l1 * (1.0 + INEQUALITY_SLACK) {
        out.push(format!("sup {sup:.6e} exceeds L1 {l1:.6e}"));
    }
    out
}

pub fn run_sweep(
    family: FamilyKind,
    p: f64,
    r_list: &[f64],
    rule: NRule,
    claimed: &ExponentPoint,
    seed: u64,
) -> Result<SweepReport> {
    if r_list.len() < 3 {
        return Err(WplError::TooFewPoints { have: r_list.len(), need: 3 });
    }
    if r_list.windows(2).any(|w| !(w[0] < w[1])) || r_list[0] < 256.0 {
        return Err(WplError::InvalidArgument("R list must be ascending with every R >= 256".into()));
    }
    if (claimed.p - p).abs() > 1e-12 {
        return Err(WplError::InvalidArgument(format!("claimed point has p = {}, sweep uses p = {p}", claimed.p)));
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &r in r_list {
        match sweep_row(family, p, r, rule, claimed) {
            Ok(row) => rows.push(row),
            Err(e) => errors.push((r, e.to_string())),
        }
    }
    let fit = |q: fn(&SweepRow) -> f64| {
        if rows.len() >= 3 {
            fit_power_law(&rows.iter().map(|row| (row.r, q(row))).collect::<Vec<_>>(), true).ok()
        } else {
            None
        }
    };
    let lp_fit = fit(|row| row.lp_norm);
    let ratio_fit = fit(|row| row.lhs_rhs_ratio);
    Ok(SweepReport { family: family.name().into(), p, seed, rows, lp_fit, ratio_fit, errors })
}

fn sweep_row(family: FamilyKind, p: f64, r: f64, rule: NRule, claimed: &ExponentPoint) -> Result<SweepRow> {
    let f = build_profile(family, rule, r)?;
    let measured = measure_field(&f, r, &[p])?;
    let decomp = decompose(&f, r)?;
    let l2 = l2_norm_profile(&f);
    let l1 = f.l1_norm();
    let lp = measured.lp[0];
    let ratio = lp / (r.powf(claimed.alpha) * decomp.s.powf(claimed.beta) * l2);
    Ok(SweepRow {
        family: family.name().into(),
        r,
        n: family_parameter(family, rule, r),
        p,
        lp_norm: lp,
        l2_norm: l2,
        s: decomp.s,
        claimed: (claimed.p, claimed.alpha, claimed.beta),
        lhs_rhs_ratio: ratio,
        band_l2: measured.band_l2,
        sup: measured.sup,
        l1_norm: l1,
        violations: hard_inequality_violations(r, measured.band_l2, measured.sup, l2, l1),
    })
}

impl SweepReport {
    /// CSV with columns family,R,N,p,lp_norm,l2_norm,S,ratio in a fixed format.
    pub fn write_csv<W: std::io::Write>(&self, w: W, header: bool) -> Result<()> {
        write_rows_csv(&self.rows, w, header)
    }
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[SweepRow], w: W, header: bool) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if header {
        wr.write_record(["family", "R", "N", "p", "lp_norm", "l2_norm", "S", "ratio"])?;
    }
    for r in rows {
        wr.write_record([
            r.family.clone(),
            format!("{}", r.r),
            r.n.map(|n| format!("{n}")).unwrap_or_default(),
            format!("{}", r.p),
            format!("{:.12e}", r.lp_norm),
            format!("{:.12e}", r.l2_norm),
            format!("{:.12e}", r.s),
            format!("{:.12e}", r.lhs_rhs_ratio),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// A log-log plot of named series as a standalone SVG document.
pub fn log_log_svg(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> Result<String> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if pts.is_empty() || pts.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(WplError::InvalidArgument("plot needs positive data".into()));
    }
    let (w, h, m) = (640.0, 420.0, 60.0);
    let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let span = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) }
    };
    let ((x0, x1), (y0, y1)) = (span(&lx), span(&ly));
    let sx = |x: f64| m + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * m);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m).unwrap();
    writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, w / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<text x="{m}" y="{}">log10 x: [{x0:.2}, {x1:.2}]  log10 y: [{y0:.2}, {y1:.2}]</text>"#, h - 20.0).unwrap();
    for (k, (name, data)) in series.iter().enumerate() {
        let c = colors[k % colors.len()];
        let path: Vec<String> = data.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{c}" points="{}"/>"#, path.join(" ")).unwrap();
        for &(x, y) in data {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(x), sy(y)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, w - m - 120.0, m + 16.0 * (k + 1) as f64, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A named profile builder for the fixed-inequality report.
#[derive(Clone)]
pub struct CorpusItem {
    pub label: String,
    pub make: Arc<dyn Fn(f64) -> Result<FrequencyProfile> + Send + Sync>,
}

impl CorpusItem {
    pub fn family(kind: FamilyKind, rule: NRule) -> Self {
        Self { label: kind.name().into(), make: Arc::new(move |r| build_profile(kind, rule, r)) }
    }

    pub fn custom(label: &str, make: impl Fn(f64) -> Result<FrequencyProfile> + Send + Sync + 'static) -> Self {
        Self { label: label.into(), make: Arc::new(make) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityEntry {
    pub label: String,
    pub r: f64,
    pub p: f64,
    pub band_l2: f64,
    pub band_bound: f64,
    pub sup: f64,
    pub l1_norm: f64,
    /// ||Ef||_p / (R^{3/(2p) - 1/4} ||f||_2).
    pub trivial_ratio: f64,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub entries: Vec<InequalityEntry>,
    /// Largest trivial-bound ratio over the corpus.
    pub constant: f64,
    pub skipped: Vec<String>,
}

impl InequalityReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.violations.is_empty())
    }

    pub fn ratios(&self, label: &str) -> Vec<(f64, f64)> {
        self.entries.iter().filter(|e| e.label == label).map(|e| (e.r, e.trivial_ratio)).collect()
    }
}

pub fn verify_fixed_inequalities(corpus: &[CorpusItem], r_list: &[f64], p: f64) -> Result<InequalityReport> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for item in corpus {
        for &r in r_list {
            let f = (item.make)(r)?;
            if f.is_zero() {
                skipped.push(format!("{} at R = {r}: zero profile", item.label));
                continue;
            }
            let m = measure_field(&f, r, &[p])?;
            let (l2, l1) = (l2_norm_profile(&f), f.l1_norm());
            entries.push(InequalityEntry {
                label: item.label.clone(),
                r,
                p,
                band_l2: m.band_l2,
                band_bound: (4.0 * std::f64::consts::PI * r).sqrt() * l2,
                sup: m.sup,
                l1_norm: l1,
                trivial_ratio: m.lp[0] / (r.powf(1.5 / p - 0.25) * l2),
                violations: hard_inequality_violations(r, m.band_l2, m.sup, l2, l1),
            });
        }
    }
    let constant = entries.iter().map(|e| e.trivial_ratio).fold(0.0, f64::max);
    Ok(InequalityReport { entries, constant, skipped })
}
