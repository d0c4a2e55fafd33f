//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails. Tolerances are pinned below.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wpl::decoupling::{decoupling_growth_fit, decoupling_ratio, synthesize_ensemble, AmplitudeLaw};
use wpl::exponents::{lookup, ExponentPoint};
use wpl::extension::evaluate_field;
use wpl::harness::{
    build_profile, family_parameter, fit_power_law, hard_inequality_violations, measure_field, run_sweep, write_rows_csv,
    FamilyKind, NRule,
};
use wpl::norms::l2_norm_profile;
use wpl::partition::{
    build_partition_with, line_cell_incidences, neighborhood_area, random_poly, PartitionOptions, Poly, WeightedPoints,
};
use wpl::wavepacket::{decompose, Decomposition};
use wpl::{FrequencyProfile, SpaceTimeGrid};

const RADII: [f64; 3] = [256.0, 1024.0, 4096.0];
const FAMILIES: [FamilyKind; 5] = [FamilyKind::F0, FamilyKind::F1, FamilyKind::Many, FamilyKind::Bundle, FamilyKind::Star];
const SEED: u64 = 20_240_601;

// Criterion 1.
const RECONSTRUCTION_TOL: f64 = 1e-6;
const EQUIVALENCE_BRACKET: f64 = 16.0;
const COEFFICIENT_BOUND: f64 = 8.0;
const LIMIT_1: Duration = Duration::from_secs(5 * 60);
// Criterion 2.
const S_BRACKET: f64 = 16.0;
// Criterion 3.
const ORACLE_POINTS: usize = 100;
const ORACLE_TOL: f64 = 1e-8;
// Criterion 5.
const SLOPE_TOL: f64 = 0.1;
const LIMIT_5: Duration = Duration::from_secs(30 * 60);
// Criterion 6.
const POLYTOPE_SAMPLES: usize = 1_000_000;
const LIMIT_6: Duration = Duration::from_secs(60);
// Criterion 7.
const IMBALANCE_TOL: f64 = 0.1;
const CLOUDS: usize = 20;
const CLOUD_SIZE: usize = 1000;
const LINES: usize = 100;
const AREA_SLOPE: (f64, f64) = (0.9, 1.1);
const AREA_SIGMAS: f64 = 3.0;
const AREA_SAMPLES: usize = 200_000;
const LIMIT_7: Duration = Duration::from_secs(10 * 60);
// Criterion 8.
const DELTAS: [f64; 3] = [1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0];
const TRIALS: usize = 100;
const GROWTH_SLOPE_MAX: f64 = 0.15;
const TWO_ARC_SLACK: f64 = 1e-9;
const LIMIT_8: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(problems: Vec<String>, summary: String, elapsed: Duration, limit: Option<Duration>) -> Outcome {
    let mut problems = problems;
    if let Some(l) = limit {
        if elapsed > l {
            problems.push(format!("runtime {elapsed:.1?} exceeds {l:?}"));
        }
    }
    let pass = problems.is_empty();
    let detail = if pass { format!("{summary} [{elapsed:.1?}]") } else { format!("{} [{elapsed:.1?}]", problems.join("; ")) };
    Outcome { pass, detail }
}

struct CorpusEntry {
    kind: FamilyKind,
    r: f64,
    f: FrequencyProfile,
    d: Decomposition,
}

fn corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for kind in FAMILIES {
        for r in RADII {
            let f = build_profile(kind, NRule::SqrtR, r).expect("corpus profile");
            let d = decompose(&f, r).expect("corpus decomposition");
            out.push(CorpusEntry { kind, r, f, d });
        }
    }
    out
}

fn criterion_1(corpus: &[CorpusEntry], elapsed: Duration) -> Outcome {
    let mut problems = Vec::new();
    let (mut worst_rec, mut worst_coef, mut eq_lo, mut eq_hi) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for e in corpus {
        let d = &e.d;
        let tag = format!("{} R={}", e.kind.name(), e.r);
        worst_rec = worst_rec.max(d.reconstruction_error);
        worst_coef = worst_coef.max(d.coefficient_constant);
        eq_lo = eq_lo.min(d.equivalence_constant);
        eq_hi = eq_hi.max(d.equivalence_constant);
        if d.reconstruction_error > RECONSTRUCTION_TOL {
            problems.push(format!("{tag}: reconstruction {:.2e}", d.reconstruction_error));
        }
        if !(1.0 / EQUIVALENCE_BRACKET..=EQUIVALENCE_BRACKET).contains(&d.equivalence_constant) {
            problems.push(format!("{tag}: sum|c|^2/||f||^2 = {:.3}", d.equivalence_constant));
        }
        let m = d.max_norm;
        if d.packets.iter().any(|p| p.c.norm() > COEFFICIENT_BOUND * m) {
            problems.push(format!("{tag}: |c| exceeds {COEFFICIENT_BOUND} M"));
        }
    }
    let summary = format!(
        "15 decompositions; max rel. reconstruction {worst_rec:.1e}; sum|c|^2/||f||^2 in [{eq_lo:.3}, {eq_hi:.3}]; max |c|/M = {worst_coef:.3}"
    );
    outcome(problems, summary, elapsed, Some(LIMIT_1))
}

fn criterion_2(corpus: &[CorpusEntry]) -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut seen = Vec::new();
    for e in corpus {
        let n = family_parameter(e.kind, NRule::SqrtR, e.r);
        let scaled = match e.kind {
            FamilyKind::Bundle => e.d.s * n.unwrap(),
            FamilyKind::Star => e.d.s * n.unwrap().sqrt(),
            FamilyKind::F0 => e.d.s * e.r.powf(0.25),
            _ => continue,
        };
        seen.push(format!("{}@{}={scaled:.3}", e.kind.name(), e.r));
        if !(1.0 / S_BRACKET..=S_BRACKET).contains(&scaled) {
            problems.push(format!("{} R={}: scaled S = {scaled:.4}", e.kind.name(), e.r));
        }
    }
    outcome(problems, format!("scaled S: {}", seen.join(" ")), t.elapsed(), None)
}

/// Direct trapezoid sum, independent of the chirp-z evaluator.
fn direct_extension(f: &FrequencyProfile, x: f64, t: f64) -> Complex64 {
    let m = f.len();
    let h = 2.0 / (m - 1) as f64;
    f.samples()
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let w = if j == 0 || j == m - 1 { h / 2.0 } else { h };
            let om = -1.0 + j as f64 * h;
            z * w * Complex64::cis(om * om * t + om * x)
        })
        .sum()
}

fn criterion_3(corpus: &[CorpusEntry]) -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for e in corpus {
        let grid = SpaceTimeGrid::ball(e.r, 1025, 257).expect("grid");
        let field = evaluate_field(&e.f, &grid).expect("field");
        let l1 = e.f.l1_norm();
        let mut err = 0.0f64;
        for _ in 0..ORACLE_POINTS {
            let (ix, it) = (rng.gen_range(0..grid.nx()), rng.gen_range(0..grid.nt()));
            let direct = direct_extension(&e.f, grid.x(ix), grid.t(it));
            err = err.max((field.get(ix, it) - direct).norm() / l1);
        }
        worst = worst.max(err);
        if err > ORACLE_TOL {
            problems.push(format!("{} R={}: max error {err:.2e} ||f||_1", e.kind.name(), e.r));
        }
    }
    outcome(problems, format!("max |FFT - direct| = {worst:.1e} ||f||_1 over 15 x {ORACLE_POINTS} points"), t.elapsed(), None)
}

fn criterion_4(corpus: &[CorpusEntry]) -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    let (mut band_ratio, mut sup_ratio) = (0.0f64, 0.0f64);
    for e in corpus {
        let m = measure_field(&e.f, e.r, &[4.0]).expect("field norms");
        let (l2, l1) = (l2_norm_profile(&e.f), e.f.l1_norm());
        band_ratio = band_ratio.max(m.band_l2 / ((4.0 * std::f64::consts::PI * e.r).sqrt() * l2));
        sup_ratio = sup_ratio.max(m.sup / l1);
        for v in hard_inequality_violations(e.r, m.band_l2, m.sup, l2, l1) {
            problems.push(format!("{} R={}: {v}", e.kind.name(), e.r));
        }
    }
    outcome(
        problems,
        format!("max band/bound = {band_ratio:.4}, max sup/||f||_1 = {sup_ratio:.4} (slack 1%)"),
        t.elapsed(),
        None,
    )
}

fn criterion_5() -> (Outcome, Vec<u8>) {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut csv = Vec::new();
    let cases: [(FamilyKind, f64, ExponentPoint, f64); 2] = [
        (FamilyKind::Bundle, 4.0, lookup("U").unwrap(), -0.25),
        (FamilyKind::Star, 6.0, lookup("W").unwrap(), 0.0),
    ];
    let mut summary = Vec::new();
    for (i, (kind, p, point, lp_slope)) in cases.into_iter().enumerate() {
        let rep = run_sweep(kind, p, &RADII, NRule::SqrtR, &point, SEED).expect("sweep");
        write_rows_csv(&rep.rows, &mut csv, i == 0).expect("csv");
        for (r, e) in &rep.errors {
            problems.push(format!("{} R={r}: {e}", kind.name()));
        }
        for row in &rep.rows {
            problems.extend(row.violations.iter().map(|v| format!("{} R={}: {v}", kind.name(), row.r)));
        }
        let (Some(lp), Some(ratio)) = (rep.lp_fit, rep.ratio_fit) else {
            problems.push(format!("{}: no fit", kind.name()));
            continue;
        };
        if ratio.slope.abs() > SLOPE_TOL {
            problems.push(format!("{}: ratio slope {:.4}", kind.name(), ratio.slope));
        }
        if (lp.slope - lp_slope).abs() > SLOPE_TOL {
            problems.push(format!("{}: lp slope {:.4} vs {lp_slope}", kind.name(), lp.slope));
        }
        summary.push(format!("{} ratio slope {:+.4}, lp slope {:+.4}", kind.name(), ratio.slope, lp.slope));
    }
    (outcome(problems, summary.join("; "), t.elapsed(), Some(LIMIT_5)), csv)
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    for name in ["X", "U", "V", "W", "Y"] {
        let rep = lookup(name).unwrap().report();
        if !(rep.exact && rep.sufficient()) {
            problems.push(format!("{name} not in the sufficient set"));
        }
    }
    let f = lookup("F").unwrap().report();
    if !(f.exact && f.necessary() && !f.sufficient() && f.violated() == vec![5]) {
        problems.push(format!("F: violated {:?}", f.violated()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut violations = 0;
    let mut sufficient = 0;
    for _ in 0..POLYTOPE_SAMPLES {
        let pt = ExponentPoint::new(rng.gen_range(2.0..=6.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.5)).unwrap();
        let rep = pt.report();
        if rep.sufficient() {
            sufficient += 1;
            if !rep.necessary() {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        problems.push(format!("{violations} sufficient points outside the necessary set"));
    }
    let summary = format!("vertices exact; F fails only constraint 5; {sufficient} of {POLYTOPE_SAMPLES} samples sufficient, 0 violations");
    outcome(problems, summary, t.elapsed(), Some(LIMIT_6))
}

fn criterion_7() -> (Outcome, Vec<u8>) {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut csv = String::from("kind,D,index,value\n");
    let mut worst_imb = 0.0f64;
    for d in [1usize, 2, 4] {
        let mut max_inc = 0;
        for cloud in 0..CLOUDS {
            let seed = SEED + 1000 * d as u64 + cloud as u64;
            let pts = WeightedPoints::uniform_disk(CLOUD_SIZE, 1.0, seed);
            let part = match build_partition_with(&pts, d, PartitionOptions { tolerance: IMBALANCE_TOL, seed, ..Default::default() }) {
                Ok(p) => p,
                Err(e) => {
                    problems.push(format!("D={d} cloud {cloud}: {e}"));
                    continue;
                }
            };
            worst_imb = worst_imb.max(part.imbalance);
            csv.push_str(&format!("imbalance,{d},{cloud},{:.12e}\n", part.imbalance));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..LINES {
                let (theta, v) = (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
                let inc = line_cell_incidences(&part, theta, v, 2.0);
                max_inc = max_inc.max(inc.cells);
                if inc.cells > part.product_degree + 1 {
                    problems.push(format!("D={d} cloud {cloud}: line meets {} cells, D_eff = {}", inc.cells, part.product_degree));
                }
            }
        }
        csv.push_str(&format!("max_incidence,{d},0,{max_inc}\n"));
    }

    let rhos = [0.05, 0.1, 0.2];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (k, deg) in [1usize, 2, 3, 4, 1, 2, 3, 4].into_iter().enumerate() {
        let poly = random_poly(deg, 10.0, SEED + k as u64);
        let pairs: Vec<(f64, f64)> = rhos
            .iter()
            .map(|&rho| (rho, neighborhood_area(&poly, rho, 10.0, AREA_SAMPLES, SEED + 77).expect("area").area))
            .collect();
        let slope = fit_power_law(&pairs, true).expect("fit").slope;
        csv.push_str(&format!("area_slope,{deg},{k},{slope:.12e}\n"));
        lo = lo.min(slope);
        hi = hi.max(slope);
        if !(AREA_SLOPE.0..=AREA_SLOPE.1).contains(&slope) {
            problems.push(format!("degree {deg} poly {k}: area slope {slope:.4}"));
        }
    }

    let line = Poly::new(1, vec![0.0, 1.0, 0.0]).unwrap();
    let circle = Poly::with_frame(2, vec![-1.0, 0.0, 0.0, 1.0, 0.0, 1.0], (0.0, 0.0), 5.0).unwrap();
    let (r, rho) = (10.0f64, 0.1f64);
    let strip = 2.0 * (rho * (r * r - rho * rho).sqrt() + r * r * (rho / r).asin());
    let annulus = std::f64::consts::PI * ((5.0 + rho).powi(2) - (5.0 - rho).powi(2));
    let mut sigmas = Vec::new();
    for (name, poly, exact) in [("line", &line, strip), ("circle", &circle, annulus)] {
        let a = neighborhood_area(poly, rho, r, AREA_SAMPLES, SEED).expect("area");
        let z = (a.area - exact).abs() / a.stderr;
        sigmas.push(format!("{name} {z:.2} sigma"));
        csv.push_str(&format!("area_{name},2,0,{:.12e}\n", a.area));
        if z > AREA_SIGMAS {
            problems.push(format!("{name}: area {:.4} vs {exact:.4} ({z:.2} stderr)", a.area));
        }
    }
    let summary = format!(
        "worst imbalance {worst_imb:.4}; incidences within D_eff + 1; area slopes in [{lo:.3}, {hi:.3}]; {}",
        sigmas.join(", ")
    );
    (outcome(problems, summary, t.elapsed(), Some(LIMIT_7)), csv.into_bytes())
}

fn criterion_8() -> (Outcome, Vec<u8>) {
    let t = Instant::now();
    let mut problems = Vec::new();
    let base = synthesize_ensemble(1.0 / 64.0, SEED, AmplitudeLaw::RandomPhase).expect("ensemble");
    let single = decoupling_ratio(&base.restrict(&[7])).expect("ratio");
    if single != 1.0 {
        problems.push(format!("single-arc ratio {single}"));
    }
    let mut two_max = 0.0f64;
    for k in 0..base.arcs.len() - 1 {
        two_max = two_max.max(decoupling_ratio(&base.restrict(&[k, k + 1])).expect("ratio"));
    }
    if two_max > 2f64.sqrt() * (1.0 + TWO_ARC_SLACK) {
        problems.push(format!("two-arc ratio {two_max}"));
    }
    let fit = decoupling_growth_fit(&DELTAS, TRIALS, SEED).expect("battery");
    if !(fit.slope <= GROWTH_SLOPE_MAX) {
        problems.push(format!("growth slope {:.4}", fit.slope));
    }
    let mut csv = Vec::new();
    fit.write_csv(&mut csv).expect("csv");
    let maxima: Vec<String> = fit.maxima.iter().map(|(d, m)| format!("1/{:.0}:{m:.4}", 1.0 / d)).collect();
    let summary = format!(
        "single arc 1 exactly; max adjacent two-arc {two_max:.4}; max ratios {}; slope {:+.4}",
        maxima.join(" "),
        fit.slope
    );
    (outcome(problems, summary, t.elapsed(), Some(LIMIT_8)), csv)
}

fn report(n: usize, o: &Outcome, ok: &mut bool) {
    println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    *ok &= o.pass;
}

fn main() {
    let mut ok = true;
    let t = Instant::now();
    let corpus = corpus();
    let c1 = criterion_1(&corpus, t.elapsed());
    report(1, &c1, &mut ok);
    report(2, &criterion_2(&corpus), &mut ok);
    report(3, &criterion_3(&corpus), &mut ok);
    report(4, &criterion_4(&corpus), &mut ok);
    let (c5, csv5) = criterion_5();
    report(5, &c5, &mut ok);
    report(6, &criterion_6(), &mut ok);
    let (c7, csv7) = criterion_7();
    report(7, &c7, &mut ok);
    let (c8, csv8) = criterion_8();
    report(8, &c8, &mut ok);

    let t9 = Instant::now();
    let mut problems = Vec::new();
    if criterion_5().1 != csv5 {
        problems.push("criterion 5 CSV differs on rerun".to_string());
    }
    if criterion_7().1 != csv7 {
        problems.push("criterion 7 CSV differs on rerun".to_string());
    }
    if criterion_8().1 != csv8 {
        problems.push("criterion 8 CSV differs on rerun".to_string());
    }
    let summary = format!("reruns of 5, 7, 8 byte-identical ({} + {} + {} bytes)", csv5.len(), csv7.len(), csv8.len());
    report(9, &outcome(problems, summary, t9.elapsed(), None), &mut ok);

    println!("acceptance: {} in {:.1?}", if ok { "all criteria passed" } else { "FAILURES" }, t.elapsed());
    if !ok {
        std::process::exit(1);
    }
}
