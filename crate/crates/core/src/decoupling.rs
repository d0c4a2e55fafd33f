//! Decoupling ratios for functions with frequencies near the parabola.
//!
//! Frequencies live on the lattice (delta/2) Z^2, so every function is
//! periodic with period T = 4 pi / delta in x and t. Norms are averages over
//! that torus, computed exactly: |g|^6 is a trigonometric polynomial whose
//! mean is recovered without aliasing by sampling more than three times the
//! index span per axis.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WplError};
use crate::grid::DEFAULT_POINT_CAP;
use crate::harness::fit_power_law;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeLaw {
    RandomPhase,
    Gaussian,
}

impl std::str::FromStr for AmplitudeLaw {
    type Err = WplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase" | "random-phase" => Ok(Self::RandomPhase),
            "gaussian" => Ok(Self::Gaussian),
            _ => Err(WplError::InvalidArgument(format!("unknown amplitude law '{s}'"))),
        }
    }
}

/// One arc: a frequency segment [omega_lo, omega_hi) of the parabola and the
/// lattice points (a, b) with |b h - (a h)^2| <= delta, h the lattice step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcPiece {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub points: Vec<(i64, i64)>,
    pub amplitudes: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcFunctionEnsemble {
    pub delta: f64,
    pub spacing: f64,
    pub seed: u64,
    pub arcs: Vec<ArcPiece>,
}

impl ArcFunctionEnsemble {
    /// Period of every function in the ensemble.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.spacing
    }

    /// Keeps only the listed arcs.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self { arcs: keep.iter().map(|&i| self.arcs[i].clone()).collect(), ..self.clone() }
    }

    fn all_terms(&self) -> Vec<((i64, i64), Complex64)> {
        self.arcs.iter().flat_map(|a| a.points.iter().copied().zip(a.amplitudes.iter().copied())).collect()
    }

    /// g at (x, t) by direct summation.
    pub fn eval(&self, x: f64, t: f64) -> Complex64 {
        let h = self.spacing;
        self.all_terms()
            .iter()
            .map(|&((a, b), amp)| amp * Complex64::from_polar(1.0, h * (a as f64 * x + b as f64 * t)))
            .sum()
    }

    /// Torus-averaged L^6 norm of g.
    pub fn l6_norm(&self) -> Result<f64> {
        torus_norms(&self.all_terms()).map(|n| n.l6)
    }

    /// Torus-averaged L^6 norm of each arc piece.
    pub fn arc_l6_norms(&self) -> Result<Vec<f64>> {
        self.arcs.iter().map(|a| torus_norms(&terms_of(a)).map(|n| n.l6)).collect()
    }

    /// Squared L^2 norms of g and of each piece, both from grid sums.
    pub fn l2_squares(&self) -> Result<(f64, Vec<f64>)> {
        let whole = torus_norms(&self.all_terms())?.l2_sq;
        let parts = self.arcs.iter().map(|a| torus_norms(&terms_of(a)).map(|n| n.l2_sq)).collect::<Result<_>>()?;
        Ok((whole, parts))
    }
}

fn terms_of(arc: &ArcPiece) -> Vec<((i64, i64), Complex64)> {
    arc.points.iter().copied().zip(arc.amplitudes.iter().copied()).collect()
}

pub fn synthesize_ensemble(delta: f64, seed: u64, law: AmplitudeLaw) -> Result<ArcFunctionEnsemble> {
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(WplError::InvalidArgument(format!("delta = {delta} must lie in (0, 1/4]")));
    }
    let arc_len = delta.sqrt();
    if 1.0 / arc_len > 64.0 + 1e-9 {
        return Err(WplError::InvalidArgument(format!("delta^(-1/2) = {} exceeds 64", 1.0 / arc_len)));
    }
    let h = delta / 2.0;
    let narcs = (2.0 / arc_len - 1e-9).ceil() as usize;
    let amax = (1.0 / h).round() as i64;
    let mut arcs: Vec<ArcPiece> = (0..narcs)
        .map(|k| ArcPiece {
            omega_lo: -1.0 + k as f64 * arc_len,
            omega_hi: (-1.0 + (k + 1) as f64 * arc_len).min(1.0),
            points: vec![],
            amplitudes: vec![],
        })
        .collect();
    for a in -amax..=amax {
        let xi = a as f64 * h;
        let k = (((xi + 1.0) / arc_len) as usize).min(narcs - 1);
        let lo = ((xi * xi - delta) / h).ceil() as i64;
        let hi = ((xi * xi + delta) / h).floor() as i64;
        for b in lo..=hi {
            if (b as f64 * h - xi * xi).abs() <= delta {
                arcs[k].points.push((a, b));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for arc in &mut arcs {
        arc.amplitudes = arc
            .points
            .iter()
            .map(|_| match law {
                AmplitudeLaw::RandomPhase => Complex64::from_polar(1.0, std::f64::consts::TAU * rng.gen::<f64>()),
                AmplitudeLaw::Gaussian => {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
                }
            })
            .collect();
    }
    Ok(ArcFunctionEnsemble { delta, spacing: h, seed, arcs })
}

pub fn decoupling_ratio(ens: &ArcFunctionEnsemble) -> Result<f64> {
    let den = ens.arc_l6_norms()?.iter().map(|n| n * n).sum::<f64>().sqrt();
    if !(den > 0.0) {
        return Err(WplError::ZeroDenominator);
    }
    Ok(ens.l6_norm()? / den)
}

#[derive(Clone, Copy, Debug)]
struct TorusNorms {
    l6: f64,
    l2_sq: f64,
}

/// Smallest 5-smooth integer >= n.
fn smooth_size(n: usize) -> usize {
    (n..).find(|&m| {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        r == 1
    })
    .unwrap()
}

/// Exact torus means of |g|^6 and |g|^2 for g = sum amp e^{i h (a x + b t)}.
/// Modulating by a lattice character does not change |g|, so indices are
/// shifted to start at zero.
fn torus_norms(terms: &[((i64, i64), Complex64)]) -> Result<TorusNorms> {
    if terms.is_empty() {
        return Ok(TorusNorms { l6: 0.0, l2_sq: 0.0 });
    }
    let amin = terms.iter().map(|t| t.0 .0).min().unwrap();
    let amax = terms.iter().map(|t| t.0 .0).max().unwrap();
    let bmin = terms.iter().map(|t| t.0 .1).min().unwrap();
    let bmax = terms.iter().map(|t| t.0 .1).max().unwrap();
    let (wa, wb) = ((amax - amin) as usize, (bmax - bmin) as usize);
    let (na, nb) = (smooth_size(3 * wa + 1), smooth_size(3 * wb + 1));
    if na * nb > DEFAULT_POINT_CAP {
        return Err(WplError::GridTooLarge { points: na * nb, cap: DEFAULT_POINT_CAP });
    }
    let mut planner = FftPlanner::<f64>::new();
    let fb: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(nb);
    let fa: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(na);
    // Rows indexed by a: transform along b.
    let mut rows = vec![Complex64::new(0.0, 0.0); (wa + 1) * nb];
    for &((a, b), amp) in terms {
        rows[(a - amin) as usize * nb + (b - bmin) as usize] += amp;
    }
    for row in rows.chunks_mut(nb) {
        if row.iter().any(|z| z.norm_sqr() > 0.0) {
            fb.process(row);
        }
    }
    // Columns indexed by t: transform along a and accumulate.
    let mut col = vec![Complex64::new(0.0, 0.0); na];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fa.get_inplace_scratch_len()];
    let (mut s6, mut s2) = (0.0, 0.0);
    for j in 0..nb {
        col.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for i in 0..=wa {
            col[i] = rows[i * nb + j];
        }
        fa.process_with_scratch(&mut col, &mut scratch);
        let (mut c6, mut c2) = (0.0, 0.0);
        for z in &col {
            let m = z.norm_sqr();
            c2 += m;
            c6 += m * m * m;
        }
        s6 += c6;
        s2 += c2;
    }
    let n = (na * nb) as f64;
    Ok(TorusNorms { l6: (s6 / n).powf(1.0 / 6.0), l2_sq: s2 / n })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub delta: f64,
    pub trial: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rows: Vec<RatioRow>,
    /// (delta, max ratio over trials), in input order.
    pub maxima: Vec<(f64, f64)>,
    pub slope: f64,
    pub r2: f64,
}

impl GrowthFit {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["delta", "trial", "ratio"])?;
        for r in &self.rows {
            wr.write_record([format!("{}", r.delta), r.trial.to_string(), format!("{:.12e}", r.ratio)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Per-trial seed derived from the master seed.
pub fn trial_seed(master: u64, delta_index: usize, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((delta_index as u64) << 32) | trial as u64);
    rng.gen()
}

/// Slope of log(max ratio) against log(1/delta).
pub fn growth_slope(maxima: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = maxima.iter().map(|&(d, m)| (1.0 / d, m)).collect();
    let fit = fit_power_law(&pts, true)?;
    Ok((fit.slope, fit.r2))
}

pub fn decoupling_growth_fit(deltas: &[f64], trials: usize, seed: u64) -> Result<GrowthFit> {
    decoupling_growth_fit_with(deltas, trials, seed, AmplitudeLaw::RandomPhase)
}

pub fn decoupling_growth_fit_with(deltas: &[f64], trials: usize, seed: u64, law: AmplitudeLaw) -> Result<GrowthFit> {
    use rayon::prelude::*;
    if trials == 0 {
        return Err(WplError::InvalidArgument("need at least one trial".into()));
    }
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    for (di, &delta) in deltas.iter().enumerate() {
        let ratios: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|k| synthesize_ensemble(delta, trial_seed(seed, di, k), law).and_then(|e| decoupling_ratio(&e)))
            .collect::<Result<_>>()?;
        maxima.push((delta, ratios.iter().copied().fold(0.0, f64::max)));
        rows.extend(ratios.into_iter().enumerate().map(|(trial, ratio)| RatioRow { delta, trial, ratio }));
    }
    let (slope, r2) = growth_slope(&maxima)?;
    Ok(GrowthFit { rows, maxima, slope, r2 })
}
