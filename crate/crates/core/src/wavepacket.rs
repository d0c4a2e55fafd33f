//! Wave packet decomposition at scale R.
//!
//! f is cut into frequency pieces f_theta of width ~R^{-1/2} with a cos^2
//! partition of unity. Each Ef_theta(., 0) is multiplied by spatial windows
//! gamma(R^{-1/2}(x - v)), v in R^{1/2} Z, which sum to one; the products are
//! the packets f_{theta,v}. Everything lives on the circle of period
//! P = 2 pi / h that the profile grid imposes, and the windows are exact
//! trigonometric polynomials, so the reconstruction is exact up to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WplError};
use crate::extension::evaluate_field;
use crate::grid::{packet_velocity, SpaceTimeField, SpaceTimeGrid};
use crate::profile::{trapezoid_weight, FrequencyProfile};

/// Steepness of the window transform exp(a - a / (1 - xi^2)).
pub const GAMMA_STEEPNESS: f64 = 4.0;

/// Transform of the spatial window; smooth, supported in [-1, 1], equal to 1 at 0.
pub fn gamma_hat(xi: f64) -> f64 {
    let s = 1.0 - xi * xi;
    if s <= 0.0 {
        0.0
    } else {
        (GAMMA_STEEPNESS - GAMMA_STEEPNESS / s).exp()
    }
}

/// The window gamma, tabulated on a uniform grid.
#[derive(Clone, Debug)]
pub struct GammaWindow {
    pub step: f64,
    pub half_extent: f64,
    pub samples: Vec<f64>,
}

impl GammaWindow {
    pub const SUPPORT_RADIUS: f64 = 1.0;

    pub fn hat(&self, xi: f64) -> f64 {
        gamma_hat(xi)
    }

    /// gamma(y) = (1/pi) int_0^1 gamma_hat(xi) cos(y xi) d xi by the
    /// trapezoid rule, which is spectrally accurate for this integrand.
    pub fn value(&self, y: f64) -> f64 {
        gamma_value(y)
    }
}

pub fn gamma_value(y: f64) -> f64 {
    let n = 4096;
    let d = 1.0 / n as f64;
    let mut acc = 0.5 * gamma_hat(0.0);
    for k in 1..n {
        let xi = k as f64 * d;
        acc += gamma_hat(xi) * (y * xi).cos();
    }
    acc * d / PI
}

pub fn make_gamma() -> GammaWindow {
    let step = 1.0 / 16.0;
    let half_extent = 64.0;
    let n = (2.0 * half_extent / step) as usize + 1;
    let samples = (0..n).into_par_iter().map(|i| gamma_value(-half_extent + i as f64 * step)).collect();
    GammaWindow { step, half_extent, samples }
}

/// Dyadic maximal function at every index: the largest mean of `g` over
/// windows [i - r, i + r] clipped to the data, r in {0, 1, 2, 4, ...}.
pub fn maximal_function_all(g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in g {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut radii = vec![0usize];
    let mut r = 1;
    while r < 2 * n {
        radii.push(r);
        r *= 2;
    }
    (0..n)
        .map(|i| {
            radii
                .iter()
                .map(|&r| {
                    let lo = i.saturating_sub(r);
                    let hi = (i + r).min(n - 1);
                    (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
                })
                .fold(g[i], f64::max)
        })
        .collect()
}

pub fn maximal_function(g: &[f64], index: usize) -> Result<f64> {
    if g.is_empty() {
        return Err(WplError::InvalidArgument("maximal function of empty input".into()));
    }
    if index >= g.len() {
        return Err(WplError::InvalidArgument(format!("index {index} out of range")));
    }
    Ok(maximal_function_all(g)[index])
}

/// Tuning for `decompose`.
#[derive(Clone, Copy, Debug)]
pub struct DecomposeOptions {
    /// Packets with |c| below this fraction of max |c| are dropped.
    pub drop_threshold: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { drop_threshold: 1e-8 }
    }
}

/// One packet: frequency centre, spatial position, coefficient, and the
/// data needed to rebuild its profile.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    pub theta: f64,
    pub v: f64,
    pub c: Complex64,
    pub l2_norm: f64,
    pub support: (f64, f64),
    piece: usize,
    slot: usize,
}

/// The frequency piece f_theta stored as samples j = center + q, |q| <= half.
#[derive(Clone, Debug)]
struct Piece {
    theta: f64,
    center: i64,
    local: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub r: f64,
    pub packets: Vec<WavePacket>,
    pub f_l2: f64,
    /// Largest packet L2 norm.
    pub max_norm: f64,
    pub s: f64,
    /// sum |c|^2 / ||f||^2.
    pub equivalence_constant: f64,
    /// max |c| / max ||f_{theta,v}||.
    pub coefficient_constant: f64,
    /// ||sum of kept packets - f|| / ||f||.
    pub reconstruction_error: f64,
    pub dropped: usize,
    m: usize,
    pieces: Vec<Piece>,
    engine: Arc<Engine>,
}

/// Scale-dependent machinery shared by all pieces.
struct Engine {
    r: f64,
    m: usize,
    u: f64,
    h: f64,
    period: f64,
    half: usize,
    l: usize,
    lm: usize,
    vs: Vec<f64>,
    seam: usize,
    mmax: usize,
    /// gamma_hat(m h / u) / (P u) for |m| <= mmax.
    win: Vec<f64>,
    /// 1 - sum_v of the window coefficients, added to the seam packet.
    deficit: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    inv_fine: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("r", &self.r).field("l", &self.l).finish()
    }
}

impl Engine {
    fn new(r: f64, m: usize, extent: usize) -> Self {
        let u = 1.0 / r.sqrt();
        let h = 2.0 / (m - 1) as f64;
        let period = 2.0 * PI / h;
        let mmax = (u / h + 1e-9).floor() as usize;
        let half = extent + mmax + 2;
        let l = (2 * half + 1).next_power_of_two();
        let lm = l.max(((8.0 * period / r.sqrt()).ceil() as usize).next_power_of_two());
        let root = r.sqrt();
        let n_lo = (-0.5 * period / root).ceil() as i64;
        let n_hi = (0.5 * period / root).ceil() as i64 - 1;
        let vs: Vec<f64> = (n_lo..=n_hi).map(|n| n as f64 * root).collect();
        let seam = if vs[vs.len() - 1].abs() >= vs[0].abs() { vs.len() - 1 } else { 0 };
        let win: Vec<f64> =
            (-(mmax as i64)..=mmax as i64).map(|k| gamma_hat(k as f64 * h / u) / (period * u)).collect();
        let mut deficit = vec![Complex64::new(0.0, 0.0); 2 * mmax + 1];
        deficit[mmax] = Complex64::new(1.0, 0.0);
        for &v in &vs {
            for (i, k) in (-(mmax as i64)..=mmax as i64).enumerate() {
                deficit[i] -= win[i] * Complex64::cis(-(k as f64) * h * v);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(l);
        let inv = planner.plan_fft_inverse(l);
        let inv_fine = planner.plan_fft_inverse(lm);
        Self { r, m, u, h, period, half, l, lm, vs, seam, mmax, win, deficit, fwd, inv, inv_fine }
    }

    fn scratch(&self) -> Vec<Complex64> {
        let n = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        vec![Complex64::new(0.0, 0.0); n.max(self.inv_fine.get_inplace_scratch_len())]
    }

    fn weight(&self, j: i64) -> f64 {
        if j < 0 || j >= self.m as i64 {
            0.0
        } else {
            trapezoid_weight(j as usize, self.m)
        }
    }

    /// Coefficients R^{1/4} M|Ef_theta(., 0)|(v) / sqrt(2 pi) for every v.
    fn coefficients(&self, piece: &Piece, scratch: &mut [Complex64]) -> Vec<f64> {
        let lm = self.lm;
        let mut g = vec![Complex64::new(0.0, 0.0); lm];
        for (i, a) in piece.local.iter().enumerate() {
            let q = i as i64 - self.half as i64;
            g[q.rem_euclid(lm as i64) as usize] = a * self.weight(piece.center + q);
        }
        self.inv_fine.process_with_scratch(&mut g, &mut scratch[..self.inv_fine.get_inplace_scratch_len()]);
        // Reorder to x in [-P/2, P/2).
        let modulus: Vec<f64> = (0..lm).map(|k| g[(k + lm / 2) % lm].norm()).collect();
        let mf = maximal_function_all(&modulus);
        let dxf = self.period / lm as f64;
        let scale = self.r.powf(0.25) / (2.0 * PI).sqrt();
        self.vs
            .iter()
            .map(|v| {
                let k = ((v / dxf).round() as i64 + (lm / 2) as i64).clamp(0, lm as i64 - 1);
                scale * mf[k as usize]
            })
            .collect()
    }

    /// Field samples of the piece at x_k = k P / L (inverse transform).
    fn spatial(&self, piece: &Piece, scratch: &mut [Complex64]) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.l];
        for (i, a) in piece.local.iter().enumerate() {
            let q = i as i64 - self.half as i64;
            x[q.rem_euclid(self.l as i64) as usize] = *a;
        }
        self.inv.process_with_scratch(&mut x, &mut scratch[..self.inv.get_inplace_scratch_len()]);
        x
    }

    /// Packet spectrum for window slot `slot`, as local samples |q| <= half,
    /// masked to the grid and to [theta - 3u, theta + 3u].
    fn packet(&self, piece: &Piece, spatial: &[Complex64], slot: usize, scratch: &mut [Complex64]) -> Vec<Complex64> {
        let (l, mmax) = (self.l, self.mmax as i64);
        let v = self.vs[slot];
        let mut w = vec![Complex64::new(0.0, 0.0); l];
        for (i, k) in (-mmax..=mmax).enumerate() {
            let mut c = self.win[i] * Complex64::cis(-(k as f64) * self.h * v);
            if slot == self.seam {
                c += self.deficit[i];
            }
            w[k.rem_euclid(l as i64) as usize] = c;
        }
        let sl = self.inv.get_inplace_scratch_len();
        self.inv.process_with_scratch(&mut w, &mut scratch[..sl]);
        for (a, b) in w.iter_mut().zip(spatial) {
            *a *= b;
        }
        let sf = self.fwd.get_inplace_scratch_len();
        self.fwd.process_with_scratch(&mut w, &mut scratch[..sf]);
        let norm = 1.0 / l as f64;
        let half = self.half as i64;
        (-half..=half)
            .map(|q| {
                let j = piece.center + q;
                let omega = -1.0 + j as f64 * self.h;
                if j < 0 || j >= self.m as i64 || (omega - piece.theta).abs() > 3.0 * self.u + 1e-12 {
                    Complex64::new(0.0, 0.0)
                } else {
                    w[q.rem_euclid(l as i64) as usize] * norm
                }
            })
            .collect()
    }

    fn local_norm(&self, piece: &Piece, b: &[Complex64]) -> f64 {
        let half = self.half as i64;
        b.iter()
            .enumerate()
            .map(|(i, z)| self.weight(piece.center + i as i64 - half) * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// A frequency piece given on the full grid: samples lo..lo+values.len().
struct RawPiece {
    theta: f64,
    lo: usize,
    values: Vec<Complex64>,
}

/// Cuts `f` into pieces of width ~R^{-1/2} and then into packets.
pub fn decompose(f: &FrequencyProfile, r: f64) -> Result<Decomposition> {
    decompose_with(f, r, DecomposeOptions::default())
}

pub fn decompose_with(f: &FrequencyProfile, r: f64, opts: DecomposeOptions) -> Result<Decomposition> {
    check_scale(f.len(), r)?;
    if f.is_zero() {
        return Err(WplError::ZeroProfile);
    }
    let u = 1.0 / r.sqrt();
    let n_max = (1.0 / u + 1e-9).floor() as i64;
    let s = f.samples();
    let mut raw = Vec::new();
    for n in -n_max..=n_max {
        let theta = n as f64 * u;
        let lo = f.nearest_index(theta - u);
        let hi = f.nearest_index(theta + u);
        let mut values = Vec::with_capacity(hi - lo + 1);
        let mut any = false;
        for j in lo..=hi {
            let w = f.omega(j);
            let d = w - theta;
            let chi = if (n == n_max && d > 0.0) || (n == -n_max && d < 0.0) {
                1.0
            } else {
                cutoff(d.abs(), u)
            };
            let z = s[j] * chi;
            any |= z.re != 0.0 || z.im != 0.0;
            values.push(z);
        }
        if any {
            raw.push(RawPiece { theta, lo, values });
        }
    }
    decompose_pieces(f.len(), r, raw, opts)
}

/// Frequency cutoff: 1 within u/4 of the centre, 0 beyond 3u/4; neighbours
/// at spacing u sum to exactly 1.
fn cutoff(d: f64, u: f64) -> f64 {
    let (a, b) = (0.25 * u, 0.75 * u);
    if d <= a {
        1.0
    } else if d >= b {
        0.0
    } else {
        (0.5 * PI * (d - a) / (b - a)).cos().powi(2)
    }
}

fn check_scale(m: usize, r: f64) -> Result<()> {
    if !(r >= 64.0) || !r.is_finite() {
        return Err(WplError::InvalidArgument(format!("scale R = {r} must be >= 64")));
    }
    if (m as f64) < 8.0 * r.sqrt() {
        return Err(WplError::InvalidArgument(format!(
            "profile of {m} samples does not resolve R^1/2 = {}",
            r.sqrt()
        )));
    }
    Ok(())
}

fn decompose_pieces(m: usize, r: f64, raw: Vec<RawPiece>, opts: DecomposeOptions) -> Result<Decomposition> {
    let h = 2.0 / (m - 1) as f64;
    // Local half-width covering every piece's samples around its centre.
    let mut extent = 0usize;
    let centers: Vec<i64> = raw.iter().map(|p| ((p.theta + 1.0) / h).round() as i64).collect();
    for (p, &c) in raw.iter().zip(&centers) {
        for (i, z) in p.values.iter().enumerate() {
            if z.re != 0.0 || z.im != 0.0 {
                extent = extent.max(((p.lo + i) as i64 - c).unsigned_abs() as usize);
            }
        }
    }
    let engine = Arc::new(Engine::new(r, m, extent));
    let half = engine.half as i64;
    let pieces: Vec<Piece> = raw
        .iter()
        .zip(&centers)
        .map(|(p, &center)| {
            let mut local = vec![Complex64::new(0.0, 0.0); 2 * engine.half + 1];
            for (i, z) in p.values.iter().enumerate() {
                let q = (p.lo + i) as i64 - center;
                if q.abs() <= half {
                    local[(q + half) as usize] += z;
                }
            }
            Piece { theta: p.theta, center, local }
        })
        .collect();

    // The decomposed function is the sum of the pieces.
    let mut f_sum = vec![Complex64::new(0.0, 0.0); m];
    for p in &pieces {
        for (i, z) in p.local.iter().enumerate() {
            let j = p.center + i as i64 - half;
            if j >= 0 && (j as usize) < m {
                f_sum[j as usize] += z;
            }
        }
    }
    let f_l2 = (0..m).map(|j| trapezoid_weight(j, m) * f_sum[j].norm_sqr()).sum::<f64>().sqrt();
    if f_l2 == 0.0 {
        return Err(WplError::ZeroProfile);
    }

    let coeffs: Vec<Vec<f64>> = pieces
        .par_iter()
        .map_init(|| engine.scratch(), |scratch, p| engine.coefficients(p, scratch))
        .collect();
    let c_max = coeffs.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let cut = opts.drop_threshold * c_max;

    struct PieceOut {
        packets: Vec<WavePacket>,
        recon: Vec<Complex64>,
        dropped: usize,
    }
    let outs: Vec<PieceOut> = pieces
        .par_iter()
        .enumerate()
        .map_init(
            || engine.scratch(),
            |scratch, (pi, p)| {
                let spatial = engine.spatial(p, scratch);
                let mut recon = vec![Complex64::new(0.0, 0.0); p.local.len()];
                let mut packets = Vec::new();
                let mut dropped = 0;
                for (slot, &c) in coeffs[pi].iter().enumerate() {
                    if c < cut || c == 0.0 {
                        dropped += 1;
                        continue;
                    }
                    let b = engine.packet(p, &spatial, slot, scratch);
                    for (acc, z) in recon.iter_mut().zip(&b) {
                        *acc += z;
                    }
                    let u = engine.u;
                    packets.push(WavePacket {
                        theta: p.theta,
                        v: engine.vs[slot],
                        c: Complex64::new(c, 0.0),
                        l2_norm: engine.local_norm(p, &b),
                        support: ((p.theta - 3.0 * u).max(-1.0), (p.theta + 3.0 * u).min(1.0)),
                        piece: pi,
                        slot,
                    });
                }
                PieceOut { packets, recon, dropped }
            },
        )
        .collect();

    let mut recon = vec![Complex64::new(0.0, 0.0); m];
    let mut packets = Vec::new();
    let mut dropped = 0;
    for (p, out) in pieces.iter().zip(outs) {
        for (i, z) in out.recon.iter().enumerate() {
            let j = p.center + i as i64 - half;
            if j >= 0 && (j as usize) < m {
                recon[j as usize] += z;
            }
        }
        packets.extend(out.packets);
        dropped += out.dropped;
    }
    let err = (0..m)
        .map(|j| trapezoid_weight(j, m) * (recon[j] - f_sum[j]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let max_norm = packets.iter().map(|p| p.l2_norm).fold(0.0, f64::max);
    let sum_c2: f64 = packets.iter().map(|p| p.c.norm_sqr()).sum();
    let c_top = packets.iter().map(|p| p.c.norm()).fold(0.0, f64::max);
    Ok(Decomposition {
        r,
        f_l2,
        max_norm,
        s: max_norm / f_l2,
        equivalence_constant: sum_c2 / (f_l2 * f_l2),
        coefficient_constant: c_top / max_norm,
        reconstruction_error: err / f_l2,
        dropped,
        packets,
        m,
        pieces,
        engine,
    })
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Number of profile samples of the decomposed function.
    pub fn profile_len(&self) -> usize {
        self.m
    }

    pub fn max_coefficient(&self) -> f64 {
        self.packets.iter().map(|p| p.c.norm()).fold(0.0, f64::max)
    }

    /// Index of the packet with the largest L2 norm.
    pub fn dominant(&self) -> Option<usize> {
        (0..self.packets.len()).max_by(|&a, &b| self.packets[a].l2_norm.total_cmp(&self.packets[b].l2_norm))
    }

    /// Rebuilds f_{theta,v} for packet `idx`.
    pub fn packet_profile(&self, idx: usize) -> Result<FrequencyProfile> {
        let b = self.packet_local(idx, &mut self.engine.scratch());
        let pk = &self.packets[idx];
        let piece = &self.pieces[pk.piece];
        let half = self.engine.half as i64;
        let mut s = vec![Complex64::new(0.0, 0.0); self.m];
        for (i, z) in b.iter().enumerate() {
            let j = piece.center + i as i64 - half;
            if j >= 0 && (j as usize) < self.m {
                s[j as usize] = *z;
            }
        }
        let label = format!("packet(theta={:.6},v={:.3})", pk.theta, pk.v);
        FrequencyProfile::new(s, Some(label))
    }

    fn packet_local(&self, idx: usize, scratch: &mut [Complex64]) -> Vec<Complex64> {
        let pk = &self.packets[idx];
        let piece = &self.pieces[pk.piece];
        let spatial = self.engine.spatial(piece, scratch);
        self.engine.packet(piece, &spatial, pk.slot, scratch)
    }

    /// The frequency piece f_theta that packet `idx` was cut from.
    pub fn piece_profile(&self, idx: usize) -> Result<FrequencyProfile> {
        let piece = &self.pieces[self.packets[idx].piece];
        let half = self.engine.half as i64;
        let mut s = vec![Complex64::new(0.0, 0.0); self.m];
        for (i, z) in piece.local.iter().enumerate() {
            let j = piece.center + i as i64 - half;
            if j >= 0 && (j as usize) < self.m {
                s[j as usize] = *z;
            }
        }
        FrequencyProfile::new(s, None)
    }

    /// Checks reconstruction, L2 equivalence within [1/c_star, c_star], and
    /// the coefficient bound |c| <= c_coef * max packet norm.
    pub fn check_invariants(&self, c_star: f64, c_coef: f64) -> Result<()> {
        let mut problems = Vec::new();
        if self.reconstruction_error > 1e-6 {
            problems.push(format!("reconstruction error {:.3e}", self.reconstruction_error));
        }
        if !(self.equivalence_constant >= 1.0 / c_star && self.equivalence_constant <= c_star) {
            problems.push(format!("equivalence constant {:.4}", self.equivalence_constant));
        }
        if self.coefficient_constant > c_coef {
            problems.push(format!("coefficient constant {:.4}", self.coefficient_constant));
        }
        if !(self.s > 0.0 && self.s <= 1.0 + 1e-6) {
            problems.push(format!("S = {}", self.s));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(WplError::InvalidArgument(problems.join("; ")))
        }
    }

    pub fn to_json(&self) -> DecompositionJson {
        DecompositionJson {
            r: self.r,
            f_l2: self.f_l2,
            s: self.s,
            m: self.max_norm,
            packets: self
                .packets
                .iter()
                .map(|p| PacketJson { theta: p.theta, v: p.v, c_re: p.c.re, c_im: p.c.im, support: [p.support.0, p.support.1] })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PacketJson {
    pub theta: f64,
    pub v: f64,
    pub c_re: f64,
    pub c_im: f64,
    pub support: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionJson {
    #[serde(rename = "R")]
    pub r: f64,
    pub f_l2: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub packets: Vec<PacketJson>,
}

/// Ef_{theta,v} on a grid together with its measured localization constant,
/// with distances taken from the trajectory x = v - 2 theta t.
#[derive(Clone, Debug)]
pub struct PacketField {
    pub field: SpaceTimeField,
    /// max |Ef| (1 + dist / R^{1/2})^4 / (R^{-1/4} |c|).
    pub localization: f64,
}

pub const DEFAULT_LOCALIZATION_BOUND: f64 = 1e3;

pub fn packet_field(decomp: &Decomposition, idx: usize, grid: &SpaceTimeGrid) -> Result<PacketField> {
    packet_field_bounded(decomp, idx, grid, DEFAULT_LOCALIZATION_BOUND)
}

pub fn packet_field_bounded(decomp: &Decomposition, idx: usize, grid: &SpaceTimeGrid, bound: f64) -> Result<PacketField> {
    let pk = &decomp.packets[idx];
    let profile = decomp.packet_profile(idx)?;
    let field = evaluate_field(&profile, grid)?;
    let c = pk.c.norm();
    if c == 0.0 {
        return Ok(PacketField { field, localization: 0.0 });
    }
    let root = decomp.r.sqrt();
    let unit = decomp.r.powf(-0.25) * c;
    let mut loc: f64 = 0.0;
    for ix in 0..grid.nx() {
        for it in 0..grid.nt() {
            let d = (grid.x(ix) - pk.v - packet_velocity(pk.theta) * grid.t(it)).abs();
            loc = loc.max(field.get(ix, it).norm() * (1.0 + d / root).powi(4) / unit);
        }
    }
    if !loc.is_finite() || loc > bound {
        return Err(WplError::InvalidArgument(format!("localization constant {loc:.3e} exceeds {bound:.1e}")));
    }
    Ok(PacketField { field, localization: loc })
}

/// Sum of |Ef_{theta,v}(x, t)| over packets whose trajectory tube, enlarged
/// to width R^{(1+delta)/2}, misses (x, t).
pub fn tail_sum(decomp: &Decomposition, x: f64, t: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(WplError::InvalidArgument(format!("delta = {delta} must lie in (0, 1]")));
    }
    let reach = decomp.r.powf(0.5 * (1.0 + delta));
    let eng = &decomp.engine;
    let half = eng.half as i64;
    let far: Vec<usize> =
        (0..decomp.packets.len())
        .filter(|&i| {
            let p = &decomp.packets[i];
            (x - p.v - packet_velocity(p.theta) * t).abs() > reach
        })
        .collect();
    let parts: Vec<f64> = far
        .par_iter()
        .map_init(
            || eng.scratch(),
            |scratch, &i| {
                let b = decomp.packet_local(i, scratch);
                let piece = &decomp.pieces[decomp.packets[i].piece];
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, z) in b.iter().enumerate() {
                    if z.re == 0.0 && z.im == 0.0 {
                        continue;
                    }
                    let j = piece.center + k as i64 - half;
                    let w = -1.0 + j as f64 * eng.h;
                    acc += z * eng.weight(j) * Complex64::cis(w * w * t + w * x);
                }
                acc.norm()
            },
        )
        .collect();
    Ok(parts.iter().sum())
}

/// Result of regrouping a decomposition to a coarser scale.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub decomposition: Decomposition,
    /// max new |c| / ((R2/R1)^{1/4} max old |c|).
    pub constant: f64,
}

/// Regroups the scale-R2 frequency pieces into R1-pieces (each R2 centre
/// goes to the nearest R1 centre) and decomposes again at scale R1.
pub fn rescale_decomposition(decomp: &Decomposition, r1: f64) -> Result<Rescaled> {
    let r2 = decomp.r;
    let k = (r2 / r1).sqrt();
    if !(r1 > 0.0) || r1 > r2 || (k - k.round()).abs() > 1e-9 * k {
        return Err(WplError::InvalidArgument(format!("(R2/R1)^1/2 = {k} is not an integer")));
    }
    check_scale(decomp.m, r1)?;
    let u1 = 1.0 / r1.sqrt();
    let n_max = (1.0 / u1 + 1e-9).floor() as i64;
    let half = decomp.engine.half as i64;
    let mut groups: std::collections::BTreeMap<i64, Vec<Complex64>> = Default::default();
    for p in &decomp.pieces {
        let n = ((p.theta / u1 - 0.5 - 1e-9).ceil() as i64).clamp(-n_max, n_max);
        let acc = groups.entry(n).or_insert_with(|| vec![Complex64::new(0.0, 0.0); decomp.m]);
        for (i, z) in p.local.iter().enumerate() {
            let j = p.center + i as i64 - half;
            if j >= 0 && (j as usize) < decomp.m {
                acc[j as usize] += z;
            }
        }
    }
    let raw = groups
        .into_iter()
        .filter_map(|(n, full)| {
            let lo = full.iter().position(|z| z.re != 0.0 || z.im != 0.0)?;
            let hi = full.iter().rposition(|z| z.re != 0.0 || z.im != 0.0)?;
            Some(RawPiece { theta: n as f64 * u1, lo, values: full[lo..=hi].to_vec() })
        })
        .collect();
    let out = decompose_pieces(decomp.m, r1, raw, DecomposeOptions::default())?;
    let constant = out.max_coefficient() / ((r2 / r1).powf(0.25) * decomp.max_coefficient());
    Ok(Rescaled { decomposition: out, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{default_samples, make_f0, make_f1};

    #[test]
    fn gamma_hat_shape() {
        assert_eq!(gamma_hat(0.0), 1.0);
        assert_eq!(gamma_hat(1.5), 0.0);
        assert_eq!(gamma_hat(1.0), 0.0);
        assert!(gamma_hat(0.5) > 0.0 && gamma_hat(0.5) < 1.0);
    }

    #[test]
    fn gamma_poisson_sum() {
        let g = make_gamma();
        assert_eq!(g.hat(0.0), 1.0);
        let total: f64 = (-64..=64).map(|k| g.value(0.37 - k as f64)).sum();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let mid = g.samples.len() / 2;
        assert!((g.samples[mid] - g.value(0.0)).abs() < 1e-15);
    }

    #[test]
    fn maximal_function_examples() {
        assert_eq!(maximal_function_all(&[2.5; 37]), vec![2.5; 37]);
        let mut spike = vec![0.0; 101];
        spike[40] = 3.0;
        assert_eq!(maximal_function(&spike, 40).unwrap(), 3.0);
        let n = 1025;
        let dx = 16.0 / (n - 1) as f64;
        let ind: Vec<f64> = (0..n)
            .map(|i| {
                let x = -8.0 + i as f64 * dx;
                if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }
            })
            .collect();
        let at = ((2.0 + 8.0) / dx).round() as usize;
        let got = maximal_function(&ind, at).unwrap();
        assert!((got - 0.25).abs() <= 0.05 * 0.25, "{got}");
        assert!(maximal_function(&[], 0).is_err());
    }

    #[test]
    fn decomposes_f0() {
        let r = 256.0;
        let f = make_f0(default_samples(r)).unwrap();
        let d = decompose(&f, r).unwrap();
        d.check_invariants(16.0, 8.0).unwrap();
        assert!(d.reconstruction_error < 1e-12, "{}", d.reconstruction_error);
        let s = d.s * r.powf(0.25);
        assert!((1.0 / 16.0..=16.0).contains(&s), "{s}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = FrequencyProfile::new(vec![Complex64::default(); 1024], None).unwrap();
        assert!(matches!(decompose(&z, 256.0), Err(WplError::ZeroProfile)));
        let f = make_f0(1024).unwrap();
        assert!(decompose(&f, 32.0).is_err());
        let small = make_f0(64).unwrap();
        assert!(decompose(&small, 256.0).is_err());
    }

    #[test]
    fn packet_profiles_respect_support_and_sum_to_f() {
        let r = 256.0;
        let f = make_f1(r, 1024).unwrap();
        let d = decompose(&f, r).unwrap();
        let u = r.powf(-0.5);
        let mut sum = vec![Complex64::new(0.0, 0.0); f.len()];
        for i in 0..d.len() {
            let p = d.packet_profile(i).unwrap();
            let pk = &d.packets[i];
            for (j, z) in p.samples().iter().enumerate() {
                if (p.omega(j) - pk.theta).abs() > 3.0 * u {
                    assert_eq!(*z, Complex64::new(0.0, 0.0));
                }
                sum[j] += z;
            }
            assert!((p.l2_norm() - pk.l2_norm).abs() < 1e-12);
        }
        let err: f64 = sum.iter().zip(f.samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn f1_dominant_packet_at_origin() {
        for r in [256.0f64, 1024.0] {
            let f = make_f1(r, default_samples(r)).unwrap();
            let d = decompose(&f, r).unwrap();
            let top = &d.packets[d.dominant().unwrap()];
            assert_eq!(top.theta, 0.0);
            assert_eq!(top.v, 0.0);
        }
    }

    #[test]
    fn s_is_scale_invariant_in_f() {
        let r = 256.0;
        let f = make_f1(r, 1024).unwrap();
        let d1 = decompose(&f, r).unwrap();
        let d2 = decompose(&f.scaled(Complex64::new(-2.5, 1.25)), r).unwrap();
        assert!((d1.s - d2.s).abs() <= 1e-12 * d1.s);
    }

    #[test]
    fn identity_rescale_keeps_coefficients() {
        let r = 256.0;
        let f = make_f1(r, 1024).unwrap();
        let d = decompose(&f, r).unwrap();
        let same = rescale_decomposition(&d, r).unwrap();
        assert_eq!(same.decomposition.len(), d.len());
        for (a, b) in same.decomposition.packets.iter().zip(&d.packets) {
            assert!((a.c - b.c).norm() <= 1e-12 * d.max_coefficient());
        }
        assert!(rescale_decomposition(&d, 128.0).is_err());
    }

    #[test]
    fn packet_core_value_and_decay() {
        let r = 256.0;
        let f = make_f1(r, 4096).unwrap();
        let d = decompose(&f, r).unwrap();
        let idx = d.dominant().unwrap();
        let pk = d.packets[idx].clone();
        let unit = r.powf(-0.25) * pk.c.norm();
        let prof = d.packet_profile(idx).unwrap();
        let core = crate::extension::evaluate_extension(&prof, pk.v, 0.0).unwrap().norm();
        assert!((1e-2 * unit..=1e2 * unit).contains(&core), "{core} vs {unit}");
        let grid = SpaceTimeGrid::ball(256.0, 1025, 129).unwrap();
        let c4 = packet_field(&d, idx, &grid).unwrap().localization;
        let far = crate::extension::evaluate_extension(&prof, pk.v + 10.0 * r.sqrt(), 0.0).unwrap().norm();
        assert!(far <= 1.01 * c4 * unit * 11f64.powi(-4), "{far} vs C4 = {c4}");
    }

    #[test]
    fn no_zero_coefficient_packets_are_kept() {
        let r = 256.0;
        let d = decompose(&make_f1(r, 1024).unwrap(), r).unwrap();
        assert!(d.packets.iter().all(|p| p.c.norm() >= 1e-8 * d.max_coefficient()));
        assert!(d.packets.iter().all(|p| p.theta.abs() <= 4.0 / r.sqrt()));
    }

    #[test]
    fn tail_sum_single_packet_and_monotone() {
        let r = 1024.0;
        let one = decompose_with(&make_f1(r, default_samples(r)).unwrap(), r, DecomposeOptions { drop_threshold: 0.999_999 }).unwrap();
        assert_eq!(one.len(), 1);
        let pk = &one.packets[0];
        assert_eq!(tail_sum(&one, pk.v + packet_velocity(pk.theta) * 3.0, 3.0, 0.2).unwrap(), 0.0);

        let f = make_f0(default_samples(r)).unwrap();
        let d = decompose(&f, r).unwrap();
        let tails: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|&dl| tail_sum(&d, 0.0, 0.0, dl).unwrap()).collect();
        assert!(tails.windows(2).all(|w| w[1] < w[0]), "{tails:?}");
        assert!(tails[3] <= 1e-2 * d.f_l2, "{tails:?}");
        assert!(tail_sum(&d, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn coarser_rescales_stay_bounded() {
        let r = 1024.0;
        let f = make_f1(r, default_samples(r)).unwrap();
        let d = decompose_with(&f, r, DecomposeOptions { drop_threshold: 0.999_999 }).unwrap();
        let single = d.packet_profile(0).unwrap();
        let ds = decompose(&single, r).unwrap();
        let q = rescale_decomposition(&ds, r / 4.0).unwrap();
        assert!(q.constant <= 16.0, "{}", q.constant);

        let r = 4096.0;
        let b = crate::families::make_bundle(r, crate::families::bundle_n(r), default_samples(r)).unwrap();
        let db = decompose(&b, r).unwrap();
        let q = rescale_decomposition(&db, r / 16.0).unwrap();
        assert!(q.constant <= 16.0, "{}", q.constant);
    }

    #[test]
    fn json_lists_packets() {
        let r = 256.0;
        let d = decompose(&make_f1(r, 1024).unwrap(), r).unwrap();
        let j = serde_json::to_value(d.to_json()).unwrap();
        assert_eq!(j["packets"].as_array().unwrap().len(), d.len());
        assert_eq!(j["R"].as_f64().unwrap(), r);
    }
}
