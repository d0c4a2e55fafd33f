//! The extension operator Ef(x,t) = int e^{i(w^2 t + w x)} f(w) dw and the
//! space-time cutoff eta_R.
//!
//! Fields are computed slice by slice in t. For fixed t the sum over the
//! w-grid evaluated on a uniform x-grid is a chirp-z transform, which turns
//! into one circular convolution of length >= M + nx - 1. Any x-spacing is
//! therefore exact, not just the DFT-native one.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, WplError};
use crate::grid::{check_nyquist, SpaceTimeField, SpaceTimeGrid, DEFAULT_POINT_CAP};
use crate::profile::FrequencyProfile;

/// Trapezoid value of Ef at a single point.
pub fn evaluate_extension(f: &FrequencyProfile, x: f64, t: f64) -> Result<Complex64> {
    check_nyquist(x, t, f.len())?;
    Ok(extension_sum(f, x, t))
}

/// Direct sum without the Nyquist guard; callers vouch for the sampling.
pub(crate) fn extension_sum(f: &FrequencyProfile, x: f64, t: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, z) in f.samples().iter().enumerate() {
        if z.re == 0.0 && z.im == 0.0 {
            continue;
        }
        let w = f.omega(j);
        acc += z * f.weight(j) * Complex64::cis(w * w * t + w * x);
    }
    acc
}

/// Evaluates a full field; fails when the grid exceeds `DEFAULT_POINT_CAP`.
pub fn evaluate_field(f: &FrequencyProfile, grid: &SpaceTimeGrid) -> Result<SpaceTimeField> {
    evaluate_field_capped(f, grid, DEFAULT_POINT_CAP)
}

pub fn evaluate_field_capped(
    f: &FrequencyProfile,
    grid: &SpaceTimeGrid,
    cap: usize,
) -> Result<SpaceTimeField> {
    if grid.points() > cap {
        return Err(WplError::GridTooLarge { points: grid.points(), cap });
    }
    let (nx, nt) = (grid.nx(), grid.nt());
    let slices = map_slices(f, grid, |_, _, s| s.to_vec())?;
    let mut values = vec![Complex64::new(0.0, 0.0); nx * nt];
    for (it, s) in slices.iter().enumerate() {
        for (ix, z) in s.iter().enumerate() {
            values[ix * nt + it] = *z;
        }
    }
    SpaceTimeField::new(grid.clone(), values)
}

/// Applies `g(it, t, slice)` to every t-slice of Ef without materializing the
/// field. Results come back in slice order regardless of scheduling.
pub fn map_slices<T, G>(f: &FrequencyProfile, grid: &SpaceTimeGrid, g: G) -> Result<Vec<T>>
where
    T: Send,
    G: Fn(usize, f64, &[Complex64]) -> T + Sync,
{
    grid.check_nyquist(f.len())?;
    let ev = SliceEvaluator::new(f, -grid.x_half(), grid.dx(), grid.nx());
    Ok((0..grid.nt())
        .into_par_iter()
        .map_init(
            || ev.workspace(),
            |ws, it| {
                let t = grid.t(it);
                ev.slice(t, ws);
                g(it, t, &ws.out)
            },
        )
        .collect())
}

/// Evaluates Ef(x0 + k dx, t) for k < nx at arbitrary t.
pub struct SliceEvaluator {
    /// w_j f_j e^{i w_j x0} over the active index range.
    base: Vec<Complex64>,
    omega_sq: Vec<f64>,
    /// e^{i omega0 k dx} times the chirp post-twiddle.
    post: Vec<Complex64>,
    chirp: Option<ChirpZ>,
    nx: usize,
}

pub struct SliceWorkspace {
    pub out: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SliceEvaluator {
    pub fn new(f: &FrequencyProfile, x0: f64, dx: f64, nx: usize) -> Self {
        let s = f.samples();
        let lo = s.iter().position(|z| z.re != 0.0 || z.im != 0.0);
        let Some(lo) = lo else {
            return Self { base: vec![], omega_sq: vec![], post: vec![], chirp: None, nx };
        };
        let hi = s.iter().rposition(|z| z.re != 0.0 || z.im != 0.0).unwrap();
        let h = f.step();
        let omega0 = f.omega(lo);
        let mut base = Vec::with_capacity(hi - lo + 1);
        let mut omega_sq = Vec::with_capacity(hi - lo + 1);
        for j in lo..=hi {
            let w = f.omega(j);
            base.push(s[j] * f.weight(j) * Complex64::cis(w * x0));
            omega_sq.push(w * w);
        }
        let chirp = ChirpZ::new(base.len(), nx, h * dx);
        let post = (0..nx).map(|k| Complex64::cis(omega0 * k as f64 * dx) * chirp.post[k]).collect();
        Self { base, omega_sq, post, chirp: Some(chirp), nx }
    }

    pub fn workspace(&self) -> SliceWorkspace {
        let (len, scratch) = match &self.chirp {
            Some(c) => (c.len, c.scratch_len()),
            None => (0, 0),
        };
        SliceWorkspace {
            out: vec![Complex64::new(0.0, 0.0); self.nx],
            buf: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch],
        }
    }

    /// Fills `ws.out` with the slice at time `t`.
    pub fn slice(&self, t: f64, ws: &mut SliceWorkspace) {
        let Some(chirp) = &self.chirp else {
            ws.out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            return;
        };
        let buf = &mut ws.buf;
        for (j, (b, w2)) in self.base.iter().zip(&self.omega_sq).enumerate() {
            buf[j] = b * Complex64::cis(w2 * t) * chirp.pre[j];
        }
        buf[self.base.len()..].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        chirp.convolve(buf, &mut ws.scratch);
        let scale = 1.0 / chirp.len as f64;
        for k in 0..self.nx {
            ws.out[k] = buf[k] * self.post[k] * scale;
        }
    }
}

/// Chirp-z machinery for y_k = sum_{j<m} u_j e^{i phi j k}, k < n, using
/// jk = (j^2 + k^2 - (k-j)^2) / 2.
struct ChirpZ {
    len: usize,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl ChirpZ {
    fn new(m: usize, n: usize, phi: f64) -> Self {
        let len = (m + n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let half_phase = |q: i64| 0.5 * phi * (q * q) as f64;
        let pre = (0..m).map(|j| Complex64::cis(half_phase(j as i64))).collect();
        let post = (0..n).map(|k| Complex64::cis(half_phase(k as i64))).collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        for q in -(m as i64 - 1)..(n as i64) {
            kernel[q.rem_euclid(len as i64) as usize] = Complex64::cis(-half_phase(q));
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(&mut kernel, &mut scratch);
        Self { len, pre, post, kernel, fwd, inv }
    }

    fn scratch_len(&self) -> usize {
        self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())
    }

    /// In-place circular convolution with the kernel, unnormalized.
    fn convolve(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, scratch);
        for (z, k) in buf.iter_mut().zip(&self.kernel) {
            *z *= k;
        }
        self.inv.process_with_scratch(buf, scratch);
    }
}

const ETA_PLATEAU: f64 = 0.995;
const ETA_MOLLIFIER: f64 = 0.005;
const ETA_TABLE_STEP: f64 = 0.002;

/// Radially symmetric eta_R sampled on a grid, with measured constants.
#[derive(Clone, Debug)]
pub struct EtaWindow {
    pub radius: f64,
    pub field: SpaceTimeField,
    /// Decay exponent used for `decay_constant`.
    pub decay_exponent: i32,
    /// Minimum of Re eta_R over grid points of B_R.
    pub c0: f64,
    /// Max of |eta_R| (1 + (|x|+|t|)/R)^4 over the grid.
    pub decay_constant: f64,
    table: Vec<f64>,
}

impl EtaWindow {
    /// eta_R at an arbitrary point, by interpolation in the radial table.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        radial_lookup(&self.table, x.hypot(t) / self.radius)
    }
}

/// Builds eta_R; the grid must cover B_{2R}.
pub fn make_eta(radius: f64, grid: &SpaceTimeGrid) -> Result<EtaWindow> {
    if grid.x_half() < 2.0 * radius || grid.t_half() < 2.0 * radius {
        return Err(WplError::InvalidGrid(format!(
            "eta window needs a grid covering B_{{2R}} = B_{}",
            2.0 * radius
        )));
    }
    let r_max = grid.x_half().hypot(grid.t_half()) / radius;
    let table = eta_table(r_max + 2.0 * ETA_TABLE_STEP);
    let field = SpaceTimeField::from_fn(grid.clone(), |x, t| {
        Complex64::new(radial_lookup(&table, x.hypot(t) / radius), 0.0)
    })?;
    let mut c0 = f64::INFINITY;
    let mut c4: f64 = 0.0;
    for ix in 0..grid.nx() {
        let x = grid.x(ix);
        for it in 0..grid.nt() {
            let t = grid.t(it);
            let z = field.get(ix, it);
            if x.hypot(t) <= radius {
                c0 = c0.min(z.re);
            }
            c4 = c4.max(z.norm() * (1.0 + (x.abs() + t.abs()) / radius).powi(4));
        }
    }
    if !(c0 > 0.0) {
        return Err(WplError::InvalidArgument(format!("eta construction failed: c0 = {c0}")));
    }
    Ok(EtaWindow { radius, field, decay_exponent: 4, c0, decay_constant: c4, table })
}

/// The transform of eta at radius `rho`: the indicator of B_0.995 convolved
/// with a normalized radial bump of radius 0.005.
pub fn eta_hat(rho: f64) -> f64 {
    let (r0, eps) = (ETA_PLATEAU, ETA_MOLLIFIER);
    if rho <= r0 - eps {
        return 1.0;
    }
    if rho >= r0 + eps {
        return 0.0;
    }
    // Fraction of the mollifier mass at distance s from xi lying inside B_r0:
    // the angle set {cos psi >= (rho^2 + s^2 - r0^2) / (2 rho s)}.
    let n = 400;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let s = (i as f64 + 0.5) / n as f64 * eps;
        let bump = (-1.0 / (1.0 - (s / eps).powi(2))).exp() * s;
        let c = ((rho * rho + s * s - r0 * r0) / (2.0 * rho * s)).clamp(-1.0, 1.0);
        num += bump * c.acos() / PI;
        den += bump;
    }
    num / den
}

/// eta(r) for r in [0, r_max] on a uniform table. eta is radial, so
/// eta(r, 0) = (2 pi)^-2 int cos(r a) A(a) da with A the line integral of
/// eta_hat across the disk.
fn eta_table(r_max: f64) -> Vec<f64> {
    let na = 4096;
    let da = 1.0 / na as f64;
    // Abel projection A(a) = 2 int_0^{sqrt(1-a^2)} eta_hat(sqrt(a^2+s^2)) ds.
    let proj: Vec<f64> = (0..=na)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 * da;
            let top = (1.0 - a * a).max(0.0).sqrt();
            let ns = 4096;
            let ds = top / ns as f64;
            let mut acc = 0.0;
            for k in 0..=ns {
                let s = k as f64 * ds;
                let w = if k == 0 || k == ns { 0.5 } else { 1.0 };
                acc += w * eta_hat(a.hypot(s));
            }
            2.0 * acc * ds
        })
        .collect();
    let nr = (r_max / ETA_TABLE_STEP).ceil() as usize + 2;
    (0..nr)
        .into_par_iter()
        .map(|k| {
            let r = k as f64 * ETA_TABLE_STEP;
            let mut acc = 0.0;
            for (i, p) in proj.iter().enumerate() {
                let w = if i == 0 || i == na { 0.5 } else { 1.0 };
                acc += w * p * (r * i as f64 * da).cos();
            }
            2.0 * acc * da / (4.0 * PI * PI)
        })
        .collect()
}

fn radial_lookup(table: &[f64], r: f64) -> f64 {
    let q = r / ETA_TABLE_STEP;
    let i = q.floor() as usize;
    if i + 1 >= table.len() {
        return *table.last().unwrap_or(&0.0);
    }
    let s = q - i as f64;
    table[i] * (1.0 - s) + table[i + 1] * s
}
