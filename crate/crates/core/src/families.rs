//! Example profiles: the unit bump f0, the single-cap f1, the narrow bump
//! `many`, the bundle of thin bumps and the star of overlapping bumps.
//! All bumps use squared-cosine ramps.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WplError};
use crate::profile::FrequencyProfile;

/// A bump equal to 1 on |w - center| <= plateau, vanishing beyond `support`,
/// with a cos^2 ramp in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub plateau: f64,
    pub support: f64,
    /// Ramps symmetric about the midpoint between plateau and support, so
    /// translates by `plateau + support` add up to exactly 1.
    pub reflective: bool,
}

impl BumpSpec {
    pub fn new(center: f64, plateau: f64, support: f64, reflective: bool) -> Result<Self> {
        if !(0.0 < plateau && plateau < support) {
            return Err(WplError::InvalidArgument(format!(
                "need 0 < plateau < support, got {plateau}, {support}"
            )));
        }
        if center - support < -1.0 - 1e-12 || center + support > 1.0 + 1e-12 {
            return Err(WplError::InvalidArgument(format!(
                "bump at {center} with half-width {support} leaves [-1, 1]"
            )));
        }
        Ok(Self { center, plateau, support, reflective })
    }

    pub fn eval(&self, w: f64) -> f64 {
        ramp((w - self.center).abs(), self.plateau, self.support)
    }
}

/// cos^2 ramp: 1 for d <= a, 0 for d >= b.
fn ramp(d: f64, a: f64, b: f64) -> f64 {
    if d <= a {
        1.0
    } else if d >= b {
        0.0
    } else {
        (FRAC_PI_2 * (d - a) / (b - a)).cos().powi(2)
    }
}

/// An analytic family member; sampled into a profile on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub label: String,
    pub bumps: Vec<BumpSpec>,
}

impl Family {
    pub fn eval(&self, w: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval(w)).sum()
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self.bumps.iter().map(|b| b.center - b.support).fold(f64::INFINITY, f64::min);
        let hi = self.bumps.iter().map(|b| b.center + b.support).fold(f64::NEG_INFINITY, f64::max);
        (lo.max(-1.0), hi.min(1.0))
    }

    pub fn sample(&self, m: usize) -> Result<FrequencyProfile> {
        let f = FrequencyProfile::from_fn(m, &self.label, |w| Complex64::new(self.eval(w), 0.0))?;
        let (lo, hi) = self.support();
        f.with_support(lo, hi)
    }
}

/// Profile length used for scale R: the next power of two >= 12R/pi,
/// at least 1024. This resolves the thinnest bundle bumps and satisfies the
/// Nyquist guard on [-R, R]^2.
pub fn default_samples(r: f64) -> usize {
    ((12.0 * r / std::f64::consts::PI).ceil() as usize).next_power_of_two().max(1024)
}

pub fn f0() -> Family {
    Family { label: "f0".into(), bumps: vec![BumpSpec::new(0.0, 0.5, 1.0, false).unwrap()] }
}

pub fn f1(r: f64) -> Result<Family> {
    let u = check_scale(r)?;
    Ok(Family { label: format!("f1(R={r})"), bumps: vec![BumpSpec::new(0.0, u, 2.0 * u, false)?] })
}

pub fn many(width: f64) -> Result<Family> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(WplError::InvalidArgument(format!("U = {width} must lie in (0, 1]")));
    }
    Ok(Family {
        label: format!("many(U={width})"),
        bumps: vec![BumpSpec::new(0.0, 0.5 * width, width, false)?],
    })
}

/// 2N+1 thin bumps of plateau half-width a/2 and support a = R^{-1/2}/N at n R^{-1/2}.
pub fn bundle(r: f64, n: usize) -> Result<Family> {
    let u = check_scale(r)?;
    if n < 1 || n as f64 >= r.sqrt() {
        return Err(WplError::InvalidArgument(format!("bundle needs 1 <= N < R^1/2, got N = {n}")));
    }
    let a = u / n as f64;
    let bumps = (-(n as i64)..=n as i64)
        .map(|k| BumpSpec::new(k as f64 * u, 0.5 * a, a, false))
        .collect::<Result<_>>()?;
    Ok(Family { label: format!("bundle(R={r},N={n})"), bumps })
}

/// 2N+1 reflective bumps at n R^{-1/2} with plateau R^{-1/2}/4 and support
/// 3R^{-1/2}/4; they sum to 1 on [-(N+1/4), N+1/4] R^{-1/2}.
pub fn star(r: f64, n: usize) -> Result<Family> {
    let u = check_scale(r)?;
    if n < 1 || n as f64 >= r.sqrt() - 1.0 {
        return Err(WplError::InvalidArgument(format!("star needs 1 <= N < R^1/2 - 1, got N = {n}")));
    }
    let bumps = (-(n as i64)..=n as i64)
        .map(|k| BumpSpec::new(k as f64 * u, 0.25 * u, 0.75 * u, true))
        .collect::<Result<_>>()?;
    Ok(Family { label: format!("star(R={r},N={n})"), bumps })
}

fn check_scale(r: f64) -> Result<f64> {
    if !(r >= 4.0) || !r.is_finite() {
        return Err(WplError::InvalidArgument(format!("scale R = {r} must be >= 4")));
    }
    Ok(1.0 / r.sqrt())
}

pub fn make_f0(m: usize) -> Result<FrequencyProfile> {
    f0().sample(m)
}
pub fn make_f1(r: f64, m: usize) -> Result<FrequencyProfile> {
    f1(r)?.sample(m)
}
pub fn make_many(width: f64, m: usize) -> Result<FrequencyProfile> {
    many(width)?.sample(m)
}
pub fn make_bundle(r: f64, n: usize, m: usize) -> Result<FrequencyProfile> {
    bundle(r, n)?.sample(m)
}
pub fn make_star(r: f64, n: usize, m: usize) -> Result<FrequencyProfile> {
    star(r, n)?.sample(m)
}

/// Largest N the sweeps and corpus use for the bundle at scale R.
pub fn bundle_n(r: f64) -> usize {
    (r.sqrt().round() as usize).saturating_sub(1).max(1)
}

/// Largest N the sweeps and corpus use for the star at scale R.
pub fn star_n(r: f64) -> usize {
    (r.sqrt().round() as usize).saturating_sub(2).max(1)
}
