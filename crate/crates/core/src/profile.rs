//! Sampled frequency profiles on [-1, 1].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WplError};

pub const OMEGA_MIN: f64 = -1.0;
pub const OMEGA_MAX: f64 = 1.0;

/// A complex function on [-1, 1] sampled at `M` equispaced points,
/// endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyProfile {
    samples: Vec<Complex64>,
    label: Option<String>,
    support: Option<(f64, f64)>,
}

impl FrequencyProfile {
    /// Validates length (power of two, at least 16) and finiteness.
    pub fn new(samples: Vec<Complex64>, label: impl Into<Option<String>>) -> Result<Self> {
        let m = samples.len();
        if m < 16 || !m.is_power_of_two() {
            return Err(WplError::InvalidProfile(format!(
                "length {m} is not a power of two >= 16"
            )));
        }
        if let Some(i) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(WplError::NonFinite(i));
        }
        Ok(Self { samples, label: label.into(), support: None })
    }

    /// Samples `g` on the grid.
    pub fn from_fn(m: usize, label: &str, g: impl Fn(f64) -> Complex64) -> Result<Self> {
        let h = 2.0 / (m.max(2) - 1) as f64;
        let samples = (0..m).map(|j| g(OMEGA_MIN + j as f64 * h)).collect();
        Self::new(samples, Some(label.to_string()))
    }

    /// Declares a support interval; samples outside must be exactly zero.
    pub fn with_support(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(WplError::InvalidProfile(format!("empty support [{lo}, {hi}]")));
        }
        for (j, z) in self.samples.iter().enumerate() {
            let w = self.omega(j);
            if (w < lo || w > hi) && *z != Complex64::new(0.0, 0.0) {
                return Err(WplError::InvalidProfile(format!(
                    "nonzero sample at omega = {w} outside [{lo}, {hi}]"
                )));
            }
        }
        self.support = Some((lo, hi));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn set_label(&mut self, label: &str) {
        self.label = Some(label.to_string());
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    /// Grid spacing h = 2 / (M - 1).
    pub fn step(&self) -> f64 {
        2.0 / (self.len() - 1) as f64
    }

    pub fn omega(&self, j: usize) -> f64 {
        OMEGA_MIN + j as f64 * self.step()
    }

    /// Trapezoid weight of sample `j`.
    pub fn weight(&self, j: usize) -> f64 {
        trapezoid_weight(j, self.len())
    }

    /// Index of the grid point nearest to `omega` (clamped to the grid).
    pub fn nearest_index(&self, omega: f64) -> usize {
        let j = ((omega - OMEGA_MIN) / self.step()).round();
        j.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Trapezoid L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = (0..self.len()).map(|j| self.weight(j) * self.samples[j].norm_sqr()).sum();
        s.sqrt()
    }

    /// Trapezoid L1 norm; bounds |Ef| everywhere.
    pub fn l1_norm(&self) -> f64 {
        (0..self.len()).map(|j| self.weight(j) * self.samples[j].norm()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scaled(&self, lambda: Complex64) -> Self {
        Self {
            samples: self.samples.iter().map(|z| z * lambda).collect(),
            label: self.label.clone(),
            support: self.support,
        }
    }

    /// Pointwise combination a*self + b*other on a common grid.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(WplError::DimensionMismatch(format!(
                "profiles of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        Self::new(samples, None)
    }

    pub fn to_json(&self) -> ProfileJson {
        ProfileJson {
            label: self.label.clone().unwrap_or_default(),
            m: self.len(),
            samples: self.samples.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_json(doc: &ProfileJson) -> Result<Self> {
        if doc.samples.len() != 2 * doc.m {
            return Err(WplError::DimensionMismatch(format!(
                "M = {} but {} numbers",
                doc.m,
                doc.samples.len()
            )));
        }
        let samples = doc.samples.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let label = if doc.label.is_empty() { None } else { Some(doc.label.clone()) };
        Self::new(samples, label)
    }
}

/// Trapezoid weight of sample `j` out of `m` on [-1, 1].
pub fn trapezoid_weight(j: usize, m: usize) -> f64 {
    let h = 2.0 / (m - 1) as f64;
    if j == 0 || j + 1 == m {
        0.5 * h
    } else {
        h
    }
}

/// On-disk profile document: interleaved real and imaginary parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileJson {
    pub label: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub samples: Vec<f64>,
}
