//! The (p, alpha, beta) exponent region: the sufficient five-constraint
//! system, the necessary four-constraint system, interpolation, the
//! alpha/beta extension map and the named vertices.
//!
//! Every constraint is linear in (p, p alpha, p beta). Points built from
//! rationals are checked exactly; float points get a 1e-12 slack.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Result, WplError};

pub const FLOAT_SLACK: f64 = 1e-12;

/// Human-readable forms of the five constraints, in order.
pub const CONSTRAINTS: [&str; 5] = [
    "beta <= 1",
    "4 p alpha + p >= 6",
    "2 p alpha - p beta + p >= 4",
    "4 alpha - beta >= 0",
    "12 p alpha - 4 p beta + 3 p >= 14",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentPoint {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    exact: Option<[Rational64; 3]>,
}

impl ExponentPoint {
    pub fn new(p: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(p.is_finite() && alpha.is_finite() && beta.is_finite()) {
            return Err(WplError::InvalidArgument("exponents must be finite".into()));
        }
        if !(2.0..=6.0).contains(&p) || alpha < 0.0 || beta < 0.0 {
            return Err(WplError::InvalidArgument(format!(
                "need p in [2, 6] and alpha, beta >= 0, got ({p}, {alpha}, {beta})"
            )));
        }
        Ok(Self { p, alpha, beta, exact: None })
    }

    pub fn exact(p: Rational64, alpha: Rational64, beta: Rational64) -> Result<Self> {
        let mut pt = Self::new(to_f64(p), to_f64(alpha), to_f64(beta))?;
        pt.exact = Some([p, alpha, beta]);
        Ok(pt)
    }

    /// Exact point from (numerator, denominator) pairs.
    pub fn ratios(p: (i64, i64), alpha: (i64, i64), beta: (i64, i64)) -> Result<Self> {
        let r = |(n, d): (i64, i64)| Rational64::new(n, d);
        Self::exact(r(p), r(alpha), r(beta))
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_coords(&self) -> Option<[Rational64; 3]> {
        self.exact
    }

    /// Constraint slacks; all must be >= 0.
    pub fn report(&self) -> ConstraintReport {
        match self.exact {
            Some([p, a, b]) => {
                let s = slacks(p, a, b, Rational64::from_integer);
                let ok = s.map(|x| x >= Rational64::zero());
                let tight = s.map(|x| x.is_zero());
                ConstraintReport { slacks: s.map(to_f64), satisfied: ok, tight, exact: true }
            }
            None => {
                let s = slacks(self.p, self.alpha, self.beta, |k| k as f64);
                ConstraintReport {
                    slacks: s,
                    satisfied: s.map(|x| x >= -FLOAT_SLACK),
                    tight: s.map(|x| x.abs() <= FLOAT_SLACK),
                    exact: false,
                }
            }
        }
    }
}

fn slacks<T>(p: T, a: T, b: T, k: impl Fn(i64) -> T) -> [T; 5]
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>,
{
    let pa = p * a;
    let pb = p * b;
    [
        k(1) - b,
        k(4) * pa + p - k(6),
        k(2) * pa - pb + p - k(4),
        k(4) * a - b,
        k(12) * pa - k(4) * pb + k(3) * p - k(14),
    ]
}

fn to_f64(r: Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational for `x` when `x` is a short binary fraction.
fn exact_scalar(x: f64) -> Option<Rational64> {
    let r = Rational64::approximate_float(x)?;
    (to_f64(r) == x).then_some(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub slacks: [f64; 5],
    pub satisfied: [bool; 5],
    pub tight: [bool; 5],
    pub exact: bool,
}

impl ConstraintReport {
    pub fn sufficient(&self) -> bool {
        self.satisfied.iter().all(|&b| b)
    }
    pub fn necessary(&self) -> bool {
        self.satisfied[..4].iter().all(|&b| b)
    }
    /// 1-based indices of constraints holding with equality.
    pub fn tight_constraints(&self) -> Vec<usize> {
        (0..5).filter(|&i| self.tight[i]).map(|i| i + 1).collect()
    }
    /// 1-based indices of violated constraints.
    pub fn violated(&self) -> Vec<usize> {
        (0..5).filter(|&i| !self.satisfied[i]).map(|i| i + 1).collect()
    }
}

pub fn satisfies_sufficient(pt: &ExponentPoint) -> bool {
    pt.report().sufficient()
}

pub fn satisfies_necessary(pt: &ExponentPoint) -> bool {
    pt.report().necessary()
}

/// lambda * pt1 + (1 - lambda) * pt2 in the coordinates (p, p alpha, p beta).
pub fn interpolate(pt1: &ExponentPoint, pt2: &ExponentPoint, lambda: f64) -> Result<ExponentPoint> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(WplError::InvalidArgument(format!("lambda = {lambda} must lie in [0, 1]")));
    }
    if let (Some(a), Some(b), Some(l)) = (pt1.exact, pt2.exact, exact_scalar(lambda)) {
        let m = Rational64::from_integer(1) - l;
        let p = l * a[0] + m * b[0];
        let pa = l * a[0] * a[1] + m * b[0] * b[1];
        let pb = l * a[0] * a[2] + m * b[0] * b[2];
        return ExponentPoint::exact(p, pa / p, pb / p);
    }
    let m = 1.0 - lambda;
    let p = lambda * pt1.p + m * pt2.p;
    let pa = lambda * pt1.p * pt1.alpha + m * pt2.p * pt2.alpha;
    let pb = lambda * pt1.p * pt1.beta + m * pt2.p * pt2.beta;
    ExponentPoint::new(p, pa / p, pb / p)
}

/// (p, alpha + lambda, beta + 2 lambda), defined while beta + 2 lambda <= 1.
pub fn extend_point(pt: &ExponentPoint, lambda: f64) -> Result<ExponentPoint> {
    if !(lambda > 0.0) {
        return Err(WplError::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    if let (Some([p, a, b]), Some(l)) = (pt.exact, exact_scalar(lambda)) {
        let nb = b + Rational64::from_integer(2) * l;
        if nb > Rational64::from_integer(1) {
            return Err(WplError::InvalidArgument(format!("beta + 2 lambda = {nb} exceeds 1")));
        }
        return ExponentPoint::exact(p, a + l, nb);
    }
    let nb = pt.beta + 2.0 * lambda;
    if nb > 1.0 + FLOAT_SLACK {
        return Err(WplError::InvalidArgument(format!("beta + 2 lambda = {nb} exceeds 1")));
    }
    ExponentPoint::new(pt.p, pt.alpha + lambda, nb.min(1.0))
}

/// X, U, V, W, Y and the conjectured point F.
pub fn named_vertices() -> BTreeMap<&'static str, ExponentPoint> {
    let v = |p, a, b| ExponentPoint::ratios(p, a, b).expect("vertex table is valid");
    BTreeMap::from([
        ("X", v((2, 1), (1, 2), (0, 1))),
        ("U", v((4, 1), (1, 8), (1, 4))),
        ("V", v((5, 1), (1, 20), (1, 5))),
        ("Y", v((6, 1), (0, 1), (0, 1))),
        ("W", v((6, 1), (1, 6), (2, 3))),
        ("F", v((14, 3), (1, 14), (2, 7))),
    ])
}

pub fn lookup(name: &str) -> Result<ExponentPoint> {
    named_vertices().get(name).copied().ok_or_else(|| WplError::UnknownVertex(name.to_string()))
}
