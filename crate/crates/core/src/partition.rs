//! Polynomial partitioning of weighted planar point sets.
//!
//! Bisecting polynomials are found one at a time: step k looks for a
//! polynomial of the smallest degree whose coefficient count can in principle
//! bisect all 2^{k-1} current cells at once, and minimizes the worst cell
//! imbalance with Nelder-Mead on a tanh-smoothed surrogate. Cells are sign
//! vectors of the bisectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WplError};

/// Construction tolerance on cell imbalance.
pub const DEFAULT_TOLERANCE: f64 = 0.1;
/// Values below this times the coefficient norm count as zero.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Samples per line in `line_cell_incidences`.
pub const LINE_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoints {
    pub points: Vec<(f64, f64, f64)>,
}

impl WeightedPoints {
    pub fn new(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        if points.iter().any(|&(x, t, w)| !(x.is_finite() && t.is_finite() && w.is_finite()) || w < 0.0) {
            return Err(WplError::InvalidArgument("points need finite coordinates and weights >= 0".into()));
        }
        if !(points.iter().map(|p| p.2).sum::<f64>() > 0.0) {
            return Err(WplError::InvalidArgument("total weight must be positive".into()));
        }
        Ok(Self { points })
    }

    pub fn unit(xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(xy.iter().map(|&(x, t)| (x, t, 1.0)).collect())
    }

    /// `n` unit-weight points uniform in the disk of radius `r`.
    pub fn uniform_disk(n: usize, r: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                let (rad, ang) = (r * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>());
                (rad * ang.cos(), rad * ang.sin(), 1.0)
            })
            .collect();
        Self { points: pts }
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.2).sum()
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        let mut pts = Vec::new();
        for row in rd.deserialize() {
            let r: PointRow = row?;
            pts.push((r.x, r.t, r.w));
        }
        Self::new(pts)
    }
}

#[derive(Deserialize)]
struct PointRow {
    x: f64,
    t: f64,
    w: f64,
}

/// Bivariate polynomial sum c_{ij} X^i T^j over i + j <= degree, in the
/// affine coordinates X = (x - cx) / s, T = (t - ct) / s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub degree: usize,
    pub coeffs: Vec<f64>,
    pub center: (f64, f64),
    pub scale: f64,
}

/// Number of monomials of total degree <= d.
pub fn monomial_count(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Exponent pairs (i, j) in coefficient order.
fn monomials(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(monomial_count(d));
    for total in 0..=d {
        for i in (0..=total).rev() {
            out.push((i, total - i));
        }
    }
    out
}

impl Poly {
    /// Polynomial in raw coordinates.
    pub fn new(degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        Self::with_frame(degree, coeffs, (0.0, 0.0), 1.0)
    }

    pub fn with_frame(degree: usize, coeffs: Vec<f64>, center: (f64, f64), scale: f64) -> Result<Self> {
        if coeffs.len() != monomial_count(degree) {
            return Err(WplError::DimensionMismatch(format!(
                "degree {degree} needs {} coefficients, got {}",
                monomial_count(degree),
                coeffs.len()
            )));
        }
        if !(scale > 0.0) || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(WplError::InvalidArgument("polynomial needs finite coefficients and scale > 0".into()));
        }
        Ok(Self { degree, coeffs, center, scale })
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn local(&self, x: f64, t: f64) -> (f64, f64) {
        ((x - self.center.0) / self.scale, (t - self.center.1) / self.scale)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let (a, b) = self.local(x, t);
        let (pa, pb) = (powers(a, self.degree), powers(b, self.degree));
        monomials(self.degree).iter().zip(&self.coeffs).map(|(&(i, j), c)| c * pa[i] * pb[j]).sum()
    }

    /// Value and gradient with respect to the raw coordinates.
    pub fn eval_grad(&self, x: f64, t: f64) -> (f64, f64, f64) {
        let (a, b) = self.local(x, t);
        let (pa, pb) = (powers(a, self.degree), powers(b, self.degree));
        let (mut v, mut gx, mut gt) = (0.0, 0.0, 0.0);
        for (&(i, j), c) in monomials(self.degree).iter().zip(&self.coeffs) {
            v += c * pa[i] * pb[j];
            if i > 0 {
                gx += c * i as f64 * pa[i - 1] * pb[j];
            }
            if j > 0 {
                gt += c * j as f64 * pa[i] * pb[j - 1];
            }
        }
        (v, gx / self.scale, gt / self.scale)
    }

    /// Product of two polynomials sharing a frame.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.center != other.center || self.scale != other.scale {
            return Err(WplError::InvalidArgument("polynomials use different frames".into()));
        }
        let d = self.degree + other.degree;
        let index = |i: usize, j: usize| (i + j) * (i + j + 1) / 2 + j;
        let mut c = vec![0.0; monomial_count(d)];
        for (&(i1, j1), a) in monomials(self.degree).iter().zip(&self.coeffs) {
            for (&(i2, j2), b) in monomials(other.degree).iter().zip(&other.coeffs) {
                c[index(i1 + i2, j1 + j2)] += a * b;
            }
        }
        Self::with_frame(d, c, self.center, self.scale)
    }
}

fn powers(a: f64, d: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(d + 1);
    p.push(1.0);
    for k in 0..d {
        p.push(p[k] * a);
    }
    p
}

/// Location of a point relative to a partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellId {
    Cell(u32),
    OnBoundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub bisectors: Vec<Poly>,
    pub max_degree: usize,
    pub product_degree: usize,
    /// Weight per sign vector; bit k set when bisector k is positive.
    pub cell_weights: Vec<f64>,
    pub boundary_weight: f64,
    pub total_weight: f64,
    pub imbalance: f64,
    pub nonempty_cells: usize,
}

impl PartitionResult {
    /// Evaluates given bisectors on a point set.
    pub fn from_bisectors(bisectors: Vec<Poly>, max_degree: usize, pts: &WeightedPoints) -> Self {
        let product_degree = bisectors.iter().map(|p| p.degree).sum();
        let mut out = Self {
            bisectors,
            max_degree,
            product_degree,
            cell_weights: vec![],
            boundary_weight: 0.0,
            total_weight: pts.total_weight(),
            imbalance: 0.0,
            nonempty_cells: 0,
        };
        let mut w = vec![0.0; 1 << out.bisectors.len()];
        let mut boundary = 0.0;
        for &(x, t, wt) in &pts.points {
            match out.cell_of(x, t) {
                CellId::Cell(c) => w[c as usize] += wt,
                CellId::OnBoundary => boundary += wt,
            }
        }
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        out.imbalance = if mean > 0.0 { w.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max) / mean } else { f64::INFINITY };
        out.nonempty_cells = w.iter().filter(|&&c| c > 0.0).count();
        out.cell_weights = w;
        out.boundary_weight = boundary;
        out
    }

    pub fn cell_count(&self) -> usize {
        self.cell_weights.len()
    }

    pub fn cell_of(&self, x: f64, t: f64) -> CellId {
        let mut mask = 0u32;
        for (k, p) in self.bisectors.iter().enumerate() {
            let v = p.eval(x, t);
            if v.abs() <= BOUNDARY_TOL * p.coefficient_norm() {
                return CellId::OnBoundary;
            }
            if v > 0.0 {
                mask |= 1 << k;
            }
        }
        CellId::Cell(mask)
    }

    /// The partition polynomial: the product of the bisectors.
    pub fn partition_polynomial(&self) -> Result<Poly> {
        let mut it = self.bisectors.iter();
        let first = it.next().ok_or_else(|| WplError::InvalidArgument("no bisectors".into()))?.clone();
        it.try_fold(first, |acc, p| acc.mul(p))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PartitionOptions {
    pub tolerance: f64,
    pub seed: u64,
    pub restarts: usize,
    pub rounds: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, seed: 0, restarts: 8, rounds: 4 }
    }
}

/// Degrees of the successive bisectors for degree budget `d`: step k uses the
/// least degree with at least 2^{k-1} free coefficients, and steps are taken
/// while the total degree stays within the budget (always at least one).
pub fn degree_schedule(d: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut total = 0;
    for k in 1.. {
        let cells = 1usize << (k - 1);
        let deg = (1..).find(|&e: &usize| e * (e + 3) / 2 >= cells).unwrap();
        if total + deg > d && !out.is_empty() {
            break;
        }
        total += deg;
        out.push(deg);
        if total >= d {
            break;
        }
    }
    out
}

pub fn build_partition(pts: &WeightedPoints, d: usize) -> Result<PartitionResult> {
    build_partition_with(pts, d, PartitionOptions::default())
}

pub fn build_partition_with(pts: &WeightedPoints, d: usize, opts: PartitionOptions) -> Result<PartitionResult> {
    let result = build_once(pts, d, opts)?;
    if result.boundary_weight <= 0.01 * result.total_weight {
        return Ok(result);
    }
    // Too much mass on zero sets: jitter positions and rebuild.
    let scale = pts.points.iter().map(|p| p.0.abs().max(p.1.abs())).fold(1e-300, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let jittered = WeightedPoints {
        points: pts
            .points
            .iter()
            .map(|&(x, t, w)| (x + 1e-9 * scale * rng.gen_range(-1.0..1.0), t + 1e-9 * scale * rng.gen_range(-1.0..1.0), w))
            .collect(),
    };
    let rebuilt = build_once(&jittered, d, opts)?;
    Ok(PartitionResult::from_bisectors(rebuilt.bisectors, d, pts))
}

fn build_once(pts: &WeightedPoints, d: usize, opts: PartitionOptions) -> Result<PartitionResult> {
    if !(1..=8).contains(&d) {
        return Err(WplError::InvalidArgument(format!("degree budget D = {d} must lie in [1, 8]")));
    }
    let schedule = degree_schedule(d);
    let need = 1usize << schedule.len();
    let live: Vec<(f64, f64, f64)> = pts.points.iter().copied().filter(|p| p.2 > 0.0).collect();
    if live.len() < need {
        return Err(WplError::TooFewPoints { have: live.len(), need });
    }
    // Frame: weighted centroid and radius of the cloud.
    let wsum: f64 = live.iter().map(|p| p.2).sum();
    let cx = live.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum;
    let ct = live.iter().map(|p| p.1 * p.2).sum::<f64>() / wsum;
    let scale = live.iter().map(|p| (p.0 - cx).hypot(p.1 - ct)).fold(0.0, f64::max).max(1e-300);
    let local: Vec<(f64, f64)> = live.iter().map(|p| ((p.0 - cx) / scale, (p.1 - ct) / scale)).collect();
    let weights: Vec<f64> = live.iter().map(|p| p.2).collect();

    let step_target = opts.tolerance / (2.0 * schedule.len() as f64);
    let mut cells = vec![0u32; live.len()];
    let mut bisectors = Vec::new();
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    for (k, &deg) in schedule.iter().enumerate() {
        let basis = design_matrix(&local, deg);
        let problem = Bisection { basis: &basis, weights: &weights, cells: &cells, ncells: 1 << k };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..opts.rounds {
            let seeds: Vec<u64> = (0..opts.restarts).map(|_| master.gen()).collect();
            let found: Vec<(f64, Vec<f64>)> = seeds.par_iter().map(|&s| problem.solve(s)).collect();
            for cand in found {
                if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                    best = Some(cand);
                }
            }
            if best.as_ref().unwrap().0 <= step_target {
                break;
            }
        }
        let (_, coeffs) = best.unwrap();
        let poly = Poly::with_frame(deg, coeffs, (cx, ct), scale)?;
        let tol = BOUNDARY_TOL * poly.coefficient_norm();
        for (i, row) in basis.chunks(monomial_count(deg)).enumerate() {
            let v: f64 = row.iter().zip(&poly.coeffs).map(|(a, b)| a * b).sum();
            if v.abs() > tol && v > 0.0 {
                cells[i] |= 1 << k;
            }
        }
        bisectors.push(poly);
    }
    let result = PartitionResult::from_bisectors(bisectors, d, pts);
    if result.imbalance > opts.tolerance {
        return Err(WplError::OptimizerFailed { target: opts.tolerance, best: result.imbalance });
    }
    Ok(result)
}

fn design_matrix(pts: &[(f64, f64)], deg: usize) -> Vec<f64> {
    let mons = monomials(deg);
    let mut out = Vec::with_capacity(pts.len() * mons.len());
    for &(a, b) in pts {
        let (pa, pb) = (powers(a, deg), powers(b, deg));
        out.extend(mons.iter().map(|&(i, j)| pa[i] * pb[j]));
    }
    out
}

struct Bisection<'a> {
    basis: &'a [f64],
    weights: &'a [f64],
    cells: &'a [u32],
    ncells: usize,
}

impl Bisection<'_> {
    fn dim(&self) -> usize {
        self.basis.len() / self.weights.len()
    }

    fn values(&self, c: &[f64]) -> Vec<f64> {
        self.basis.chunks(c.len()).map(|row| row.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
    }

    /// Worst over cells of (|W+ - W-| + W0) / W, where W0 is mass on the zero set.
    fn exact_objective(&self, c: &[f64]) -> f64 {
        let tol = BOUNDARY_TOL * c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut excess = vec![0.0; self.ncells];
        let mut zero = vec![0.0; self.ncells];
        let mut tot = vec![0.0; self.ncells];
        for ((v, w), &cell) in self.values(c).iter().zip(self.weights).zip(self.cells) {
            let cell = cell as usize;
            tot[cell] += w;
            if v.abs() <= tol {
                zero[cell] += w;
            } else {
                excess[cell] += w * v.signum();
            }
        }
        (0..self.ncells).filter(|&k| tot[k] > 0.0).map(|k| (excess[k].abs() + zero[k]) / tot[k]).fold(0.0, f64::max)
    }

    fn smooth_objective(&self, c: &[f64], sigma: f64) -> f64 {
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        let vals = self.values(c);
        let rms = (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt().max(1e-300);
        let mut bal = vec![0.0; self.ncells];
        let mut tot = vec![0.0; self.ncells];
        for ((v, w), &cell) in vals.iter().zip(self.weights).zip(self.cells) {
            bal[cell as usize] += w * (v / (sigma * rms)).tanh();
            tot[cell as usize] += w;
        }
        bal.iter().zip(&tot).filter(|(_, t)| **t > 0.0).map(|(b, t)| (b / t).powi(2)).sum()
    }

    /// One restart: random start, annealed smoothing, Nelder-Mead.
    fn solve(&self, seed: u64) -> (f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // Start from a level set through the weighted median.
        let vals = self.values(&x);
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let half = self.weights.iter().sum::<f64>() / 2.0;
        let mut acc = 0.0;
        for &i in &order {
            acc += self.weights[i];
            if acc >= half {
                x[0] -= vals[i];
                break;
            }
        }
        let mut best = (self.exact_objective(&x), x.clone());
        for sigma in [0.3, 0.1, 0.03, 0.01] {
            x = nelder_mead(|c| self.smooth_objective(c, sigma), &x, 0.3, 300 * n);
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                x.iter_mut().for_each(|a| *a /= norm);
            }
            let e = self.exact_objective(&x);
            if e < best.0 {
                best = (e, x.clone());
            }
        }
        best
    }
}

/// Plain Nelder-Mead minimization from `x0` with initial step `step`.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> Vec<f64> {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= 1e-14 * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    for k in 0..n {
                        simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                    }
                    vals[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    simplex[best].clone()
}

/// Distinct cells met by the line x = v + theta t for |t| <= window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Incidence {
    pub cells: usize,
    /// Most samples lie on a zero set; cells were counted on both sides.
    pub degenerate: bool,
}

pub fn line_cell_incidences(part: &PartitionResult, theta: f64, v: f64, window: f64) -> Incidence {
    let mut seen = std::collections::BTreeSet::new();
    let mut on_zero = 0;
    let nudge = 1e-6 * window.max(1e-300);
    let (nx, nt) = {
        let n = (1.0 + theta * theta).sqrt();
        (1.0 / n, -theta / n)
    };
    for i in 0..LINE_SAMPLES {
        let t = -window + 2.0 * window * i as f64 / (LINE_SAMPLES - 1) as f64;
        let x = v + theta * t;
        match part.cell_of(x, t) {
            CellId::Cell(c) => {
                seen.insert(c);
            }
            CellId::OnBoundary => {
                on_zero += 1;
                for s in [-1.0, 1.0] {
                    if let CellId::Cell(c) = part.cell_of(x + s * nudge * nx, t + s * nudge * nt) {
                        seen.insert(c);
                    }
                }
            }
        }
    }
    Incidence { cells: seen.len(), degenerate: 2 * on_zero > LINE_SAMPLES }
}

/// Monte Carlo area of {q in B_R : dist(q, Z(poly)) <= rho}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub area: f64,
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
    pub redrawn: usize,
}

pub fn neighborhood_area(poly: &Poly, rho: f64, r: f64, n_samples: usize, seed: u64) -> Result<AreaEstimate> {
    if !(rho > 0.0 && rho <= r) {
        return Err(WplError::InvalidArgument(format!("need 0 < rho <= R, got rho = {rho}, R = {r}")));
    }
    if n_samples < 10_000 {
        return Err(WplError::InvalidArgument(format!("{n_samples} samples; at least 10^4 required")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gscale = poly.coefficient_norm() / poly.scale;
    let mut hits = 0;
    let mut redrawn = 0;
    for _ in 0..n_samples {
        let mut attempts = 0;
        loop {
            let (rad, ang) = (r * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>());
            let (x, t) = (rad * ang.cos(), rad * ang.sin());
            match distance_to_zero_set(poly, x, t, 4.0 * rho, gscale) {
                Some(d) => {
                    if d <= rho {
                        hits += 1;
                    }
                    break;
                }
                None => {
                    attempts += 1;
                    redrawn += 1;
                    if attempts >= 10 {
                        return Err(WplError::VanishingGradient { attempts });
                    }
                }
            }
        }
    }
    let disk = std::f64::consts::PI * r * r;
    let frac = hits as f64 / n_samples as f64;
    Ok(AreaEstimate {
        area: disk * frac,
        stderr: disk * (frac * (1.0 - frac) / n_samples as f64).sqrt(),
        hits,
        samples: n_samples,
        redrawn,
    })
}

/// Distance from (x, t) to Z(poly): the first-order estimate |F| / |grad F|
/// screens far points, then Newton steps along the gradient find a foot
/// point. `None` when the gradient vanishes.
fn distance_to_zero_set(poly: &Poly, x: f64, t: f64, screen: f64, gscale: f64) -> Option<f64> {
    let (v, gx, gt) = poly.eval_grad(x, t);
    let g2 = gx * gx + gt * gt;
    if g2.sqrt() <= 1e-13 * gscale {
        return if v == 0.0 { Some(0.0) } else { None };
    }
    if v.abs() / g2.sqrt() > screen {
        return Some(f64::INFINITY);
    }
    let (mut y, mut s) = (x, t);
    let (mut fv, mut fx, mut ft) = (v, gx, gt);
    for _ in 0..50 {
        let g2 = fx * fx + ft * ft;
        if g2.sqrt() <= 1e-13 * gscale {
            return None;
        }
        let step = fv / g2;
        y -= step * fx;
        s -= step * ft;
        if (step * g2.sqrt()).abs() <= 1e-12 * (1.0 + y.abs() + s.abs()) {
            break;
        }
        (fv, fx, ft) = poly.eval_grad(y, s);
    }
    Some((y - x).hypot(s - t))
}

/// Random polynomial of degree `d` in the frame scaled to B_R, with its zero
/// set forced through a random point of B_{R/2}.
pub fn random_poly(d: usize, r: f64, seed: u64) -> Poly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..monomial_count(d)).map(|_| rng.sample(StandardNormal)).collect();
    let mut p = Poly::with_frame(d, coeffs, (0.0, 0.0), r).expect("valid by construction");
    let (rad, ang) = (0.5 * r * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>());
    p.coeffs[0] -= p.eval(rad * ang.cos(), rad * ang.sin());
    p
}
