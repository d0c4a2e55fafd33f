//! L^p norms of fields over the disk B_R, the time-band L2 norm, and profile norms.

use num_complex::Complex64;

use crate::error::{Result, WplError};
use crate::grid::{SpaceTimeField, SpaceTimeGrid};
use crate::profile::FrequencyProfile;

/// (sum over grid points in the closed disk of radius R of |value|^p dx dt)^{1/p}.
pub fn lp_norm_ball(field: &SpaceTimeField, p: f64, r: f64) -> Result<f64> {
    let grid = field.grid();
    check_p(p)?;
    check_cover(grid, r)?;
    let mut acc = BallSums::new(&[p]);
    for ix in 0..grid.nx() {
        let x = grid.x(ix);
        for it in 0..grid.nt() {
            acc.add_point(x, grid.t(it), field.get(ix, it), r);
        }
    }
    Ok(acc.finish(grid)[0])
}

/// L2 norm over the grid's whole x-range and |t| <= R.
pub fn weighted_l2_band(field: &SpaceTimeField, r: f64) -> Result<f64> {
    let grid = field.grid();
    if grid.t_half() < r {
        return Err(WplError::InvalidGrid(format!("t-range {} does not cover the band |t| <= {r}", grid.t_half())));
    }
    let mut s = 0.0;
    for ix in 0..grid.nx() {
        for it in 0..grid.nt() {
            if grid.t(it).abs() <= r {
                s += field.get(ix, it).norm_sqr();
            }
        }
    }
    Ok((s * grid.dx() * grid.dt()).sqrt())
}

pub fn l2_norm_profile(f: &FrequencyProfile) -> f64 {
    f.l2_norm()
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(WplError::InvalidArgument(format!("p = {p} must lie in [1, inf)")));
    }
    Ok(())
}

fn check_cover(grid: &SpaceTimeGrid, r: f64) -> Result<()> {
    if grid.x_half() < r || grid.t_half() < r {
        return Err(WplError::InvalidGrid(format!("grid does not cover B_{r}")));
    }
    Ok(())
}

/// Running sums of |z|^p over the disk for several p.
#[derive(Clone, Debug)]
pub struct BallSums {
    ps: Vec<f64>,
    sums: Vec<f64>,
}

impl BallSums {
    pub fn new(ps: &[f64]) -> Self {
        Self { ps: ps.to_vec(), sums: vec![0.0; ps.len()] }
    }

    pub fn add_point(&mut self, x: f64, t: f64, z: Complex64, r: f64) {
        if x * x + t * t <= r * r {
            let a = z.norm();
            for (s, &p) in self.sums.iter_mut().zip(&self.ps) {
                *s += a.powf(p);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }

    pub fn finish(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        let cell = grid.dx() * grid.dt();
        self.sums.iter().zip(&self.ps).map(|(s, p)| (s * cell).powf(1.0 / p)).collect()
    }
}

/// Per-slice reductions used when streaming a field: disk sums for the
/// requested exponents, the band sum of |z|^2 and the running maximum.
#[derive(Clone, Debug)]
pub struct SliceSummary {
    pub ball: BallSums,
    pub band_sq: f64,
    pub sup: f64,
}

impl SliceSummary {
    pub fn of_slice(grid: &SpaceTimeGrid, t: f64, slice: &[Complex64], ps: &[f64], r: f64) -> Self {
        let mut ball = BallSums::new(ps);
        let mut band_sq = 0.0;
        let mut sup: f64 = 0.0;
        let in_band = t.abs() <= r;
        for (ix, z) in slice.iter().enumerate() {
            ball.add_point(grid.x(ix), t, *z, r);
            let a = z.norm_sqr();
            if in_band {
                band_sq += a;
            }
            sup = sup.max(a);
        }
        Self { ball, band_sq, sup: sup.sqrt() }
    }
}

/// Streamed norms of one field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldNorms {
    pub ps: Vec<f64>,
    pub lp: Vec<f64>,
    pub band_l2: f64,
    pub sup: f64,
}

/// Folds slice summaries in slice order, so the result is independent of scheduling.
pub fn combine_slices(grid: &SpaceTimeGrid, ps: &[f64], slices: &[SliceSummary]) -> FieldNorms {
    let mut ball = BallSums::new(ps);
    let mut band = 0.0;
    let mut sup: f64 = 0.0;
    for s in slices {
        ball.merge(&s.ball);
        band += s.band_sq;
        sup = sup.max(s.sup);
    }
    FieldNorms {
        ps: ps.to_vec(),
        lp: ball.finish(grid),
        band_l2: (band * grid.dx() * grid.dt()).sqrt(),
        sup,
    }
}
