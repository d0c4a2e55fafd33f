//! Space-time grids, sampled fields, tubes and the `.fld` file format.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WplError};

/// Default cap on materialized grid points.
pub const DEFAULT_POINT_CAP: usize = 1 << 26;

/// Relative tolerance for lattice membership of tube parameters.
pub const LATTICE_TOL: f64 = 1e-9;

/// Uniform grid on [-x_half, x_half] x [-t_half, t_half] attached to the ball B_R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    radius: f64,
    nx: usize,
    nt: usize,
    x_half: f64,
    t_half: f64,
}

impl SpaceTimeGrid {
    pub fn new(radius: f64, nx: usize, nt: usize, x_half: f64, t_half: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(WplError::InvalidGrid(format!("radius {radius} must be positive")));
        }
        if nx < 2 || nt < 2 {
            return Err(WplError::InvalidGrid(format!("need nx, nt >= 2, got {nx} x {nt}")));
        }
        if !(x_half >= radius && t_half >= radius) || !x_half.is_finite() || !t_half.is_finite() {
            return Err(WplError::InvalidGrid(format!(
                "ranges [{x_half}, {t_half}] must cover radius {radius}"
            )));
        }
        Ok(Self { radius, nx, nt, x_half, t_half })
    }

    /// Grid on exactly [-R, R]^2.
    pub fn ball(radius: f64, nx: usize, nt: usize) -> Result<Self> {
        Self::new(radius, nx, nt, radius, radius)
    }

    /// Default resolution for B_R: at least 8 samples per packet width R^{1/2}
    /// across `n_range` packet widths, capped at 8192, with nt = nx/4.
    pub fn default_for_ball(radius: f64, n_range: f64) -> Result<Self> {
        let want = (8.0 * radius.sqrt() * n_range).ceil().max(8.0) as usize;
        let nx = want.next_power_of_two().min(8192);
        Self::ball(radius, nx, (nx / 4).max(2))
    }

    /// Grid with spacings at most `dx`, `dt` on [-R, R]^2, odd counts so 0 is a node.
    pub fn ball_with_spacing(radius: f64, dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0 && dt > 0.0) {
            return Err(WplError::InvalidGrid("spacings must be positive".into()));
        }
        let nx = 2 * (radius / dx).ceil() as usize + 1;
        let nt = 2 * (radius / dt).ceil() as usize + 1;
        Self::ball(radius, nx, nt)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn x_half(&self) -> f64 {
        self.x_half
    }
    pub fn t_half(&self) -> f64 {
        self.t_half
    }
    pub fn points(&self) -> usize {
        self.nx * self.nt
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.x_half / (self.nx - 1) as f64
    }
    pub fn dt(&self) -> f64 {
        2.0 * self.t_half / (self.nt - 1) as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        -self.x_half + i as f64 * self.dx()
    }
    pub fn t(&self, k: usize) -> f64 {
        -self.t_half + k as f64 * self.dt()
    }

    /// Frequency samples needed so the phase w^2 t + w x is resolved on this grid.
    pub fn nyquist_samples(&self) -> f64 {
        nyquist_samples(self.x_half, self.t_half)
    }

    pub fn check_nyquist(&self, m: usize) -> Result<()> {
        check_nyquist(self.x_half, self.t_half, m)
    }
}

/// Minimum profile length resolving the kernel phase at |x| <= x, |t| <= t.
pub fn nyquist_samples(x: f64, t: f64) -> f64 {
    4.0 * (x.abs() + 2.0 * t.abs()) / std::f64::consts::PI
}

pub fn check_nyquist(x: f64, t: f64, m: usize) -> Result<()> {
    let required = nyquist_samples(x, t);
    if (m as f64) < required {
        Err(WplError::Nyquist { required, available: m })
    } else {
        Ok(())
    }
}

/// Complex samples on a grid, stored row-major in x: index `ix * nt + it`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: SpaceTimeGrid,
    values: Vec<Complex64>,
}

impl SpaceTimeField {
    pub fn new(grid: SpaceTimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(WplError::DimensionMismatch(format!(
                "{} values for a {} x {} grid",
                values.len(),
                grid.nx(),
                grid.nt()
            )));
        }
        if let Some(i) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(WplError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpaceTimeGrid, g: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.points());
        for ix in 0..grid.nx() {
            let x = grid.x(ix);
            for it in 0..grid.nt() {
                values.push(g(x, grid.t(it)));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn get(&self, ix: usize, it: usize) -> Complex64 {
        self.values[ix * self.grid.nt() + it]
    }

    pub fn scaled(&self, lambda: Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|z| z * lambda).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn write_fld<W: Write>(&self, mut w: W) -> Result<()> {
        let header = FldHeader {
            r: self.grid.radius(),
            nx: self.grid.nx(),
            nt: self.grid.nt(),
            x_range: [-self.grid.x_half(), self.grid.x_half()],
            t_range: [-self.grid.t_half(), self.grid.t_half()],
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for z in &self.values {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_fld<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: FldHeader = serde_json::from_str(line.trim_end())?;
        let x_half = 0.5 * (h.x_range[1] - h.x_range[0]);
        let t_half = 0.5 * (h.t_range[1] - h.t_range[0]);
        let grid = SpaceTimeGrid::new(h.r, h.nx, h.nt, x_half, t_half)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 16 * grid.points() {
            return Err(WplError::DimensionMismatch(format!(
                "{} payload bytes for {} points",
                bytes.len(),
                grid.points()
            )));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_fld(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_fld(std::fs::File::open(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FldHeader {
    #[serde(rename = "R")]
    r: f64,
    nx: usize,
    nt: usize,
    x_range: [f64; 2],
    t_range: [f64; 2],
}

/// The slab {|x - v - slope t| <= w R^{1/2}} with lattice parameters.
///
/// `Tube::new` uses slope = theta. A packet with frequency centre theta
/// actually travels along x = v - 2 theta t under this kernel, which
/// `Tube::packet` encodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub theta: f64,
    pub v: f64,
    pub scale: f64,
    pub width: f64,
    pub slope: f64,
}

impl Tube {
    pub fn new(theta: f64, v: f64, scale: f64, width: f64) -> Result<Self> {
        if !(scale > 0.0) || !(width >= 1.0) {
            return Err(WplError::InvalidArgument(format!(
                "tube needs R > 0 and w >= 1, got R = {scale}, w = {width}"
            )));
        }
        let root = scale.sqrt();
        if !on_lattice(theta * root) || theta.abs() > 1.0 + LATTICE_TOL {
            return Err(WplError::InvalidArgument(format!("theta = {theta} is off the R^-1/2 lattice")));
        }
        if !on_lattice(v / root) {
            return Err(WplError::InvalidArgument(format!("v = {v} is off the R^1/2 lattice")));
        }
        Ok(Self { theta, v, scale, width, slope: theta })
    }

    /// Tube along the group-velocity trajectory of a packet.
    pub fn packet(theta: f64, v: f64, scale: f64, width: f64) -> Result<Self> {
        let mut t = Self::new(theta, v, scale, width)?;
        t.slope = packet_velocity(theta);
        Ok(t)
    }

    pub fn core_distance(&self, x: f64, t: f64) -> f64 {
        (x - self.v - self.slope * t).abs()
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        self.core_distance(x, t) <= self.width * self.scale.sqrt()
    }
}

/// dx/dt of a packet at frequency theta: stationary phase of w^2 t + w x.
pub fn packet_velocity(theta: f64) -> f64 {
    -2.0 * theta
}

fn on_lattice(q: f64) -> bool {
    (q - q.round()).abs() <= LATTICE_TOL * q.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let g = SpaceTimeGrid::ball(10.0, 21, 11).unwrap();
        assert!((g.dx() - 1.0).abs() < 1e-15);
        assert!((g.dt() - 2.0).abs() < 1e-15);
        assert_eq!(g.x(10), 0.0);
        assert!(SpaceTimeGrid::ball(10.0, 1, 11).is_err());
        assert!(SpaceTimeGrid::new(10.0, 4, 4, 5.0, 10.0).is_err());
    }

    #[test]
    fn nyquist_guard() {
        let g = SpaceTimeGrid::ball(100.0, 64, 64).unwrap();
        assert!(g.check_nyquist(256).is_err());
        assert!(g.check_nyquist(512).is_ok());
    }

    #[test]
    fn field_dimension_check() {
        let g = SpaceTimeGrid::ball(1.0, 4, 4).unwrap();
        assert!(SpaceTimeField::new(g.clone(), vec![Complex64::default(); 15]).is_err());
        assert!(SpaceTimeField::new(g, vec![Complex64::default(); 16]).is_ok());
    }

    #[test]
    fn fld_round_trip() {
        let g = SpaceTimeGrid::new(2.0, 5, 3, 2.5, 2.0).unwrap();
        let f = SpaceTimeField::from_fn(g, |x, t| Complex64::new(x, t * t)).unwrap();
        let mut buf = Vec::new();
        f.write_fld(&mut buf).unwrap();
        let back = SpaceTimeField::read_fld(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn tube_membership() {
        let t = Tube::new(0.0, 0.0, 100.0, 1.0).unwrap();
        assert!(t.contains(10.0, 0.0));
        assert!(!t.contains(10.01, 0.0));
        let s = Tube::new(0.1, 0.0, 100.0, 1.0).unwrap();
        assert!(s.contains(11.0, 10.0));
        let p = Tube::packet(0.1, 0.0, 100.0, 1.0).unwrap();
        assert!(!p.contains(11.0, 10.0));
        assert!(p.contains(-11.0, 10.0));
    }

    #[test]
    fn tube_lattice_check() {
        assert!(Tube::new(0.05, 0.0, 100.0, 1.0).is_err());
        assert!(Tube::new(0.1, 5.0, 100.0, 1.0).is_err());
        assert!(Tube::new(0.1, 20.0, 100.0, 1.0).is_ok());
    }
}
