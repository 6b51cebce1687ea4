//! Regular grids and their CSV / flat binary dumps.
//!
//! Binary layout (little endian):
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `SSGD` |
//! | 4 | format version `u32` (currently 1) |
//! | 24 | dims `nx, ny, nz` as `u64` |
//! | 48 | bounds `x_lo, y_lo, z_lo, x_hi, y_hi, z_hi` as `f64` |
//! | 4 | number of components `u32` |
//! | per component | name length `u32` then UTF-8 bytes |
//! | rest | `f64` values, point-major: `x` index slowest, `z` fastest, components interleaved |

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::Point3;

pub const MAGIC: &[u8; 4] = b"SSGD";
pub const FORMAT_VERSION: u32 = 1;
/// Default cap on grid points per dump.
pub const DEFAULT_GRID_CAP: usize = 1 << 24;

/// Axis-aligned regular grid including both end points on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub lo: Point3,
    pub hi: Point3,
}

impl GridSpec {
    pub fn new(dims: [usize; 3], lo: Point3, hi: Point3) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParam { name: "grid", reason: "every dimension must be >= 1".into() });
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) || (0..3).any(|i| hi[i] < lo[i]) {
            return Err(Error::InvalidParam { name: "grid", reason: "bounds must be finite with lo <= hi".into() });
        }
        Ok(GridSpec { dims, lo, hi })
    }

    /// Total number of points, saturating.
    pub fn len(&self) -> usize {
        self.dims.iter().fold(1usize, |acc, &d| acc.saturating_mul(d))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.dims[axis];
        if n == 1 {
            return self.lo[axis];
        }
        self.lo[axis] + (self.hi[axis] - self.lo[axis]) * (i as f64 / (n - 1) as f64)
    }

    /// Point with row-major flat index `idx`.
    pub fn point(&self, idx: usize) -> Point3 {
        let [_, ny, nz] = self.dims;
        let (i, j, k) = (idx / (ny * nz), (idx / nz) % ny, idx % nz);
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }
}

/// Values of one or more components on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub grid: GridSpec,
    pub components: Vec<String>,
    /// Point-major values, `components.len()` per point.
    pub data: Vec<f64>,
}

impl GridDump {
    /// Evaluates `f` at every grid point in parallel; output order is fixed.
    pub fn evaluate<F>(grid: GridSpec, components: Vec<String>, cap: usize, f: F) -> Result<Self>
    where
        F: Fn(Point3) -> Result<Vec<f64>> + Sync,
    {
        let n = grid.len();
        if n > cap {
            return Err(Error::Resolution { requested: n, cap });
        }
        let nc = components.len();
        let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|idx| f(grid.point(idx))).collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(n * nc);
        for row in rows {
            debug_assert_eq!(row.len(), nc);
            data.extend(row);
        }
        Ok(GridDump { grid, components, data })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn value(&self, idx: usize, component: usize) -> f64 {
        self.data[idx * self.components.len() + component]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "x,y,z")?;
        for c in &self.components {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        let nc = self.components.len();
        for idx in 0..self.len() {
            let p = self.grid.point(idx);
            write!(w, "{},{},{}", p[0], p[1], p[2])?;
            for v in &self.data[idx * nc..(idx + 1) * nc] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for d in self.grid.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in self.grid.lo.iter().chain(&self.grid.hi) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.components.len() as u32).to_le_bytes())?;
        for c in &self.components {
            w.write_all(&(c.len() as u32).to_le_bytes())?;
            w.write_all(c.as_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("malformed grid dump: {why}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("magic"));
        }
        if read_u32(&mut r)? != FORMAT_VERSION {
            return Err(bad("version"));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = read_u64(&mut r)? as usize;
        }
        let mut bounds = [0.0; 6];
        for b in &mut bounds {
            *b = read_f64(&mut r)?;
        }
        let grid = GridSpec::new(dims, [bounds[0], bounds[1], bounds[2]], [bounds[3], bounds[4], bounds[5]])?;
        let nc = read_u32(&mut r)? as usize;
        let mut components = Vec::with_capacity(nc);
        for _ in 0..nc {
            let len = read_u32(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            components.push(String::from_utf8(buf).map_err(|_| bad("component name"))?);
        }
        let total = grid.len().checked_mul(nc).ok_or_else(|| bad("size"))?;
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            data.push(read_f64(&mut r)?);
        }
        Ok(GridDump { grid, components, data })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
