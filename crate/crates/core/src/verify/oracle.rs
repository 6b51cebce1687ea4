use rayon::prelude::*;
use serde::Serialize;

use super::{Record, SuiteReport};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::profile::BridgeFunction;
use crate::params::Variant;

/// Meridian rectangle `[0, rho_max] x [-y_max, y_max]` with `cells`
/// intervals in each direction and homogeneous Dirichlet data on the far sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdGrid {
    pub rho_max: f64,
    pub y_max: f64,
    pub cells: usize,
}

impl FdGrid {
    pub fn new(rho_max: f64, y_max: f64, cells: usize) -> Result<Self> {
        if !(rho_max > 0.0 && y_max > 0.0 && rho_max.is_finite() && y_max.is_finite()) {
            return Err(Error::InvalidParam { name: "grid", reason: "extents must be finite and > 0".into() });
        }
        if cells < 4 {
            return Err(Error::InvalidParam { name: "cells", reason: "need at least 4 cells".into() });
        }
        Ok(FdGrid { rho_max, y_max, cells })
    }

    /// The box `[0, 1.25] x [-1.25 M, 1.25 M]` around the first-level support.
    pub fn around(field: &FieldSpec, cells: usize) -> Result<Self> {
        Self::new(1.25, 1.25 * field.profile().big_m, cells)
    }

    pub fn h_rho(&self) -> f64 {
        self.rho_max / self.cells as f64
    }

    pub fn h_y(&self) -> f64 {
        2.0 * self.y_max / self.cells as f64
    }

    pub fn rho(&self, i: usize) -> f64 {
        i as f64 * self.h_rho()
    }

    pub fn y(&self, j: usize) -> f64 {
        -self.y_max + j as f64 * self.h_y()
    }

    /// Largest explicit Euler step keeping every stencil coefficient
    /// nonnegative; the axis row `2 d_rho^2 + d_y^2` is the binding one.
    pub fn stability_limit(&self) -> f64 {
        let (hr, hy) = (self.h_rho(), self.h_y());
        1.0 / (4.0 / (hr * hr) + 2.0 / (hy * hy))
    }

    fn width(&self) -> usize {
        self.cells + 1
    }
}

/// Explicit Euler for `u_t = u_rhorho + u_rho / rho + u_yy + F` on the grid,
/// using the limit `2 u_rhorho` and even ghost values on the axis. Arrays are
/// row-major with `rho` rows and `y` columns. `forcing` fills `F(t)` at every
/// node before each step; `observe` sees the solution after each step (and at
/// step 0).
pub fn solve_axisymmetric_heat<I, F, O>(grid: &FdGrid, dt: f64, steps: usize, init: I, mut forcing: F, mut observe: O) -> Result<Vec<f64>>
where
    I: Fn(f64, f64) -> f64,
    F: FnMut(f64, &mut [f64]) -> Result<()>,
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let limit = grid.stability_limit();
    if !(dt > 0.0) || dt > limit {
        return Err(Error::Stability { dt, limit });
    }
    let n = grid.cells;
    let w = grid.width();
    let (hr, hy) = (grid.h_rho(), grid.h_y());
    let (ir2, iy2) = (1.0 / (hr * hr), 1.0 / (hy * hy));
    let mut u = vec![0.0; w * w];
    for i in 0..n {
        for j in 1..n {
            u[i * w + j] = init(grid.rho(i), grid.y(j));
        }
    }
    observe(0, 0.0, &u)?;
    let mut next = u.clone();
    let mut f = vec![0.0; w * w];
    for step in 0..steps {
        let t = step as f64 * dt;
        forcing(t, &mut f)?;
        for i in 0..n {
            let rho = grid.rho(i);
            for j in 1..n {
                let k = i * w + j;
                let (c, up) = (u[k], u[k + w]);
                let lap_r = if i == 0 {
                    4.0 * (up - c) * ir2
                } else {
                    let down = u[k - w];
                    (up - 2.0 * c + down) * ir2 + (up - down) / (2.0 * hr * rho)
                };
                let lap_y = (u[k + 1] - 2.0 * c + u[k - 1]) * iy2;
                next[k] = c + dt * (lap_r + lap_y + f[k]);
            }
        }
        std::mem::swap(&mut u, &mut next);
        observe(step + 1, (step + 1) as f64 * dt, &u)?;
    }
    Ok(u)
}

/// Forcing of one level on the grid nodes, split as
/// `c0 + eta(s) c1 + eta'(s) c2` in the bridge variable `s = tau / sigma`.
struct LevelForcing {
    c: [Vec<f64>; 3],
}

impl LevelForcing {
    fn tabulate(field: &FieldSpec, grid: &FdGrid, level: u32) -> Result<Self> {
        let sigma = field.params().sigma;
        let bridge = BridgeFunction;
        let w = grid.width();
        let at = |s: f64| -> Result<Vec<f64>> {
            let mut v = vec![0.0; w * w];
            for i in 0..grid.cells {
                for j in 1..grid.cells {
                    v[i * w + j] = field.cartesian_at(level, s * sigma, [grid.rho(i), 0.0, grid.y(j)])?.heat_residual();
                }
            }
            Ok(v)
        };
        let (f0, f1, fm) = (at(0.0)?, at(1.0)?, at(0.5)?);
        let dm = bridge.derivative(0.5);
        let c1: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
        let c2: Vec<f64> = (0..w * w).map(|k| (fm[k] - f0[k] - 0.5 * c1[k]) / dm).collect();
        let table = LevelForcing { c: [f0, c1, c2] };
        // the split must reproduce direct evaluation at other bridge times
        for s in [0.2, 0.7] {
            let direct = at(s)?;
            let mut rebuilt = vec![0.0; w * w];
            table.fill(s, &mut rebuilt);
            let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let worst = direct.iter().zip(&rebuilt).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if !(worst <= 1e-9 * scale) {
                return Err(Error::Consistency(format!("level {level} forcing is not affine in the bridge (deviation {worst:e})")));
            }
        }
        Ok(table)
    }

    fn fill(&self, s: f64, out: &mut [f64]) {
        let j = BridgeFunction.jet(s);
        let (e, de) = (j.value(), j.deriv(1));
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.c[0][k] + e * self.c[1][k] + de * self.c[2][k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRun {
    pub cells: usize,
    pub dt: f64,
    pub steps: usize,
    /// Max-norm error at the sampled times.
    pub samples: Vec<(f64, f64)>,
    pub max_error: f64,
    /// Errors at the last step before and the first step after `sigma_1`.
    pub seam: (f64, f64),
    pub seam_jump: f64,
    /// Largest error at the samples away from the seam.
    pub interior_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub t_horizon: f64,
    pub runs: Vec<OracleRun>,
    /// Observed orders between consecutive refinements.
    pub orders: Vec<f64>,
    pub min_order: f64,
    pub seam_ok: bool,
    pub pass: bool,
}

/// Compares an independent finite-difference solve of the forced heat
/// equation with the constructed field on `[0, t_horizon]`, for each number
/// of cells in `refinements`. The time step is `cfl * min(h)^2`, rounded
/// down so the steps land on `t_horizon`.
pub fn fd_oracle_compare(field: &FieldSpec, base: &FdGrid, t_horizon: f64, refinements: &[usize], cfl: f64) -> Result<OracleReport> {
    if field.variant() != Variant::Axisymmetric {
        return Err(Error::Unsupported { op: "fd_oracle_compare", variant: field.variant().to_string() });
    }
    let sigma2 = field.time_partition().partial(2);
    if !(t_horizon > 0.0 && t_horizon <= sigma2 * (1.0 + 1e-12)) {
        return Err(Error::InvalidParam { name: "t_horizon", reason: format!("must lie in (0, sigma_2 = {sigma2}]") });
    }
    if refinements.len() < 2 || refinements.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam { name: "refinements", reason: "need at least two strictly increasing cell counts".into() });
    }
    let sigma = field.params().sigma;
    let sigma1 = field.time_partition().partial(1);
    // level and base time inside I_1 u I_2; sigma_2 itself closes level 2
    let locate = |t: f64| -> (u32, f64) {
        let n = if t < sigma1 { 1 } else { 2 };
        (n, field.base_time(n, t))
    };
    let runs = refinements
        .par_iter()
        .map(|&cells| -> Result<OracleRun> {
            let grid = FdGrid::new(base.rho_max, base.y_max, cells)?;
            let h = grid.h_rho().min(grid.h_y());
            let steps = (t_horizon / (cfl * h * h)).ceil() as usize;
            let dt = t_horizon / steps as f64;
            if dt > grid.stability_limit() {
                return Err(Error::Stability { dt, limit: grid.stability_limit() });
            }
            let tables = [LevelForcing::tabulate(field, &grid, 1)?, LevelForcing::tabulate(field, &grid, 2)?];
            let before = ((sigma1 / dt).ceil() as usize).saturating_sub(1).min(steps);
            let after = (before + 1).min(steps);
            let mut wanted: Vec<usize> = (1..=8).map(|k| k * steps / 8).collect();
            wanted.extend([before, after]);
            let forcing = |t: f64, out: &mut [f64]| -> Result<()> {
                let (n, tau) = locate(t);
                tables[n as usize - 1].fill(tau / sigma, out);
                Ok(())
            };
            let init = |r: f64, y: f64| field.cartesian_at(1, 0.0, [r, 0.0, y]).map_or(f64::NAN, |s| s.value);
            let w = grid.width();
            let mut errors: Vec<(usize, f64, f64)> = Vec::new();
            solve_axisymmetric_heat(&grid, dt, steps, init, forcing, |step, t, u| {
                if !wanted.contains(&step) {
                    return Ok(());
                }
                let (n, tau) = locate(t);
                let mut err = 0.0f64;
                for i in 0..cells {
                    for j in 1..cells {
                        let exact = field.cartesian_at(n, tau, [grid.rho(i), 0.0, grid.y(j)])?.value;
                        let d = (u[i * w + j] - exact).abs();
                        err = if d.is_nan() { f64::INFINITY } else { err.max(d) };
                    }
                }
                errors.push((step, t, err));
                Ok(())
            })?;
            let find = |s: usize| errors.iter().find(|e| e.0 == s).map_or(0.0, |e| e.2);
            let seam = (find(before), find(after));
            let interior_error = errors.iter().filter(|e| e.0 != before && e.0 != after).map(|e| e.2).fold(0.0, f64::max);
            let max_error = errors.iter().map(|e| e.2).fold(0.0, f64::max);
            let samples = errors.iter().map(|e| (e.1, e.2)).collect();
            Ok(OracleRun { cells, dt, steps, samples, max_error, seam, seam_jump: (seam.1 - seam.0).abs(), interior_error })
        })
        .collect::<Result<Vec<_>>>()?;
    let orders: Vec<f64> = runs.windows(2).map(|w| (w[0].max_error / w[1].max_error).ln() / (w[1].cells as f64 / w[0].cells as f64).ln()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let seam_ok = runs.iter().all(|r| r.seam_jump <= r.interior_error);
    Ok(OracleReport { t_horizon, runs, orders, min_order, seam_ok, pass: min_order >= 1.8 && seam_ok })
}

impl OracleReport {
    pub fn to_suite(&self) -> SuiteReport {
        let mut records: Vec<Record> = self.runs.iter().map(|r| Record::new("fd_max_error", Some(r.cells as u32), r.max_error, f64::NAN, r.max_error.is_finite())).collect();
        records.extend(self.runs.iter().map(|r| Record::new("fd_seam_jump", Some(r.cells as u32), r.seam_jump, r.interior_error, r.seam_jump <= r.interior_error)));
        records.extend(self.orders.iter().map(|&o| Record::new("fd_order", None, o, 2.0, o >= 1.8)));
        SuiteReport::new("oracle", records, vec![format!("horizon {}", self.t_horizon)])
    }
}
