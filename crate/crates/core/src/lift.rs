//! Divergence-free vector field `(Z, Z, z3)` built from the axisymmetric
//! scalar field, with forcing `(F, F, f3)`.
//!
//! Since `Z` depends on `x1, x2` only through `rho`,
//! `d1 Z + d2 Z = ((x1 + x2) / rho) d_rho z`, so both vertical components
//! reduce to a coefficient times a line integral in the axial variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSpec, Level};
use crate::fractal::Point3;
use crate::grid::{GridDump, GridSpec};
use crate::params::Variant;
use crate::profile::PlaneSample;
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftMode {
    /// `z3 = -int (d1 Z + d2 Z)`: exactly divergence free.
    #[default]
    Full,
    /// `z3 = -int d1 Z`: illustrative only, not divergence free.
    SingleTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMode {
    /// Uses `d3 z3 = -(d1 Z + d2 Z)` from the fundamental theorem of calculus.
    Analytic,
    /// Central differences of step `h` on all three components.
    FiniteDifference,
}

/// The vector field built on an axisymmetric zero-axial-mean construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    field: FieldSpec,
    mode: LiftMode,
    abs_tol: f64,
}

impl LiftedField {
    pub fn new(field: FieldSpec, mode: LiftMode, abs_tol: f64) -> Result<Self> {
        if field.variant() != Variant::Axisymmetric {
            return Err(Error::Unsupported { op: "divergence-free lift", variant: field.variant().to_string() });
        }
        if !field.profile().zero_axial_mean {
            return Err(Error::InvalidParam { name: "zero_axial_mean", reason: "the lift needs a profile with zero axial mean".into() });
        }
        if !(abs_tol.is_finite() && abs_tol > 0.0) {
            return Err(Error::InvalidParam { name: "abs_tol", reason: "must be finite and > 0".into() });
        }
        Ok(LiftedField { field, mode, abs_tol })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn mode(&self) -> LiftMode {
        self.mode
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    /// Coefficient `c(x)` with `z3 = -c(x) int d_rho z` and its `x1, x2` derivatives.
    fn coefficient(&self, x: Point3, rho: f64) -> (f64, [f64; 2]) {
        let (x1, x2) = (x[0], x[1]);
        let r3 = rho * rho * rho;
        match self.mode {
            LiftMode::Full => ((x1 + x2) / rho, [(x2 * x2 - x1 * x2) / r3, (x1 * x1 - x1 * x2) / r3]),
            LiftMode::SingleTerm => (x1 / rho, [x2 * x2 / r3, -x1 * x2 / r3]),
        }
    }

    /// `int_{-inf}^{x3} q(rho, xi) d xi` over the support of level `level`.
    fn axial_integral(&self, level: u32, tau: f64, rho: f64, x3: f64, q: impl Fn(&PlaneSample) -> f64) -> Result<f64> {
        let b = self.field.support_box(level);
        let (lo, hi) = b.intervals[1];
        let top = x3.min(hi);
        if top <= lo {
            return Ok(0.0);
        }
        let tol = self.abs_tol * self.field.level_gain().powi(level as i32 - 1);
        let failure = std::cell::RefCell::new(None);
        let r = quadrature::adaptive(
            |xi| match self.field.plane_at(level, tau, rho, xi) {
                Ok(s) => q(&s),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            lo,
            top,
            tol,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(r?.value)
    }

    fn level(&self, t: f64) -> Result<Option<(u32, f64)>> {
        Ok(match self.field.interval_index(t)? {
            Level::PostT => None,
            Level::At(n) => Some((n, self.field.base_time(n, t))),
        })
    }

    pub fn eval_z3(&self, t: f64, x: Point3) -> Result<f64> {
        let rho = x[0].hypot(x[1]);
        let Some((n, tau)) = self.level(t)? else { return Ok(0.0) };
        if rho == 0.0 {
            // d_rho z vanishes on the axis while c stays bounded.
            return Ok(0.0);
        }
        let (c, _) = self.coefficient(x, rho);
        Ok(-c * self.axial_integral(n, tau, rho, x[2], |s| s.d[1][0])?)
    }

    /// `f3 = -int (d1 F + d2 F)` with `d_rho F = d_rho h + d_rho z / rho^2 - d_rho^2 z / rho`.
    pub fn eval_f3(&self, t: f64, x: Point3) -> Result<f64> {
        let rho = x[0].hypot(x[1]);
        let Some((n, tau)) = self.level(t)? else { return Ok(0.0) };
        if rho == 0.0 {
            return Ok(0.0);
        }
        let (c, _) = self.coefficient(x, rho);
        let integral = self.axial_integral(n, tau, rho, x[2], |s| s.planar_residual_rho() + s.d[1][0] / (rho * rho) - s.d[2][0] / rho)?;
        Ok(-c * integral)
    }

    /// `(Z, Z, z3)`.
    pub fn eval_vector(&self, t: f64, x: Point3) -> Result<[f64; 3]> {
        let z = self.field.eval_z(t, x)?;
        Ok([z, z, self.eval_z3(t, x)?])
    }

    /// `(F, F, f3)`.
    pub fn eval_forcing(&self, t: f64, x: Point3) -> Result<[f64; 3]> {
        let f = self.field.eval_f(t, x)?;
        Ok([f, f, self.eval_f3(t, x)?])
    }

    /// `(d1 z3, d2 z3, d3 z3)`; the horizontal ones use the two-term integrands
    /// with `d_rho z` and `d_rho^2 z`, finite on the axis.
    pub fn eval_dz3_derivatives(&self, t: f64, x: Point3) -> Result<[f64; 3]> {
        let rho = x[0].hypot(x[1]);
        let Some((n, tau)) = self.level(t)? else { return Ok([0.0; 3]) };
        if rho == 0.0 {
            // Hessian of Z on the axis is diag(d_rho^2 z, d_rho^2 z, .).
            let i2 = self.axial_integral(n, tau, 0.0, x[2], |s| s.d[2][0])?;
            return Ok(match self.mode {
                LiftMode::Full => [-i2, -i2, 0.0],
                LiftMode::SingleTerm => [-i2, 0.0, 0.0],
            });
        }
        let (c, dc) = self.coefficient(x, rho);
        let i1 = self.axial_integral(n, tau, rho, x[2], |s| s.d[1][0])?;
        let i2 = self.axial_integral(n, tau, rho, x[2], |s| s.d[2][0])?;
        let d3 = -c * self.field.plane_at(n, tau, rho, x[2])?.d[1][0];
        Ok([-(dc[0] * i1 + c * x[0] / rho * i2), -(dc[1] * i1 + c * x[1] / rho * i2), d3])
    }

    /// `d1 Z + d2 Z + d3 z3`.
    pub fn divergence(&self, t: f64, x: Point3, mode: DivergenceMode, h: f64) -> Result<f64> {
        match mode {
            DivergenceMode::Analytic => {
                let g = self.field.eval_grad_z(t, x)?;
                let d3 = match self.mode {
                    LiftMode::Full => -(g[0] + g[1]),
                    LiftMode::SingleTerm => -g[0],
                };
                Ok(g[0] + g[1] + d3)
            }
            DivergenceMode::FiniteDifference => {
                if !(h > 0.0) {
                    return Err(Error::InvalidParam { name: "h", reason: "step must be > 0".into() });
                }
                let shift = |i: usize, d: f64| {
                    let mut p = x;
                    p[i] += d;
                    p
                };
                let z = |p| self.field.eval_z(t, p);
                let d1 = (z(shift(0, h))? - z(shift(0, -h))?) / (2.0 * h);
                let d2 = (z(shift(1, h))? - z(shift(1, -h))?) / (2.0 * h);
                let d3 = (self.eval_z3(t, shift(2, h))? - self.eval_z3(t, shift(2, -h))?) / (2.0 * h);
                Ok(d1 + d2 + d3)
            }
        }
    }

    /// Vector grid dump with columns `z1, z2, z3`.
    pub fn sample_grid(&self, t: f64, grid: GridSpec, cap: usize) -> Result<GridDump> {
        let names = ["z1", "z2", "z3"].map(String::from).to_vec();
        GridDump::evaluate(grid, names, cap, |x| Ok(self.eval_vector(t, x)?.to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ScalingParams;
    use crate::quadrature::halton;

    fn lift(mode: LiftMode) -> LiftedField {
        let field = FieldSpec::axisymmetric(ScalingParams::new(1.5, 0.2), true).unwrap();
        LiftedField::new(field, mode, 1e-12).unwrap()
    }

    #[test]
    fn construction_requires_zero_mean_axisymmetric() {
        let plain = FieldSpec::axisymmetric(ScalingParams::new(1.5, 0.2), false).unwrap();
        assert!(LiftedField::new(plain, LiftMode::Full, 1e-10).is_err());
        let single = FieldSpec::single_point(ScalingParams::new(1.5, 0.2)).unwrap();
        assert!(LiftedField::new(single, LiftMode::Full, 1e-10).is_err());
    }

    #[test]
    fn z3_vanishes_below_and_above_support() {
        let l = lift(LiftMode::Full);
        for t in [0.0, 0.1, 0.22] {
            let n = match l.field().interval_index(t).unwrap() {
                Level::At(n) => n,
                Level::PostT => unreachable!(),
            };
            let (lo, hi) = l.field().support_box(n).intervals[1];
            for (x1, x2) in [(0.3, 0.1), (0.05, 0.4), (0.42, -0.1)] {
                assert_eq!(l.eval_z3(t, [x1, x2, lo - 0.01]).unwrap(), 0.0);
                let above = l.eval_z3(t, [x1, x2, hi + 0.5]).unwrap();
                assert!(above.abs() < 1e-10, "t={t}: {above}");
            }
        }
        assert_eq!(l.eval_z3(1.0, [0.1, 0.1, 0.0]).unwrap(), 0.0);
        assert_eq!(l.eval_f3(1.0, [0.1, 0.1, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn z3_is_stable_under_tighter_quadrature() {
        let coarse = lift(LiftMode::Full);
        let fine = LiftedField::new(coarse.field().clone(), LiftMode::Full, 1e-13).unwrap();
        for i in 0..20u64 {
            let x = [0.6 * halton(i, 2), 0.6 * halton(i, 3), halton(i, 5) - 0.5];
            let t = 0.24 * halton(i, 7);
            let (a, b) = (coarse.eval_z3(t, x).unwrap(), fine.eval_z3(t, x).unwrap());
            assert!((a - b).abs() < 1e-11, "{a} {b}");
        }
    }

    #[test]
    fn analytic_divergence_is_exactly_zero() {
        let l = lift(LiftMode::Full);
        for i in 0..200u64 {
            let x = [0.8 * halton(i, 2) - 0.4, 0.8 * halton(i, 3) - 0.4, 2.0 * halton(i, 5) - 1.0];
            let t = 0.25 * halton(i, 7);
            assert_eq!(l.divergence(t, x, DivergenceMode::Analytic, 0.0).unwrap(), 0.0);
        }
        assert_eq!(l.divergence(0.1, [3.0, 3.0, 3.0], DivergenceMode::FiniteDifference, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn dz3_matches_finite_differences() {
        for mode in [LiftMode::Full, LiftMode::SingleTerm] {
            let l = lift(mode);
            let h = 1e-4;
            for (t, x) in [(0.05, [0.2, 0.15, 0.1]), (0.21, [0.3, -0.1, 0.05]), (0.1, [0.0, 0.0, 0.2])] {
                let d = l.eval_dz3_derivatives(t, x).unwrap();
                for i in 0..3 {
                    let (mut p, mut m) = (x, x);
                    p[i] += h;
                    m[i] -= h;
                    let fd = (l.eval_z3(t, p).unwrap() - l.eval_z3(t, m).unwrap()) / (2.0 * h);
                    assert!((d[i] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{mode:?} i={i}: {} vs {fd}", d[i]);
                }
            }
        }
    }

    #[test]
    fn z3_solves_heat_equation_with_f3() {
        let l = lift(LiftMode::Full);
        let (t, x) = (0.12, [0.2, 0.1, -0.05]);
        let h = 2e-3;
        let ht = 1e-6;
        let z = |tt: f64, p: Point3| l.eval_z3(tt, p).unwrap();
        let dt = (z(t + ht, x) - z(t - ht, x)) / (2.0 * ht);
        let mut lap = 0.0;
        for i in 0..3 {
            let (mut p, mut m) = (x, x);
            p[i] += h;
            m[i] -= h;
            lap += (z(t, p) - 2.0 * z(t, x) + z(t, m)) / (h * h);
        }
        let f3 = l.eval_f3(t, x).unwrap();
        assert!((dt - lap - f3).abs() < 1e-3 * (1.0 + f3.abs()), "{} vs {f3}", dt - lap);
    }

    #[test]
    fn single_term_mode_leaves_residual_divergence() {
        let l = lift(LiftMode::SingleTerm);
        let x = [0.2, 0.2, 0.1];
        let g = l.field().eval_grad_z(0.05, x).unwrap();
        assert_eq!(l.divergence(0.05, x, DivergenceMode::Analytic, 0.0).unwrap(), g[1]);
    }

    #[test]
    fn vector_grid_has_three_columns() {
        let l = lift(LiftMode::Full);
        let grid = GridSpec::new([3, 3, 3], [-0.5; 3], [0.5; 3]).unwrap();
        let d = l.sample_grid(0.1, grid, 1000).unwrap();
        assert_eq!(d.components, vec!["z1", "z2", "z3"]);
        assert_eq!(d.data.len(), 81);
    }
}
