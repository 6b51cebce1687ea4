use serde::Serialize;

use super::{integrate_level, integrate_slice, level_nodes, log_slope, shell_nodes, Record, SuiteReport};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::fractal::Point3;
use crate::jet::{psi, Jet};
use crate::params::Variant;
use crate::profile::BumpProfile;
use crate::quadrature::QuadratureConfig;

/// Smooth compactly supported `phi(t, x) = psi((t - t_c) / t_r) Psi_R(x - c)`
/// with closed-form `d_t phi` and `Laplacian phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: Point3,
    pub radius: f64,
    pub t_center: f64,
    pub t_radius: f64,
}

impl TestFunction {
    pub fn new(center: Point3, radius: f64, t_center: f64, t_radius: f64) -> Result<Self> {
        for (name, v) in [("radius", radius), ("t_radius", t_radius)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam { name, reason: "must be finite and > 0".into() });
            }
        }
        if !(t_center.is_finite() && center.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite { name: "center" });
        }
        Ok(TestFunction { center, radius, t_center, t_radius })
    }

    /// A bump of radius `radius` around the origin, constant-ish over `[0, T]`.
    pub fn covering(field: &FieldSpec, radius: f64) -> Result<Self> {
        Self::new([0.0; 3], radius, 0.0, 2.0 * field.time_partition().total())
    }

    fn time(&self, t: f64) -> Jet {
        psi(Jet::affine((t - self.t_center) / self.t_radius, 1.0 / self.t_radius))
    }

    /// `(phi, d_t phi, Laplacian phi)`.
    pub fn eval(&self, t: f64, x: Point3) -> (f64, f64, f64) {
        let tj = self.time(t);
        if tj.value() == 0.0 && tj.deriv(1) == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let d = BumpProfile::cartesian_with_radius(self.radius).cartesian_derivs([x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]]);
        (tj.value() * d.value, tj.deriv(1) * d.value, tj.value() * d.laplacian)
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.center[0] == 0.0 && self.center[1] == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualLevel {
    pub level: u32,
    /// `int_0^{sigma_N} int (Z phi_t + Z Laplacian phi + phi F) + int Z(0) phi(0)`.
    pub residual: f64,
    /// `int Z(sigma_N) phi(sigma_N)`.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub test_function: TestFunction,
    pub levels: Vec<ResidualLevel>,
    /// Admissible `|residual - boundary|`: ten times the quadrature tolerance.
    pub tolerance: f64,
    pub max_discrepancy: f64,
    pub identity_pass: bool,
    /// Fitted slope of `log |boundary|` over levels `>= 3`.
    pub fitted_slope: Option<f64>,
    pub theoretical_slope: f64,
    pub slope_pass: Option<bool>,
    /// Whether `lambda sigma < 1`, i.e. the boundary terms vanish in the limit.
    pub converges: bool,
    pub pass: bool,
}

/// Truncated weak formulation against `phi` for `N = 1..=n_trunc`.
///
/// Integration by parts on each `I_k` telescopes the truncated residual into
/// the boundary term at `sigma_N`, whatever the regime; the check compares
/// the two quadratures and fits the decay of the boundary term, which is
/// `(lambda sigma)^N` for the ring (`(lambda sigma^(3/2))^N` for a point).
/// The forcing is the full heat residual. Integrals use
/// [`QuadratureConfig::weak_form`]; for the point construction with an
/// origin-centred test function they reduce to spherical shells.
pub fn weak_residual(field: &FieldSpec, phi: &TestFunction, n_trunc: u32, cfg: &QuadratureConfig) -> Result<ResidualReport> {
    cfg.validate()?;
    let cfg = &cfg.weak_form();
    let theoretical_slope = {
        let p = field.params();
        match field.variant() {
            Variant::Axisymmetric => {
                if !phi.is_axisymmetric() {
                    return Err(Error::InvalidParam { name: "center", reason: "the test function must be centered on the axis".into() });
                }
                (p.lambda * p.sigma).ln()
            }
            Variant::SinglePoint3D => (p.lambda * p.sigma.powf(1.5)).ln(),
            Variant::Cantor3D => return Err(Error::Unsupported { op: "weak_residual", variant: field.variant().to_string() }),
        }
    };
    if n_trunc == 0 || n_trunc + 1 >= field.level_cap() {
        return Err(Error::InvalidParam { name: "n_trunc", reason: format!("must lie in 1..{}", field.level_cap() - 1) });
    }
    // origin-centred test functions on the point construction: both factors are radial
    let radial = field.variant() == Variant::SinglePoint3D && phi.center == [0.0; 3];
    let nodes_for = |k: u32| if radial { shell_nodes(field, k, cfg) } else { level_nodes(field, k, cfg) };
    let initial = integrate_slice(field, 1, 0.0, &nodes_for(1), |x, s| s.value * phi.eval(0.0, x).0)?;
    let mut acc = initial;
    let mut levels = Vec::new();
    for k in 1..=n_trunc {
        let nodes = nodes_for(k);
        acc += integrate_level(field, k, &nodes, cfg, |tau, x, s| {
            let t = field.physical_time(k, tau);
            let (p, pt, lap) = phi.eval(t, x);
            s.value * (pt + lap) + p * s.heat_residual()
        })?;
        let t_end = field.time_partition().partial(k);
        let boundary = integrate_slice(field, k + 1, 0.0, &nodes_for(k + 1), |x, s| s.value * phi.eval(t_end, x).0)?;
        levels.push(ResidualLevel { level: k, residual: acc, boundary });
    }
    let tolerance = 10.0 * cfg.abs_tol;
    let max_discrepancy = levels.iter().map(|l| (l.residual - l.boundary).abs()).fold(0.0, f64::max);
    let identity_pass = max_discrepancy <= tolerance;
    let tail: Vec<&ResidualLevel> = levels.iter().filter(|l| l.level >= 3).collect();
    let fitted_slope = log_slope(&tail.iter().map(|l| l.level).collect::<Vec<_>>(), &tail.iter().map(|l| l.boundary.abs()).collect::<Vec<_>>());
    let slope_pass = fitted_slope.map(|s| (s - theoretical_slope).abs() <= 0.15 * theoretical_slope.abs());
    let p = field.params();
    Ok(ResidualReport {
        test_function: *phi,
        levels,
        tolerance,
        max_discrepancy,
        identity_pass,
        fitted_slope,
        theoretical_slope,
        slope_pass,
        converges: p.lambda * p.sigma < 1.0,
        pass: identity_pass && slope_pass != Some(false),
    })
}

impl ResidualReport {
    pub fn to_suite(&self) -> SuiteReport {
        let mut records: Vec<Record> = self
            .levels
            .iter()
            .map(|l| Record::new("residual_minus_boundary", Some(l.level), (l.residual - l.boundary).abs(), self.tolerance, (l.residual - l.boundary).abs() <= self.tolerance))
            .collect();
        records.extend(self.levels.iter().map(|l| Record::new("boundary_term", Some(l.level), l.boundary, f64::NAN, true)));
        if let (Some(s), Some(ok)) = (self.fitted_slope, self.slope_pass) {
            records.push(Record::new("boundary_decay_slope", None, s, self.theoretical_slope, ok));
        }
        let notes = vec![format!("lambda sigma < 1: {}", self.converges)];
        SuiteReport::new("residual", records, notes)
    }
}
