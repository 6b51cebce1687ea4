//! The seed profile `z0`, the bridge `eta`, and the level-one field `z1`
//! interpolating between the start state and the rescaled end state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::{CantorSpec, Point3};
use crate::jet::{psi, Jet};
use crate::quadrature;

/// Shift of the compensating bump in the zero-mean axial factor, in units of `M`.
pub const MEAN_SHIFT: f64 = 0.6;
/// Width ratio of the compensating bump. Its weight equals this ratio, which
/// makes the axial mean vanish exactly.
pub const MEAN_WIDTH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `z0(x) = psi(|x|^2 / r^2)` on R^3.
    Cartesian3D,
    /// `z0(rho, y) = psi(rho^4) chi(y / M)` on the meridian half-plane.
    RadialPlane,
}

/// Smooth compactly supported seed with `z0 = 1` at the distinguished point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub kind: ProfileKind,
    /// Support radius of the Cartesian bump. Unused by the planar profile,
    /// whose radial support is `(-1, 1)`.
    pub radius: f64,
    /// Axial half-width `M` of the planar profile.
    pub big_m: f64,
    /// Subtract a compensating bump so that every axial line integral vanishes.
    pub zero_axial_mean: bool,
}

/// Value, gradient and Laplacian of a Cartesian function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianDerivs {
    pub value: f64,
    pub grad: [f64; 3],
    pub laplacian: f64,
}

impl CartesianDerivs {
    fn combine(self, a: f64, other: CartesianDerivs, b: f64) -> Self {
        CartesianDerivs {
            value: a * self.value + b * other.value,
            grad: [0, 1, 2].map(|i| a * self.grad[i] + b * other.grad[i]),
            laplacian: a * self.laplacian + b * other.laplacian,
        }
    }

    fn scaled(self, s: f64, ds: f64) -> Self {
        CartesianDerivs { value: s * self.value, grad: self.grad.map(|g| s * ds * g), laplacian: s * ds * ds * self.laplacian }
    }
}

/// Mixed partials `d[a][b] = d_rho^a d_y^b` for `a <= 3`, `b <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlaneDerivs {
    pub d: [[f64; 3]; 4],
}

impl PlaneDerivs {
    pub fn value(&self) -> f64 {
        self.d[0][0]
    }
}

impl BumpProfile {
    pub fn cartesian() -> Self {
        Self::cartesian_with_radius(1.0)
    }

    pub fn cartesian_with_radius(radius: f64) -> Self {
        BumpProfile { kind: ProfileKind::Cartesian3D, radius, big_m: 1.0, zero_axial_mean: false }
    }

    pub fn radial(big_m: f64, zero_axial_mean: bool) -> Self {
        BumpProfile { kind: ProfileKind::RadialPlane, radius: 1.0, big_m, zero_axial_mean }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParam { name: "radius", reason: "must be finite and > 0".into() });
        }
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(Error::InvalidParam { name: "M", reason: "must be finite and > 0".into() });
        }
        Ok(())
    }

    /// `Psi(s) = psi(s / r^2)` as a jet in `s = |x|^2`.
    fn squared_radius_jet(&self, s: f64) -> Jet {
        let r2 = self.radius * self.radius;
        psi(Jet::affine(s / r2, 1.0 / r2))
    }

    /// Cartesian bump and its derivatives at `x`.
    pub fn cartesian_derivs(&self, x: Point3) -> CartesianDerivs {
        let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if s >= self.radius * self.radius {
            return CartesianDerivs::default();
        }
        let j = self.squared_radius_jet(s);
        let (d1, d2) = (j.deriv(1), j.deriv(2));
        CartesianDerivs { value: j.value(), grad: x.map(|c| 2.0 * d1 * c), laplacian: 4.0 * s * d2 + 6.0 * d1 }
    }

    /// Radial factor `psi(rho^4)`; even in `rho`, flat to third order at 0.
    pub fn radial_factor(&self, rho: f64) -> Jet {
        psi(Jet::variable(rho).powi(4))
    }

    /// Axial factor `chi(y / M)`.
    pub fn axial_factor(&self, y: f64) -> Jet {
        let inv = 1.0 / self.big_m;
        let u = y * inv;
        let main = psi(Jet::affine(u, inv));
        if self.zero_axial_mean {
            main - psi(Jet::affine(MEAN_WIDTH * (u - MEAN_SHIFT), MEAN_WIDTH * inv)).scale(MEAN_WIDTH)
        } else {
            main
        }
    }

    /// Planar profile and its mixed partials at `(rho, y)`.
    pub fn plane_derivs(&self, rho: f64, y: f64) -> PlaneDerivs {
        if rho.abs() >= 1.0 || y.abs() >= self.big_m {
            return PlaneDerivs::default();
        }
        let r = self.radial_factor(rho);
        let a = self.axial_factor(y);
        let mut d = [[0.0; 3]; 4];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r.deriv(i) * a.deriv(j);
            }
        }
        PlaneDerivs { d }
    }

    /// `z0` at a point. The planar profile reads `point` as `(rho, y, _)`.
    pub fn eval_z0(&self, point: Point3) -> f64 {
        match self.kind {
            ProfileKind::Cartesian3D => self.cartesian_derivs(point).value,
            ProfileKind::RadialPlane => self.plane_derivs(point[0], point[1]).value(),
        }
    }
}

/// Smooth monotone step `eta(s) = B(s) / (B(s) + B(1 - s))`, `B(s) = exp(-1/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BridgeFunction;

impl BridgeFunction {
    pub fn jet(&self, s: f64) -> Jet {
        if s <= 0.0 {
            return Jet::ZERO;
        }
        if s >= 1.0 {
            return Jet::constant(1.0);
        }
        // eta = 1 / (1 + exp(g)), g = 1/s - 1/(1-s). Only exp(-|g|) is ever
        // formed, so neither the value nor the derivatives overflow near the ends.
        let g = Jet::variable(s).recip() - Jet::affine(1.0 - s, -1.0).recip();
        if g.value() > 0.0 {
            let e = (-g).exp();
            e * (Jet::constant(1.0) + e).recip()
        } else {
            (Jet::constant(1.0) + g.exp()).recip()
        }
    }

    pub fn eta(&self, s: f64) -> f64 {
        self.jet(s).value()
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.jet(s).deriv(1)
    }

    /// `int_0^s eta`, using `eta(s) + eta(1 - s) = 1` beyond the midpoint.
    pub fn integral(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        if s > 0.5 {
            return s - 0.5 + self.integral(1.0 - s);
        }
        if s == 0.0 {
            return 0.0;
        }
        quadrature::adaptive(|u| self.eta(u), 0.0, s, 1e-15).map(|r| r.value).unwrap_or_else(|_| {
            quadrature::CompositeRule::new(64, 8).integrate(0.0, s, |u| self.eta(u))
        })
    }
}

/// What the level-one field turns into at `t = sigma`.
#[derive(Debug, Clone, PartialEq)]
pub enum EndState {
    /// `lambda z0(x / sqrt(sigma))`.
    SinglePoint,
    /// `(lambda / m) sum_i z0(beta_i(x))`.
    Cantor(CantorSpec),
    /// `lambda z0((rho - sqrt(sigma)) / sqrt(sigma), y / sqrt(sigma))`.
    Ring,
}

/// Level-one Cartesian sample: derivatives plus the time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianSample {
    pub value: f64,
    pub grad: [f64; 3],
    pub laplacian: f64,
    pub dt: f64,
}

impl CartesianSample {
    /// `d_t z - Laplacian z`.
    pub fn heat_residual(&self) -> f64 {
        self.dt - self.laplacian
    }
}

/// Level-one planar sample: mixed partials plus `d_t` and `d_t d_rho`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlaneSample {
    pub d: [[f64; 3]; 4],
    pub dt: f64,
    pub dt_rho: f64,
}

impl PlaneSample {
    pub fn value(&self) -> f64 {
        self.d[0][0]
    }

    /// Planar heat residual `d_t z - d_rho^2 z - d_y^2 z`.
    pub fn planar_residual(&self) -> f64 {
        self.dt - self.d[2][0] - self.d[0][2]
    }

    /// `d_rho` of the planar residual.
    pub fn planar_residual_rho(&self) -> f64 {
        self.dt_rho - self.d[3][0] - self.d[1][2]
    }
}

/// The first-interval field: seed, bridge, end state and scaling constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLevel {
    pub profile: BumpProfile,
    pub bridge: BridgeFunction,
    pub lambda: f64,
    pub sigma: f64,
    pub end: EndState,
}

impl BaseLevel {
    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.sigma).contains(&t) {
            return Err(Error::Interval { t, lo: 0.0, hi: self.sigma });
        }
        Ok(())
    }

    fn cartesian_end(&self, x: Point3) -> CartesianDerivs {
        let inv = 1.0 / self.sigma.sqrt();
        match &self.end {
            EndState::SinglePoint => self.profile.cartesian_derivs(x.map(|c| c * inv)).scaled(self.lambda, inv),
            EndState::Cantor(spec) => {
                let w = self.lambda / spec.m() as f64;
                let k = spec.k() as f64;
                let mut acc = CartesianDerivs::default();
                for i in 0..spec.m() as usize {
                    let d = self.profile.cartesian_derivs(spec.beta_map(i, x));
                    if d.value != 0.0 || d.laplacian != 0.0 {
                        acc = acc.combine(1.0, d.scaled(w, k), 1.0);
                    }
                }
                acc
            }
            EndState::Ring => CartesianDerivs::default(),
        }
    }

    fn plane_end(&self, rho: f64, y: f64) -> PlaneDerivs {
        let rs = self.sigma.sqrt();
        let base = self.profile.plane_derivs((rho - rs) / rs, y / rs);
        let mut d = base.d;
        for (a, row) in d.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v *= self.lambda * rs.powi(-((a + b) as i32));
            }
        }
        PlaneDerivs { d }
    }

    /// `z1` with Cartesian derivatives; `t` in `[0, sigma]`.
    pub fn cartesian(&self, t: f64, x: Point3) -> Result<CartesianSample> {
        self.check_time(t)?;
        let start = self.profile.cartesian_derivs(x);
        let end = self.cartesian_end(x);
        let eta = self.bridge.jet(t / self.sigma);
        let (e, de) = (eta.value(), eta.deriv(1) / self.sigma);
        let mix = start.combine(1.0 - e, end, e);
        Ok(CartesianSample { value: mix.value, grad: mix.grad, laplacian: mix.laplacian, dt: de * (end.value - start.value) })
    }

    /// `z1` with planar derivatives; `t` in `[0, sigma]`.
    pub fn plane(&self, t: f64, rho: f64, y: f64) -> Result<PlaneSample> {
        self.check_time(t)?;
        let start = self.profile.plane_derivs(rho, y);
        let end = self.plane_end(rho, y);
        let eta = self.bridge.jet(t / self.sigma);
        let (e, de) = (eta.value(), eta.deriv(1) / self.sigma);
        let mut d = [[0.0; 3]; 4];
        for a in 0..4 {
            for b in 0..3 {
                d[a][b] = (1.0 - e) * start.d[a][b] + e * end.d[a][b];
            }
        }
        Ok(PlaneSample { d, dt: de * (end.d[0][0] - start.d[0][0]), dt_rho: de * (end.d[1][0] - start.d[1][0]) })
    }

    /// Block `i` of the Cantor bridge: from `z0 / m` to `(lambda / m) z0(beta_i(x))`.
    pub fn cantor_block(&self, i: usize, t: f64, x: Point3) -> Result<f64> {
        self.check_time(t)?;
        let EndState::Cantor(spec) = &self.end else {
            return Err(Error::Unsupported { op: "cantor_block", variant: format!("{:?}", self.end) });
        };
        if i >= spec.m() as usize {
            return Err(Error::InvalidParam { name: "i", reason: format!("block index must be < m = {}", spec.m()) });
        }
        let m = spec.m() as f64;
        let e = self.bridge.eta(t / self.sigma);
        let start = self.profile.eval_z0(x) / m;
        let end = self.lambda / m * self.profile.eval_z0(spec.beta_map(i, x));
        Ok((1.0 - e) * start + e * end)
    }

    /// Total forcing `d_t z1 - Laplacian z1` in three dimensions. The planar
    /// chart adds `-(1/rho) d_rho z1`, replaced by its limit `-d_rho^2 z1` on the axis.
    pub fn total_forcing(&self, t: f64, point: Point3) -> Result<f64> {
        match self.end {
            EndState::Ring => {
                let (rho, y) = (point[0], point[1]);
                let s = self.plane(t, rho, y)?;
                let axis_term = if rho == 0.0 { s.d[2][0] } else { s.d[1][0] / rho };
                Ok(s.planar_residual() - axis_term)
            }
            _ => Ok(self.cartesian(t, point)?.heat_residual()),
        }
    }

    /// `int_0^t f_total` in closed form: `z1(t) - z0 - Laplacian int_0^t z1`.
    pub fn forcing_primitive(&self, t: f64, x: Point3) -> Result<f64> {
        if matches!(self.end, EndState::Ring) {
            return Err(Error::Unsupported { op: "forcing_primitive", variant: "axisymmetric".into() });
        }
        let now = self.cartesian(t, x)?;
        let start = self.profile.cartesian_derivs(x);
        let end = self.cartesian_end(x);
        let e = self.sigma * self.bridge.integral(t / self.sigma);
        Ok(now.value - start.value - (t - e) * start.laplacian - e * end.laplacian)
    }
}

/// How the total forcing is divided between `f` and the fluctuation `d_t g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// `g = 0`.
    AllInF,
    /// `f = (1 - fraction) f_total`, `g(t) = fraction int_0^t f_total`.
    TimeSmoothedFraction { fraction: f64 },
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy::AllInF
    }
}

impl SplitPolicy {
    pub fn parse(name: &str, fraction: f64) -> Result<Self> {
        let policy = match name {
            "all-in-f" => SplitPolicy::AllInF,
            "time-smoothed-fraction" => SplitPolicy::TimeSmoothedFraction { fraction },
            other => return Err(Error::UnknownPolicy(other.to_string())),
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if let SplitPolicy::TimeSmoothedFraction { fraction } = self {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidParam { name: "fraction", reason: "must lie in [0, 1]".into() });
            }
        }
        Ok(())
    }

    /// Share of the total forcing moved into `g`.
    pub fn fraction(&self) -> f64 {
        match self {
            SplitPolicy::AllInF => 0.0,
            SplitPolicy::TimeSmoothedFraction { fraction } => *fraction,
        }
    }
}

/// `(f(t), g(t))` for a scalar forcing history on `[0, t]`.
pub fn split_forcing(f_total: impl Fn(f64) -> f64, policy: SplitPolicy, t: f64, abs_tol: f64) -> Result<(f64, f64)> {
    policy.validate()?;
    let theta = policy.fraction();
    let f = (1.0 - theta) * f_total(t);
    if theta == 0.0 || t == 0.0 {
        return Ok((f, 0.0));
    }
    let integral = quadrature::adaptive(&f_total, 0.0, t, abs_tol)?;
    Ok((f, theta * integral.value))
}

/// `z1(t, point)` for the single-point or ring construction.
pub fn eval_z1(profile: &BumpProfile, bridge: &BridgeFunction, lambda: f64, sigma: f64, t: f64, point: Point3) -> Result<f64> {
    let end = match profile.kind {
        ProfileKind::Cartesian3D => EndState::SinglePoint,
        ProfileKind::RadialPlane => EndState::Ring,
    };
    let base = BaseLevel { profile: *profile, bridge: *bridge, lambda, sigma, end };
    match profile.kind {
        ProfileKind::Cartesian3D => Ok(base.cartesian(t, point)?.value),
        ProfileKind::RadialPlane => Ok(base.plane(t, point[0], point[1])?.value()),
    }
}

/// The level-one total forcing for the single-point or ring construction.
pub fn forcing_f1(profile: &BumpProfile, bridge: &BridgeFunction, lambda: f64, sigma: f64, t: f64, point: Point3) -> Result<f64> {
    let end = match profile.kind {
        ProfileKind::Cartesian3D => EndState::SinglePoint,
        ProfileKind::RadialPlane => EndState::Ring,
    };
    BaseLevel { profile: *profile, bridge: *bridge, lambda, sigma, end }.total_forcing(t, point)
}

/// Block `i` (0-based) of the Cantor bridge.
pub fn eval_z1_cantor_block(
    profile: &BumpProfile,
    bridge: &BridgeFunction,
    spec: &CantorSpec,
    lambda: f64,
    i: usize,
    t: f64,
    point: Point3,
) -> Result<f64> {
    let sigma = 1.0 / (spec.k() as f64).powi(2);
    BaseLevel { profile: *profile, bridge: *bridge, lambda, sigma, end: EndState::Cantor(spec.clone()) }.cantor_block(i, t, point)
}
