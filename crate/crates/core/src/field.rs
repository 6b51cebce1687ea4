//! The glued self-similar field: evaluation of `z`, its derivatives, the
//! forcing `f` and the fluctuation `g` at any `(t, x)` by unwinding the
//! recursion down to the first interval.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractal::{CantorSpec, Point3};
use crate::grid::{GridDump, GridSpec};
use crate::params::{RadialPartition, ScalingParams, TimePartition, Variant};
use crate::profile::{BaseLevel, BridgeFunction, BumpProfile, CartesianSample, EndState, PlaneSample, ProfileKind, SplitPolicy};

/// Default level cap.
pub const DEFAULT_LEVEL_CAP: u32 = 300;
/// Largest natural logarithm an amplitude may reach.
const LOG_MAX: f64 = 709.0;

/// Position of a time in the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    /// `t` lies in `I_N = [sigma_{N-1}, sigma_N)`.
    At(u32),
    /// `t >= T`; every field vanishes.
    PostT,
}

/// Axis-aligned box containing the support of `z_N(t)` for all `t` in `I_N`.
///
/// Axisymmetric boxes live in the `(rho, y)` chart; the others in R^3.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportBox {
    pub level: u32,
    pub intervals: Vec<(f64, f64)>,
}

impl SupportBox {
    /// Open-box membership.
    pub fn contains(&self, coords: &[f64]) -> bool {
        self.intervals.iter().zip(coords).all(|(&(lo, hi), &c)| c > lo && c < hi)
    }
}

/// One point of the blow-up chain: the field at `t = sigma_N` and the point
/// where it reaches its lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupWitness {
    pub level: u32,
    pub time: f64,
    pub point: Point3,
    pub value: f64,
    /// `lambda^N`, or `(lambda/m)^N` for the Cantor construction.
    pub bound: f64,
}

/// Quantities available to [`FieldSpec::sample_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quantity {
    Z,
    F,
    G,
    GradNorm,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Z => "value",
            Quantity::F => "f",
            Quantity::G => "g",
            Quantity::GradNorm => "grad_norm",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scales {
    /// Logs of the value amplitude and of the per-derivative spatial factor.
    ln_amp: f64,
    ln_space: f64,
}

impl Scales {
    /// Factor for `a` spatial and `b` time derivatives.
    fn factor(&self, a: u32, b: u32) -> f64 {
        (self.ln_amp + (a + 2 * b) as f64 * self.ln_space).exp()
    }
}

/// An immutable, fully validated construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    variant: Variant,
    params: ScalingParams,
    base: BaseLevel,
    split: SplitPolicy,
    n_max: u32,
    time: TimePartition,
    radial: RadialPartition,
}

impl FieldSpec {
    pub fn new(variant: Variant, params: ScalingParams, profile: BumpProfile, cantor: Option<CantorSpec>) -> Result<Self> {
        params.validate_for(variant)?;
        profile.validate()?;
        let wrong_profile = |want: &str| Error::InvalidParam { name: "profile", reason: format!("{variant} needs a {want} profile") };
        let end = match variant {
            Variant::SinglePoint3D => {
                if profile.kind != ProfileKind::Cartesian3D {
                    return Err(wrong_profile("cartesian-3d"));
                }
                EndState::SinglePoint
            }
            Variant::Cantor3D => {
                if profile.kind != ProfileKind::Cartesian3D {
                    return Err(wrong_profile("cartesian-3d"));
                }
                let spec = cantor.ok_or_else(|| Error::InvalidParam { name: "cells", reason: "Cantor construction needs a cell pattern".into() })?;
                if spec.k() != params.k || spec.m() != params.m {
                    return Err(Error::InvalidParam {
                        name: "cells",
                        reason: format!("pattern has k={} m={}, parameters say k={} m={}", spec.k(), spec.m(), params.k, params.m),
                    });
                }
                check_branch_separation(&spec, profile.radius)?;
                EndState::Cantor(spec)
            }
            Variant::Axisymmetric => {
                if profile.kind != ProfileKind::RadialPlane {
                    return Err(wrong_profile("radial-plane"));
                }
                if profile.big_m != params.big_m {
                    return Err(Error::InvalidParam { name: "M", reason: "profile and parameters disagree on M".into() });
                }
                EndState::Ring
            }
        };
        let base = BaseLevel { profile, bridge: BridgeFunction, lambda: params.lambda, sigma: params.sigma, end };
        let mut spec = FieldSpec {
            variant,
            params,
            base,
            split: SplitPolicy::AllInF,
            n_max: DEFAULT_LEVEL_CAP,
            time: TimePartition::new(params.sigma, 1),
            radial: RadialPartition::new(params.sigma, 1),
        };
        // the default cap shrinks for large gains; an explicit cap is checked strictly
        let representable = (LOG_MAX / params.lambda.ln()).floor().max(1.0) as u32;
        spec.set_level_cap(DEFAULT_LEVEL_CAP.min(representable))?;
        Ok(spec)
    }

    pub fn single_point(params: ScalingParams) -> Result<Self> {
        Self::new(Variant::SinglePoint3D, params, BumpProfile::cartesian(), None)
    }

    pub fn cantor(params: ScalingParams, spec: CantorSpec) -> Result<Self> {
        Self::new(Variant::Cantor3D, params, BumpProfile::cartesian(), Some(spec))
    }

    pub fn axisymmetric(params: ScalingParams, zero_axial_mean: bool) -> Result<Self> {
        Self::new(Variant::Axisymmetric, params, BumpProfile::radial(params.big_m, zero_axial_mean), None)
    }

    pub fn with_split(mut self, split: SplitPolicy) -> Result<Self> {
        split.validate()?;
        if self.variant == Variant::Axisymmetric && split.fraction() != 0.0 {
            return Err(Error::Unsupported { op: "g split", variant: self.variant.to_string() });
        }
        self.split = split;
        Ok(self)
    }

    pub fn with_level_cap(mut self, n_max: u32) -> Result<Self> {
        self.set_level_cap(n_max)?;
        Ok(self)
    }

    fn set_level_cap(&mut self, n_max: u32) -> Result<()> {
        if n_max == 0 {
            return Err(Error::InvalidParam { name: "n_max", reason: "must be >= 1".into() });
        }
        if n_max as f64 * self.params.lambda.ln() > LOG_MAX {
            return Err(Error::LevelOverflow { level: n_max, cap: (LOG_MAX / self.params.lambda.ln()) as u32 });
        }
        self.n_max = n_max;
        self.time = TimePartition::new(self.params.sigma, n_max + 1);
        self.radial = RadialPartition::new(self.params.sigma, n_max + 1);
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &ScalingParams {
        &self.params
    }

    pub fn base(&self) -> &BaseLevel {
        &self.base
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.base.profile
    }

    pub fn split(&self) -> SplitPolicy {
        self.split
    }

    pub fn level_cap(&self) -> u32 {
        self.n_max
    }

    pub fn time_partition(&self) -> &TimePartition {
        &self.time
    }

    pub fn radial_partition(&self) -> &RadialPartition {
        &self.radial
    }

    pub fn cantor_spec(&self) -> Option<&CantorSpec> {
        match &self.base.end {
            EndState::Cantor(spec) => Some(spec),
            _ => None,
        }
    }

    /// Amplification per level: `lambda`, or `lambda / m` for the Cantor construction.
    pub fn level_gain(&self) -> f64 {
        match self.variant {
            Variant::Cantor3D => self.params.lambda / self.params.m as f64,
            _ => self.params.lambda,
        }
    }

    /// The `N` with `sigma_{N-1} <= t < sigma_N`, or [`Level::PostT`].
    pub fn interval_index(&self, t: f64) -> Result<Level> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParam { name: "t", reason: format!("time must be finite and >= 0, got {t}") });
        }
        let total = self.time.total();
        if t >= total {
            return Ok(Level::PostT);
        }
        let guess = ((1.0 - t / total).ln() / self.params.sigma.ln()).floor();
        let mut n = if guess.is_finite() && guess >= 0.0 { (guess.min(self.n_max as f64) as u32) + 1 } else { 1 };
        while n > 1 && t < self.time.partial(n - 1) {
            n -= 1;
        }
        while t >= self.time.partial(n) {
            n += 1;
            if n > self.n_max {
                return Err(Error::LevelOverflow { level: n, cap: self.n_max });
            }
        }
        if n > self.n_max {
            return Err(Error::LevelOverflow { level: n, cap: self.n_max });
        }
        Ok(Level::At(n))
    }

    /// Base time `(t - sigma_{N-1}) / sigma^(N-1)`, clamped into `[0, sigma]`.
    pub fn base_time(&self, level: u32, t: f64) -> f64 {
        let scale = self.params.sigma.powi(level as i32 - 1);
        ((t - self.time.partial(level - 1)) / scale).clamp(0.0, self.params.sigma)
    }

    /// Physical time of base time `tau` on level `level`.
    pub fn physical_time(&self, level: u32, tau: f64) -> f64 {
        self.time.partial(level - 1) + self.params.sigma.powi(level as i32 - 1) * tau
    }

    /// `sigma^((N-1)/2)`, the spatial scale of level `N`.
    pub fn level_scale(&self, level: u32) -> f64 {
        self.params.sigma.sqrt().powi(level as i32 - 1)
    }

    fn scales(&self, level: u32, max_order: u32) -> Result<Scales> {
        if level == 0 || level > self.n_max {
            return Err(Error::LevelOverflow { level, cap: self.n_max });
        }
        let steps = (level - 1) as f64;
        let s = Scales { ln_amp: steps * self.level_gain().ln(), ln_space: -0.5 * steps * self.params.sigma.ln() };
        if s.ln_amp + max_order as f64 * s.ln_space > LOG_MAX {
            return Err(Error::LevelOverflow { level, cap: self.n_max });
        }
        Ok(s)
    }

    fn in_envelope(&self, p: Point3) -> bool {
        let r = self.base.profile.radius;
        p.iter().all(|&c| c >= -r && c <= 1.0 + r)
    }

    /// The unique Cantor branch whose preimage envelope contains `x`.
    fn cantor_branch(&self, spec: &CantorSpec, x: Point3) -> Option<Point3> {
        (0..spec.m() as usize).map(|i| spec.beta_map(i, x)).find(|q| self.in_envelope(*q))
    }

    /// One unwinding step of the spatial coordinate, `None` when the field vanishes.
    fn descend(&self, x: Point3) -> Option<Point3> {
        match &self.base.end {
            EndState::Cantor(spec) => self.cantor_branch(spec, x),
            _ => {
                let inv = 1.0 / self.params.sigma.sqrt();
                Some(x.map(|c| c * inv))
            }
        }
    }

    /// Base-level coordinates of a Cartesian point on level `level`.
    fn cartesian_base_point(&self, level: u32, x: Point3) -> Option<Point3> {
        match &self.base.end {
            EndState::Cantor(spec) => {
                let mut p = x;
                for _ in 1..level {
                    p = self.cantor_branch(spec, p)?;
                }
                Some(p)
            }
            _ => {
                let inv = 1.0 / self.level_scale(level);
                Some(x.map(|c| c * inv))
            }
        }
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(0.0..=self.params.sigma).contains(&tau) {
            return Err(Error::Interval { t: tau, lo: 0.0, hi: self.params.sigma });
        }
        Ok(())
    }

    /// Planar derivatives of `z_N` at base time `tau`, physical `(rho, y)`.
    /// Negative `rho` evaluates the even extension.
    pub fn plane_at(&self, level: u32, tau: f64, rho: f64, y: f64) -> Result<PlaneSample> {
        if self.variant != Variant::Axisymmetric {
            return Err(Error::Unsupported { op: "plane chart", variant: self.variant.to_string() });
        }
        self.check_tau(tau)?;
        let sc = self.scales(level, 3)?;
        let inv = 1.0 / self.level_scale(level);
        let r = rho.abs();
        let rho_b = (r - self.radial.partial(level - 1)) * inv;
        let y_b = y * inv;
        let m = self.base.profile.big_m;
        let inside_radial = if level == 1 { rho_b.abs() < 1.0 } else { rho_b > -1.0 && rho_b < 1.0 };
        if !inside_radial || y_b.abs() >= m {
            return Ok(PlaneSample::default());
        }
        let mut s = self.base.plane(tau, rho_b, y_b)?;
        for (a, row) in s.d.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v *= sc.factor((a + b) as u32, 0);
            }
        }
        s.dt *= sc.factor(0, 1);
        s.dt_rho *= sc.factor(1, 1);
        if rho < 0.0 {
            for b in 0..3 {
                s.d[1][b] = -s.d[1][b];
                s.d[3][b] = -s.d[3][b];
            }
            s.dt_rho = -s.dt_rho;
        }
        Ok(s)
    }

    /// Value, gradient, Laplacian and time derivative of the field on level
    /// `level` at base time `tau` and physical point `x` in R^3.
    pub fn cartesian_at(&self, level: u32, tau: f64, x: Point3) -> Result<CartesianSample> {
        self.check_tau(tau)?;
        if self.variant == Variant::Axisymmetric {
            let rho = x[0].hypot(x[1]);
            let p = self.plane_at(level, tau, rho, x[2])?;
            return Ok(lift_plane_sample(&p, x, rho));
        }
        let sc = self.scales(level, 2)?;
        let Some(xb) = self.cartesian_base_point(level, x) else {
            return Ok(CartesianSample::default());
        };
        let s = self.base.cartesian(tau, xb)?;
        let g = sc.factor(1, 0);
        Ok(CartesianSample { value: s.value * sc.factor(0, 0), grad: s.grad.map(|v| v * g), laplacian: s.laplacian * sc.factor(2, 0), dt: s.dt * sc.factor(0, 1) })
    }

    /// [`FieldSpec::cartesian_at`] at physical time `t`.
    pub fn cartesian(&self, t: f64, x: Point3) -> Result<CartesianSample> {
        match self.interval_index(t)? {
            Level::PostT => Ok(CartesianSample::default()),
            Level::At(n) => self.cartesian_at(n, self.base_time(n, t), x),
        }
    }

    /// [`FieldSpec::plane_at`] at physical time `t`.
    pub fn plane(&self, t: f64, rho: f64, y: f64) -> Result<PlaneSample> {
        match self.interval_index(t)? {
            Level::PostT => {
                if self.variant != Variant::Axisymmetric {
                    return Err(Error::Unsupported { op: "plane chart", variant: self.variant.to_string() });
                }
                Ok(PlaneSample::default())
            }
            Level::At(n) => self.plane_at(n, self.base_time(n, t), rho, y),
        }
    }

    /// `z(t, x)`; for the axisymmetric construction `x` is a point of R^3.
    pub fn eval_z(&self, t: f64, x: Point3) -> Result<f64> {
        Ok(self.cartesian(t, x)?.value)
    }

    pub fn eval_grad_z(&self, t: f64, x: Point3) -> Result<[f64; 3]> {
        Ok(self.cartesian(t, x)?.grad)
    }

    /// The forcing `f`: the heat residual minus the share moved into `g`.
    pub fn eval_f(&self, t: f64, x: Point3) -> Result<f64> {
        let s = self.cartesian(t, x)?;
        Ok((1.0 - self.split.fraction()) * s.heat_residual())
    }

    /// The lifted axisymmetric field `Z(t, x) = z(t, |(x1, x2)|, x3)`.
    pub fn eval_z_lifted(&self, t: f64, x: Point3) -> Result<f64> {
        if self.variant != Variant::Axisymmetric {
            return Err(Error::Unsupported { op: "eval_z_lifted", variant: self.variant.to_string() });
        }
        self.eval_z(t, x)
    }

    /// The fluctuation `g`, following its additive recursion.
    pub fn eval_g(&self, t: f64, x: Point3) -> Result<f64> {
        if self.split.fraction() == 0.0 {
            return Ok(0.0);
        }
        match self.interval_index(t)? {
            Level::PostT => Ok(0.0),
            Level::At(n) => self.g_at(n, self.base_time(n, t), x),
        }
    }

    /// `g_N` at base time `tau`.
    ///
    /// With `h_n(x) = g_n(sigma_n, x)` the recursion unrolls to
    /// `g_N(t, x_0) = sum_j c^j [h_{N-1-j}(x_j) - c h_{N-2-j}(x_{j+1})] + c^(N-1) g_1(tau, x_{N-1})`
    /// along the chain `x_{j+1} = descend(x_j)`, and
    /// `h_n(x_j) = h_{n-1}(x_j) + c [h_{n-1}(x_{j+1}) - h_{n-2}(x_{j+1})]`.
    pub fn g_at(&self, level: u32, tau: f64, x: Point3) -> Result<f64> {
        self.check_tau(tau)?;
        self.scales(level, 0)?;
        let theta = self.split.fraction();
        if theta == 0.0 {
            return Ok(0.0);
        }
        let n = level as usize;
        let c = self.level_gain();
        let mut chain: Vec<Option<Point3>> = Vec::with_capacity(n);
        chain.push(Some(x));
        for j in 1..n {
            let next = chain[j - 1].and_then(|p| self.descend(p));
            chain.push(next);
        }
        let g1 = |p: Option<Point3>, t: f64| -> Result<f64> {
            match p {
                Some(p) => Ok(theta * self.base.forcing_primitive(t, p)?),
                None => Ok(0.0),
            }
        };
        // h[m][j] = h_m(x_j) for m + j <= n - 1.
        let mut h = vec![vec![0.0; n]; n];
        if n >= 2 {
            for j in 0..n - 1 {
                h[1][j] = g1(chain[j], self.params.sigma)?;
            }
        }
        for m in 2..n {
            for j in 0..n - m {
                h[m][j] = h[m - 1][j] + c * (h[m - 1][j + 1] - h[m - 2][j + 1]);
            }
        }
        let mut sum = 0.0;
        let mut cj = 1.0;
        for j in 0..n.saturating_sub(1) {
            sum += cj * (h[n - 1 - j][j] - c * h[n - 2 - j][j + 1]);
            cj *= c;
        }
        Ok(sum + cj * g1(chain[n - 1], tau)?)
    }

    /// Box containing `supp z_N(t)` for every `t` in `I_N`.
    ///
    /// Axisymmetric: `(rho_{N-2}, rho_{N-1} + sigma^((N-1)/2)) x (-sigma^((N-1)/2) M, sigma^((N-1)/2) M)`
    /// with `rho_{-1} = -1` (the even extension of the first level).
    pub fn support_box(&self, level: u32) -> SupportBox {
        let level = level.max(1);
        let s = self.level_scale(level);
        let r = self.base.profile.radius;
        let intervals = match self.variant {
            Variant::SinglePoint3D => vec![(-r * s, r * s); 3],
            Variant::Cantor3D => vec![(-r, 1.0 + r); 3],
            Variant::Axisymmetric => {
                let lo = if level == 1 { -1.0 } else { self.radial.partial(level - 2) };
                let m = self.base.profile.big_m;
                vec![(lo, self.radial.partial(level - 1) + s), (-s * m, s * m)]
            }
        };
        SupportBox { level, intervals }
    }

    /// Witness chain `(sigma_N, x_N, z(sigma_N, x_N))` for `N = 1..=n_max`.
    pub fn blowup_sequence(&self, n_max: u32) -> Result<Vec<BlowupWitness>> {
        if n_max >= self.n_max {
            return Err(Error::LevelOverflow { level: n_max + 1, cap: self.n_max });
        }
        let gain = self.level_gain();
        (1..=n_max)
            .map(|n| {
                let point = self.witness_point(n);
                let value = self.cartesian_at(n + 1, 0.0, point)?.value;
                Ok(BlowupWitness { level: n, time: self.time.partial(n), point, value, bound: gain.powi(n as i32) })
            })
            .collect()
    }

    /// A point where the level-`n` blow-up bound is attained.
    pub fn witness_point(&self, n: u32) -> Point3 {
        match &self.base.end {
            EndState::SinglePoint => [0.0; 3],
            EndState::Ring => [self.radial.partial(n), 0.0, 0.0],
            EndState::Cantor(spec) => {
                // x = sum_{j<n} x_last / k^j lies in A_n.
                let last = spec.generator_point(spec.m() as usize - 1);
                let k = spec.k() as f64;
                let mut p = [0.0; 3];
                for j in (0..n).rev() {
                    let w = k.powi(-(j as i32));
                    for c in 0..3 {
                        p[c] += last[c] * w;
                    }
                }
                p
            }
        }
    }

    /// Regular-grid dump of the requested quantities at time `t`.
    pub fn sample_grid(&self, t: f64, grid: GridSpec, quantities: &[Quantity], cap: usize) -> Result<GridDump> {
        let names = quantities.iter().map(|q| q.name().to_string()).collect();
        let theta = self.split.fraction();
        GridDump::evaluate(grid, names, cap, |x| {
            let s = self.cartesian(t, x)?;
            quantities
                .iter()
                .map(|q| match q {
                    Quantity::Z => Ok(s.value),
                    Quantity::F => Ok((1.0 - theta) * s.heat_residual()),
                    Quantity::G => self.eval_g(t, x),
                    Quantity::GradNorm => Ok(s.grad.iter().map(|g| g * g).sum::<f64>().sqrt()),
                })
                .collect()
        })
    }
}

/// Cartesian view of an axisymmetric planar sample at `x`, `rho = |(x1, x2)|`.
/// On the axis the radial quantities take their limits: the radial gradient
/// vanishes and `(1/rho) d_rho z -> d_rho^2 z`.
pub fn lift_plane_sample(p: &PlaneSample, x: Point3, rho: f64) -> CartesianSample {
    let (dr, drr, dyy) = (p.d[1][0], p.d[2][0], p.d[0][2]);
    let (grad, axis_term) = if rho > 0.0 { ([x[0] / rho * dr, x[1] / rho * dr, p.d[0][1]], dr / rho) } else { ([0.0, 0.0, p.d[0][1]], drr) };
    CartesianSample { value: p.d[0][0], grad, laplacian: drr + dyy + axis_term, dt: p.dt }
}

/// Pairwise separation of the branch envelopes `(cell_i + [-r, 1 + r]^3) / k`.
pub fn check_branch_separation(spec: &CantorSpec, radius: f64) -> Result<()> {
    let cells = spec.cells();
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            let separated = (0..3).any(|c| (a[c] as f64 - b[c] as f64).abs() >= 1.0 + 2.0 * radius);
            if !separated {
                return Err(Error::InvalidParam {
                    name: "cells",
                    reason: format!("cells {a:?} and {b:?} are closer than 1 + 2r = {} in every coordinate; branch supports would overlap", 1.0 + 2.0 * radius),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::halton;
    use proptest::prelude::*;

    fn single(lambda: f64, sigma: f64) -> FieldSpec {
        FieldSpec::single_point(ScalingParams::new(lambda, sigma)).unwrap()
    }

    fn axis(lambda: f64, sigma: f64, zero_mean: bool) -> FieldSpec {
        FieldSpec::axisymmetric(ScalingParams::new(lambda, sigma), zero_mean).unwrap()
    }

    fn cantor() -> FieldSpec {
        FieldSpec::cantor(ScalingParams::cantor(9.0, 5, 8), CantorSpec::corners(5).unwrap()).unwrap()
    }

    #[test]
    fn interval_index_examples() {
        let f = single(1.5, 0.25);
        assert_eq!(f.interval_index(0.0).unwrap(), Level::At(1));
        assert_eq!(f.interval_index(0.3).unwrap(), Level::At(2));
        assert_eq!(f.interval_index(0.25).unwrap(), Level::At(2));
        assert_eq!(f.interval_index(0.2499).unwrap(), Level::At(1));
        assert_eq!(f.interval_index(1.0 / 3.0).unwrap(), Level::PostT);
        assert_eq!(f.interval_index(5.0).unwrap(), Level::PostT);
        assert!(f.interval_index(-1e-3).is_err());
        assert_eq!(f.eval_z(0.5, [0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn interval_index_agrees_with_direct_search() {
        let f = single(1.5, 0.3);
        let tp = f.time_partition();
        for i in 0..2000 {
            let t = tp.total() * i as f64 / 2000.0;
            let direct = (1..=f.level_cap()).find(|&n| t < tp.partial(n)).unwrap();
            assert_eq!(f.interval_index(t).unwrap(), Level::At(direct), "t={t}");
        }
    }

    #[test]
    fn level_overflow_near_t() {
        let f = single(1.5, 0.5).with_level_cap(10).unwrap();
        let t = f.time_partition().partial(10) + 1e-6;
        assert!(matches!(f.interval_index(t), Err(Error::LevelOverflow { .. })));
        let big = FieldSpec::single_point(ScalingParams::new(1e5, 0.5)).unwrap();
        assert!(big.level_cap() < 300);
        assert!(matches!(big.with_level_cap(300), Err(Error::LevelOverflow { .. })));
    }

    #[test]
    fn blowup_examples() {
        let f = single(2.0, 0.25);
        for w in f.blowup_sequence(20).unwrap() {
            assert!((w.value - 2f64.powi(w.level as i32)).abs() <= 1e-10 * w.value);
            // Physical-time path agrees while sigma_N is resolvable.
            assert_eq!(f.eval_z(w.time, w.point).unwrap(), w.value);
        }
        let a = axis(2.0, 0.2, true);
        for w in a.blowup_sequence(20).unwrap() {
            assert!((w.value - 2f64.powi(w.level as i32)).abs() <= 1e-10 * w.value);
            assert_eq!(a.eval_z(w.time, w.point).unwrap(), w.value);
        }
        let c = cantor();
        for w in c.blowup_sequence(12).unwrap() {
            assert!(w.value >= w.bound * (1.0 - 1e-12), "{w:?}");
        }
    }

    #[test]
    fn exact_self_similarity_single_point() {
        // sigma = 1/4 makes every rescaling exact in binary.
        let f = single(1.7, 0.25);
        let (l, s) = (1.7, 0.25);
        for i in 0..500u64 {
            let t = s + (f.time_partition().partial(5) - s) * halton(i + 1, 2);
            let x = [halton(i + 1, 3), halton(i + 1, 5), halton(i + 1, 7)].map(|u| (u - 0.5) * 0.9);
            let lhs = f.eval_z(t, x).unwrap();
            let rhs = l * f.eval_z((t - s) / s, x.map(|c| c / s.sqrt())).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn continuity_across_interval_boundaries() {
        for f in [single(1.5, 0.2), axis(1.5, 0.2, true), cantor()] {
            for n in 1..5 {
                let t = f.time_partition().partial(n);
                let before = t - 1e-14 * t;
                for i in 0..50u64 {
                    let x = [halton(i, 2), halton(i, 3), halton(i, 5)].map(|u| u * 0.6 - 0.1);
                    let (a, b) = (f.eval_z(before, x).unwrap(), f.eval_z(t, x).unwrap());
                    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "n={n} {a} {b}");
                }
            }
        }
    }

    /// Sum over every branch at every level, no pruning.
    fn cantor_brute(spec: &CantorSpec, base: &BaseLevel, level: u32, tau: f64, x: Point3) -> f64 {
        if level == 1 {
            return base.cartesian(tau, x).unwrap().value;
        }
        let gain = base.lambda / spec.m() as f64;
        (0..spec.m() as usize).map(|i| gain * cantor_brute(spec, base, level - 1, tau, spec.beta_map(i, x))).sum()
    }

    #[test]
    fn cantor_pruning_matches_brute_force() {
        let f = cantor();
        let spec = f.cantor_spec().unwrap().clone();
        for i in 0..10_000u64 {
            let level = 1 + (i % 4) as u32;
            let tau = f.params().sigma * halton(i, 11);
            let x = [halton(i, 2), halton(i, 3), halton(i, 5)].map(|u| 1.6 * u - 0.3);
            let pruned = f.cartesian_at(level, tau, x).unwrap().value;
            let brute = cantor_brute(&spec, f.base(), level, tau, x);
            assert!((pruned - brute).abs() <= 1e-12 * brute.abs().max(1.0), "{pruned} vs {brute}");
        }
    }

    #[test]
    fn overlapping_cantor_cells_are_rejected() {
        let spec = CantorSpec::new(5, vec![[0, 0, 0], [2, 0, 0]]).unwrap();
        let p = ScalingParams { m: 2, ..ScalingParams::cantor(3.0, 5, 2) };
        assert!(FieldSpec::cantor(p, spec).is_err());
    }

    #[test]
    fn field_vanishes_outside_support_box() {
        for f in [single(1.5, 0.2), axis(1.5, 0.2, true), cantor()] {
            for n in 1..5u32 {
                let bx = f.support_box(n);
                let s = f.level_scale(n);
                for i in 0..400u64 {
                    let tau = f.params().sigma * halton(i, 7);
                    let u = [halton(i, 2), halton(i, 3), halton(i, 5)];
                    let coords: Vec<f64> = bx.intervals.iter().enumerate().map(|(d, &(lo, hi))| {
                        let w = hi - lo;
                        lo - w + 3.0 * w * u[d]
                    }).collect();
                    if bx.contains(&coords) || (f.variant() == Variant::Axisymmetric && n > 1 && coords[0] < 0.0) {
                        continue;
                    }
                    let v = match f.variant() {
                        Variant::Axisymmetric => f.plane_at(n, tau, coords[0], coords[1]).unwrap().value(),
                        _ => f.cartesian_at(n, tau, [coords[0], coords[1], coords[2]]).unwrap().value,
                    };
                    assert_eq!(v, 0.0, "{:?} level {n} at {coords:?} (scale {s})", f.variant());
                }
            }
        }
        let a = axis(1.5, 0.2, true);
        let b = a.support_box(3);
        let b2 = a.support_box(4);
        let w = |b: &SupportBox| b.intervals[1].1 - b.intervals[1].0;
        assert!((w(&b2) / w(&b) - 0.2f64.sqrt()).abs() < 1e-14);
    }

    fn fd_gradient(f: &FieldSpec, t: f64, x: Point3, h: f64) -> [f64; 3] {
        let mut g = [0.0; 3];
        for i in 0..3 {
            let (mut p, mut m) = (x, x);
            p[i] += h;
            m[i] -= h;
            g[i] = (f.eval_z(t, p).unwrap() - f.eval_z(t, m).unwrap()) / (2.0 * h);
        }
        g
    }

    #[test]
    fn gradient_converges_at_second_order() {
        for f in [single(1.5, 0.2), axis(1.5, 0.2, true), cantor()] {
            let mut errs = [0.0f64; 2];
            for (k, h) in [1e-3, 5e-4].into_iter().enumerate() {
                for i in 1..40u64 {
                    let t = f.time_partition().partial(2) * halton(i, 7);
                    let x = match f.variant() {
                        Variant::Cantor3D => [halton(i, 2), halton(i, 3), halton(i, 5)].map(|u| 0.4 * u - 0.2),
                        _ => [halton(i, 2), halton(i, 3), halton(i, 5)].map(|u| 0.8 * u - 0.4),
                    };
                    let g = f.eval_grad_z(t, x).unwrap();
                    let fd = fd_gradient(&f, t, x, h);
                    for d in 0..3 {
                        errs[k] = errs[k].max((g[d] - fd[d]).abs());
                    }
                }
            }
            let order = (errs[0] / errs[1]).log2();
            assert!(order >= 1.8, "{:?}: errors {errs:?}", f.variant());
        }
    }

    #[test]
    fn gradient_chain_rule_identity() {
        let (l, s) = (1.5f64, 0.2f64);
        let f = single(l, s);
        let t = 0.3 * s;
        let x = [0.05, -0.1, 0.2];
        let xs = x.map(|c| c * s.sqrt());
        let g_hi = f.eval_grad_z(s + s * t, xs).unwrap();
        let g_lo = f.eval_grad_z(t, x).unwrap();
        let norm = |g: [f64; 3]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm(g_hi) - l / s.sqrt() * norm(g_lo)).abs() < 1e-12 * norm(g_hi));
    }

    #[test]
    fn axis_gradient_has_no_radial_part() {
        let a = axis(1.5, 0.2, true);
        let g = a.eval_grad_z(0.05, [0.0, 0.0, 0.3]).unwrap();
        assert_eq!((g[0], g[1]), (0.0, 0.0));
        assert!(g[2] != 0.0);
    }

    #[test]
    fn forcing_is_the_heat_residual() {
        // d_t z - Laplacian z - f by central differences in space and time.
        for f in [single(1.5, 0.2), axis(1.5, 0.2, false)] {
            for (t, x) in [(0.07, [0.1, 0.05, 0.1]), (0.23, [0.12, 0.2, -0.04])] {
                let h = 1e-3;
                let ht = 1e-6;
                let z = |tt: f64, p: Point3| f.eval_z(tt, p).unwrap();
                let dt = (z(t + ht, x) - z(t - ht, x)) / (2.0 * ht);
                let mut lap = 0.0;
                for i in 0..3 {
                    let (mut p, mut m) = (x, x);
                    p[i] += h;
                    m[i] -= h;
                    lap += (z(t, p) - 2.0 * z(t, x) + z(t, m)) / (h * h);
                }
                let fv = f.eval_f(t, x).unwrap();
                assert!((dt - lap - fv).abs() < 1e-3 * (1.0 + fv.abs()), "{:?}: {} vs {fv}", f.variant(), dt - lap);
            }
        }
    }

    #[test]
    fn forcing_level_factor() {
        let f = single(1.5, 0.2);
        let x = [0.01, 0.02, 0.0];
        let tau = 0.4 * 0.2;
        let base = f.cartesian_at(1, tau, x).unwrap().heat_residual();
        let up = f.cartesian_at(4, tau, x.map(|c| c * 0.2f64.powf(1.5))).unwrap().heat_residual();
        assert!((up - (1.5f64 / 0.2).powi(3) * base).abs() < 1e-11 * up.abs());
        assert_eq!(f.eval_f(10.0, x).unwrap(), 0.0);
    }

    #[test]
    fn lifted_field_is_rotation_invariant() {
        let a = axis(1.5, 0.2, true);
        let t = a.time_partition().partial(2);
        let r2 = a.radial_partition().partial(2);
        assert!((a.eval_z_lifted(t, [r2 / 2f64.sqrt(), r2 / 2f64.sqrt(), 0.0]).unwrap() - 2.25).abs() < 1e-12);
        for i in 0..100u64 {
            let t = 0.3 * halton(i, 2);
            let (rho, y, th) = (0.9 * halton(i, 3), halton(i, 5) - 0.5, 6.28 * halton(i, 7));
            let v0 = a.eval_z_lifted(t, [rho, 0.0, y]).unwrap();
            let v1 = a.eval_z_lifted(t, [rho * th.cos(), rho * th.sin(), y]).unwrap();
            assert!((v0 - v1).abs() <= 1e-13 * (1.0 + v0.abs()));
        }
        assert!(single(1.5, 0.2).eval_z_lifted(0.0, [0.0; 3]).is_err());
    }

    /// The g recursion written literally, with branch sums for the Cantor case.
    fn g_literal(f: &FieldSpec, n: u32, t: f64, x: Point3) -> f64 {
        let theta = f.split().fraction();
        let s = f.params().sigma;
        let tp = f.time_partition();
        if n == 1 {
            return theta * f.base().forcing_primitive(t.clamp(0.0, s), x).unwrap();
        }
        let tau = (t - s) / s;
        let prev = g_literal(f, n - 1, tp.partial(n - 1), x);
        match f.cantor_spec() {
            None => {
                let y = x.map(|c| c / s.sqrt());
                prev + f.params().lambda * (g_literal(f, n - 1, tau, y) - g_literal(f, n - 1, tp.partial(n - 2), y))
            }
            Some(spec) => {
                let gain = f.level_gain();
                let mut acc = prev;
                for i in 0..spec.m() as usize {
                    let y = spec.beta_map(i, x);
                    acc += gain * (g_literal(f, n - 1, tau, y) - g_literal(f, n - 1, tp.partial(n - 2), y));
                }
                acc
            }
        }
    }

    #[test]
    fn g_matches_literal_recursion() {
        let half = SplitPolicy::TimeSmoothedFraction { fraction: 0.5 };
        for f in [single(1.5, 0.2).with_split(half).unwrap(), cantor().with_split(half).unwrap()] {
            let tp = f.time_partition().clone();
            for n in 1..=5u32 {
                let (lo, hi) = tp.interval(n);
                for i in 0..6u64 {
                    let t = lo + (hi - lo) * halton(i + 1, 2);
                    let x = [halton(i + 1, 3), halton(i + 1, 5), halton(i + 1, 7)].map(|u| 0.5 * u - 0.1);
                    let fast = f.eval_g(t, x).unwrap();
                    let slow = g_literal(&f, n, t, x);
                    assert!((fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()), "n={n}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn g_split_identity_and_continuity() {
        let half = SplitPolicy::TimeSmoothedFraction { fraction: 0.5 };
        let f = single(1.5, 0.2).with_split(half).unwrap();
        assert_eq!(f.eval_g(0.0, [0.1, 0.0, 0.0]).unwrap(), 0.0);
        let x = [0.03, 0.01, -0.02];
        for n in 1..5 {
            let t = f.time_partition().partial(n);
            let (a, b) = (f.eval_g(t * (1.0 - 1e-13), x).unwrap(), f.eval_g(t, x).unwrap());
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "n={n}: {a} {b}");
        }
        // f + d_t g equals the full heat residual.
        for t in [0.05, 0.21, 0.245] {
            let ht = 1e-7;
            let dg = (f.eval_g(t + ht, x).unwrap() - f.eval_g(t - ht, x).unwrap()) / (2.0 * ht);
            let total = f.cartesian(t, x).unwrap().heat_residual();
            let fv = f.eval_f(t, x).unwrap();
            assert!((fv + dg - total).abs() <= 1e-5 * (1.0 + total.abs()), "t={t}: {} vs {total}", fv + dg);
        }
        assert!(axis(1.5, 0.2, true).with_split(half).is_err());
        assert_eq!(single(1.5, 0.2).eval_g(0.1, x).unwrap(), 0.0);
    }

    #[test]
    fn grid_sampling() {
        let a = axis(1.5, 0.2, true);
        let grid = GridSpec::new([9, 9, 5], [-0.6, -0.6, -0.3], [0.6, 0.6, 0.3]).unwrap();
        let t = a.time_partition().partial(2);
        let d = a.sample_grid(t, grid, &[Quantity::Z, Quantity::GradNorm], 1 << 20).unwrap();
        // 90 degree rotation (x, y) -> (-y, x) maps grid points to grid points.
        for i in 0..9 {
            for j in 0..9 {
                for k in 0..5 {
                    let idx = (i * 9 + j) * 5 + k;
                    let rot = ((8 - j) * 9 + i) * 5 + k;
                    assert!((d.value(idx, 0) - d.value(rot, 0)).abs() <= 1e-12 * (1.0 + d.value(idx, 0).abs()));
                }
            }
        }
        let far = GridSpec::new([4, 4, 4], [3.0; 3], [4.0; 3]).unwrap();
        assert!(a.sample_grid(t, far, &[Quantity::Z, Quantity::F], 1 << 20).unwrap().data.iter().all(|v| *v == 0.0));
        let after = a.sample_grid(1.0, grid, &[Quantity::Z], 1 << 20).unwrap();
        assert!(after.data.iter().all(|v| *v == 0.0));
    }

    proptest! {
        #[test]
        fn axisymmetric_self_similarity(tau in 0.0..0.2f64, rb in -0.99..0.99f64, yb in -0.99..0.99f64, n in 2u32..8) {
            let a = axis(1.5, 0.2, true);
            let s = a.level_scale(n);
            let rho = a.radial_partition().partial(n - 1) + s * rb;
            let hi = a.plane_at(n, tau, rho, s * yb).unwrap().value();
            let lo = a.base().plane(tau, rb, yb).unwrap().value();
            prop_assert!((hi - 1.5f64.powi(n as i32 - 1) * lo).abs() <= 1e-9 * (1.0 + hi.abs()));
        }
    }
}
