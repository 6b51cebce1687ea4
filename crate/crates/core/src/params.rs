//! Scalar parameters of the constructions, their partial sums, and the
//! parameter-regime inequalities.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Viscosity. All constructions use unit viscosity.
pub const VISCOSITY: f64 = 1.0;

/// Which self-similar construction a field follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Scalar field on R^3 blowing up at the single point (T, 0).
    #[serde(rename = "single-point-3d")]
    SinglePoint3D,
    /// Scalar field on R^3 blowing up on the generalised Cantor set.
    #[serde(rename = "cantor-3d")]
    Cantor3D,
    /// Axisymmetric field blowing up on a circle.
    Axisymmetric,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::SinglePoint3D => "single-point-3d",
            Variant::Cantor3D => "cantor-3d",
            Variant::Axisymmetric => "axisymmetric",
        })
    }
}

/// Every scalar parameter of the constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    /// Amplification per level, `> 1`.
    pub lambda: f64,
    /// Time contraction per level, in `(0, 1)`.
    pub sigma: f64,
    /// Spatial subdivision count of the Cantor construction.
    #[serde(default = "default_k")]
    pub k: u32,
    /// Number of selected cells, `1 <= m <= k^3`.
    #[serde(default = "default_m")]
    pub m: u32,
    /// Spatial integrability exponent.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Forcing integrability exponent.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Axial half-width of the planar base profile.
    #[serde(rename = "M", default = "default_big_m")]
    pub big_m: f64,
}

fn default_k() -> u32 {
    5
}
fn default_m() -> u32 {
    8
}
fn default_q() -> f64 {
    7.0
}
fn default_p() -> f64 {
    1.5
}
fn default_beta() -> f64 {
    0.3
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_big_m() -> f64 {
    1.0
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            lambda: 1.5,
            sigma: 0.01,
            k: default_k(),
            m: default_m(),
            q: default_q(),
            p: default_p(),
            beta: default_beta(),
            epsilon: default_epsilon(),
            big_m: default_big_m(),
        }
    }
}

impl ScalingParams {
    pub fn new(lambda: f64, sigma: f64) -> Self {
        ScalingParams { lambda, sigma, ..Default::default() }
    }

    /// Cantor parameters: `sigma = k^-2`.
    pub fn cantor(lambda: f64, k: u32, m: u32) -> Self {
        ScalingParams { lambda, sigma: 1.0 / (k as f64 * k as f64), k, m, ..Default::default() }
    }

    pub fn sqrt_sigma(&self) -> f64 {
        self.sigma.sqrt()
    }

    /// Checks finiteness and the basic ranges of every parameter.
    pub fn validate(&self) -> Result<()> {
        let scalars: [(&'static str, f64); 7] = [
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("q", self.q),
            ("p", self.p),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
            ("M", self.big_m),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::NonFinite { name });
            }
        }
        let invalid = |name, reason: &str| Err(Error::InvalidParam { name, reason: reason.to_string() });
        if self.lambda <= 1.0 {
            return invalid("lambda", "must be > 1");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return invalid("sigma", "must lie in (0, 1)");
        }
        if self.k < 2 {
            return invalid("k", "must be >= 2");
        }
        if self.m == 0 {
            return Err(Error::UndefinedSet { m: 0 });
        }
        if self.m as u64 > (self.k as u64).pow(3) {
            return invalid("m", "must be <= k^3");
        }
        if self.q <= 1.0 {
            return invalid("q", "must be > 1");
        }
        if self.p < 1.0 {
            return invalid("p", "must be >= 1");
        }
        if !(self.epsilon > 0.0 && self.beta > self.epsilon) {
            return invalid("beta", "need beta > epsilon > 0");
        }
        if self.big_m <= 0.0 {
            return invalid("M", "must be > 0");
        }
        Ok(())
    }

    /// Variant-specific invariants on top of [`ScalingParams::validate`].
    pub fn validate_for(&self, variant: Variant) -> Result<()> {
        self.validate()?;
        match variant {
            Variant::SinglePoint3D => Ok(()),
            Variant::Cantor3D => {
                let expect = 1.0 / (self.k as f64 * self.k as f64);
                if (self.sigma - expect).abs() > 1e-12 * expect {
                    return Err(Error::InvalidParam {
                        name: "sigma",
                        reason: format!("Cantor variant requires sigma = k^-2 = {expect}"),
                    });
                }
                Ok(())
            }
            Variant::Axisymmetric => {
                if self.sigma >= 0.25 {
                    return Err(Error::InvalidParam { name: "sigma", reason: "axisymmetric variant requires sigma < 1/4".into() });
                }
                Ok(())
            }
        }
    }
}

/// `sum_{j=1..n} sigma^j`, by direct summation.
pub fn sigma_partial(params: &ScalingParams, n: u32) -> f64 {
    geometric_partial(params.sigma, n)
}

/// `T = sigma / (1 - sigma)`.
pub fn total_time(params: &ScalingParams) -> f64 {
    params.sigma / (1.0 - params.sigma)
}

/// `sum_{j=1..n} sigma^(j/2)`, by direct summation.
pub fn rho_partial(params: &ScalingParams, n: u32) -> f64 {
    geometric_partial(params.sqrt_sigma(), n)
}

/// `sqrt(sigma) / (1 - sqrt(sigma))`, the radius of the singular circle.
pub fn rho_infty(params: &ScalingParams) -> f64 {
    let s = params.sqrt_sigma();
    s / (1.0 - s)
}

fn geometric_partial(ratio: f64, n: u32) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..n {
        term *= ratio;
        sum += term;
    }
    sum
}

/// Time partition `sigma_0 = 0 < sigma_1 < ... -> T` with `I_N = [sigma_{N-1}, sigma_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    sigma: f64,
    partials: Vec<f64>,
    total: f64,
}

impl TimePartition {
    /// Tabulates `sigma_0..=sigma_levels` by cumulative summation.
    pub fn new(sigma: f64, levels: u32) -> Self {
        let mut partials = Vec::with_capacity(levels as usize + 1);
        partials.push(0.0);
        let mut term = 1.0;
        let mut sum = 0.0;
        for _ in 0..levels {
            term *= sigma;
            sum += term;
            partials.push(sum);
        }
        TimePartition { sigma, partials, total: sigma / (1.0 - sigma) }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of tabulated levels.
    pub fn levels(&self) -> u32 {
        (self.partials.len() - 1) as u32
    }

    /// `sigma_n`. Levels beyond the table fall back to the closed form.
    pub fn partial(&self, n: u32) -> f64 {
        match self.partials.get(n as usize) {
            Some(v) => *v,
            None => self.total * (1.0 - self.sigma.powi(n as i32)),
        }
    }

    /// `T`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// `I_n = [sigma_{n-1}, sigma_n]`, `n >= 1`.
    pub fn interval(&self, n: u32) -> (f64, f64) {
        assert!(n >= 1, "intervals are indexed from 1");
        (self.partial(n - 1), self.partial(n))
    }

    /// Largest deviation between the tabulated sums and `T (1 - sigma^n)`.
    pub fn closed_form_deviation(&self) -> f64 {
        self.partials
            .iter()
            .enumerate()
            .map(|(n, v)| (v - self.total * (1.0 - self.sigma.powi(n as i32))).abs())
            .fold(0.0, f64::max)
    }
}

/// Radial partition `rho_N = sum_{j<=N} sigma^(j/2)` with limit `rho_infty`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPartition {
    partials: Vec<f64>,
    ratio: f64,
    infty: f64,
}

impl RadialPartition {
    pub fn new(sigma: f64, levels: u32) -> Self {
        let ratio = sigma.sqrt();
        let mut partials = Vec::with_capacity(levels as usize + 1);
        partials.push(0.0);
        let mut term = 1.0;
        let mut sum = 0.0;
        for _ in 0..levels {
            term *= ratio;
            sum += term;
            partials.push(sum);
        }
        RadialPartition { partials, ratio, infty: ratio / (1.0 - ratio) }
    }

    /// `rho_n`. Levels beyond the table fall back to the closed form.
    pub fn partial(&self, n: u32) -> f64 {
        match self.partials.get(n as usize) {
            Some(v) => *v,
            None => self.infty * (1.0 - self.ratio.powi(n as i32)),
        }
    }

    pub fn infty(&self) -> f64 {
        self.infty
    }
}

/// Comparison used by a regime inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
}

impl Relation {
    fn holds(self, lhs: f64, threshold: f64) -> bool {
        match self {
            Relation::Less => lhs < threshold,
            Relation::LessEq => lhs <= threshold,
            Relation::Greater => lhs > threshold,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Less => "<",
            Relation::LessEq => "<=",
            Relation::Greater => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRecord {
    pub name: String,
    pub expression: String,
    pub relation: Relation,
    pub lhs: f64,
    pub threshold: f64,
    pub satisfied: bool,
    /// Signed distance to the threshold; positive when satisfied.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub records: Vec<RegimeRecord>,
}

impl RegimeReport {
    pub fn get(&self, name: &str) -> Option<&RegimeRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn satisfied(&self, name: &str) -> bool {
        self.get(name).is_some_and(|r| r.satisfied)
    }

    /// Names of inequalities that must hold for a construction variant.
    pub fn required_for(variant: Variant) -> &'static [&'static str] {
        match variant {
            Variant::SinglePoint3D => &["energy"],
            Variant::Cantor3D => &["energy", "weak_solution", "cantor_blowup"],
            Variant::Axisymmetric => &["axisymmetric_sigma", "lq_axisymmetric", "q_above_six"],
        }
    }

    /// Required inequalities that fail for `variant`.
    pub fn failures_for(&self, variant: Variant) -> Vec<&RegimeRecord> {
        Self::required_for(variant)
            .iter()
            .filter_map(|n| self.get(n))
            .filter(|r| !r.satisfied)
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<26} {:<28} {:>14} {:>3} {:>12} {:>12}  ok\n", "name", "expression", "lhs", "rel", "threshold", "margin");
        for r in &self.records {
            out.push_str(&format!(
                "{:<26} {:<28} {:>14.6e} {:>3} {:>12.6} {:>12.4e}  {}\n",
                r.name,
                r.expression,
                r.lhs,
                r.relation.to_string(),
                r.threshold,
                r.margin,
                if r.satisfied { "yes" } else { "NO" }
            ));
        }
        out
    }
}

/// Similarity (= Hausdorff) dimension `log m / log k` of `C_{k,m}`.
pub fn hausdorff_dimension(k: u32, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::UndefinedSet { m });
    }
    if k < 2 {
        return Err(Error::InvalidParam { name: "k", reason: "must be >= 2".into() });
    }
    if m as u64 > (k as u64).pow(3) {
        return Err(Error::InvalidParam { name: "m", reason: "must be <= k^3".into() });
    }
    Ok((m as f64).ln() / (k as f64).ln())
}

/// Evaluates every parameter-regime inequality of the constructions.
pub fn check_regime(params: &ScalingParams) -> Result<RegimeReport> {
    params.validate()?;
    let ScalingParams { lambda: l, sigma: s, k, m, q, p, beta, epsilon, .. } = *params;
    let dim = hausdorff_dimension(k, m)?;
    let rows: Vec<(&str, &str, Relation, f64, f64)> = vec![
        ("energy", "lambda sigma^(3/4)", Relation::Less, l * s.powf(0.75), 1.0),
        ("forcing_lp_3d", "lambda^p sigma^(5/2-p)", Relation::Less, l.powf(p) * s.powf(2.5 - p), 1.0),
        ("g_holder", "lambda sigma^(1/4-(beta-eps))", Relation::LessEq, l * s.powf(0.25 - (beta - epsilon)), 1.0),
        ("weak_solution", "lambda sigma", Relation::Less, l * s, 1.0),
        ("lq_3d", "lambda^q sigma^(3/2)", Relation::Less, l.powf(q) * s.powf(1.5), 1.0),
        ("lq_axisymmetric", "lambda^q sigma", Relation::Less, l.powf(q) * s, 1.0),
        ("forcing_lp_axisymmetric", "lambda^p sigma^(2-p)", Relation::Less, l.powf(p) * s.powf(2.0 - p), 1.0),
        ("p_threshold", "p vs 2q/(1+q)", Relation::LessEq, p, 2.0 * q / (1.0 + q)),
        ("cantor_blowup", "lambda vs m", Relation::Greater, l, m as f64),
        ("axisymmetric_sigma", "sigma vs 1/4", Relation::Less, s, 0.25),
        ("q_above_six", "q vs 6", Relation::Greater, q, 6.0),
        ("cantor_dimension", "log m / log k vs 3/q", Relation::Less, dim, 3.0 / q),
    ];
    let records = rows
        .into_iter()
        .map(|(name, expression, relation, lhs, threshold)| {
            let margin = match relation {
                Relation::Greater => lhs - threshold,
                _ => threshold - lhs,
            };
            RegimeRecord {
                name: name.to_string(),
                expression: expression.to_string(),
                relation,
                lhs,
                threshold,
                satisfied: relation.holds(lhs, threshold),
                margin,
            }
        })
        .collect();
    Ok(RegimeReport { records })
}

/// Inequalities a suggested Cantor parameter set must satisfy.
const SUGGEST_REQUIRED: [&str; 5] = ["energy", "weak_solution", "cantor_blowup", "lq_3d", "cantor_dimension"];

/// Whether `(k, m)` with `sigma = k^-2` admits some `lambda` meeting every
/// inequality in the Cantor regime for exponent `q`. Returns that `lambda`.
pub fn admissible_lambda(k: u32, m: u32, q: f64) -> Option<f64> {
    let kf = k as f64;
    // lambda < k^(3/q) from lambda^q sigma^(3/2) < 1; lambda < k^(3/2) from energy.
    let upper = kf.powf(3.0 / q).min(kf.powf(1.5));
    let lower = (m as f64).max(1.0);
    if upper <= lower {
        return None;
    }
    let lambda = (lower * upper).sqrt();
    let params = ScalingParams { q, ..ScalingParams::cantor(lambda, k, m) };
    let params = ScalingParams { p: params.p.min(2.0 * q / (1.0 + q)).max(1.0), ..params };
    let report = check_regime(&params).ok()?;
    SUGGEST_REQUIRED.iter().all(|n| report.satisfied(n)).then_some(lambda)
}

/// Searches `k = 2..=64`, then `m = 1..=k^3`, for a Cantor parameter set whose
/// dimension is within 0.05 of `target_dim` and which satisfies the regime for `q`.
pub fn suggest_params(target_dim: f64, q: f64) -> Result<ScalingParams> {
    const TOLERANCE: f64 = 0.05;
    const MAX_K: u32 = 64;
    if !target_dim.is_finite() || target_dim <= 0.0 {
        return Err(Error::InvalidParam { name: "target_dim", reason: "must be positive".into() });
    }
    if !(q > 1.0) {
        return Err(Error::InvalidParam { name: "q", reason: "must be > 1".into() });
    }
    if target_dim >= 3.0 / q {
        return Err(Error::Infeasible {
            bound: "dim < 3/q",
            detail: format!("target {target_dim} >= 3/q = {}", 3.0 / q),
        });
    }
    for k in 2..=MAX_K {
        let ln_k = (k as f64).ln();
        // Only m with |log m / log k - target| <= tol can qualify.
        let m_lo = ((target_dim - TOLERANCE) * ln_k).exp().floor().max(1.0) as u32;
        let m_hi = (((target_dim + TOLERANCE) * ln_k).exp().ceil() as u64).min((k as u64).pow(3)) as u32;
        for m in m_lo..=m_hi {
            let dim = (m as f64).ln() / ln_k;
            if (dim - target_dim).abs() > TOLERANCE {
                continue;
            }
            if let Some(lambda) = admissible_lambda(k, m, q) {
                let base = ScalingParams { q, ..ScalingParams::cantor(lambda, k, m) };
                return Ok(ScalingParams { p: base.p.min(2.0 * q / (1.0 + q)).max(1.0), ..base });
            }
        }
    }
    Err(Error::Infeasible {
        bound: "search range k <= 64",
        detail: format!("no (k, m) within {TOLERANCE} of dimension {target_dim} admits lambda"),
    })
}
