use serde::Serialize;

use super::{integrate_level, level_nodes, log_slope, Record, SuiteReport};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::params::Variant;
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingClass {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcingLevel {
    pub level: u32,
    /// `int_{I_N} ||f(t)||_p^p dt`.
    pub value: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForcingReport {
    pub variant: Variant,
    pub p: f64,
    pub levels: Vec<ForcingLevel>,
    /// `lambda^p sigma^(5/2-p)` in three dimensions, `lambda^p sigma^(2-p)` for the ring.
    pub theoretical_ratio: f64,
    /// `exp` of the fitted log-slope over levels `>= 3`.
    pub fitted_ratio: Option<f64>,
    pub expected: ForcingClass,
    pub measured: Option<ForcingClass>,
    pub pass: bool,
}

/// Per-level `L^p` mass of the forcing and its classification. Passing means
/// the measured class equals the predicted one and the fitted ratio is
/// within 5% of the prediction; an expected divergence that is observed passes.
pub fn forcing_integrability(field: &FieldSpec, p: f64, n_max: u32, cfg: &QuadratureConfig) -> Result<ForcingReport> {
    cfg.validate()?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParam { name: "p", reason: "must be finite and >= 1".into() });
    }
    if n_max < 4 {
        return Err(Error::InvalidParam { name: "n_max", reason: "the fit uses levels 3..=n_max, need n_max >= 4".into() });
    }
    let par = field.params();
    let s = par.sigma;
    let theoretical_ratio = match field.variant() {
        Variant::SinglePoint3D => par.lambda.powf(p) * s.powf(2.5 - p),
        Variant::Cantor3D => par.m as f64 * field.level_gain().powf(p) * s.powf(2.5 - p),
        Variant::Axisymmetric => par.lambda.powf(p) * s.powf(2.0 - p),
    };
    let keep = 1.0 - field.split().fraction();
    let mut levels: Vec<ForcingLevel> = Vec::new();
    for level in 1..=n_max {
        let nodes = level_nodes(field, level, cfg);
        let value = integrate_level(field, level, &nodes, cfg, |_, _, smp| (keep * smp.heat_residual()).abs().powf(p))?;
        let ratio = levels.last().map(|l| value / l.value);
        levels.push(ForcingLevel { level, value, ratio });
    }
    let tail: Vec<&ForcingLevel> = levels.iter().filter(|l| l.level >= 3).collect();
    let fitted_ratio = log_slope(&tail.iter().map(|l| l.level).collect::<Vec<_>>(), &tail.iter().map(|l| l.value).collect::<Vec<_>>()).map(f64::exp);
    let class = |r: f64| if r < 1.0 { ForcingClass::Convergent } else { ForcingClass::Divergent };
    let expected = class(theoretical_ratio);
    let measured = fitted_ratio.map(class);
    let pass = measured == Some(expected) && fitted_ratio.is_some_and(|r| (r / theoretical_ratio - 1.0).abs() <= 0.05);
    Ok(ForcingReport { variant: field.variant(), p, levels, theoretical_ratio, fitted_ratio, expected, measured, pass })
}

impl ForcingReport {
    pub fn to_suite(&self) -> SuiteReport {
        let mut records: Vec<Record> = self.levels.iter().filter_map(|l| l.ratio.map(|r| Record::new("forcing_lp_ratio", Some(l.level), r, self.theoretical_ratio, true))).collect();
        records.push(Record::new("forcing_lp_fitted_ratio", None, self.fitted_ratio.unwrap_or(f64::NAN), self.theoretical_ratio, self.pass));
        let label = match self.expected {
            ForcingClass::Convergent => "expected-convergent",
            ForcingClass::Divergent => "expected-divergent",
        };
        SuiteReport::new("forcing", records, vec![format!("p = {}: {label}", self.p)])
    }
}
