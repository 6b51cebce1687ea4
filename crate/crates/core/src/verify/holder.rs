use rayon::prelude::*;
use serde::Serialize;

use super::{level_nodes, Record, SuiteReport};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub epsilon: f64,
    /// `1/2 - epsilon`.
    pub exponent: f64,
    pub pairs: usize,
    /// `sup ||g(t) - g(s)||_2 / |t - s|^(1/2 - epsilon)` over the sampled pairs.
    pub sup_quotient: f64,
    pub argmax: Option<(f64, f64)>,
    /// `lambda sigma^(1/4 - (beta - epsilon)) <= 1`.
    pub regime_satisfied: bool,
    pub norm: &'static str,
    pub pass: bool,
}

/// Sampled Hölder quotient of `g` in time. The spatial norm is `L^2` over
/// the first-level support box, standing in for `H^(2 beta)`; the fractional
/// order enters only through the regime inequality.
pub fn holder_quotient_g(field: &FieldSpec, epsilon: f64, sample_times: &[f64], cfg: &QuadratureConfig) -> Result<HolderReport> {
    cfg.validate()?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidParam { name: "epsilon", reason: "must lie in (0, 1/2)".into() });
    }
    let mut times: Vec<f64> = sample_times.to_vec();
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParam { name: "sample_times", reason: "times must be finite and >= 0".into() });
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 2 {
        return Err(Error::Empty("at least two distinct sample times are needed"));
    }
    let exponent = 0.5 - epsilon;
    let p = field.params();
    let regime_satisfied = p.lambda * p.sigma.powf(0.25 - (p.beta - epsilon)) <= 1.0;
    let pairs = times.len() * (times.len() - 1) / 2;
    let norm = "spatial L2 proxy";
    if field.split().fraction() == 0.0 {
        return Ok(HolderReport { epsilon, exponent, pairs, sup_quotient: 0.0, argmax: None, regime_satisfied, norm, pass: true });
    }
    let nodes = level_nodes(field, 1, cfg);
    let values: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| nodes.par_iter().map(|&(x, _)| field.eval_g(t, x)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let (mut sup, mut argmax) = (0.0f64, None);
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            let d2: f64 = nodes.iter().zip(values[i].iter().zip(&values[j])).map(|((_, w), (a, b))| w * (a - b) * (a - b)).sum();
            let q = d2.sqrt() / (times[j] - times[i]).powf(exponent);
            if q > sup {
                sup = q;
                argmax = Some((times[i], times[j]));
            }
        }
    }
    Ok(HolderReport { epsilon, exponent, pairs, sup_quotient: sup, argmax, regime_satisfied, norm, pass: sup.is_finite() })
}

impl HolderReport {
    pub fn to_suite(&self) -> SuiteReport {
        let records = vec![
            Record::new("holder_sup_quotient", None, self.sup_quotient, f64::NAN, self.pass),
            Record::new("holder_regime", None, self.regime_satisfied as u8 as f64, 1.0, true),
        ];
        SuiteReport::new("holder", records, vec![format!("norm: {}; exponent {}", self.norm, self.exponent)])
    }
}
