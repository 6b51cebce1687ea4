use serde::Serialize;

use super::{log_slope, Record, SuiteReport};
use crate::error::{Error, Result};
use crate::field::{BlowupWitness, FieldSpec};
use crate::params::Variant;

/// Relative slack for witness values that must reach their bound.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub variant: Variant,
    pub witnesses: Vec<BlowupWitness>,
    pub slope: f64,
    /// `log lambda`, or `log(lambda / m)` as a lower bound for the Cantor set.
    pub theoretical_slope: f64,
    /// Largest `|value / lambda^N - 1|` for the exact variants.
    pub max_relative_error: f64,
    /// Whether every value reaches its bound.
    pub bounds_hold: bool,
    /// Whether the bounds grow, i.e. blow-up is actually certified.
    pub certified: bool,
    pub pass: bool,
}

/// Least-squares slope of `log z(sigma_N, x_N)` over `N` in `levels`.
///
/// Point and ring: values equal `lambda^N` (relative 1e-10) and the slope is
/// `log lambda` within 1e-6. Cantor: values are at least `(lambda/m)^N`, and
/// blow-up is certified only when `lambda > m`.
pub fn blowup_rate_fit(field: &FieldSpec, levels: std::ops::RangeInclusive<u32>) -> Result<BlowupReport> {
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo == 0 || hi < lo + 1 {
        return Err(Error::InvalidParam { name: "levels", reason: "need at least two levels >= 1".into() });
    }
    let witnesses: Vec<BlowupWitness> = field.blowup_sequence(hi)?.into_iter().filter(|w| w.level >= lo).collect();
    let ns: Vec<u32> = witnesses.iter().map(|w| w.level).collect();
    let slope = log_slope(&ns, &witnesses.iter().map(|w| w.value).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    let theoretical_slope = field.level_gain().ln();
    let max_relative_error = witnesses.iter().map(|w| (w.value / w.bound - 1.0).abs()).fold(0.0, f64::max);
    let (bounds_hold, certified, pass) = match field.variant() {
        Variant::Cantor3D => {
            let hold = witnesses.iter().all(|w| w.value >= w.bound * (1.0 - ROUNDING));
            let certified = field.level_gain() > 1.0;
            let ok = hold && slope >= theoretical_slope - 1e-6;
            (hold, certified, ok && certified)
        }
        _ => {
            let hold = max_relative_error <= 1e-10;
            let certified = field.params().lambda > 1.0;
            (hold, certified, hold && (slope - theoretical_slope).abs() <= 1e-6 && certified)
        }
    };
    Ok(BlowupReport { variant: field.variant(), witnesses, slope, theoretical_slope, max_relative_error, bounds_hold, certified, pass })
}

impl BlowupReport {
    pub fn to_suite(&self) -> SuiteReport {
        let exact = self.variant != Variant::Cantor3D;
        let mut records: Vec<Record> = self
            .witnesses
            .iter()
            .map(|w| {
                let ok = if exact { (w.value / w.bound - 1.0).abs() <= 1e-10 } else { w.value >= w.bound * (1.0 - ROUNDING) };
                Record::new("witness_value", Some(w.level), w.value, w.bound, ok)
            })
            .collect();
        records.push(Record::new("blowup_slope", None, self.slope, self.theoretical_slope, self.pass));
        let notes = if self.certified { vec![] } else { vec!["bounds do not grow; blow-up not certified".to_string()] };
        SuiteReport::new("blowup", records, notes)
    }
}
