use rayon::prelude::*;
use serde::Serialize;

use super::{Record, SuiteReport};
use crate::error::{Error, Result};
use crate::fractal::Point3;
use crate::lift::{DivergenceMode, LiftedField};
use crate::quadrature::halton;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergencePoint {
    pub t: f64,
    pub x: Point3,
    pub level: u32,
    /// Discrete divergence at `h, h/2, h/4`.
    pub values: [f64; 3],
    pub analytic: f64,
    /// `log2(|div(h/2)| / |div(h/4)|)`, `None` below the noise floor.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// Accepted points: those whose divergence clears the noise floor.
    pub points: Vec<DivergencePoint>,
    /// Candidates where the field is numerically zero at the step sizes used.
    pub rejected: usize,
    /// Order of the largest divergence over all points.
    pub aggregate_order: f64,
    pub min_order: f64,
    pub analytic_zero: bool,
    pub pass: bool,
}

/// Central-difference divergence of the lifted field at `count` Halton
/// points inside the supports of levels `1..=levels`, with steps
/// `h0 s_N, h0 s_N / 2, h0 s_N / 4` where `s_N` is the level scale.
/// Candidates whose divergence stays below the quadrature noise of `z3`
/// (the flat fringe of the bump) are skipped and counted; at most
/// `20 count` candidates are drawn.
pub fn divergence_study(lift: &LiftedField, count: usize, levels: u32, h0: f64) -> Result<DivergenceReport> {
    if count == 0 || levels == 0 || !(h0 > 0.0) {
        return Err(Error::InvalidParam { name: "divergence_study", reason: "need points, levels and h0 > 0".into() });
    }
    let mut points = Vec::with_capacity(count);
    let mut rejected = 0;
    let mut next = 1u64;
    while points.len() < count && (next as usize) <= 20 * count {
        let batch = (count - points.len()) as u64;
        let found: Vec<DivergencePoint> = (next..next + batch).into_par_iter().map(|i| probe(lift, i, levels, h0)).collect::<Result<_>>()?;
        next += batch;
        for p in found {
            if p.order.is_some() {
                points.push(p);
            } else {
                rejected += 1;
            }
        }
    }
    let max_at = |k: usize| points.iter().map(|p| p.values[k].abs()).fold(0.0, f64::max);
    let aggregate_order = (max_at(1) / max_at(2)).log2();
    let min_order = points.iter().filter_map(|p| p.order).fold(f64::INFINITY, f64::min);
    let analytic_zero = points.iter().all(|p| p.analytic == 0.0);
    let pass = points.len() == count && analytic_zero && aggregate_order >= 1.8 && min_order >= 1.8;
    Ok(DivergenceReport { points, rejected, aggregate_order, min_order, analytic_zero, pass })
}

fn probe(lift: &LiftedField, i: u64, levels: u32, h0: f64) -> Result<DivergencePoint> {
    let field = lift.field();
    let sigma = field.params().sigma;
    let level = 1 + ((halton(i, 2) * levels as f64) as u32).min(levels - 1);
    let tau = sigma * (0.02 + 0.96 * halton(i, 3));
    let t = field.physical_time(level, tau);
    let bx = field.support_box(level);
    let (r_lo, r_hi) = (bx.intervals[0].0.max(0.0), bx.intervals[0].1);
    let (y_lo, y_hi) = bx.intervals[1];
    let rho = r_lo + (r_hi - r_lo) * (0.02 + 0.96 * halton(i, 5));
    let y = y_lo + (y_hi - y_lo) * (0.02 + 0.96 * halton(i, 7));
    let angle = 2.0 * std::f64::consts::PI * halton(i, 11);
    let x = [rho * angle.cos(), rho * angle.sin(), y];
    let h = h0 * field.level_scale(level);
    let mut values = [0.0; 3];
    for (k, v) in values.iter_mut().enumerate() {
        *v = lift.divergence(t, x, DivergenceMode::FiniteDifference, h / (1 << k) as f64)?;
    }
    let analytic = lift.divergence(t, x, DivergenceMode::Analytic, h)?;
    // Quadrature noise in z3 divided by the step.
    let floor = 1e3 * lift.abs_tol() * field.level_gain().powi(level as i32 - 1) / (h / 4.0);
    let order = (values[1].abs() > floor && values[2].abs() > floor).then(|| (values[1] / values[2]).abs().log2());
    Ok(DivergencePoint { t, x, level, values, analytic, order })
}

impl DivergenceReport {
    pub fn to_suite(&self) -> SuiteReport {
        let records = vec![
            Record::new("divergence_aggregate_order", None, self.aggregate_order, 2.0, self.aggregate_order >= 1.8),
            Record::new("divergence_min_point_order", None, self.min_order, 2.0, self.min_order >= 1.8),
            Record::new("analytic_divergence_zero", None, self.points.iter().map(|p| p.analytic.abs()).fold(0.0, f64::max), 0.0, self.analytic_zero),
        ];
        SuiteReport::new("divergence", records, vec![format!("{} points, {} flat candidates skipped", self.points.len(), self.rejected)])
    }
}
