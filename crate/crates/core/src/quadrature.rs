//! Gauss-Legendre rules: fixed composite rules for tensor quadrature over
//! support boxes and an adaptive Gauss-Kronrod integrator for line integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule: `panels` equal sub-intervals with `order`
/// nodes each.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    panels: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(panels: usize, order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        CompositeRule { panels: panels.max(1), nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.panels * self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let width = (b - a) / self.panels as f64;
        let half = 0.5 * width;
        let mut out = Vec::with_capacity(self.len());
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + half * x, half * w));
            }
        }
        out
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.points(a, b).into_iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Resolution of the tensor rules used by the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Panels per direction of two-dimensional (meridian) rules.
    pub panels: usize,
    /// Panels per direction of three-dimensional rules.
    pub panels_3d: usize,
    /// Extra panels laid over each fine-scale feature of the profile.
    pub feature_panels: usize,
    /// Gauss nodes per spatial panel.
    pub order: usize,
    /// Geometric layers (ratio 1/2) laid toward each end of the support and
    /// of every feature, where the bump's derivatives concentrate.
    pub grading: usize,
    /// Geometric layers for three-dimensional tensor rules.
    pub grading_3d: usize,
    /// Layers of the graded rule used by the weak-form identity, which needs
    /// far more accuracy than the ratio checks.
    pub residual_grading: usize,
    pub time_panels: usize,
    pub time_order: usize,
    /// Absolute tolerance of adaptive line integrals.
    pub abs_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            panels: 24,
            panels_3d: 6,
            feature_panels: 4,
            order: 8,
            grading: 0,
            grading_3d: 0,
            residual_grading: 8,
            time_panels: 4,
            time_order: 8,
            abs_tol: 1e-10,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [("panels", self.panels), ("panels_3d", self.panels_3d), ("order", self.order), ("time_panels", self.time_panels), ("time_order", self.time_order)];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParam { name, reason: "must be at least 1".into() });
            }
        }
        for (name, v) in [("grading", self.grading), ("grading_3d", self.grading_3d), ("residual_grading", self.residual_grading)] {
            if v > 40 {
                return Err(Error::InvalidParam { name, reason: "at most 40 layers".into() });
            }
        }
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(Error::InvalidParam { name: "abs_tol", reason: "must be finite and > 0".into() });
        }
        Ok(())
    }

    /// The rule of the weak-form identity: few uniform panels, with
    /// `residual_grading` layers toward every support and feature end and
    /// toward both ends of the time interval.
    pub fn weak_form(&self) -> QuadratureConfig {
        QuadratureConfig { panels: 8, feature_panels: 2, grading: self.residual_grading, time_panels: 1, ..*self }
    }

    pub fn space_rule(&self) -> CompositeRule {
        CompositeRule::new(self.panels, self.order)
    }

    pub fn time_rule(&self) -> CompositeRule {
        CompositeRule::new(self.time_panels, self.time_order)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below `abs_tol`.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<Integral> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v, e) = gk15(&f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total_err: f64 = segs.iter().map(|s| s.3).sum();
        if total_err <= abs_tol {
            break;
        }
        if segs.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { achieved: total_err, tol: abs_tol });
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in floating point.
            let total_err: f64 = segs.iter().map(|s| s.3).sum();
            return Err(Error::Quadrature { achieved: total_err, tol: abs_tol });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evaluations += 30;
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    // Sum in positional order so the result does not depend on split history.
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value = segs.iter().map(|s| s.2).sum();
    let error = segs.iter().map(|s| s.3).sum();
    Ok(Integral { value, error, evaluations })
}

/// Gauss nodes and weights over the panels `[breaks[i], breaks[i+1]]`.
pub fn piecewise_points(breaks: &[f64], order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut out = Vec::with_capacity(order * breaks.len().saturating_sub(1));
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        out.extend(x.iter().zip(&w).map(|(xi, wi)| (c + h * xi, h * wi)));
    }
    out
}

/// Uniform break points on `[a, b]`.
pub fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

/// Radical inverse of `index` in `base`: one coordinate of a Halton point.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
