//! The generalised Cantor set `C_{k,m}`: iterated function system, generation
//! sets `A_N`, and a box-counting dimension estimator.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Default cap on the number of points a generation may hold.
pub const DEFAULT_POINT_CAP: usize = 1_000_000;

/// Choice of `m` sub-cubes out of the `k^3` cells of the unit cube.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CantorSpec {
    k: u32,
    cells: Vec<[u32; 3]>,
}

impl CantorSpec {
    pub fn new(k: u32, cells: Vec<[u32; 3]>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParam { name: "k", reason: "must be >= 2".into() });
        }
        if cells.is_empty() {
            return Err(Error::UndefinedSet { m: 0 });
        }
        if let Some(c) = cells.iter().find(|c| c.iter().any(|&v| v >= k)) {
            return Err(Error::InvalidParam { name: "cells", reason: format!("cell {c:?} outside {{0..{}}}^3", k - 1) });
        }
        let distinct: HashSet<_> = cells.iter().collect();
        if distinct.len() != cells.len() {
            return Err(Error::InvalidParam { name: "cells", reason: "cells must be pairwise distinct".into() });
        }
        Ok(CantorSpec { k, cells })
    }

    /// The eight corner cells `{0, k-1}^3`; for `k = 5` this is the
    /// `k = 5, m = 8` pattern of the classical illustration.
    pub fn corners(k: u32) -> Result<Self> {
        let hi = k.saturating_sub(1);
        let mut cells = Vec::with_capacity(8);
        for a in [0, hi] {
            for b in [0, hi] {
                for c in [0, hi] {
                    cells.push([a, b, c]);
                }
            }
        }
        Self::new(k, cells)
    }

    /// Parses `"a,b,c; a,b,c; ..."`.
    pub fn parse_cells(k: u32, text: &str) -> Result<Self> {
        let mut cells = Vec::new();
        for chunk in text.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let parts: Vec<_> = chunk.split(',').map(str::trim).collect();
            let bad = || Error::InvalidParam { name: "cells", reason: format!("cannot parse cell `{chunk}`") };
            if parts.len() != 3 {
                return Err(bad());
            }
            let mut c = [0u32; 3];
            for (slot, p) in c.iter_mut().zip(&parts) {
                *slot = p.parse().map_err(|_| bad())?;
            }
            cells.push(c);
        }
        Self::new(k, cells)
    }

    pub fn cells_string(&self) -> String {
        self.cells.iter().map(|c| format!("{},{},{}", c[0], c[1], c[2])).collect::<Vec<_>>().join(";")
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.cells.len() as u32
    }

    pub fn cells(&self) -> &[[u32; 3]] {
        &self.cells
    }

    /// Corner `x_i = cell_i / k` of branch `i` (0-based).
    pub fn generator_point(&self, i: usize) -> Point3 {
        let k = self.k as f64;
        let c = self.cells[i];
        [c[0] as f64 / k, c[1] as f64 / k, c[2] as f64 / k]
    }

    pub fn generator_points(&self) -> Vec<Point3> {
        (0..self.cells.len()).map(|i| self.generator_point(i)).collect()
    }

    /// `beta_i(x) = k (x - x_i)` for the 0-based branch `i`.
    pub fn beta_map(&self, i: usize, x: Point3) -> Point3 {
        let xi = self.generator_point(i);
        let k = self.k as f64;
        [k * (x[0] - xi[0]), k * (x[1] - xi[1]), k * (x[2] - xi[2])]
    }

    /// Inverse branch map `x_i + x / k`.
    pub fn contraction(&self, i: usize, x: Point3) -> Point3 {
        let xi = self.generator_point(i);
        let k = self.k as f64;
        [xi[0] + x[0] / k, xi[1] + x[1] / k, xi[2] + x[2] / k]
    }
}

/// A finite sample of points with the generation depth it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub depth: u32,
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with a comment header naming depth and cell pattern, then `x,y,z` rows.
    pub fn write_csv<W: Write>(&self, spec: &CantorSpec, mut w: W) -> Result<()> {
        writeln!(w, "# depth={} k={} m={} cells={}", self.depth, spec.k(), spec.m(), spec.cells_string())?;
        writeln!(w, "x,y,z")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p[0], p[1], p[2])?;
        }
        Ok(())
    }
}

/// `A_N`: every `x` with `beta_{i_1} o ... o beta_{i_N}(x) = 0`.
///
/// Points are built in integer units of `k^-N` and converted once, so each
/// coordinate carries a single rounding.
pub fn generation(spec: &CantorSpec, n: u32, cap: usize) -> Result<PointCloud> {
    let required = (spec.m() as u128).checked_pow(n).unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::CapExceeded { required, cap });
    }
    let k = spec.k as u128;
    let mut units: Vec<[u128; 3]> = vec![[0; 3]];
    let mut scale: u128 = 1;
    for _ in 0..n {
        let prev = &units;
        units = spec
            .cells
            .par_iter()
            .flat_map_iter(|c| {
                let off = [c[0] as u128 * scale, c[1] as u128 * scale, c[2] as u128 * scale];
                prev.iter().map(move |p| [off[0] + p[0], off[1] + p[1], off[2] + p[2]])
            })
            .collect();
        scale *= k;
    }
    let denom = scale as f64;
    let points = units.into_iter().map(|u| [u[0] as f64 / denom, u[1] as f64 / denom, u[2] as f64 / denom]).collect();
    Ok(PointCloud { depth: n, points })
}

/// Approximation of `C_{k,m}` by the depth-`depth` generation.
///
/// Every point lies within `sqrt(3) k^-depth` of the limit set.
pub fn limit_set_sample(spec: &CantorSpec, depth: u32, cap: usize) -> Result<PointCloud> {
    if depth == 0 {
        return Err(Error::InvalidParam { name: "depth", reason: "must be >= 1".into() });
    }
    generation(spec, depth, cap)
}

/// Applies all `m` contractions to a cloud.
pub fn apply_ifs(spec: &CantorSpec, cloud: &PointCloud) -> PointCloud {
    let points = (0..spec.cells.len()).flat_map(|i| cloud.points.iter().map(move |p| spec.contraction(i, *p))).collect();
    PointCloud { depth: cloud.depth + 1, points }
}

/// Relative slack added before flooring so points on box faces land in the
/// box they open.
const SNAP: f64 = 1e-9;

/// Number of occupied boxes of side `s`, boxes anchored at the origin.
pub fn box_count(cloud: &PointCloud, s: f64) -> usize {
    let inv = 1.0 / s;
    let set: HashSet<[i64; 3]> = cloud
        .points
        .iter()
        .map(|p| [(p[0] * inv + SNAP).floor() as i64, (p[1] * inv + SNAP).floor() as i64, (p[2] * inv + SNAP).floor() as i64])
        .collect();
    set.len()
}

/// Least-squares slope of `log N(s)` against `log(1/s)`.
pub fn box_counting_dimension(cloud: &PointCloud, scales: &[f64]) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    if scales.len() < 3 {
        return Err(Error::InvalidScales(format!("need at least 3 scales, got {}", scales.len())));
    }
    if scales.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
        return Err(Error::InvalidScales("scales must lie in (0, 1)".into()));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidScales("scales must be strictly decreasing".into()));
    }
    let counts: Vec<usize> = scales.iter().map(|&s| box_count(cloud, s)).collect();
    if counts.iter().all(|&c| c == counts[0]) {
        if cloud.len() == 1 {
            return Ok(0.0);
        }
        return Err(Error::FlatCloud { count: counts[0] });
    }
    let xs: Vec<f64> = scales.iter().map(|s| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    Ok(crate::quadrature::fit_slope(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::hausdorff_dimension;

    fn figure() -> CantorSpec {
        CantorSpec::corners(5).unwrap()
    }

    fn close(a: Point3, b: Point3, tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn beta_map_examples() {
        let spec = CantorSpec::new(5, vec![[0, 0, 0], [1, 0, 0]]).unwrap();
        assert_eq!(spec.beta_map(0, [0.0; 3]), [0.0; 3]);
        assert_eq!(spec.beta_map(1, [0.2, 0.0, 0.0]), [0.0; 3]);
        assert!(close(spec.beta_map(1, [0.4, 0.2, 0.0]), [1.0, 1.0, 0.0], 1e-15));
    }

    #[test]
    fn generation_small_cases() {
        let spec = figure();
        assert_eq!(generation(&spec, 0, DEFAULT_POINT_CAP).unwrap().points, vec![[0.0; 3]]);
        let g1 = generation(&spec, 1, DEFAULT_POINT_CAP).unwrap();
        assert_eq!(g1.points, spec.generator_points());
        let g3 = generation(&spec, 3, DEFAULT_POINT_CAP).unwrap();
        assert_eq!(g3.len(), 512);
        assert!(g3.points.iter().all(|p| p.iter().all(|&c| (0.0..1.0).contains(&c))));
    }

    #[test]
    fn generation_points_solve_chain_equations() {
        // Brute-force oracle: every point must hit 0 along some branch chain.
        let spec = CantorSpec::new(3, vec![[0, 0, 0], [2, 1, 0], [1, 2, 2]]).unwrap();
        let g = generation(&spec, 4, DEFAULT_POINT_CAP).unwrap();
        for p in &g.points {
            let mut found = false;
            for code in 0..3usize.pow(4) {
                let mut x = *p;
                let mut c = code;
                for _ in 0..4 {
                    x = spec.beta_map(c % 3, x);
                    c /= 3;
                }
                if close(x, [0.0; 3], 1e-9) {
                    found = true;
                    break;
                }
            }
            assert!(found, "{p:?}");
        }
    }

    #[test]
    fn generation_cap() {
        let spec = figure();
        match generation(&spec, 7, 1_000_000) {
            Err(Error::CapExceeded { required, .. }) => assert_eq!(required, 8u128.pow(7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ifs_invariance_and_recursion() {
        let spec = CantorSpec::new(4, vec![[0, 0, 0], [3, 1, 2], [1, 3, 0]]).unwrap();
        for d in 1..5 {
            let a = limit_set_sample(&spec, d, DEFAULT_POINT_CAP).unwrap();
            let b = limit_set_sample(&spec, d + 1, DEFAULT_POINT_CAP).unwrap();
            let mapped = apply_ifs(&spec, &a);
            assert_eq!(mapped.len(), b.len());
            for (x, y) in mapped.points.iter().zip(&b.points) {
                assert!(close(*x, *y, 1e-12));
            }
        }
    }

    #[test]
    fn points_stay_in_chosen_cells() {
        let spec = figure();
        let g = generation(&spec, 4, DEFAULT_POINT_CAP).unwrap();
        for p in &g.points {
            // At refinement level 1 the point must lie in one of the chosen cells.
            let idx: Vec<u32> = p.iter().map(|c| (c * 5.0 + 1e-9).floor() as u32).collect();
            assert!(spec.cells().iter().any(|c| c[..] == idx[..]));
        }
    }

    #[test]
    fn limit_sample_depth_examples() {
        let spec = figure();
        assert_eq!(limit_set_sample(&spec, 1, DEFAULT_POINT_CAP).unwrap().points, spec.generator_points());
        assert_eq!(limit_set_sample(&spec, 5, DEFAULT_POINT_CAP).unwrap().len(), 32768);
        assert!(limit_set_sample(&spec, 0, DEFAULT_POINT_CAP).is_err());
    }

    #[test]
    fn box_counting_examples() {
        let single = PointCloud { depth: 0, points: vec![[0.3, 0.3, 0.3]] };
        assert_eq!(box_counting_dimension(&single, &[0.5, 0.25, 0.125]).unwrap(), 0.0);

        let n = 16;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    pts.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
                }
            }
        }
        let grid = PointCloud { depth: 0, points: pts };
        let d = box_counting_dimension(&grid, &[0.5, 0.25, 0.125, 0.0625]).unwrap();
        assert!((d - 3.0).abs() < 1e-12);

        let spec = figure();
        let g = limit_set_sample(&spec, 5, DEFAULT_POINT_CAP).unwrap();
        let scales: Vec<f64> = (1..=4).map(|e| 5f64.powi(-e)).collect();
        let d = box_counting_dimension(&g, &scales).unwrap();
        let exact = hausdorff_dimension(5, 8).unwrap();
        assert!((d - exact).abs() <= 0.05 * exact);
    }

    #[test]
    fn box_counting_rejects_bad_input() {
        let two = PointCloud { depth: 0, points: vec![[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]] };
        assert!(matches!(box_counting_dimension(&two, &[0.9, 0.8, 0.7]), Err(Error::FlatCloud { .. })));
        assert!(box_counting_dimension(&two, &[0.5, 0.25]).is_err());
        assert!(box_counting_dimension(&two, &[0.25, 0.5, 0.1]).is_err());
        let empty = PointCloud { depth: 0, points: vec![] };
        assert!(box_counting_dimension(&empty, &[0.5, 0.25, 0.1]).is_err());
    }

    #[test]
    fn cells_parse_and_validate() {
        let s = CantorSpec::parse_cells(5, "0,0,0; 4,4,4").unwrap();
        assert_eq!(s.m(), 2);
        assert_eq!(CantorSpec::parse_cells(5, &s.cells_string()).unwrap(), s);
        assert!(CantorSpec::parse_cells(5, "0,0,0;0,0,0").is_err());
        assert!(CantorSpec::parse_cells(5, "0,0,5").is_err());
        assert!(CantorSpec::parse_cells(5, "0,0").is_err());
    }

    #[test]
    fn csv_layout() {
        let spec = figure();
        let g = generation(&spec, 1, DEFAULT_POINT_CAP).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# depth=1 k=5 m=8"));
        assert_eq!(lines[1], "x,y,z");
        assert_eq!(lines.len(), 2 + 8);
    }
}
