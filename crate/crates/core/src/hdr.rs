//! Highest-density regions of 1-D and 2-D sample clouds.
//!
//! The density is a Gaussian product-kernel KDE with Scott's bandwidth per
//! axis, evaluated on a regular grid by linear binning followed by a
//! separable convolution. Values between grid nodes are obtained by
//! multilinear interpolation, and this interpolated surface is the density
//! used everywhere (threshold, membership, area).
//!
//! The threshold `f_alpha` follows the quantile approach: evaluate the
//! density at every sample, sort in descending order and take the
//! `ceil(coverage * n)`-th value.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::JointSampleMatrix;

pub const DEFAULT_COVERAGE: f64 = 0.95;
pub const DEFAULT_RESOLUTION_1D: usize = 512;
pub const DEFAULT_RESOLUTION_2D: usize = 256;
/// Fewest unflagged samples accepted by [`fit_hdr`].
pub const MIN_SAMPLES: usize = 100;
/// Grid padding beyond the sample range, in bandwidths.
const PADDING_BANDWIDTHS: f64 = 3.0;
/// Kernel truncation radius, in bandwidths.
const KERNEL_RADIUS: f64 = 6.0;

pub fn default_resolution(dimension: usize) -> usize {
    if dimension == 1 {
        DEFAULT_RESOLUTION_1D
    } else {
        DEFAULT_RESOLUTION_2D
    }
}

/// Density values on a regular grid of nodes (axis 0 outermost).
#[derive(Debug, Clone, PartialEq)]
struct DensityGrid {
    lower: Vec<f64>,
    step: Vec<f64>,
    resolution: Vec<usize>,
    values: Vec<f64>,
}

impl DensityGrid {
    fn upper(&self, axis: usize) -> f64 {
        self.lower[axis] + self.step[axis] * (self.resolution[axis] - 1) as f64
    }

    fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.resolution).fold(0, |acc, (i, r)| acc * r + i)
    }

    /// Multilinear interpolation; zero outside the grid.
    fn density_at(&self, x: &[f64]) -> f64 {
        let d = self.resolution.len();
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..d {
            let u = (x[a] - self.lower[a]) / self.step[a];
            let last = (self.resolution[a] - 1) as f64;
            if !(u >= 0.0 && u <= last) {
                return 0.0;
            }
            let i = (u.floor() as usize).min(self.resolution[a] - 2);
            base[a] = i;
            frac[a] = u - i as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = [0usize; 2];
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w > 0.0 {
                total += w * self.values[self.index(&idx[..d])];
            }
        }
        total
    }

    fn cell_volume(&self) -> f64 {
        self.step.iter().product()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Scott's rule: `sd * n^(-1/(d+4))`.
pub fn scott_bandwidth(sd: f64, n: usize, dimension: usize) -> f64 {
    sd * (n as f64).powf(-1.0 / (dimension as f64 + 4.0))
}

fn gaussian_taps(h: f64, step: f64) -> Vec<f64> {
    let radius = ((KERNEL_RADIUS * h) / step).ceil() as usize;
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    (0..=radius)
        .map(|j| {
            let z = j as f64 * step / h;
            norm * (-0.5 * z * z).exp()
        })
        .collect()
}

/// Binned KDE on the grid spanned by `lower`, `step`, `resolution`.
fn binned_kde(
    points: &[Vec<f64>],
    bandwidths: &[f64],
    lower: Vec<f64>,
    step: Vec<f64>,
    resolution: Vec<usize>,
) -> DensityGrid {
    let d = resolution.len();
    let size: usize = resolution.iter().product();
    let mut grid = DensityGrid { lower, step, resolution, values: vec![0.0; size] };
    // Linear binning: each point spreads unit mass over its cell's corners.
    for p in points {
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..d {
            let u = ((p[a] - grid.lower[a]) / grid.step[a]).clamp(0.0, (grid.resolution[a] - 1) as f64);
            let i = (u.floor() as usize).min(grid.resolution[a] - 2);
            base[a] = i;
            frac[a] = u - i as f64;
        }
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = [0usize; 2];
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            let k = grid.index(&idx[..d]);
            grid.values[k] += w;
        }
    }
    // Separable convolution, one axis at a time.
    for (a, &h) in bandwidths.iter().enumerate().take(d) {
        let taps = gaussian_taps(h, grid.step[a]);
        let len = grid.resolution[a];
        let stride: usize = grid.resolution[a + 1..].iter().product();
        let outer: usize = grid.resolution[..a].iter().product();
        let src = grid.values.clone();
        let lines: Vec<(usize, usize)> = (0..outer).flat_map(|o| (0..stride).map(move |s| (o, s))).collect();
        let results: Vec<Vec<f64>> = lines
            .par_iter()
            .map(|&(o, s)| {
                let at = |i: usize| src[(o * len + i) * stride + s];
                (0..len)
                    .map(|i| {
                        let mut acc = taps[0] * at(i);
                        for (j, t) in taps.iter().enumerate().skip(1) {
                            if i >= j {
                                acc += t * at(i - j);
                            }
                            if i + j < len {
                                acc += t * at(i + j);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        for ((o, s), line) in lines.into_iter().zip(results) {
            for (i, v) in line.into_iter().enumerate() {
                grid.values[(o * len + i) * stride + s] = v;
            }
        }
    }
    let n = points.len() as f64;
    for v in &mut grid.values {
        *v /= n;
    }
    grid
}

/// A fitted highest-density region `{x : f(x) >= f_alpha}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrRegion {
    pub columns: Vec<String>,
    pub coverage_target: f64,
    pub f_alpha: f64,
    /// Bandwidth per axis; zero on degenerate axes.
    pub bandwidths: Vec<f64>,
    /// Area (length in 1-D) of the region, zero when degenerate.
    pub area: f64,
    /// Set when some axis had zero variance.
    pub degenerate: bool,
    pub n_samples: usize,
    /// Value of each degenerate axis.
    fixed: Vec<Option<f64>>,
    /// Density over the non-degenerate axes; `None` when every axis is fixed.
    grid: Option<DensityGrid>,
}

impl HdrRegion {
    pub fn dimension(&self) -> usize {
        self.columns.len()
    }

    fn free_coords(&self, point: &[f64]) -> Option<Vec<f64>> {
        let mut free = Vec::with_capacity(point.len());
        for (x, fixed) in point.iter().zip(&self.fixed) {
            match fixed {
                Some(v) if x != v => return None,
                Some(_) => {}
                None => free.push(*x),
            }
        }
        Some(free)
    }

    /// Estimated density at `point`. On a degenerate axis the density is
    /// taken over the remaining axes and is zero off the fixed value.
    pub fn density_at(&self, point: &[f64]) -> f64 {
        match (self.free_coords(point), &self.grid) {
            (None, _) => 0.0,
            (Some(_), None) => f64::INFINITY,
            (Some(free), Some(grid)) => grid.density_at(&free),
        }
    }

    /// Closed membership test `density >= f_alpha`.
    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        if point.len() != self.dimension() {
            return Err(Error::input(format!(
                "point has {} coordinates, region has {}",
                point.len(),
                self.dimension()
            )));
        }
        Ok(self.density_at(point) >= self.f_alpha)
    }

    /// Fraction of `points` inside the region.
    pub fn coverage_fraction(&self, points: &[Vec<f64>]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::input("coverage needs at least one point"));
        }
        let mut inside = 0usize;
        for p in points {
            if self.contains(p)? {
                inside += 1;
            }
        }
        Ok(inside as f64 / points.len() as f64)
    }

    /// Grid bounds per axis (the fixed value twice on degenerate axes).
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut free = 0;
        self.fixed
            .iter()
            .map(|f| match f {
                Some(v) => (*v, *v),
                None => {
                    let g = self.grid.as_ref().expect("free axis has a grid");
                    let b = (g.lower[free], g.upper(free));
                    free += 1;
                    b
                }
            })
            .collect()
    }

    pub fn resolution(&self) -> Vec<usize> {
        let mut free = 0;
        self.fixed
            .iter()
            .map(|f| match f {
                Some(_) => 1,
                None => {
                    let r = self.grid.as_ref().expect("free axis has a grid").resolution[free];
                    free += 1;
                    r
                }
            })
            .collect()
    }

    /// Membership of every grid node (axis 0 outermost). Empty when every
    /// axis is degenerate.
    pub fn mask(&self) -> Vec<bool> {
        match &self.grid {
            Some(g) => g.values.iter().map(|v| *v >= self.f_alpha).collect(),
            None => Vec::new(),
        }
    }

    /// Maximal intervals of a 1-D region, with endpoints refined by linear
    /// interpolation between grid nodes.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        if self.dimension() != 1 {
            return Vec::new();
        }
        let g = match &self.grid {
            None => {
                let v = self.fixed[0].expect("degenerate axis");
                return vec![(v, v)];
            }
            Some(g) => g,
        };
        let f = self.f_alpha;
        let x = |i: usize| g.lower[0] + g.step[0] * i as f64;
        // Position where the density crosses f between nodes i and i+1.
        let cross = |i: usize| {
            let (a, b) = (g.values[i], g.values[i + 1]);
            if a == b {
                x(i)
            } else {
                x(i) + g.step[0] * ((f - a) / (b - a)).clamp(0.0, 1.0)
            }
        };
        let mut out = Vec::new();
        let mut start: Option<f64> = None;
        for i in 0..g.values.len() {
            let inside = g.values[i] >= f;
            match (inside, start) {
                (true, None) => start = Some(if i == 0 { x(0) } else { cross(i - 1) }),
                (false, Some(s)) => {
                    out.push((s, cross(i - 1)));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, x(g.values.len() - 1)));
        }
        out
    }

    pub fn export(&self) -> HdrExport {
        let dimension = self.dimension();
        HdrExport {
            columns: self.columns.clone(),
            dimension,
            coverage_target: self.coverage_target,
            f_alpha: self.f_alpha,
            bandwidths: self.bandwidths.clone(),
            kernel: "gaussian",
            bandwidth_rule: "scott",
            grid_bounds: self.bounds(),
            grid_resolution: self.resolution(),
            area: self.area,
            degenerate: self.degenerate,
            n_samples: self.n_samples,
            intervals: (dimension == 1).then(|| self.intervals()),
            nodes_inside: (dimension == 2).then(|| self.mask().iter().filter(|b| **b).count()),
        }
    }
}

/// JSON form of a region.
#[derive(Debug, Clone, Serialize)]
pub struct HdrExport {
    pub columns: Vec<String>,
    pub dimension: usize,
    pub coverage_target: f64,
    pub f_alpha: f64,
    pub bandwidths: Vec<f64>,
    pub kernel: &'static str,
    pub bandwidth_rule: &'static str,
    pub grid_bounds: Vec<(f64, f64)>,
    pub grid_resolution: Vec<usize>,
    pub area: f64,
    pub degenerate: bool,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<(f64, f64)>>,
    /// 2-D only: grid nodes inside the region. The mask itself goes to CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_inside: Option<usize>,
}

/// Fits the HDR of a 1- or 2-column sample matrix. Flagged rows are ignored.
/// `resolution` is the node count per axis.
pub fn fit_hdr(samples: &JointSampleMatrix, coverage: f64, resolution: usize) -> Result<HdrRegion> {
    let d = samples.width();
    if !(1..=2).contains(&d) {
        return Err(Error::config(format!("HDR supports 1 or 2 columns, got {d}")));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::config(format!("coverage must be in (0,1), got {coverage}")));
    }
    if resolution < 2 {
        return Err(Error::config("grid resolution must be at least 2"));
    }
    let points: Vec<Vec<f64>> =
        samples.rows().filter(|r| r.iter().all(|v| v.is_finite())).map(|r| r.to_vec()).collect();
    let n = points.len();
    if n < MIN_SAMPLES {
        return Err(Error::input(format!("HDR needs at least {MIN_SAMPLES} defined samples, got {n}")));
    }

    let mut fixed = Vec::with_capacity(d);
    let mut sds = Vec::with_capacity(d);
    for a in 0..d {
        let col: Vec<f64> = points.iter().map(|p| p[a]).collect();
        let (_, sd) = mean_sd(&col);
        let constant = col.iter().all(|v| *v == col[0]);
        fixed.push(if constant { Some(col[0]) } else { None });
        sds.push(if constant { 0.0 } else { sd });
    }
    let free: Vec<usize> = (0..d).filter(|&a| fixed[a].is_none()).collect();
    let degenerate = free.len() < d;
    let mut bandwidths = vec![0.0; d];
    for &a in &free {
        bandwidths[a] = scott_bandwidth(sds[a], n, free.len());
    }

    let base = HdrRegion {
        columns: samples.columns().to_vec(),
        coverage_target: coverage,
        f_alpha: 0.0,
        bandwidths: bandwidths.clone(),
        area: 0.0,
        degenerate,
        n_samples: n,
        fixed,
        grid: None,
    };
    if free.is_empty() {
        return Ok(HdrRegion { f_alpha: f64::INFINITY, ..base });
    }

    let reduced: Vec<Vec<f64>> = points.iter().map(|p| free.iter().map(|&a| p[a]).collect()).collect();
    let mut lower = Vec::new();
    let mut step = Vec::new();
    for (i, &a) in free.iter().enumerate() {
        let (lo, hi) =
            reduced.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])));
        let pad = PADDING_BANDWIDTHS * bandwidths[a];
        lower.push(lo - pad);
        step.push((hi - lo + 2.0 * pad) / (resolution - 1) as f64);
    }
    let free_bw: Vec<f64> = free.iter().map(|&a| bandwidths[a]).collect();
    let grid = binned_kde(&reduced, &free_bw, lower, step, vec![resolution; free.len()]);

    let mut densities: Vec<f64> = reduced.par_iter().map(|p| grid.density_at(p)).collect();
    densities.sort_by(|a, b| b.total_cmp(a));
    let rank = ((coverage * n as f64).ceil() as usize).clamp(1, n);
    let f_alpha = densities[rank - 1];

    let area = if degenerate {
        0.0
    } else {
        grid.values.iter().filter(|v| **v >= f_alpha).count() as f64 * grid.cell_volume()
    };
    Ok(HdrRegion { f_alpha, area, grid: Some(grid), ..base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    fn column(name: &str, values: Vec<f64>) -> JointSampleMatrix {
        JointSampleMatrix::from_flat(vec![name.into()], values, None).unwrap()
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn normal_1d_interval() {
        let region = fit_hdr(&column("x", normals(100_000, 1)), 0.95, 512).unwrap();
        let iv = region.intervals();
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 + 1.96).abs() < 0.05, "{iv:?}");
        assert!((iv[0].1 - 1.96).abs() < 0.05, "{iv:?}");
        assert!((region.area - 3.92).abs() < 0.1, "{}", region.area);
        assert!(region.contains(&[0.0]).unwrap());
        assert!(!region.contains(&[10.0]).unwrap());
    }

    #[test]
    fn uniform_1d_length() {
        let mut r = rng(2);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let v: Vec<f64> = (0..100_000).map(|_| u.sample(&mut r)).collect();
        let region = fit_hdr(&column("x", v), 0.95, 512).unwrap();
        assert!((region.area - 0.95).abs() < 0.03, "{}", region.area);
    }

    #[test]
    fn threshold_boundary_is_closed() {
        let region = fit_hdr(&column("x", normals(2_000, 3)), 0.9, 128).unwrap();
        let g = region.grid.as_ref().unwrap();
        // A node whose density is exactly f_alpha.
        let mut exact = region.clone();
        let i = g.values.len() / 3;
        exact.f_alpha = g.values[i];
        let x = g.lower[0] + g.step[0] * i as f64;
        assert_eq!(exact.density_at(&[x]), exact.f_alpha);
        assert!(exact.contains(&[x]).unwrap());
    }

    #[test]
    fn monotone_in_coverage() {
        let s = column("x", normals(20_000, 4));
        let a95 = fit_hdr(&s, 0.95, 512).unwrap().area;
        let a99 = fit_hdr(&s, 0.99, 512).unwrap().area;
        assert!(a99 >= a95);
    }

    #[test]
    fn affine_equivariance_1d() {
        let base = normals(20_000, 5);
        let r0 = fit_hdr(&column("x", base.clone()), 0.95, 512).unwrap();
        let shifted: Vec<f64> = base.iter().map(|v| v + 3.0).collect();
        let r1 = fit_hdr(&column("x", shifted), 0.95, 512).unwrap();
        let scaled: Vec<f64> = base.iter().map(|v| v * 2.5).collect();
        let r2 = fit_hdr(&column("x", scaled), 0.95, 512).unwrap();
        let (i0, i1) = (r0.intervals()[0], r1.intervals()[0]);
        assert!((i1.0 - i0.0 - 3.0).abs() < 1e-6 && (i1.1 - i0.1 - 3.0).abs() < 1e-6);
        assert!((r2.area / r0.area - 2.5).abs() < 1e-6);
    }

    #[test]
    fn degenerate_axis() {
        let region = fit_hdr(&column("x", vec![0.3; 500]), 0.95, 64).unwrap();
        assert!(region.degenerate);
        assert_eq!(region.area, 0.0);
        assert!(region.contains(&[0.3]).unwrap());
        assert!(!region.contains(&[0.31]).unwrap());

        let mut r = rng(6);
        let rows: Vec<Vec<f64>> = (0..500).map(|_| vec![StandardNormal.sample(&mut r), 1.0]).collect();
        let m = JointSampleMatrix::from_rows(vec!["x".into(), "y".into()], &rows, None).unwrap();
        let region = fit_hdr(&m, 0.95, 64).unwrap();
        assert!(region.degenerate && region.area == 0.0);
        assert!(region.contains(&[0.0, 1.0]).unwrap());
        assert!(!region.contains(&[0.0, 1.5]).unwrap());
        assert_eq!(region.mask().len(), 64);
        assert!(region.export().nodes_inside.unwrap() > 0);
    }

    #[test]
    fn argument_errors() {
        let s = column("x", normals(1_000, 7));
        assert!(fit_hdr(&s, 1.5, 64).is_err());
        assert!(fit_hdr(&s, 0.0, 64).is_err());
        assert!(fit_hdr(&column("x", normals(50, 7)), 0.95, 64).is_err());
        let region = fit_hdr(&s, 0.95, 64).unwrap();
        assert!(region.contains(&[0.0, 0.0]).is_err());
        assert!(region.coverage_fraction(&[]).is_err());
    }

    #[test]
    fn coverage_of_extreme_points() {
        let region = fit_hdr(&column("x", normals(10_000, 8)), 0.95, 512).unwrap();
        assert_eq!(region.coverage_fraction(&vec![vec![0.0]; 10]).unwrap(), 1.0);
        assert_eq!(region.coverage_fraction(&vec![vec![10.0]; 10]).unwrap(), 0.0);
        // Points from the defining distribution.
        let fresh: Vec<Vec<f64>> = normals(10_000, 9).into_iter().map(|v| vec![v]).collect();
        let frac = region.coverage_fraction(&fresh).unwrap();
        assert!((frac - 0.95).abs() < 0.02, "{frac}");
    }

    #[test]
    fn binned_density_matches_direct_kde() {
        let pts = normals(3_000, 10);
        let region = fit_hdr(&column("x", pts.clone()), 0.95, 512).unwrap();
        let h = region.bandwidths[0];
        let direct = |x: f64| {
            pts.iter().map(|p| (-0.5 * ((x - p) / h).powi(2)).exp()).sum::<f64>()
                / (pts.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt())
        };
        for x in [-2.0, -0.5, 0.0, 0.7, 1.9] {
            let (a, b) = (region.density_at(&[x]), direct(x));
            assert!((a - b).abs() / b < 0.01, "x={x}: {a} vs {b}");
        }
    }
}
