//! Empirical Wasserstein distances, grid errors and moment summaries.

use crate::error::{Error, Result};
use crate::numeric::trapezoid_nd;
use crate::param::{dot, ParamVector};
use crate::rng::RandomSource;
use alloc::vec;
use alloc::vec::Vec;

/// Values on a rectangular grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    /// Node coordinates per axis.
    pub axes: Vec<Vec<f64>>,
    /// Values at the nodes.
    pub values: Vec<f64>,
}

impl GridFunction {
    /// Builds a grid function, checking the value count.
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let n: usize = axes.iter().map(Vec::len).product();
        if n != values.len() {
            return Err(Error::DimensionMismatch { expected: n, got: values.len() });
        }
        Ok(GridFunction { axes, values })
    }

    /// Evaluates `f` at every node.
    pub fn from_fn(axes: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Self {
        let points = grid_points(&axes);
        let values = points.iter().map(|p| f(p)).collect();
        GridFunction { axes, values }
    }

    /// Node coordinates in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        grid_points(&self.axes)
    }

    /// Trapezoid integral.
    pub fn integral(&self) -> f64 {
        trapezoid_nd(&self.axes, &self.values)
    }

    /// Same grid, values mapped by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { axes: self.axes.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    /// Index of the smallest value.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Smallest value.
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// All nodes of a tensor grid in row-major order.
pub fn grid_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    let mut idx = vec![0usize; axes.len()];
    loop {
        out.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
        if !crate::numeric::increment(&mut idx, axes) {
            break;
        }
    }
    out
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("sample cloud"));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Resamples a sorted sample to `n` evenly spaced quantiles.
fn quantiles(sorted: &[f64], n: usize) -> Vec<f64> {
    let m = sorted.len();
    (0..n).map(|i| sorted[(((2 * i + 1) * m) / (2 * n)).min(m - 1)]).collect()
}

/// Exact `W2` between two 1-D empirical measures via the sorted coupling.
///
/// With unequal sizes the larger sample is reduced to the smaller size by
/// quantile resampling.
pub fn w2_1d_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sample cloud"));
    }
    let (mut sa, mut sb) = (sorted(a)?, sorted(b)?);
    if sa.len() > sb.len() {
        sa = quantiles(&sa, sb.len());
    } else if sb.len() > sa.len() {
        sb = quantiles(&sb, sa.len());
    }
    let s: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(s / sa.len() as f64))
}

/// Default number of projections for [`w2_sliced`].
pub const DEFAULT_PROJECTIONS: usize = 64;

/// Sliced `W2`: root mean of squared 1-D distances over random directions.
pub fn w2_sliced(a: &[ParamVector], b: &[ParamVector], n_proj: usize, rng: &mut RandomSource) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sample cloud"));
    }
    let n = a[0].dim();
    if n < 2 {
        return Err(Error::invalid("dim", "sliced distance needs N >= 2; use w2_1d_exact"));
    }
    if a.iter().chain(b).any(|p| p.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: 0 });
    }
    if n_proj == 0 {
        return Err(Error::invalid("n_proj", "must be at least 1"));
    }
    let mut total = 0.0;
    for _ in 0..n_proj {
        let mut u = rng.normal_vec(n);
        let len = u.norm();
        u = u.scale(1.0 / len);
        let pa: Vec<f64> = a.iter().map(|p| dot(p, &u)).collect();
        let pb: Vec<f64> = b.iter().map(|p| dot(p, &u)).collect();
        let w = w2_1d_exact(&pa, &pb)?;
        total += w * w;
    }
    Ok(libm::sqrt(total / n_proj as f64))
}

/// `W2` between `N(m1, s1^2)` and `N(m2, s2^2)`.
pub fn w2_gaussian_1d(m1: f64, s1: f64, m2: f64, s2: f64) -> Result<f64> {
    if s1 < 0.0 || s2 < 0.0 {
        return Err(Error::invalid("s", "standard deviations must be nonnegative"));
    }
    Ok(libm::sqrt((m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2)))
}

/// Trapezoid integral of `|f - g|` over the common grid.
pub fn l1_grid_error(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if f.axes != g.axes {
        return Err(Error::GridMismatch("axes differ"));
    }
    if f.values.len() != g.values.len() {
        return Err(Error::GridMismatch("value counts differ"));
    }
    let diff: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).collect();
    Ok(trapezoid_nd(&f.axes, &diff))
}

/// Unbiased sample moments with standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    /// Sample size.
    pub n: usize,
    /// Sample mean.
    pub mean: Vec<f64>,
    /// Unbiased covariance, row-major `N x N`.
    pub covariance: Vec<f64>,
    /// Central fourth moment per coordinate.
    pub fourth_central: Vec<f64>,
    /// Standard error of each mean coordinate.
    pub mean_se: Vec<f64>,
    /// Standard error of each variance.
    pub variance_se: Vec<f64>,
}

impl MomentReport {
    /// Variance of coordinate `i`.
    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[i * self.mean.len() + i]
    }
}

/// Sample moments of a cloud with at least two points.
pub fn moment_report(cloud: &[ParamVector]) -> Result<MomentReport> {
    if cloud.len() < 2 {
        return Err(Error::precondition("moment report needs at least two points"));
    }
    let n = cloud[0].dim();
    let count = cloud.len() as f64;
    let mut mean = vec![0.0; n];
    for p in cloud {
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= count;
    }
    let mut cov = vec![0.0; n * n];
    let mut m4 = vec![0.0; n];
    for p in cloud {
        for i in 0..n {
            let di = p[i] - mean[i];
            m4[i] += di * di * di * di;
            for j in 0..n {
                cov[i * n + j] += di * (p[j] - mean[j]);
            }
        }
    }
    for v in m4.iter_mut() {
        *v /= count;
    }
    for v in cov.iter_mut() {
        *v /= count - 1.0;
    }
    let mean_se = (0..n).map(|i| libm::sqrt(cov[i * n + i] / count)).collect();
    let variance_se = (0..n)
        .map(|i| {
            let v = cov[i * n + i];
            libm::sqrt(((m4[i] - v * v) / count).max(0.0))
        })
        .collect();
    Ok(MomentReport { n: cloud.len(), mean, covariance: cov, fourth_central: m4, mean_se, variance_se })
}

/// Lag-1 autocorrelation of a sequence.
pub fn lag1_autocorrelation(x: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(Error::precondition("autocorrelation needs at least three values"));
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if var == 0.0 {
        return Ok(0.0);
    }
    let cov: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    Ok(cov / var)
}
