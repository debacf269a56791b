//! Kernel density estimation of the stationary density and the normalized
//! importance weights derived from it.
//!
//! The estimator is a Gaussian product-kernel mixture with one bandwidth per
//! axis. Evaluation is exact; for large one-dimensional batches a linearly
//! binned convolution path with the same contract (relative error well below
//! any statistical noise) is selected automatically.

use serde::{Deserialize, Serialize};

use crate::{DpddError, Points, Result};

const SQRT_2PI: f64 = 2.5066282746310002;
/// Densities below this are clamped before weight normalization so degenerate
/// tails cannot underflow the division.
const DENSITY_FLOOR: f64 = 1e-300;
/// Kernel evaluations beyond this many bandwidths are treated as zero in the
/// binned path (exp(-32) ~ 1e-14 relative).
const KERNEL_CUTOFF: f64 = 8.0;
const BINNED_NODES: usize = 8192;
/// Above this many kernel-times-query operations the 1D binned path kicks in.
const BINNED_COST_THRESHOLD: u128 = 200_000_000;

/// Bandwidth selection for [`kde_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Silverman's rule of thumb, per axis.
    Auto,
    /// 5-fold likelihood cross-validation over a multiplier grid around the
    /// Silverman value (deterministic contiguous folds).
    CrossValidated,
    /// Explicit per-axis bandwidths.
    Fixed(Vec<f64>),
}

/// Silverman's rule of thumb: h_i = σ_i (4 / ((d+2) M))^{1/(d+4)}.
pub fn silverman_bandwidth(samples: &Points) -> Result<Vec<f64>> {
    let m = samples.len();
    if m < 2 {
        return Err(DpddError::InvalidInput(
            "bandwidth selection needs at least 2 samples".into(),
        ));
    }
    let d = samples.dim();
    let (_, std) = samples.mean_std()?;
    let factor = (4.0 / ((d as f64 + 2.0) * m as f64)).powf(1.0 / (d as f64 + 4.0));
    let mut h = Vec::with_capacity(d);
    for (axis, s) in std.iter().enumerate() {
        if !(*s > 0.0) {
            return Err(DpddError::Degenerate(format!(
                "axis {axis} has zero variance; bandwidth undefined"
            )));
        }
        h.push(s * factor);
    }
    Ok(h)
}

/// Gaussian-kernel mixture density fitted to a sample set. Immutable after
/// construction; evaluation is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    samples: Points,
    bandwidth: Vec<f64>,
}

/// Fit a Gaussian KDE. `Bandwidth::Auto` resolves via [`silverman_bandwidth`].
pub fn kde_fit(samples: Points, bandwidth: Bandwidth) -> Result<KdeModel> {
    if samples.is_empty() {
        return Err(DpddError::InvalidInput("KDE needs a nonempty sample set".into()));
    }
    let d = samples.dim();
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(&samples)?,
        Bandwidth::CrossValidated => cv_bandwidth(&samples, 5)?,
        Bandwidth::Fixed(h) => {
            if h.len() != d {
                return Err(DpddError::DimensionMismatch {
                    expected: d,
                    got: h.len(),
                });
            }
            if h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(DpddError::InvalidInput(
                    "bandwidths must be strictly positive".into(),
                ));
            }
            h
        }
    };
    Ok(KdeModel {
        samples,
        bandwidth: h,
    })
}

impl KdeModel {
    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn samples(&self) -> &Points {
        &self.samples
    }

    fn normalization(&self) -> f64 {
        let d = self.dim();
        let hprod: f64 = self.bandwidth.iter().product();
        1.0 / (self.samples.len() as f64 * hprod * SQRT_2PI.powi(d as i32))
    }

    /// Exact mixture density at one point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(DpddError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for row in self.samples.rows() {
            let mut d2 = 0.0;
            for (a, v) in row.iter().enumerate() {
                let z = (x[a] - v) / self.bandwidth[a];
                d2 += z * z;
            }
            acc += (-0.5 * d2).exp();
        }
        Ok(acc * self.normalization())
    }

    /// Density at many points. One-dimensional batches whose exact cost would
    /// be large are evaluated through the binned path.
    pub fn evaluate_many(&self, points: &Points) -> Result<Vec<f64>> {
        if points.dim() != self.dim() {
            return Err(DpddError::DimensionMismatch {
                expected: self.dim(),
                got: points.dim(),
            });
        }
        let cost = self.samples.len() as u128 * points.len() as u128;
        if self.dim() == 1 && cost > BINNED_COST_THRESHOLD {
            return Ok(self.binned_eval_1d(points.as_1d()));
        }
        points.rows().map(|r| self.evaluate(r)).collect()
    }

    /// Exact density on a 1D grid.
    pub fn evaluate_grid_1d(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if self.dim() != 1 {
            return Err(DpddError::DimensionMismatch {
                expected: 1,
                got: self.dim(),
            });
        }
        let h = self.bandwidth[0];
        let norm = self.normalization();
        let xs = self.samples.as_1d();
        Ok(grid
            .iter()
            .map(|&g| {
                let mut acc = 0.0;
                for &z in xs {
                    let u = (g - z) / h;
                    acc += (-0.5 * u * u).exp();
                }
                acc * norm
            })
            .collect())
    }

    /// Exact density on a 2D tensor grid, row-major over (gx, gy). Uses the
    /// separable kernel structure: P = Fx^T Fy accumulated in sample chunks.
    pub fn evaluate_grid_2d(&self, gx: &[f64], gy: &[f64]) -> Result<Vec<f64>> {
        if self.dim() != 2 {
            return Err(DpddError::DimensionMismatch {
                expected: 2,
                got: self.dim(),
            });
        }
        let (nx, ny) = (gx.len(), gy.len());
        let (hx, hy) = (self.bandwidth[0], self.bandwidth[1]);
        let norm = self.normalization();
        let mut out = nalgebra::DMatrix::<f64>::zeros(nx, ny);
        let chunk = 4096;
        let m = self.samples.len();
        let mut start = 0;
        while start < m {
            let end = (start + chunk).min(m);
            let rows = end - start;
            let mut fx = nalgebra::DMatrix::<f64>::zeros(nx, rows);
            let mut fy = nalgebra::DMatrix::<f64>::zeros(rows, ny);
            for (k, idx) in (start..end).enumerate() {
                let row = self.samples.row(idx);
                for (i, &g) in gx.iter().enumerate() {
                    let u = (g - row[0]) / hx;
                    fx[(i, k)] = (-0.5 * u * u).exp();
                }
                for (j, &g) in gy.iter().enumerate() {
                    let u = (g - row[1]) / hy;
                    fy[(k, j)] = (-0.5 * u * u).exp();
                }
            }
            out += fx * fy;
            start = end;
        }
        Ok(out.transpose().iter().copied().map(|v| v * norm).collect::<Vec<_>>())
    }

    /// Draw n points from the mixture: pick a kernel center uniformly, then
    /// add per-axis Gaussian noise scaled by the bandwidth.
    pub fn sample(&self, n: usize, rng: &mut impl rand::Rng) -> Points {
        use rand_distr::{Distribution, StandardNormal};
        let m = self.samples.len();
        let d = self.dim();
        let mut out = Points::empty(d);
        let mut row = vec![0.0; d];
        for _ in 0..n {
            let k = rng.gen_range(0..m);
            let center = self.samples.row(k);
            for a in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                row[a] = center[a] + self.bandwidth[a] * z;
            }
            out.push_row(&row);
        }
        out
    }

    /// Linearly binned convolution evaluation; 1D only. Node spacing is far
    /// below the bandwidth, so interpolation error is negligible relative to
    /// the estimator's own statistical error.
    fn binned_eval_1d(&self, queries: &[f64]) -> Vec<f64> {
        let xs = self.samples.as_1d();
        let h = self.bandwidth[0];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in xs.iter().chain(queries.iter()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        lo -= KERNEL_CUTOFF * h;
        hi += KERNEL_CUTOFF * h;
        let nodes = BINNED_NODES;
        let step = (hi - lo) / (nodes - 1) as f64;

        // linear binning of sample mass onto the nodes
        let mut counts = vec![0.0; nodes];
        for &z in xs {
            let t = (z - lo) / step;
            let j = (t.floor() as usize).min(nodes - 2);
            let frac = t - j as f64;
            counts[j] += 1.0 - frac;
            counts[j + 1] += frac;
        }

        // kernel lookup over the relevant offset window
        let window = ((KERNEL_CUTOFF * h / step).ceil() as usize).min(nodes - 1);
        let kernel: Vec<f64> = (0..=window)
            .map(|o| {
                let u = o as f64 * step / h;
                (-0.5 * u * u).exp()
            })
            .collect();

        let norm = self.normalization();
        let mut node_density = vec![0.0; nodes];
        for (b, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let lo_g = b.saturating_sub(window);
            let hi_g = (b + window).min(nodes - 1);
            for g in lo_g..=hi_g {
                node_density[g] += c * kernel[g.abs_diff(b)];
            }
        }
        for v in &mut node_density {
            *v *= norm;
        }

        queries
            .iter()
            .map(|&q| {
                let t = (q - lo) / step;
                let j = (t.floor() as usize).min(nodes - 2);
                let frac = t - j as f64;
                node_density[j] * (1.0 - frac) + node_density[j + 1] * frac
            })
            .collect()
    }
}

/// Normalized nonnegative weights over transition-pair source points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Uniform weights 1/M.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(DpddError::InvalidInput("cannot weight zero points".into()));
        }
        Ok(WeightVector {
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Normalize raw nonnegative density evaluations into weights that sum to 1.
pub(crate) fn normalize_densities(mut densities: Vec<f64>) -> Result<WeightVector> {
    if densities.is_empty() {
        return Err(DpddError::InvalidInput("cannot weight zero points".into()));
    }
    let max = densities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(DpddError::Degenerate(
            "all densities numerically zero; weights undefined".into(),
        ));
    }
    for v in &mut densities {
        if *v < DENSITY_FLOOR {
            *v = DENSITY_FLOOR;
        }
    }
    let sum: f64 = densities.iter().sum();
    for v in &mut densities {
        *v /= sum;
    }
    Ok(WeightVector { weights: densities })
}

/// Importance weights w_k = p̂_s(z_k) / Σ_l p̂_s(z_l) over a trajectory.
pub fn importance_weights(model: &KdeModel, trajectory: &Points) -> Result<WeightVector> {
    if trajectory.dim() != model.dim() {
        return Err(DpddError::DimensionMismatch {
            expected: model.dim(),
            got: trajectory.dim(),
        });
    }
    normalize_densities(model.evaluate_many(trajectory)?)
}

/// K-fold likelihood cross-validation over multipliers of the Silverman value.
fn cv_bandwidth(samples: &Points, folds: usize) -> Result<Vec<f64>> {
    let base = silverman_bandwidth(samples)?;
    let m = samples.len();
    if m < 2 * folds {
        return Ok(base);
    }
    let multipliers = [0.25, 0.3536, 0.5, 0.7071, 1.0, 1.4142, 2.0, 2.8284, 4.0];
    let fold_of = |i: usize| i * folds / m;
    let mut best = (f64::NEG_INFINITY, 1.0);
    for &mult in &multipliers {
        let h: Vec<f64> = base.iter().map(|v| v * mult).collect();
        let mut total = 0.0;
        for fold in 0..folds {
            let mut train = Points::empty(samples.dim());
            let mut held = Points::empty(samples.dim());
            for i in 0..m {
                if fold_of(i) == fold {
                    held.push_row(samples.row(i));
                } else {
                    train.push_row(samples.row(i));
                }
            }
            let model = kde_fit(train, Bandwidth::Fixed(h.clone()))?;
            for v in model.evaluate_many(&held)? {
                total += v.max(DENSITY_FLOOR).ln();
            }
        }
        if total > best.0 {
            best = (total, mult);
        }
    }
    Ok(base.iter().map(|v| v * best.1).collect())
}
