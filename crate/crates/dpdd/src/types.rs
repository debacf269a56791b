use serde::{Deserialize, Serialize};

use crate::{DpddError, Result};

/// A set of points in `R^d`, stored row-major. Used for sample sets,
/// trajectories and distribution cross-sections alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(DpddError::InvalidInput("dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(DpddError::InvalidInput(format!(
                "flat length {} is not a multiple of dimension {}",
                data.len(),
                dim
            )));
        }
        Ok(Points { data, dim })
    }

    /// One-dimensional sample set.
    pub fn from_1d(values: Vec<f64>) -> Self {
        Points {
            data: values,
            dim: 1,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Points {
            data: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Values of a single coordinate across all points.
    pub fn column(&self, axis: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(axis)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    /// The underlying slice when `dim == 1`.
    pub fn as_1d(&self) -> &[f64] {
        assert_eq!(self.dim, 1, "as_1d requires dimension 1");
        &self.data
    }

    /// Per-axis minima and maxima. Empty sets have no extent.
    pub fn extent(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = self.row(0).to_vec();
        let mut hi = lo.clone();
        for row in self.rows() {
            for (a, v) in row.iter().enumerate() {
                if *v < lo[a] {
                    lo[a] = *v;
                }
                if *v > hi[a] {
                    hi[a] = *v;
                }
            }
        }
        Some((lo, hi))
    }

    /// Per-axis mean and standard deviation (ddof = 1).
    pub fn mean_std(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.len();
        if n < 2 {
            return Err(DpddError::InvalidInput(
                "need at least 2 points for mean/std".into(),
            ));
        }
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, v) in row.iter().enumerate() {
                mean[a] += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, v) in row.iter().enumerate() {
                let d = v - mean[a];
                var[a] += d * d;
            }
        }
        let std = var.iter().map(|v| (v / (n as f64 - 1.0)).sqrt()).collect();
        Ok((mean, std))
    }

    pub fn extend_from(&mut self, other: &Points) {
        debug_assert_eq!(self.dim, other.dim);
        self.data.extend_from_slice(&other.data);
    }
}

/// A panel of distributions observed at evenly spaced times, where each
/// underlying unit (simulated path, housing metro, ...) contributes one
/// trajectory. The cross-section over units at a fixed time is the observed
/// empirical distribution; consecutive values within one trajectory are the
/// transition pairs used for operator estimation. Pairs never span units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedPanel {
    paths: Vec<Points>,
    t_len: usize,
    dim: usize,
}

impl LinkedPanel {
    pub fn new(paths: Vec<Points>) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| DpddError::InvalidInput("panel needs at least one path".into()))?;
        let t_len = first.len();
        let dim = first.dim();
        for (i, p) in paths.iter().enumerate() {
            if p.len() != t_len || p.dim() != dim {
                return Err(DpddError::InvalidInput(format!(
                    "path {} has shape {}x{}, expected {}x{}",
                    i,
                    p.len(),
                    p.dim(),
                    t_len,
                    dim
                )));
            }
        }
        Ok(LinkedPanel { paths, t_len, dim })
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn paths(&self) -> &[Points] {
        &self.paths
    }

    /// Empirical distribution observed at time `t`: one point per path.
    pub fn cross_section(&self, t: usize) -> Points {
        let mut out = Points::empty(self.dim);
        for p in &self.paths {
            out.push_row(p.row(t));
        }
        out
    }

    /// All samples with time index in `times`, pooled path by path.
    pub fn pooled(&self, times: std::ops::RangeInclusive<usize>) -> Points {
        let mut out = Points::empty(self.dim);
        for p in &self.paths {
            for t in times.clone() {
                out.push_row(p.row(t));
            }
        }
        out
    }

    /// Transition pairs (z_t, z_{t+1}) with t in `times` and t+1 <= end of
    /// `times`, restricted to within-path transitions.
    pub fn transition_pairs(&self, times: std::ops::RangeInclusive<usize>) -> (Points, Points) {
        let mut x = Points::empty(self.dim);
        let mut y = Points::empty(self.dim);
        let (start, end) = (*times.start(), *times.end());
        for p in &self.paths {
            for t in start..end {
                x.push_row(p.row(t));
                y.push_row(p.row(t + 1));
            }
        }
        (x, y)
    }

    /// Per-time cross-sectional mean of the first coordinate, the default
    /// summary series for mixing-time estimation.
    pub fn mean_series(&self, times: std::ops::RangeInclusive<usize>) -> Vec<f64> {
        times
            .map(|t| {
                let cs = self.cross_section(t);
                cs.rows().map(|r| r[0]).sum::<f64>() / cs.len() as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_roundtrip() {
        let p = Points::new(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.row(1), &[3.0, 4.0]);
        assert_eq!(p.column(1), vec![2.0, 4.0]);
    }

    #[test]
    fn points_rejects_ragged() {
        assert!(Points::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(Points::new(vec![1.0], 0).is_err());
    }

    #[test]
    fn panel_pairs_stay_within_paths() {
        let a = Points::from_1d(vec![0.0, 1.0, 2.0]);
        let b = Points::from_1d(vec![10.0, 11.0, 12.0]);
        let lp = LinkedPanel::new(vec![a, b]).unwrap();
        let (x, y) = lp.transition_pairs(0..=2);
        assert_eq!(x.as_1d(), &[0.0, 1.0, 10.0, 11.0]);
        assert_eq!(y.as_1d(), &[1.0, 2.0, 11.0, 12.0]);
        // no pair (2.0, 10.0) spanning the two paths
    }

    #[test]
    fn cross_section_collects_per_time() {
        let a = Points::from_1d(vec![0.0, 1.0]);
        let b = Points::from_1d(vec![5.0, 6.0]);
        let lp = LinkedPanel::new(vec![a, b]).unwrap();
        assert_eq!(lp.cross_section(1).as_1d(), &[1.0, 6.0]);
    }
}
