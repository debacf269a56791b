//! Density forecasting: project the latest empirical distribution onto the
//! Koopman eigenbasis, propagate the modal coefficients in closed form, and
//! reconstruct the future density on a grid as
//!
//! ```text
//! p̂_{T+h}(x) = p̂_s(x) · Re( 1 + Σ_j c_j(T) e^{λ_j h} φ̂_j(x) )
//! ```
//!
//! clipped to nonnegative values and renormalized to unit mass.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::koopman::KoopmanModel;
use crate::{DpddError, Points, Result};

/// Modal coefficients c_j at a given time offset (in the same units as the
/// forecast horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients {
    pub values: Vec<Complex64>,
    pub time_index: f64,
}

/// Uniform rectangular lattice in 1 or 2 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn uniform_1d(lo: f64, hi: f64, n: usize) -> Result<Grid> {
        Ok(Grid {
            axes: vec![uniform_axis(lo, hi, n)?],
        })
    }

    pub fn uniform_2d(x: (f64, f64, usize), y: (f64, f64, usize)) -> Result<Grid> {
        Ok(Grid {
            axes: vec![uniform_axis(x.0, x.1, x.2)?, uniform_axis(y.0, y.1, y.2)?],
        })
    }

    /// Default reconstruction grid for a model: the stationary sample extent
    /// padded by 3 bandwidths per axis, `n` nodes per axis.
    pub fn for_model(model: &KoopmanModel, n: usize) -> Result<Grid> {
        let kde = model.stationary_density();
        let (lo, hi) = kde
            .samples()
            .extent()
            .ok_or_else(|| DpddError::Degenerate("stationary density has no samples".into()))?;
        let h = kde.bandwidth();
        let axes = (0..kde.dim())
            .map(|a| uniform_axis(lo[a] - 3.0 * h[a], hi[a] + 3.0 * h[a], n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    /// Volume of one lattice cell.
    pub fn cell_measure(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| if a.len() > 1 { a[1] - a[0] } else { 1.0 })
            .product()
    }

    /// Coordinates of the node with row-major flat index `idx`.
    fn node(&self, idx: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0][idx]],
            2 => {
                let ny = self.axes[1].len();
                vec![self.axes[0][idx / ny], self.axes[1][idx % ny]]
            }
            _ => unreachable!("grids are 1D or 2D"),
        }
    }
}

fn uniform_axis(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(DpddError::InvalidInput(format!(
            "axis needs at least 2 nodes and hi > lo (got n={n}, lo={lo}, hi={hi})"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

/// Grid-discretized nonnegative density with unit mass, plus forecast metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDensity {
    grid: Grid,
    values: Vec<f64>,
    cell_measure: f64,
    /// Forecast horizon this density was propagated to.
    pub horizon: f64,
    /// Number of propagated modes.
    pub mode_count: usize,
    /// Fraction of raw reconstructed |mass| that was negative and clipped.
    pub clipped_mass: f64,
}

impl ForecastDensity {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_measure
    }

    /// Quantile function of a 1D forecast under the trapezoid-CDF convention:
    /// nondecreasing, with u = 0 and u = 1 mapped to the grid extremes.
    pub fn quantile(&self, u: f64) -> f64 {
        assert_eq!(self.dim(), 1, "quantile accessor is 1D-only");
        quantile_on_nodes(self.grid.axis(0), &self.values, u)
    }

    pub fn quantiles_on(&self, u_grid: &[f64]) -> Vec<f64> {
        u_grid.iter().map(|&u| self.quantile(u)).collect()
    }

    /// Deterministic stratified sample of size n by inverse CDF. 1D uses the
    /// midpoint strata (i+1/2)/n directly; 2D pairs the first-axis strata
    /// (through the marginal quantile function) with a seeded permutation of
    /// the second-axis strata (through the conditional quantile of the
    /// containing row), a Latin-hypercube draw whose empirical measure tracks
    /// the density far more tightly than an iid sample of the same size.
    pub fn sample_deterministic(&self, n: usize, seed: u64) -> Points {
        let strata: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        match self.dim() {
            1 => Points::from_1d(strata.iter().map(|&u| self.quantile(u)).collect()),
            2 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                let gx = self.grid.axis(0);
                let gy = self.grid.axis(1);
                let (nx, ny) = (gx.len(), gy.len());
                let dy = gy[1] - gy[0];
                let marginal: Vec<f64> = (0..nx)
                    .map(|i| self.values[i * ny..(i + 1) * ny].iter().sum::<f64>() * dy)
                    .collect();
                let mut out = Points::empty(2);
                let step = gx[1] - gx[0];
                for (k, &ux) in strata.iter().enumerate() {
                    let x = quantile_on_nodes(gx, &marginal, ux);
                    let i = (((x - gx[0]) / step).round() as usize).min(nx - 1);
                    let row = &self.values[i * ny..(i + 1) * ny];
                    let uy = (perm[k] as f64 + 0.5) / n as f64;
                    out.push_row(&[x, quantile_on_nodes(gy, row, uy)]);
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Marginal density along one axis of a 2D forecast.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        assert_eq!(self.dim(), 2, "marginals are for 2D forecasts");
        let (nx, ny) = (self.grid.axis(0).len(), self.grid.axis(1).len());
        match axis {
            0 => {
                let dy = self.grid.axis(1)[1] - self.grid.axis(1)[0];
                (0..nx)
                    .map(|i| self.values[i * ny..(i + 1) * ny].iter().sum::<f64>() * dy)
                    .collect()
            }
            1 => {
                let dx = self.grid.axis(0)[1] - self.grid.axis(0)[0];
                (0..ny)
                    .map(|j| (0..nx).map(|i| self.values[i * ny + j]).sum::<f64>() * dx)
                    .collect()
            }
            _ => panic!("axis out of range"),
        }
    }

    /// Quantiles of a marginal axis of a 2D forecast.
    pub fn marginal_quantiles(&self, axis: usize, u_grid: &[f64]) -> Vec<f64> {
        let marg = self.marginal(axis);
        u_grid
            .iter()
            .map(|&u| quantile_on_nodes(self.grid.axis(axis), &marg, u))
            .collect()
    }

    /// Largest absolute difference from another value field on the same grid.
    pub fn sup_diff(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Inverse of the trapezoid CDF over grid nodes carrying density `values`.
fn quantile_on_nodes(nodes: &[f64], values: &[f64], u: f64) -> f64 {
    let n = nodes.len();
    let mut cdf = Vec::with_capacity(n);
    cdf.push(0.0);
    for i in 1..n {
        let step = nodes[i] - nodes[i - 1];
        cdf.push(cdf[i - 1] + 0.5 * step * (values[i - 1] + values[i]));
    }
    let total = cdf[n - 1];
    if !(total > 0.0) {
        return nodes[0];
    }
    let target = u.clamp(0.0, 1.0) * total;
    let hi = cdf.partition_point(|&c| c < target).min(n - 1).max(1);
    let (c0, c1) = (cdf[hi - 1], cdf[hi]);
    let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
    nodes[hi - 1] + t * (nodes[hi] - nodes[hi - 1])
}

/// Project an empirical distribution onto the retained eigenfunctions:
/// c_j = (1/n) Σ_x φ̂_j(x).
pub fn project_coefficients(model: &KoopmanModel, samples: &Points) -> Result<ModalCoefficients> {
    if samples.is_empty() {
        return Err(DpddError::InvalidInput(
            "cannot project an empty sample set".into(),
        ));
    }
    if samples.dim() != model.dictionary().dim() {
        return Err(DpddError::DimensionMismatch {
            expected: model.dictionary().dim(),
            got: samples.dim(),
        });
    }
    let r = model.mode_count();
    let mut acc = vec![Complex64::new(0.0, 0.0); r];
    for row in samples.rows() {
        for (j, v) in model.eval_retained_modes(row)?.into_iter().enumerate() {
            acc[j] += v;
        }
    }
    let n = samples.len() as f64;
    for v in &mut acc {
        *v /= n;
    }
    Ok(ModalCoefficients {
        values: acc,
        time_index: 0.0,
    })
}

/// Advance coefficients by horizon h: c_j(T+h) = e^{λ_j h} c_j(T).
pub fn propagate_coefficients(
    c: &ModalCoefficients,
    model: &KoopmanModel,
    h: f64,
) -> ModalCoefficients {
    let rates = model.retained_rates();
    debug_assert_eq!(rates.len(), c.values.len());
    let values = c
        .values
        .iter()
        .zip(rates)
        .map(|(v, lambda)| v * (lambda * h).exp())
        .collect();
    ModalCoefficients {
        values,
        time_index: c.time_index + h,
    }
}

/// Reconstruct the density p̂_s(x)·Re(1 + Σ c_j φ̂_j(x)) on the grid, clipping
/// negative values and renormalizing to unit mass.
pub fn reconstruct_density(
    model: &KoopmanModel,
    c: &ModalCoefficients,
    grid: &Grid,
) -> Result<ForecastDensity> {
    let kde = model.stationary_density();
    if grid.dim() != kde.dim() {
        return Err(DpddError::DimensionMismatch {
            expected: kde.dim(),
            got: grid.dim(),
        });
    }
    if c.values.len() != model.mode_count() {
        return Err(DpddError::InvalidInput(format!(
            "coefficient count {} does not match {} retained modes",
            c.values.len(),
            model.mode_count()
        )));
    }
    let stationary = match grid.dim() {
        1 => kde.evaluate_grid_1d(grid.axis(0))?,
        2 => kde.evaluate_grid_2d(grid.axis(0), grid.axis(1))?,
        d => {
            return Err(DpddError::InvalidInput(format!(
                "reconstruction grids support d <= 2, got {d}"
            )))
        }
    };

    let n_nodes = grid.node_count();
    let mut raw = Vec::with_capacity(n_nodes);
    for idx in 0..n_nodes {
        let x = grid.node(idx);
        let modes = model.eval_retained_modes(&x)?;
        // sum in the complex plane, take the real part once at the end
        let mut total = Complex64::new(1.0, 0.0);
        for (cj, phi) in c.values.iter().zip(modes) {
            total += cj * phi;
        }
        raw.push(stationary[idx] * total.re);
    }

    let cell = grid.cell_measure();
    let mut positive = 0.0;
    let mut negative = 0.0;
    for v in &raw {
        if *v >= 0.0 {
            positive += v;
        } else {
            negative -= v;
        }
    }
    if !(positive > 0.0) {
        return Err(DpddError::Degenerate("degenerate reconstruction".into()));
    }
    let clipped_mass = negative / (positive + negative);
    let norm = positive * cell;
    let values: Vec<f64> = raw
        .into_iter()
        .map(|v| if v > 0.0 { v / norm } else { 0.0 })
        .collect();
    Ok(ForecastDensity {
        grid: grid.clone(),
        values,
        cell_measure: cell,
        horizon: c.time_index,
        mode_count: c.values.len(),
        clipped_mass,
    })
}

/// Full DPDD forecast: project the current sample set, propagate h, and
/// reconstruct on the grid.
pub fn dpdd_forecast(
    model: &KoopmanModel,
    samples_t: &Points,
    h: f64,
    grid: &Grid,
) -> Result<ForecastDensity> {
    let c = project_coefficients(model, samples_t)?;
    let propagated = propagate_coefficients(&c, model, h);
    reconstruct_density(model, &propagated, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_dictionary, BasisKind, Standardization};
    use crate::density::{importance_weights, kde_fit, Bandwidth};
    use crate::koopman::{fit_koopman, moment_matrices, truncate_modes, FitOptions, TruncationRule};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    const OU_THETA: f64 = 1.0;
    const OU_SIGMA: f64 = 0.7;

    fn ou_trajectory(m: usize, dt: f64, seed: u64) -> Points {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x: f64 = 0.0;
        for _ in 0..2000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += -OU_THETA * x * dt + OU_SIGMA * dt.sqrt() * z;
        }
        let mut out = Vec::with_capacity(m + 1);
        for _ in 0..=m {
            out.push(x);
            let z: f64 = StandardNormal.sample(&mut rng);
            x += -OU_THETA * x * dt + OU_SIGMA * dt.sqrt() * z;
        }
        Points::from_1d(out)
    }

    fn fit_ou_model(m: usize, dt: f64, seed: u64) -> crate::koopman::KoopmanModel {
        let traj = ou_trajectory(m, dt, seed);
        let std = Standardization::from_points(&traj).unwrap();
        let dict = build_dictionary(BasisKind::Hermite, 4, 1, std).unwrap();
        let kde = kde_fit(traj.clone(), Bandwidth::Auto).unwrap();
        let mut x_side = Points::empty(1);
        for k in 0..traj.len() - 1 {
            x_side.push_row(traj.row(k));
        }
        let w = importance_weights(&kde, &x_side).unwrap();
        let mm = moment_matrices(&traj, &w, &dict).unwrap();
        fit_koopman(&mm, dt, &FitOptions::default(), &dict, &kde).unwrap()
    }

    fn normal_points(n: usize, mean: f64, std: f64, seed: u64) -> Points {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Points::from_1d(
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + std * z
                })
                .collect(),
        )
    }

    #[test]
    fn single_point_projection_is_eigenfunction_value() {
        let model = fit_ou_model(20_000, 0.01, 41);
        let x0 = 0.37;
        let c = project_coefficients(&model, &Points::from_1d(vec![x0])).unwrap();
        let phi = model.eval_retained_modes(&[x0]).unwrap();
        assert_eq!(c.values, phi);
    }

    #[test]
    fn stationary_samples_project_to_zero() {
        let model = fit_ou_model(100_000, 0.01, 42);
        let n = 10_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let samples = model.stationary_density().sample(n, &mut rng);
        let c = project_coefficients(&model, &samples).unwrap();
        let tol = 3.0 / (n as f64).sqrt();
        for v in &c.values {
            assert!(v.norm() < tol, "coefficient {v} above tolerance {tol}");
        }
    }

    #[test]
    fn projection_matches_quadrature_oracle() {
        // shifted start N(1, σ_s²); oracle is Simpson quadrature of ∫ φ̂_1 dp_T
        let model = fit_ou_model(100_000, 0.01, 43);
        let stat_var = OU_SIGMA * OU_SIGMA / (2.0 * OU_THETA);
        let (mean, std) = (1.0, stat_var.sqrt());
        let n = 200_000;
        let samples = normal_points(n, mean, std, 99);
        let c = project_coefficients(&model, &samples).unwrap();

        let n_quad = 4001;
        let (lo, hi) = (mean - 8.0 * std, mean + 8.0 * std);
        let step = (hi - lo) / (n_quad - 1) as f64;
        let mut oracle = Complex64::new(0.0, 0.0);
        for i in 0..n_quad {
            let x = lo + step * i as f64;
            let w = if i == 0 || i == n_quad - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let pdf = (-0.5 * ((x - mean) / std).powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
            oracle += model.eval_retained_modes(&[x]).unwrap()[0] * (w * pdf);
        }
        oracle *= step / 3.0;
        let mc_tol = 4.0 / (n as f64).sqrt() + 0.01;
        assert!(
            (c.values[0] - oracle).norm() < mc_tol,
            "projected {} vs quadrature {oracle}",
            c.values[0]
        );
    }

    #[test]
    fn zero_horizon_propagation_is_identity() {
        let model = fit_ou_model(20_000, 0.01, 44);
        let c = project_coefficients(&model, &normal_points(500, 0.4, 0.3, 7)).unwrap();
        let p = propagate_coefficients(&c, &model, 0.0);
        assert_eq!(c.values, p.values);
    }

    #[test]
    fn scalar_exponential_decay() {
        let model = fit_ou_model(20_000, 0.01, 45);
        // pick the mode with rate closest to -1 and check e^{λ ln 2} scaling
        let rates = model.retained_rates();
        let c = ModalCoefficients {
            values: vec![Complex64::new(1.0, 0.0); rates.len()],
            time_index: 0.0,
        };
        let p = propagate_coefficients(&c, &model, 2.0f64.ln());
        for (v, lambda) in p.values.iter().zip(rates) {
            let expect = (lambda * 2.0f64.ln()).exp();
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugate_coefficients_stay_conjugate() {
        let c = ModalCoefficients {
            values: vec![Complex64::new(0.4, 0.2), Complex64::new(0.4, -0.2)],
            time_index: 0.0,
        };
        // synthetic conjugate rates
        let rates = [Complex64::new(-0.5, 1.3), Complex64::new(-0.5, -1.3)];
        let h = 0.7;
        let out: Vec<Complex64> = c
            .values
            .iter()
            .zip(rates)
            .map(|(v, l)| v * (l * h).exp())
            .collect();
        assert!((out[0] - out[1].conj()).norm() < 1e-15);
    }

    #[test]
    fn zero_coefficients_reconstruct_the_stationary_density() {
        let model = fit_ou_model(20_000, 0.01, 46);
        let grid = Grid::for_model(&model, 512).unwrap();
        let c = ModalCoefficients {
            values: vec![Complex64::new(0.0, 0.0); model.mode_count()],
            time_index: 0.0,
        };
        let fd = reconstruct_density(&model, &c, &grid).unwrap();
        let stationary = model.stationary_density().evaluate_grid_1d(grid.axis(0)).unwrap();
        let mass: f64 = stationary.iter().sum::<f64>() * grid.cell_measure();
        let renorm: Vec<f64> = stationary.iter().map(|v| v / mass).collect();
        assert!(fd.sup_diff(&renorm) < 1e-12);
        assert_eq!(fd.clipped_mass, 0.0);
    }

    #[test]
    fn forecasts_integrate_to_one() {
        let model = fit_ou_model(50_000, 0.01, 47);
        let grid = Grid::for_model(&model, 512).unwrap();
        for (seed, mean) in [(1u64, 0.8), (2, -0.4), (3, 1.5)] {
            let samples = normal_points(2_000, mean, 0.4, seed);
            let fd = dpdd_forecast(&model, &samples, 1.0, &grid).unwrap();
            assert!((fd.integral() - 1.0).abs() < 1e-6, "integral {}", fd.integral());
            assert!(fd.values().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn zero_horizon_forecast_equals_direct_reconstruction() {
        let model = fit_ou_model(20_000, 0.01, 48);
        let grid = Grid::for_model(&model, 256).unwrap();
        let samples = normal_points(500, 0.6, 0.4, 11);
        let via_forecast = dpdd_forecast(&model, &samples, 0.0, &grid).unwrap();
        let direct = {
            let c = project_coefficients(&model, &samples).unwrap();
            reconstruct_density(&model, &c, &grid).unwrap()
        };
        assert_eq!(via_forecast.values(), direct.values());
    }

    #[test]
    fn long_horizon_forecast_decays_to_stationary() {
        let model = fit_ou_model(20_000, 0.01, 49);
        let grid = Grid::for_model(&model, 512).unwrap();
        let samples = normal_points(1_000, 1.0, 0.4, 13);
        let fd = dpdd_forecast(&model, &samples, 50.0, &grid).unwrap();
        let stationary = model.stationary_density().evaluate_grid_1d(grid.axis(0)).unwrap();
        let mass: f64 = stationary.iter().sum::<f64>() * grid.cell_measure();
        let renorm: Vec<f64> = stationary.iter().map(|v| v / mass).collect();
        assert!(fd.sup_diff(&renorm) < 1e-6);
    }

    #[test]
    fn reconstruction_is_effectively_real() {
        let model = fit_ou_model(20_000, 0.01, 50);
        let samples = normal_points(800, 0.7, 0.35, 17);
        let c = project_coefficients(&model, &samples).unwrap();
        let grid = Grid::for_model(&model, 64).unwrap();
        for idx in 0..grid.node_count() {
            let x = grid.node(idx);
            let modes = model.eval_retained_modes(&x).unwrap();
            let total: Complex64 = c
                .values
                .iter()
                .zip(modes)
                .map(|(a, b)| a * b)
                .sum::<Complex64>()
                + Complex64::new(1.0, 0.0);
            assert!(total.im.abs() <= 1e-8, "imaginary residue {}", total.im);
        }
    }

    #[test]
    fn quantiles_are_monotone_and_hit_grid_extremes() {
        let model = fit_ou_model(20_000, 0.01, 51);
        let grid = Grid::for_model(&model, 256).unwrap();
        let fd = dpdd_forecast(&model, &normal_points(500, 0.3, 0.4, 19), 1.0, &grid).unwrap();
        assert_eq!(fd.quantile(0.0), grid.axis(0)[0]);
        assert_eq!(fd.quantile(1.0), *grid.axis(0).last().unwrap());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let q = fd.quantile(i as f64 / 100.0);
            assert!(q >= prev - 1e-12);
            prev = q;
        }
    }

    #[test]
    fn monotone_horizon_decay_toward_stationary() {
        let model = fit_ou_model(50_000, 0.01, 52);
        // all-stable check: retained rates must have negative real part
        assert!(model.retained_rates().iter().all(|l| l.re < 0.0));
        let grid = Grid::for_model(&model, 512).unwrap();
        let samples = normal_points(2_000, 1.0, 0.4, 23);
        let stationary_fd = {
            let c = ModalCoefficients {
                values: vec![Complex64::new(0.0, 0.0); model.mode_count()],
                time_index: 0.0,
            };
            reconstruct_density(&model, &c, &grid).unwrap()
        };
        let u_grid = crate::transport::uniform_u_grid(512);
        let q_stat = crate::transport::QuantileCurve::new(
            u_grid.clone(),
            stationary_fd.quantiles_on(&u_grid),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for h in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let fd = dpdd_forecast(&model, &samples, h, &grid).unwrap();
            let q = crate::transport::QuantileCurve::new(u_grid.clone(), fd.quantiles_on(&u_grid))
                .unwrap();
            let dist = crate::transport::w2_quantile_grid(&q, &q_stat).unwrap();
            assert!(
                dist <= prev + 1e-6,
                "W2 to stationary increased: {dist} after {prev} at h={h}"
            );
            prev = dist;
        }
    }

    /// One-step forecast against the exact OU transition density.
    #[test]
    fn ou_one_step_forecast_matches_exact_transition() {
        let model_full = fit_ou_model(100_000, 0.01, 53);
        let model = truncate_modes(&model_full, TruncationRule::Fixed(2)).unwrap();
        let stat_std = (OU_SIGMA * OU_SIGMA / (2.0 * OU_THETA)).sqrt();
        let shift = 0.5;
        let samples = normal_points(10_000, shift, stat_std, 29);
        let h = 1.0;
        let grid = Grid::uniform_1d(-3.0, 3.5, 1024).unwrap();
        let fd = dpdd_forecast(&model, &samples, h, &grid).unwrap();

        // exact ensemble transition: N(shift·e^{-h}, σ_s²)
        let mean = shift * (-h).exp();
        let u_grid = crate::transport::uniform_u_grid(1024);
        let q_forecast =
            crate::transport::QuantileCurve::new(u_grid.clone(), fd.quantiles_on(&u_grid)).unwrap();
        let exact_vals: Vec<f64> = grid
            .axis(0)
            .iter()
            .map(|x| {
                (-0.5 * ((x - mean) / stat_std).powi(2)).exp()
                    / (stat_std * (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect();
        let exact_q: Vec<f64> = u_grid
            .iter()
            .map(|&u| quantile_on_nodes(grid.axis(0), &exact_vals, u))
            .collect();
        let q_exact = crate::transport::QuantileCurve::new(u_grid.clone(), exact_q).unwrap();
        let w2 = crate::transport::w2_quantile_grid(&q_forecast, &q_exact).unwrap();
        assert!(w2 < 0.05, "W2 to exact transition = {w2}");
    }
}
