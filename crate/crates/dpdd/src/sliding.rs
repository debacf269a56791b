//! Sliding-window DPDD for locally stationary panels: the stationary density,
//! weights, moment matrices and eigenspace are re-estimated on a rolling
//! window of recent snapshots, and the newest distribution is propagated with
//! the local spectrum.
//!
//! The same window-fitting routine backs the global method (window = full
//! training history), so a full-width sliding fit reproduces the global fit
//! exactly.

use serde::{Deserialize, Serialize};

use crate::basis::{build_dictionary, BasisKind, Standardization};
use crate::density::{importance_weights, kde_fit, Bandwidth};
use crate::forecast::{dpdd_forecast, ForecastDensity, Grid};
use crate::koopman::{
    fit_koopman, moment_matrices_from_pairs, FitOptions, KoopmanModel, TruncationRule,
};
use crate::{DpddError, LinkedPanel, Result};

/// Everything needed to fit a DPDD model on a window of panel snapshots.
#[derive(Debug, Clone)]
pub struct DpddFitConfig {
    pub kind: BasisKind,
    pub degree: usize,
    /// Applied after fitting; `None` keeps every nontrivial mode.
    pub truncation: Option<TruncationRule>,
    pub options: FitOptions,
    pub bandwidth: Bandwidth,
    /// Time units per snapshot step.
    pub dt: f64,
    /// Reconstruction nodes per axis (1D).
    pub grid_points_1d: usize,
    /// Reconstruction nodes per axis (2D).
    pub grid_points_2d: usize,
}

impl Default for DpddFitConfig {
    fn default() -> Self {
        DpddFitConfig {
            kind: BasisKind::Hermite,
            degree: 4,
            truncation: Some(TruncationRule::ModulusRatio(0.9)),
            options: FitOptions::default(),
            bandwidth: Bandwidth::Auto,
            dt: 1.0,
            grid_points_1d: 512,
            grid_points_2d: 128,
        }
    }
}

impl DpddFitConfig {
    pub fn grid_for(&self, model: &KoopmanModel) -> Result<Grid> {
        let n = match model.stationary_density().dim() {
            1 => self.grid_points_1d,
            _ => self.grid_points_2d,
        };
        Grid::for_model(model, n)
    }
}

/// Fit a DPDD model on panel snapshots `window` (inclusive time range):
/// pooled KDE, importance weights on the pair source points, weighted moment
/// matrices from within-path transitions, Koopman fit, optional truncation.
pub fn fit_dpdd_window(
    panel: &LinkedPanel,
    window: std::ops::RangeInclusive<usize>,
    cfg: &DpddFitConfig,
) -> Result<KoopmanModel> {
    let (start, end) = (*window.start(), *window.end());
    if end >= panel.t_len() || start >= end {
        return Err(DpddError::InvalidInput(format!(
            "window {start}..={end} is not a valid snapshot range (panel has {} times)",
            panel.t_len()
        )));
    }
    let pooled = panel.pooled(start..=end);
    let standardization = Standardization::from_points(&pooled)?;
    let dict = build_dictionary(cfg.kind, cfg.degree, panel.dim(), standardization)?;
    let kde = kde_fit(pooled, cfg.bandwidth.clone())?;
    let (x, y) = panel.transition_pairs(start..=end);
    let weights = importance_weights(&kde, &x)?;
    let mm = moment_matrices_from_pairs(&x, &y, &weights, &dict)?;
    let model = fit_koopman(&mm, cfg.dt, &cfg.options, &dict, &kde)?;
    match cfg.truncation {
        Some(rule) => crate::koopman::truncate_modes(&model, rule),
        None => Ok(model),
    }
}

/// Mixing-time estimate from a summary series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixingTime {
    pub lag: usize,
    /// The autocorrelation never dropped below 1/e within half the series;
    /// `lag` was capped at length/2.
    pub saturated: bool,
}

/// Smallest lag at which the sample autocorrelation of the summary series
/// drops below 1/e in magnitude.
pub fn mixing_time(summary_series: &[f64]) -> Result<MixingTime> {
    let n = summary_series.len();
    if n < 10 {
        return Err(DpddError::InvalidInput(format!(
            "mixing-time estimation needs a series of length >= 10, got {n}"
        )));
    }
    let mean = summary_series.iter().sum::<f64>() / n as f64;
    let var: f64 = summary_series.iter().map(|v| (v - mean) * (v - mean)).sum();
    let cap = n / 2;
    if !(var > 0.0) {
        return Ok(MixingTime {
            lag: cap,
            saturated: true,
        });
    }
    let threshold = (-1.0f64).exp();
    for lag in 1..=cap {
        let cov: f64 = (0..n - lag)
            .map(|t| (summary_series[t] - mean) * (summary_series[t + lag] - mean))
            .sum();
        if (cov / var).abs() < threshold {
            return Ok(MixingTime {
                lag,
                saturated: false,
            });
        }
    }
    Ok(MixingTime {
        lag: cap,
        saturated: true,
    })
}

/// Window-length configuration derived from the mixing time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub window_length: usize,
    pub mixing_time: usize,
}

impl WindowConfig {
    /// Default rule: W = multiplier·τ clamped to [2τ, 5τ] and at least 2.
    pub fn from_mixing_time(tau: usize, multiplier: f64) -> Self {
        let tau = tau.max(1);
        let raw = (multiplier * tau as f64).round() as usize;
        let w = raw.clamp(2 * tau, 5 * tau).max(2);
        WindowConfig {
            window_length: w,
            mixing_time: tau,
        }
    }
}

/// Per-window diagnostics, serialized as one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub origin: usize,
    pub tau_mix: Option<usize>,
    pub window: usize,
    pub mode_count: usize,
    pub eigenvalues: Vec<(f64, f64)>,
}

impl WindowDiagnostics {
    pub fn from_model(model: &KoopmanModel, origin: usize, window: usize, tau: Option<usize>) -> Self {
        WindowDiagnostics {
            origin,
            tau_mix: tau,
            window,
            mode_count: model.mode_count(),
            eigenvalues: model
                .retained()
                .iter()
                .map(|&k| {
                    let mu = model.eigenvalues()[k];
                    (mu.re, mu.im)
                })
                .collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("diagnostics serialize")
    }
}

/// Sliding-window forecast: fit on snapshots (t-W+1)..=t, project the
/// distribution at t, and propagate h snapshot steps ahead. Only data with
/// time index <= t is touched.
pub fn sw_dpdd_forecast(
    panel: &LinkedPanel,
    t: usize,
    w: usize,
    h: usize,
    cfg: &DpddFitConfig,
) -> Result<ForecastDensity> {
    let (fd, _) = sw_dpdd_forecast_with_diagnostics(panel, t, w, h, cfg)?;
    Ok(fd)
}

/// As [`sw_dpdd_forecast`], also returning the per-window diagnostics.
pub fn sw_dpdd_forecast_with_diagnostics(
    panel: &LinkedPanel,
    t: usize,
    w: usize,
    h: usize,
    cfg: &DpddFitConfig,
) -> Result<(ForecastDensity, WindowDiagnostics)> {
    if w < 2 {
        return Err(DpddError::InvalidInput("window length must be >= 2".into()));
    }
    if t + 1 < w {
        return Err(DpddError::InvalidInput(format!(
            "insufficient window history: t = {t} with window {w}"
        )));
    }
    let start = t + 1 - w;
    let model = fit_dpdd_window(panel, start..=t, cfg)?;
    let grid = cfg.grid_for(&model)?;
    let fd = dpdd_forecast(&model, &panel.cross_section(t), h as f64 * cfg.dt, &grid)?;
    let diag = WindowDiagnostics::from_model(&model, t, w, None);
    Ok((fd, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Points;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_mixes_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let series: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = mixing_time(&series).unwrap();
        assert_eq!(m.lag, 1);
        assert!(!m.saturated);
    }

    #[test]
    fn ar1_mixing_time_matches_closed_form_acf() {
        // ρ(l) = 0.9^l drops below 1/e at l = 10
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = 0.0;
        let mut series = Vec::with_capacity(20_000);
        for _ in 0..20_000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = 0.9 * x + z * (1.0f64 - 0.81).sqrt();
            series.push(x);
        }
        let m = mixing_time(&series).unwrap();
        assert!(
            (m.lag as i64 - 10).abs() <= 3,
            "estimated mixing time {} far from 10",
            m.lag
        );
    }

    #[test]
    fn constant_series_saturates() {
        let series = vec![1.5; 40];
        let m = mixing_time(&series).unwrap();
        assert_eq!(m.lag, 20);
        assert!(m.saturated);
    }

    #[test]
    fn short_series_rejected() {
        assert!(mixing_time(&[1.0; 9]).is_err());
    }

    #[test]
    fn window_rule_respects_bounds() {
        let w = WindowConfig::from_mixing_time(4, 3.0);
        assert_eq!(w.window_length, 12);
        assert!(w.window_length >= 2 * 4 && w.window_length <= 5 * 4);
        let clamped = WindowConfig::from_mixing_time(4, 9.0);
        assert_eq!(clamped.window_length, 20);
        let floor = WindowConfig::from_mixing_time(1, 1.0);
        assert!(floor.window_length >= 2);
    }

    fn stationary_panel(n_paths: usize, t_len: usize, seed: u64) -> LinkedPanel {
        let mut paths = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + p as u64);
            let mut x: f64 = 0.0;
            for _ in 0..50 {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = 0.6 * x + 0.5 * z;
            }
            let mut row = Vec::with_capacity(t_len);
            for _ in 0..t_len {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = 0.6 * x + 0.5 * z;
                row.push(x);
            }
            paths.push(Points::from_1d(row));
        }
        LinkedPanel::new(paths).unwrap()
    }

    #[test]
    fn full_window_reduces_to_the_global_fit() {
        let panel = stationary_panel(120, 12, 3);
        let cfg = DpddFitConfig {
            degree: 3,
            ..Default::default()
        };
        let t = 11;
        let (sw, _) = sw_dpdd_forecast_with_diagnostics(&panel, t, 12, 1, &cfg).unwrap();
        let model = fit_dpdd_window(&panel, 0..=t, &cfg).unwrap();
        let grid = cfg.grid_for(&model).unwrap();
        let global = dpdd_forecast(&model, &panel.cross_section(t), cfg.dt, &grid).unwrap();
        assert_eq!(sw.values(), global.values());
    }

    #[test]
    fn insufficient_history_is_an_error() {
        let panel = stationary_panel(30, 8, 4);
        let cfg = DpddFitConfig {
            degree: 2,
            ..Default::default()
        };
        assert!(sw_dpdd_forecast(&panel, 3, 6, 1, &cfg).is_err());
    }

    /// Values after the forecast origin must not influence the forecast.
    #[test]
    fn no_lookahead_under_sentinel_injection() {
        let panel = stationary_panel(80, 12, 5);
        let cfg = DpddFitConfig {
            degree: 3,
            ..Default::default()
        };
        let origin = 8;
        let base = sw_dpdd_forecast(&panel, origin, 6, 1, &cfg).unwrap();

        // rebuild the panel with sentinel values at times > origin
        let mut mutated_paths = Vec::new();
        for path in panel.paths() {
            let mut vals: Vec<f64> = path.as_1d().to_vec();
            for (t, v) in vals.iter_mut().enumerate() {
                if t > origin {
                    *v = 9999.0;
                }
            }
            mutated_paths.push(Points::from_1d(vals));
        }
        let mutated = LinkedPanel::new(mutated_paths).unwrap();
        let shielded = sw_dpdd_forecast(&mutated, origin, 6, 1, &cfg).unwrap();
        assert_eq!(base.values(), shielded.values());
    }

    #[test]
    fn zero_step_window_forecast_reconstructs_current_projection() {
        let panel = stationary_panel(60, 10, 6);
        let cfg = DpddFitConfig {
            degree: 3,
            ..Default::default()
        };
        let fd = sw_dpdd_forecast(&panel, 9, 8, 0, &cfg).unwrap();
        assert!((fd.integral() - 1.0).abs() < 1e-6);
        assert_eq!(fd.horizon, 0.0);
    }

    #[test]
    fn diagnostics_serialize_to_single_lines() {
        let panel = stationary_panel(60, 10, 7);
        let cfg = DpddFitConfig {
            degree: 3,
            ..Default::default()
        };
        let (_, diag) = sw_dpdd_forecast_with_diagnostics(&panel, 9, 8, 1, &cfg).unwrap();
        let line = diag.to_json_line();
        assert!(!line.contains('\n'));
        assert!(line.contains("\"mode_count\""));
    }

    /// On a stationary panel a near-full window is close to the global error.
    #[test]
    fn wide_window_error_close_to_global_on_stationary_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rel_gaps = Vec::new();
        for seed in 0..5 {
            let panel = stationary_panel(150, 20, 40 + seed);
            let cfg = DpddFitConfig {
                degree: 3,
                ..Default::default()
            };
            let t0 = 14;
            let global_model = fit_dpdd_window(&panel, 0..=t0 - 1, &cfg).unwrap();
            let grid = cfg.grid_for(&global_model).unwrap();
            let mut err_global = 0.0;
            let mut err_sw = 0.0;
            let w = 12; // >= 80% of the 14 training snapshots
            for t in t0..20 {
                let target = panel.cross_section(t);
                let g_fc =
                    dpdd_forecast(&global_model, &panel.cross_section(t - 1), cfg.dt, &grid)
                        .unwrap();
                let s_fc = sw_dpdd_forecast(&panel, t - 1, w, 1, &cfg).unwrap();
                err_global += crate::transport::w2_density_vs_samples(&g_fc, &target, t as u64)
                    .unwrap()
                    .powi(2);
                err_sw += crate::transport::w2_density_vs_samples(&s_fc, &target, t as u64)
                    .unwrap()
                    .powi(2);
            }
            rel_gaps.push((err_sw - err_global).abs() / err_global);
            let _ = rng.gen::<f64>();
        }
        rel_gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rel_gaps[rel_gaps.len() / 2];
        assert!(median <= 0.20, "median relative gap {median}");
    }
}
