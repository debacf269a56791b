//! Quantile-autoregression baseline: functional PCA on the panel's quantile
//! curves, an independent AR(1) per retained score, and a monotone projection
//! of the reconstructed forecast curve.

use nalgebra::DMatrix;

use crate::transport::{empirical_quantiles, QuantileCurve};
use crate::{DpddError, Points, Result};

/// Default evaluation grid for quantile curves: equispaced in [0.005, 0.995].
pub fn default_u_grid(n: usize) -> Vec<f64> {
    let (lo, hi) = (0.005, 0.995);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Functional PCA of a panel of quantile curves.
#[derive(Debug, Clone)]
pub struct FpcaModel {
    u_grid: Vec<f64>,
    mean_curve: Vec<f64>,
    /// Orthonormal components under the grid inner product ⟨f,g⟩ = Σ f g / U.
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    pub explained_variance: f64,
}

/// Row t is the empirical quantile curve of panel slice t on `u_grid`.
pub fn quantile_matrix(panel: &[Points], u_grid: &[f64]) -> Result<DMatrix<f64>> {
    if panel.is_empty() {
        return Err(DpddError::InvalidInput("empty panel".into()));
    }
    let t_len = panel.len();
    let u_len = u_grid.len();
    let mut m = DMatrix::zeros(t_len, u_len);
    for (t, slice) in panel.iter().enumerate() {
        if slice.is_empty() {
            return Err(DpddError::InvalidInput(format!(
                "distribution at time {t} is empty"
            )));
        }
        if slice.dim() != 1 {
            return Err(DpddError::DimensionMismatch {
                expected: 1,
                got: slice.dim(),
            });
        }
        let q = empirical_quantiles(slice.as_1d(), u_grid);
        for (u, val) in q.iter().enumerate() {
            m[(t, u)] = *val;
        }
    }
    Ok(m)
}

/// Center the rows, eigendecompose the grid-weighted covariance, and retain
/// the smallest number of components whose cumulative eigenvalue fraction
/// reaches `threshold`. A rank-zero covariance yields a mean-only model.
pub fn fpca(matrix: &DMatrix<f64>, u_grid: &[f64], threshold: f64) -> Result<FpcaModel> {
    let (t_len, u_len) = matrix.shape();
    if t_len < 3 {
        return Err(DpddError::InvalidInput(
            "FPCA needs at least 3 curves".into(),
        ));
    }
    if u_len != u_grid.len() {
        return Err(DpddError::DimensionMismatch {
            expected: u_grid.len(),
            got: u_len,
        });
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DpddError::InvalidInput("threshold must lie in (0, 1]".into()));
    }
    let grid_w = 1.0 / u_len as f64;
    let mean_curve: Vec<f64> = (0..u_len)
        .map(|u| matrix.column(u).sum() / t_len as f64)
        .collect();
    let mut centered = matrix.clone();
    for t in 0..t_len {
        for u in 0..u_len {
            centered[(t, u)] -= mean_curve[u];
        }
    }
    // grid-weighted covariance: C = (Δu / (T-1)) Xᵀ X
    let cov = centered.transpose() * &centered * (grid_w / (t_len as f64 - 1.0));
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..u_len).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    if !(total > 1e-24) {
        return Ok(FpcaModel {
            u_grid: u_grid.to_vec(),
            mean_curve,
            components: Vec::new(),
            eigenvalues: Vec::new(),
            explained_variance: 1.0,
        });
    }

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut cumulative = 0.0;
    for &idx in &order {
        let ev = eig.eigenvalues[idx].max(0.0);
        if ev <= 1e-12 * total {
            break;
        }
        // normalize to unit grid inner product: Σ v² Δu = 1
        let col = eig.eigenvectors.column(idx);
        let norm = (col.iter().map(|v| v * v).sum::<f64>() * grid_w).sqrt();
        let mut comp: Vec<f64> = col.iter().map(|v| v / norm).collect();
        // deterministic sign: largest-magnitude entry positive
        let lead = comp
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components.push(comp);
        eigenvalues.push(ev);
        cumulative += ev;
        if cumulative / total >= threshold {
            break;
        }
    }
    Ok(FpcaModel {
        u_grid: u_grid.to_vec(),
        mean_curve,
        components,
        eigenvalues,
        explained_variance: cumulative / total,
    })
}

impl FpcaModel {
    pub fn retained(&self) -> usize {
        self.components.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean_curve(&self) -> &[f64] {
        &self.mean_curve
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    /// Score vector of one curve: grid inner products with the components.
    pub fn scores(&self, curve: &[f64]) -> Vec<f64> {
        let grid_w = 1.0 / self.u_grid.len() as f64;
        self.components
            .iter()
            .map(|comp| {
                curve
                    .iter()
                    .zip(comp)
                    .zip(&self.mean_curve)
                    .map(|((c, v), m)| (c - m) * v)
                    .sum::<f64>()
                    * grid_w
            })
            .collect()
    }

    /// Score matrix (T×K) of a quantile-curve matrix.
    pub fn score_matrix(&self, matrix: &DMatrix<f64>) -> DMatrix<f64> {
        let t_len = matrix.nrows();
        let k = self.retained();
        let mut out = DMatrix::zeros(t_len, k);
        for t in 0..t_len {
            let curve: Vec<f64> = matrix.row(t).iter().copied().collect();
            for (j, s) in self.scores(&curve).into_iter().enumerate() {
                out[(t, j)] = s;
            }
        }
        out
    }

    /// Reconstruct a curve from scores, without the monotone projection.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut curve = self.mean_curve.clone();
        for (s, comp) in scores.iter().zip(&self.components) {
            for (c, v) in curve.iter_mut().zip(comp) {
                *c += s * v;
            }
        }
        curve
    }
}

/// Per-component AR(1) fits on the score series.
#[derive(Debug, Clone)]
pub struct ScoreAr1 {
    pub coeff: Vec<f64>,
    pub intercept: Vec<f64>,
    pub innovation_var: Vec<f64>,
    /// Components whose |a_k| reached 1 (flagged, not altered).
    pub nonstationary: Vec<usize>,
}

/// Least-squares AR(1) with intercept, fitted independently per component.
pub fn fit_score_ar1(scores: &DMatrix<f64>) -> Result<ScoreAr1> {
    let (t_len, k) = scores.shape();
    if t_len < 3 {
        return Err(DpddError::InvalidInput(
            "AR(1) fitting needs at least 3 score rows".into(),
        ));
    }
    let mut coeff = Vec::with_capacity(k);
    let mut intercept = Vec::with_capacity(k);
    let mut innovation_var = Vec::with_capacity(k);
    let mut nonstationary = Vec::new();
    let n = (t_len - 1) as f64;
    for j in 0..k {
        let xs: Vec<f64> = (0..t_len - 1).map(|t| scores[(t, j)]).collect();
        let ys: Vec<f64> = (1..t_len).map(|t| scores[(t, j)]).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let b = my - a * mx;
        let resid_var = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - a * x - b;
                e * e
            })
            .sum::<f64>()
            / n;
        if a.abs() >= 1.0 {
            nonstationary.push(j);
        }
        coeff.push(a);
        intercept.push(b);
        innovation_var.push(resid_var);
    }
    Ok(ScoreAr1 {
        coeff,
        intercept,
        innovation_var,
        nonstationary,
    })
}

/// Monotone (nondecreasing) projection via pool-adjacent-violators.
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    // blocks of (mean, count)
    let mut means: Vec<f64> = Vec::with_capacity(values.len());
    let mut counts: Vec<usize> = Vec::with_capacity(values.len());
    for &v in values {
        means.push(v);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, c2) = (means.pop().unwrap(), counts.pop().unwrap());
            let last = means.len() - 1;
            let c1 = counts[last];
            means[last] = (means[last] * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64;
            counts[last] = c1 + c2;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, c) in means.into_iter().zip(counts) {
        out.extend(std::iter::repeat(m).take(c));
    }
    out
}

/// Forecast the quantile curve h steps ahead: iterate the score AR(1) from
/// the last row of `scores_history`, reconstruct, and project onto the
/// monotone cone.
pub fn war_forecast(
    model: &FpcaModel,
    ar: &ScoreAr1,
    scores_history: &DMatrix<f64>,
    h: usize,
) -> Result<QuantileCurve> {
    if h == 0 {
        return Err(DpddError::InvalidInput("forecast horizon must be >= 1".into()));
    }
    if scores_history.nrows() == 0 {
        return Err(DpddError::InvalidInput("empty score history".into()));
    }
    let k = model.retained();
    let last = scores_history.nrows() - 1;
    let mut s: Vec<f64> = (0..k).map(|j| scores_history[(last, j)]).collect();
    for _ in 0..h {
        for j in 0..k {
            s[j] = ar.coeff[j] * s[j] + ar.intercept[j];
        }
    }
    let curve = isotonic_nondecreasing(&model.reconstruct(&s));
    QuantileCurve::new(model.u_grid.to_vec(), curve)
}

/// Convenience bundle: FPCA + AR(1) fitted on a training panel.
#[derive(Debug, Clone)]
pub struct WarModel {
    pub fpca: FpcaModel,
    pub ar: ScoreAr1,
}

/// Fit the full baseline on training slices.
pub fn fit_war(panel: &[Points], u_grid: &[f64], threshold: f64) -> Result<WarModel> {
    let matrix = quantile_matrix(panel, u_grid)?;
    let fpca_model = fpca(&matrix, u_grid, threshold)?;
    let scores = fpca_model.score_matrix(&matrix);
    let ar = if fpca_model.retained() == 0 {
        ScoreAr1 {
            coeff: Vec::new(),
            intercept: Vec::new(),
            innovation_var: Vec::new(),
            nonstationary: Vec::new(),
        }
    } else {
        fit_score_ar1(&scores)?
    };
    Ok(WarModel { fpca: fpca_model, ar })
}

impl WarModel {
    /// One-step-ahead forecast from an observed origin distribution.
    pub fn forecast_from(&self, origin: &Points, h: usize) -> Result<QuantileCurve> {
        let curve = empirical_quantiles(origin.as_1d(), self.fpca.u_grid());
        let scores = self.fpca.scores(&curve);
        let mut history = DMatrix::zeros(1, scores.len());
        for (j, s) in scores.iter().enumerate() {
            history[(0, j)] = *s;
        }
        war_forecast(&self.fpca, &self.ar, &history, h)
    }
}
