//! Weighted EDMD estimation of the Koopman operator and its leading eigenpairs.
//!
//! Given transition pairs (z_k, z_{k+1}), importance weights w_k and a
//! dictionary Ψ, the moment matrices are
//!
//! ```text
//! G = Σ_k w_k Ψ(z_k) Ψ(z_k)ᵀ,    A = Σ_k w_k Ψ(z_{k+1}) Ψ(z_k)ᵀ,
//! ```
//!
//! and the operator estimate is K̂ = A G†. Eigenfunction coefficient vectors
//! ξ_j (φ_j = ξ_jᵀ Ψ) are the right eigenvectors of G† Aᵀ; by default the
//! solve is carried out in whitened coordinates Ψ̃ = G^{-1/2} Ψ, where the
//! effective Gram is the identity, and mapped back. Modes are scaled so their
//! plain (unweighted) empirical second moment over the source points is 1,
//! which makes them an orthonormal system in L²(p̂_s) and keeps projection and
//! reconstruction consistent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::Dictionary;
use crate::density::{KdeModel, WeightVector};
use crate::{DpddError, Points, Result};

/// Eigenvalues within this distance of 1 are candidates for the trivial
/// (stationary-baseline) mode.
const TRIVIAL_TOLERANCE: f64 = 0.02;
/// Eigenvalues with modulus above 1 + this are flagged unstable.
const UNSTABLE_SLACK: f64 = 0.05;
/// Scale-invariant trigger for Gram ridge regularization.
const REGULARIZATION_TRIGGER: f64 = 1e-10;

/// Weighted Gram/cross moment matrices plus the plain averaged Gram used for
/// mode scaling.
#[derive(Debug, Clone)]
pub struct MomentMatrices {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    gram_plain: DMatrix<f64>,
    sample_count: usize,
    weights: WeightVector,
    /// Fewer pairs than dictionary functions: the fit is underdetermined.
    pub underdetermined: bool,
}

impl MomentMatrices {
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn gram_plain(&self) -> &DMatrix<f64> {
        &self.gram_plain
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Assemble from precomputed matrices (advanced use and tests).
    pub fn from_parts(
        gram: DMatrix<f64>,
        cross: DMatrix<f64>,
        gram_plain: DMatrix<f64>,
        sample_count: usize,
        weights: WeightVector,
    ) -> Result<Self> {
        if !gram.is_square() || gram.shape() != cross.shape() || gram.shape() != gram_plain.shape()
        {
            return Err(DpddError::InvalidInput(
                "moment matrices must be square and share a shape".into(),
            ));
        }
        Ok(MomentMatrices {
            gram,
            cross,
            gram_plain,
            sample_count,
            weights,
            underdetermined: sample_count < 1,
        })
    }
}

/// Moment matrices from a contiguous trajectory of M+1 points (M pairs).
pub fn moment_matrices(
    trajectory: &Points,
    weights: &WeightVector,
    dict: &Dictionary,
) -> Result<MomentMatrices> {
    let n = trajectory.len();
    if n < 2 {
        return Err(DpddError::InvalidInput(
            "trajectory needs at least 2 points".into(),
        ));
    }
    if weights.len() != n - 1 {
        return Err(DpddError::InvalidInput(format!(
            "weight count {} does not match the {} transition pairs",
            weights.len(),
            n - 1
        )));
    }
    let mut x = Points::empty(trajectory.dim());
    let mut y = Points::empty(trajectory.dim());
    for k in 0..n - 1 {
        x.push_row(trajectory.row(k));
        y.push_row(trajectory.row(k + 1));
    }
    moment_matrices_from_pairs(&x, &y, weights, dict)
}

/// Moment matrices from explicit transition pairs (z_k, z_{k+1}); this is the
/// entry point for pooled multi-trajectory data, where pairs never span paths.
pub fn moment_matrices_from_pairs(
    x: &Points,
    y: &Points,
    weights: &WeightVector,
    dict: &Dictionary,
) -> Result<MomentMatrices> {
    let m = x.len();
    if m == 0 {
        return Err(DpddError::InvalidInput("no transition pairs".into()));
    }
    if y.len() != m || weights.len() != m {
        return Err(DpddError::InvalidInput(format!(
            "pair sides and weights disagree: x={}, y={}, w={}",
            m,
            y.len(),
            weights.len()
        )));
    }
    if x.dim() != dict.dim() || y.dim() != dict.dim() {
        return Err(DpddError::DimensionMismatch {
            expected: dict.dim(),
            got: x.dim(),
        });
    }
    let j = dict.size();
    let mut gram = DMatrix::<f64>::zeros(j, j);
    let mut cross = DMatrix::<f64>::zeros(j, j);
    let mut gram_plain = DMatrix::<f64>::zeros(j, j);
    let mut fx = vec![0.0; j];
    let mut fy = vec![0.0; j];
    let w = weights.as_slice();
    for k in 0..m {
        dict.eval_features_into(x.row(k), &mut fx)?;
        dict.eval_features_into(y.row(k), &mut fy)?;
        let wk = w[k];
        for a in 0..j {
            let wfa = wk * fx[a];
            let fa = fx[a];
            for b in 0..j {
                gram[(a, b)] += wfa * fx[b];
                cross[(a, b)] += wk * fy[a] * fx[b];
                gram_plain[(a, b)] += fa * fx[b];
            }
        }
    }
    gram_plain /= m as f64;
    // numerical symmetrization
    let gram = (&gram + gram.transpose()) * 0.5;
    let gram_plain = (&gram_plain + gram_plain.transpose()) * 0.5;
    Ok(MomentMatrices {
        gram,
        cross,
        gram_plain,
        sample_count: m,
        weights: weights.clone(),
        underdetermined: m < j,
    })
}

/// Options for [`fit_koopman`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Ridge added to the Gram when its smallest eigenvalue falls below the
    /// scale-invariant trigger.
    pub ridge: f64,
    /// Solve in whitened coordinates (identity effective Gram).
    pub whiten: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: 1e-8,
            whiten: true,
        }
    }
}

/// Mode truncation rule for [`truncate_modes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    /// Keep the r largest-modulus nontrivial modes; conjugate pairs are never
    /// split (the partner of a kept mode is kept too).
    Fixed(usize),
    /// Keep nontrivial modes with |μ_j| >= ρ · max_k |μ_k|.
    ModulusRatio(f64),
}

/// Fitted Koopman spectral model: operator estimate, full eigensystem, the
/// retained (propagated) mode set, and the handles needed to forecast.
/// Immutable and shareable once constructed.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    operator: DMatrix<f64>,
    eigenvalues: Vec<Complex64>,
    eigenvectors: DMatrix<Complex64>,
    rates: Vec<Complex64>,
    dt: f64,
    retained: Vec<usize>,
    trivial: Option<usize>,
    unstable: Vec<usize>,
    dictionary: Dictionary,
    stationary_density: KdeModel,
}

/// Estimate the Koopman operator from moment matrices and extract its
/// eigensystem. Returns the pre-truncation model: every usable nontrivial
/// mode is retained.
pub fn fit_koopman(
    m: &MomentMatrices,
    dt: f64,
    options: &FitOptions,
    dict: &Dictionary,
    stationary_density: &KdeModel,
) -> Result<KoopmanModel> {
    let j = dict.size();
    if m.gram.nrows() != j {
        return Err(DpddError::DimensionMismatch {
            expected: j,
            got: m.gram.nrows(),
        });
    }
    if !(dt > 0.0) {
        return Err(DpddError::InvalidInput("dt must be positive".into()));
    }
    for v in m.gram.iter().chain(m.cross.iter()) {
        if !v.is_finite() {
            return Err(DpddError::InvalidInput(
                "moment matrices contain non-finite entries".into(),
            ));
        }
    }
    let trace = m.gram.trace();
    if !(trace > 0.0) {
        return Err(DpddError::Degenerate("gram matrix is identically zero".into()));
    }

    // Gram eigendecomposition, with ridge regularization when ill conditioned.
    let mut gram = m.gram.clone();
    let mut eig = nalgebra::SymmetricEigen::new(gram.clone());
    let lambda_min = eig.eigenvalues.min();
    if lambda_min < REGULARIZATION_TRIGGER * trace / j as f64 {
        for i in 0..j {
            gram[(i, i)] += options.ridge;
        }
        eig = nalgebra::SymmetricEigen::new(gram.clone());
    }
    let lambda_max = eig.eigenvalues.max().max(0.0);
    let cutoff = j.max(m.sample_count) as f64 * f64::EPSILON * lambda_max;

    let pinv_diag = DVector::from_iterator(
        j,
        eig.eigenvalues.iter().map(|&s| if s > cutoff { 1.0 / s } else { 0.0 }),
    );
    let gram_pinv = &eig.eigenvectors
        * DMatrix::from_diagonal(&pinv_diag)
        * eig.eigenvectors.transpose();
    let operator = &m.cross * &gram_pinv;

    // Eigenfunction coefficients are right eigenvectors of G† Aᵀ.
    let (mut mu, mut xi) = if options.whiten {
        let isqrt_diag = DVector::from_iterator(
            j,
            eig.eigenvalues
                .iter()
                .map(|&s| if s > cutoff { 1.0 / s.sqrt() } else { 0.0 }),
        );
        let white = &eig.eigenvectors
            * DMatrix::from_diagonal(&isqrt_diag)
            * eig.eigenvectors.transpose();
        let b = &white * m.cross.transpose() * &white;
        let (mu, u) = complex_eig(&b)?;
        let white_c = white.map(|v| Complex64::new(v, 0.0));
        (mu, &white_c * u)
    } else {
        let c = &gram_pinv * m.cross.transpose();
        complex_eig(&c)?
    };

    sort_and_pair(&mut mu, &mut xi);

    // Scale each mode to unit plain empirical second moment and drop modes
    // whose eigenfunction vanishes on the data (null directions of the Gram).
    let gp = m.gram_plain.map(|v| Complex64::new(v, 0.0));
    let mut norms = vec![0.0; j];
    for k in 0..j {
        let col = xi.column(k);
        let q = (col.adjoint() * &gp * col)[(0, 0)].re;
        norms[k] = q.max(0.0);
    }
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let mut usable = vec![true; j];
    for k in 0..j {
        if norms[k] <= 1e-14 * max_norm || norms[k] == 0.0 {
            usable[k] = false;
            continue;
        }
        let scale = Complex64::new(1.0 / norms[k].sqrt(), 0.0);
        for i in 0..j {
            xi[(i, k)] *= scale;
        }
    }
    fix_phases_and_conjugates(&mut mu, &mut xi);

    // Trivial mode: within tolerance of μ=1 and maximal overlap with the
    // constant feature under the plain empirical inner product.
    let mut trivial: Option<usize> = None;
    let mut best_overlap = -1.0;
    for k in 0..j {
        if !usable[k] || (mu[k] - Complex64::new(1.0, 0.0)).norm() >= TRIVIAL_TOLERANCE {
            continue;
        }
        let overlap = (0..j)
            .map(|i| Complex64::new(m.gram_plain[(0, i)], 0.0) * xi[(i, k)])
            .sum::<Complex64>()
            .norm();
        if overlap > best_overlap {
            best_overlap = overlap;
            trivial = Some(k);
        }
    }

    let rates: Vec<Complex64> = mu.iter().map(|&v| v.ln() / dt).collect();
    let unstable: Vec<usize> = (0..j)
        .filter(|&k| usable[k] && mu[k].norm() > 1.0 + UNSTABLE_SLACK)
        .collect();
    let retained: Vec<usize> = (0..j)
        .filter(|&k| usable[k] && Some(k) != trivial)
        .collect();

    Ok(KoopmanModel {
        operator,
        eigenvalues: mu,
        eigenvectors: xi,
        rates,
        dt,
        retained,
        trivial,
        unstable,
        dictionary: dict.clone(),
        stationary_density: stationary_density.clone(),
    })
}

/// Narrow the retained mode set of a fitted model.
pub fn truncate_modes(model: &KoopmanModel, rule: TruncationRule) -> Result<KoopmanModel> {
    let available = &model.retained;
    if available.is_empty() {
        return Err(DpddError::Degenerate("model has no nontrivial modes".into()));
    }
    let keep: Vec<usize> = match rule {
        TruncationRule::Fixed(r) => {
            if r == 0 {
                return Err(DpddError::InvalidInput("cannot retain zero modes".into()));
            }
            if r > available.len() {
                return Err(DpddError::InvalidInput(format!(
                    "requested {} modes but only {} nontrivial modes are available",
                    r,
                    available.len()
                )));
            }
            let mut keep: Vec<usize> = available.iter().copied().take(r).collect();
            // never split a conjugate pair: pull in the partner of the last mode
            if let Some(&last) = keep.last() {
                if model.eigenvalues[last].im != 0.0 {
                    let partner = available.iter().copied().find(|&k| {
                        !keep.contains(&k) && model.eigenvalues[k] == model.eigenvalues[last].conj()
                    });
                    if let Some(p) = partner {
                        keep.push(p);
                    }
                }
            }
            keep
        }
        TruncationRule::ModulusRatio(rho) => {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(DpddError::InvalidInput(
                    "modulus ratio must lie in (0, 1]".into(),
                ));
            }
            let max_mod = available
                .iter()
                .map(|&k| model.eigenvalues[k].norm())
                .fold(0.0, f64::max);
            available
                .iter()
                .copied()
                .filter(|&k| model.eigenvalues[k].norm() >= rho * max_mod)
                .collect()
        }
    };
    if keep.is_empty() {
        return Err(DpddError::Degenerate("truncation removed every mode".into()));
    }
    let mut out = model.clone();
    out.retained = keep;
    Ok(out)
}

impl KoopmanModel {
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// All eigenvalues, sorted by descending modulus.
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// All eigenfunction coefficient vectors (column k belongs to μ_k), in
    /// original dictionary coordinates.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    /// Continuous-time rates λ_j = log μ_j / Δt (principal branch).
    pub fn rates(&self) -> &[Complex64] {
        &self.rates
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Indices of the propagated (retained, nontrivial) modes.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn trivial_mode(&self) -> Option<usize> {
        self.trivial
    }

    /// Indices of modes flagged as unstable (|μ| > 1.05). They are kept.
    pub fn unstable(&self) -> &[usize] {
        &self.unstable
    }

    pub fn mode_count(&self) -> usize {
        self.retained.len()
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn stationary_density(&self) -> &KdeModel {
        &self.stationary_density
    }

    /// Rates of the retained modes, in retained order.
    pub fn retained_rates(&self) -> Vec<Complex64> {
        self.retained.iter().map(|&k| self.rates[k]).collect()
    }

    /// Evaluate the retained eigenfunctions φ_j(x) = ξ_jᵀ Ψ(x).
    pub fn eval_retained_modes(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        let feats = self.dictionary.eval_features(x)?;
        Ok(self
            .retained
            .iter()
            .map(|&k| {
                feats
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| self.eigenvectors[(i, k)] * f)
                    .sum()
            })
            .collect())
    }

    /// Evaluate retained eigenfunctions for many points; one row per point.
    pub fn eval_retained_modes_many(&self, pts: &Points) -> Result<Vec<Vec<Complex64>>> {
        pts.rows().map(|r| self.eval_retained_modes(r)).collect()
    }
}

/// Spectral (operator 2-) norm via SVD.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn complex_eig(m: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    use faer::complex_native::c64;
    let n = m.nrows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm.eigendecomposition::<c64>();
    let s = evd.s().column_vector();
    let u = evd.u();
    let vals: Vec<Complex64> = (0..n).map(|i| Complex64::new(s[i].re, s[i].im)).collect();
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(DpddError::Eigen("eigensolver produced non-finite values".into()));
    }
    let vecs = DMatrix::from_fn(n, n, |i, j| Complex64::new(u[(i, j)].re, u[(i, j)].im));
    Ok((vals, vecs))
}

/// Sort by descending |μ| (ties: descending real part, then descending
/// imaginary part, so the +imag member of a pair comes first).
fn sort_and_pair(mu: &mut [Complex64], xi: &mut DMatrix<Complex64>) {
    let n = mu.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        mu[b]
            .norm()
            .partial_cmp(&mu[a].norm())
            .unwrap()
            .then(mu[b].re.partial_cmp(&mu[a].re).unwrap())
            .then(mu[b].im.partial_cmp(&mu[a].im).unwrap())
    });
    let sorted_mu: Vec<Complex64> = order.iter().map(|&i| mu[i]).collect();
    let sorted_xi = DMatrix::from_fn(n, n, |i, j| xi[(i, order[j])]);
    mu.copy_from_slice(&sorted_mu);
    *xi = sorted_xi;
}

/// Deterministic phases, clean real modes, and exactly conjugate pairs.
fn fix_phases_and_conjugates(mu: &mut [Complex64], xi: &mut DMatrix<Complex64>) {
    let n = mu.len();
    let j = xi.nrows();
    let mut k = 0;
    while k < n {
        let real_tol = 1e-9 * (1.0 + mu[k].norm());
        if mu[k].im.abs() <= real_tol {
            // real mode: rotate to a real vector, discard residual phases
            mu[k].im = 0.0;
            rotate_to_real(xi, k);
            for i in 0..j {
                xi[(i, k)].im = 0.0;
            }
            k += 1;
            continue;
        }
        // complex mode: locate its conjugate partner among the remaining modes
        let partner = (k + 1..n)
            .filter(|&p| (mu[p] - mu[k].conj()).norm() <= 1e-6 * (1.0 + mu[k].norm()))
            .min_by(|&a, &b| {
                (mu[a] - mu[k].conj())
                    .norm()
                    .partial_cmp(&(mu[b] - mu[k].conj()).norm())
                    .unwrap()
            });
        match partner {
            Some(p) => {
                if p != k + 1 {
                    mu.swap(p, k + 1);
                    xi.swap_columns(p, k + 1);
                }
                rotate_to_real(xi, k);
                mu[k + 1] = mu[k].conj();
                for i in 0..j {
                    xi[(i, k + 1)] = xi[(i, k)].conj();
                }
                k += 2;
            }
            None => {
                rotate_to_real(xi, k);
                k += 1;
            }
        }
    }
}

/// Rotate column k so its largest-modulus component is real and positive.
fn rotate_to_real(xi: &mut DMatrix<Complex64>, k: usize) {
    let j = xi.nrows();
    let mut best = 0;
    let mut best_mod = -1.0;
    for i in 0..j {
        let m = xi[(i, k)].norm();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod <= 0.0 {
        return;
    }
    let phase = xi[(best, k)] / Complex64::new(best_mod, 0.0);
    let rot = phase.conj();
    for i in 0..j {
        xi[(i, k)] *= rot;
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// On-disk form of a fitted model (JSON). Complex numbers are (re, im) pairs;
/// the operator is row-major; eigenvector k is the dictionary-coordinate
/// coefficient vector of mode k.
#[derive(Debug, Serialize, Deserialize)]
pub struct KoopmanModelFile {
    pub schema: String,
    pub dt: f64,
    pub operator_dim: usize,
    pub operator_row_major: Vec<f64>,
    pub eigenvalues: Vec<(f64, f64)>,
    pub eigenvectors: Vec<Vec<(f64, f64)>>,
    pub rates: Vec<(f64, f64)>,
    pub retained: Vec<usize>,
    pub trivial_mode: Option<usize>,
    pub unstable: Vec<usize>,
    pub dictionary: Dictionary,
    pub kde: KdeModel,
}

pub const MODEL_SCHEMA: &str = "dpdd-koopman-model/1";

impl From<&KoopmanModel> for KoopmanModelFile {
    fn from(m: &KoopmanModel) -> Self {
        let j = m.operator.nrows();
        KoopmanModelFile {
            schema: MODEL_SCHEMA.to_string(),
            dt: m.dt,
            operator_dim: j,
            operator_row_major: (0..j)
                .flat_map(|i| (0..j).map(move |c| (i, c)))
                .map(|(i, c)| m.operator[(i, c)])
                .collect(),
            eigenvalues: m.eigenvalues.iter().map(|v| (v.re, v.im)).collect(),
            eigenvectors: (0..m.eigenvectors.ncols())
                .map(|k| {
                    (0..j)
                        .map(|i| {
                            let v = m.eigenvectors[(i, k)];
                            (v.re, v.im)
                        })
                        .collect()
                })
                .collect(),
            rates: m.rates.iter().map(|v| (v.re, v.im)).collect(),
            retained: m.retained.clone(),
            trivial_mode: m.trivial,
            unstable: m.unstable.clone(),
            dictionary: m.dictionary.clone(),
            kde: m.stationary_density.clone(),
        }
    }
}

impl TryFrom<KoopmanModelFile> for KoopmanModel {
    type Error = DpddError;

    fn try_from(f: KoopmanModelFile) -> Result<Self> {
        if f.schema != MODEL_SCHEMA {
            return Err(DpddError::InvalidInput(format!(
                "unsupported model schema '{}'",
                f.schema
            )));
        }
        let j = f.operator_dim;
        if f.operator_row_major.len() != j * j || f.eigenvalues.len() != j {
            return Err(DpddError::InvalidInput("model file shape is inconsistent".into()));
        }
        let operator = DMatrix::from_fn(j, j, |i, c| f.operator_row_major[i * j + c]);
        let eigenvectors = DMatrix::from_fn(j, j, |i, k| {
            let (re, im) = f.eigenvectors[k][i];
            Complex64::new(re, im)
        });
        Ok(KoopmanModel {
            operator,
            eigenvalues: f.eigenvalues.iter().map(|&(r, i)| Complex64::new(r, i)).collect(),
            eigenvectors,
            rates: f.rates.iter().map(|&(r, i)| Complex64::new(r, i)).collect(),
            dt: f.dt,
            retained: f.retained,
            trivial: f.trivial_mode,
            unstable: f.unstable,
            dictionary: f.dictionary,
            stationary_density: f.kde,
        })
    }
}

impl KoopmanModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&KoopmanModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: KoopmanModelFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_dictionary, BasisKind, Standardization};
    use crate::density::{kde_fit, Bandwidth};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn dict_1d(degree: usize) -> Dictionary {
        build_dictionary(BasisKind::Hermite, degree, 1, Standardization::identity(1)).unwrap()
    }

    fn dummy_kde() -> KdeModel {
        kde_fit(Points::from_1d(vec![0.0, 1.0]), Bandwidth::Fixed(vec![1.0])).unwrap()
    }

    fn fit_from_matrices(gram: DMatrix<f64>, cross: DMatrix<f64>, dict: &Dictionary) -> KoopmanModel {
        let j = gram.nrows();
        let m = MomentMatrices::from_parts(
            gram.clone(),
            cross,
            gram.clone(),
            100,
            WeightVector::uniform(100).unwrap(),
        )
        .unwrap();
        fit_koopman(&m, 1.0, &FitOptions::default(), dict, &dummy_kde())
            .unwrap_or_else(|e| panic!("fit failed for J={j}: {e}"))
    }

    #[test]
    fn constant_trajectory_gives_rank_one_moments() {
        let dict = dict_1d(1);
        let traj = Points::from_1d(vec![2.0; 6]);
        let w = WeightVector::uniform(5).unwrap();
        let m = moment_matrices(&traj, &w, &dict).unwrap();
        let psi = dict.eval_features(&[2.0]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expect = psi[a] * psi[b];
                assert!((m.gram()[(a, b)] - expect).abs() < 1e-12);
                assert!((m.cross()[(a, b)] - expect).abs() < 1e-12);
            }
        }
    }

    /// The constant-feature corner of the moments is exactly Σ w_k = 1.
    #[test]
    fn constant_feature_entry_is_one() {
        let dict = dict_1d(2);
        let traj = Points::from_1d(vec![0.3, -1.2, 0.7, 2.0]);
        let w = WeightVector::uniform(3).unwrap();
        let m = moment_matrices(&traj, &w, &dict).unwrap();
        assert!((m.gram()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((m.cross()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments_match_direct_summation_oracle() {
        let dict = dict_1d(1);
        let traj = Points::from_1d(vec![0.5, -1.0, 2.0]);
        let w = crate::density::normalize_densities(vec![0.3, 0.7]).unwrap();
        let m = moment_matrices(&traj, &w, &dict).unwrap();
        // direct summation over the two pairs
        let mut g = [[0.0; 2]; 2];
        let mut a_mat = [[0.0; 2]; 2];
        for (k, &wk) in w.as_slice().iter().enumerate() {
            let px = dict.eval_features(traj.row(k)).unwrap();
            let py = dict.eval_features(traj.row(k + 1)).unwrap();
            for i in 0..2 {
                for c in 0..2 {
                    g[i][c] += wk * px[i] * px[c];
                    a_mat[i][c] += wk * py[i] * px[c];
                }
            }
        }
        for i in 0..2 {
            for c in 0..2 {
                assert!((m.gram()[(i, c)] - g[i][c]).abs() < 1e-15);
                assert!((m.cross()[(i, c)] - a_mat[i][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let dict = dict_1d(1);
        let traj = Points::from_1d(vec![0.0, 1.0, 2.0]);
        let w = WeightVector::uniform(5).unwrap();
        assert!(moment_matrices(&traj, &w, &dict).is_err());
    }

    #[test]
    fn underdetermined_flagged() {
        let dict = dict_1d(4);
        let traj = Points::from_1d(vec![0.0, 1.0, 2.0]);
        let w = WeightVector::uniform(2).unwrap();
        let m = moment_matrices(&traj, &w, &dict).unwrap();
        assert!(m.underdetermined);
    }

    #[test]
    fn diagonal_case_recovers_spectrum() {
        let dict = dict_1d(1);
        let model = fit_from_matrices(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5])),
            &dict,
        );
        let mu = model.eigenvalues();
        assert!((mu[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((mu[1] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((model.rates()[0]).norm() < 1e-12);
        assert!((model.rates()[1].re - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(model.trivial_mode(), Some(0));
        assert_eq!(model.retained(), &[1]);
    }

    #[test]
    fn persistent_features_give_unit_spectrum() {
        let dict = dict_1d(2);
        // A = G: K is the identity on the span
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0]);
        let m = MomentMatrices::from_parts(
            g.clone(),
            g.clone(),
            g.clone(),
            50,
            WeightVector::uniform(50).unwrap(),
        )
        .unwrap();
        let model = fit_koopman(&m, 1.0, &FitOptions::default(), &dict, &dummy_kde()).unwrap();
        for mu in model.eigenvalues() {
            assert!((mu - Complex64::new(1.0, 0.0)).norm() < 1e-10, "mu = {mu}");
        }
    }

    #[test]
    fn eigenvalues_closed_under_conjugation() {
        let dict = dict_1d(2);
        let cross = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.8, 0.3, 0.0, -0.3, 0.8]);
        let model = fit_from_matrices(DMatrix::identity(3, 3), cross, &dict);
        let mu = model.eigenvalues();
        for v in mu {
            assert!(
                mu.iter().any(|w| (*w - v.conj()).norm() < 1e-12),
                "conjugate of {v} missing"
            );
        }
        // pair is adjacent and exactly conjugate
        let pair: Vec<&Complex64> = mu.iter().filter(|v| v.im != 0.0).collect();
        assert_eq!(pair.len(), 2);
        assert_eq!(*pair[0], pair[1].conj());
    }

    #[test]
    fn conjugate_pair_never_split_by_fixed_truncation() {
        let dict = dict_1d(2);
        let cross = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.8, 0.1, 0.0, -0.1, 0.8]);
        let model = fit_from_matrices(DMatrix::identity(3, 3), cross, &dict);
        assert_eq!(model.mode_count(), 2); // the pair, trivial excluded
        let t1 = truncate_modes(&model, TruncationRule::Fixed(1)).unwrap();
        assert_eq!(t1.mode_count(), 2, "partner must come along");
        let t2 = truncate_modes(&model, TruncationRule::Fixed(2)).unwrap();
        assert_eq!(t2.mode_count(), 2);
    }

    #[test]
    fn modulus_ratio_truncation_matches_rule() {
        let dict = dict_1d(2);
        let cross = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.95, 0.5]));
        let model = fit_from_matrices(DMatrix::identity(3, 3), cross, &dict);
        assert_eq!(model.trivial_mode(), Some(0));
        let t = truncate_modes(&model, TruncationRule::ModulusRatio(0.9)).unwrap();
        let kept: Vec<f64> = t.retained().iter().map(|&k| t.eigenvalues()[k].re).collect();
        assert_eq!(kept, vec![0.95]);
    }

    #[test]
    fn truncation_rejects_bad_requests() {
        let dict = dict_1d(2);
        let cross = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.9, 0.5]));
        let model = fit_from_matrices(DMatrix::identity(3, 3), cross, &dict);
        assert!(truncate_modes(&model, TruncationRule::Fixed(0)).is_err());
        assert!(truncate_modes(&model, TruncationRule::Fixed(7)).is_err());
        assert!(truncate_modes(&model, TruncationRule::ModulusRatio(0.0)).is_err());
    }

    /// Recover a synthetic eigensystem through a non-identity Gram.
    #[test]
    fn whitened_solve_recovers_planted_spectrum() {
        let dict = dict_1d(2);
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 0.9, 0.3, 0.1, 0.0, 1.2]);
        let g = r.transpose() * &r; // SPD gram
        let planted = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.1, 0.6, 0.0, 0.0, 0.2, 0.3]);
        // K = G† Aᵀ should equal `planted`, so A = (G planted)ᵀ
        let cross = (&g * &planted).transpose();
        let m = MomentMatrices::from_parts(
            g.clone(),
            cross,
            g.clone(),
            200,
            WeightVector::uniform(200).unwrap(),
        )
        .unwrap();
        for whiten in [true, false] {
            let opts = FitOptions {
                whiten,
                ..Default::default()
            };
            let model = fit_koopman(&m, 1.0, &opts, &dict, &dummy_kde()).unwrap();
            let mut got: Vec<f64> = model.eigenvalues().iter().map(|v| v.re).collect();
            got.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, b) in got.iter().zip([1.0, 0.6, 0.3]) {
                assert!((a - b).abs() < 1e-10, "whiten={whiten}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn untriggered_regularization_is_bit_identical() {
        let dict = dict_1d(2);
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.5, 0.05, 0.0, 0.05, 1.0]);
        let cross = DMatrix::from_row_slice(3, 3, &[1.9, 0.1, 0.0, 0.1, 1.2, 0.0, 0.0, 0.0, 0.7]);
        let mk = |ridge| {
            let m = MomentMatrices::from_parts(
                g.clone(),
                cross.clone(),
                g.clone(),
                50,
                WeightVector::uniform(50).unwrap(),
            )
            .unwrap();
            fit_koopman(
                &m,
                1.0,
                &FitOptions { ridge, whiten: true },
                &dict,
                &dummy_kde(),
            )
            .unwrap()
        };
        let a = mk(1e-8);
        let b = mk(0.0);
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    fn ou_trajectory(m: usize, dt: f64, seed: u64) -> Points {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (theta, sigma) = (1.0, 0.7);
        let mut x: f64 = 0.0;
        let mut out = Vec::with_capacity(m + 1);
        // burn-in
        for _ in 0..2000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += -theta * x * dt + sigma * dt.sqrt() * z;
        }
        for _ in 0..=m {
            out.push(x);
            let z: f64 = StandardNormal.sample(&mut rng);
            x += -theta * x * dt + sigma * dt.sqrt() * z;
        }
        out.truncate(m + 1);
        Points::from_1d(out)
    }

    /// End-to-end pipeline sanity against the closed-form OU spectrum.
    #[test]
    fn ou_rates_near_analytic_spectrum() {
        let dt = 0.01;
        let traj = ou_trajectory(100_000, dt, 12345);
        let std = Standardization::from_points(&traj).unwrap();
        let dict = build_dictionary(BasisKind::Hermite, 4, 1, std).unwrap();
        let kde = kde_fit(traj.clone(), Bandwidth::Auto).unwrap();
        let mut x_side = Points::empty(1);
        for k in 0..traj.len() - 1 {
            x_side.push_row(traj.row(k));
        }
        let w = crate::density::importance_weights(&kde, &x_side).unwrap();
        let m = moment_matrices(&traj, &w, &dict).unwrap();
        let model = fit_koopman(&m, dt, &FitOptions::default(), &dict, &kde).unwrap();
        let rates = model.retained_rates();
        assert!((rates[0].re + 1.0).abs() < 0.15, "rate1 = {}", rates[0]);
        assert!((rates[1].re + 2.0).abs() < 0.5, "rate2 = {}", rates[1]);
        // mode normalization invariant under the plain empirical inner product
        let gp = m.gram_plain().map(|v| Complex64::new(v, 0.0));
        for &k in model.retained() {
            let col = model.eigenvectors().column(k);
            let q = (col.adjoint() * &gp * col)[(0, 0)].re;
            assert!((q - 1.0).abs() < 1e-8, "mode {k} norm {q}");
        }
    }

    #[test]
    fn serialization_roundtrip_is_exact() {
        let dict = dict_1d(2);
        let cross = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.8, 0.1, 0.0, -0.1, 0.8]);
        let model = fit_from_matrices(DMatrix::identity(3, 3), cross, &dict);
        let json = model.to_json().unwrap();
        let back = KoopmanModel::from_json(&json).unwrap();
        assert_eq!(model.eigenvalues(), back.eigenvalues());
        assert_eq!(model.retained(), back.retained());
        assert_eq!(model.operator(), back.operator());
        assert_eq!(model.eigenvectors(), back.eigenvectors());
    }
}
