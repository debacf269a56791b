//! Function dictionaries spanning a subspace of L²(p_s).
//!
//! A dictionary maps a point in `R^d` to a feature vector whose first entry is
//! the constant 1. Polynomial families are evaluated on affinely standardized
//! coordinates via stable recurrences; multivariate dictionaries are tensor
//! products truncated by total degree.

use serde::{Deserialize, Serialize};

use crate::{DpddError, Points, Result};

/// Polynomial family of the dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Probabilists' Hermite polynomials He_n.
    Hermite,
    /// Plain monomials x^n.
    Monomial,
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisKind::Hermite => write!(f, "hermite"),
            BasisKind::Monomial => write!(f, "monomial"),
        }
    }
}

/// Per-axis affine standardization applied before polynomial evaluation:
/// `x̃ = (x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Self {
        Standardization {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Standardize by the per-axis mean and standard deviation of `points`.
    pub fn from_points(points: &Points) -> Result<Self> {
        let (shift, scale) = points.mean_std()?;
        for (axis, s) in scale.iter().enumerate() {
            if !(*s > 0.0) {
                return Err(DpddError::Degenerate(format!(
                    "axis {axis} has zero variance; cannot standardize"
                )));
            }
        }
        Ok(Standardization { shift, scale })
    }
}

/// An evaluable polynomial dictionary. Immutable after construction;
/// evaluation is pure and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    kind: BasisKind,
    max_degree: usize,
    dim: usize,
    standardization: Standardization,
    /// Multi-indices ordered by (total degree, lexicographic); the first is
    /// the all-zero index, so the first feature is the constant 1.
    multi_indices: Vec<Vec<usize>>,
}

/// Build a dictionary of the given kind and per-axis degree cap.
///
/// The size J is the number of multi-indices with total degree `<= max_degree`,
/// i.e. binomial(dim + max_degree, dim).
pub fn build_dictionary(
    kind: BasisKind,
    max_degree: usize,
    dim: usize,
    standardization: Standardization,
) -> Result<Dictionary> {
    if max_degree == 0 {
        return Err(DpddError::InvalidInput(
            "max_degree must be >= 1 (degree 0 is a degenerate dictionary)".into(),
        ));
    }
    if dim == 0 {
        return Err(DpddError::InvalidInput("dim must be >= 1".into()));
    }
    if standardization.shift.len() != dim || standardization.scale.len() != dim {
        return Err(DpddError::DimensionMismatch {
            expected: dim,
            got: standardization.shift.len().min(standardization.scale.len()),
        });
    }
    for (axis, s) in standardization.scale.iter().enumerate() {
        if !(*s > 0.0 && s.is_finite()) {
            return Err(DpddError::InvalidInput(format!(
                "standardization scale on axis {axis} must be strictly positive"
            )));
        }
    }
    Ok(Dictionary {
        kind,
        max_degree,
        dim,
        standardization,
        multi_indices: total_degree_indices(dim, max_degree),
    })
}

impl Dictionary {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Number of basis functions J.
    pub fn size(&self) -> usize {
        self.multi_indices.len()
    }

    /// Evaluate the feature vector Ψ(x) = (ψ_1(x), ..., ψ_J(x)).
    pub fn eval_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size()];
        self.eval_features_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluate into a caller-provided buffer of length J.
    pub fn eval_features_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(DpddError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        debug_assert_eq!(out.len(), self.size());
        // per-axis value tables: table[axis][n] = P_n(x̃_axis)
        let mut tables = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            let z = (x[axis] - self.standardization.shift[axis]) / self.standardization.scale[axis];
            tables.push(self.axis_table(z));
        }
        for (j, mi) in self.multi_indices.iter().enumerate() {
            if j == 0 {
                out[0] = 1.0; // ψ_1 ≡ 1
                continue;
            }
            let mut v = 1.0;
            for (axis, &deg) in mi.iter().enumerate() {
                if deg > 0 {
                    v *= tables[axis][deg];
                }
            }
            out[j] = v;
        }
        Ok(())
    }

    fn axis_table(&self, z: f64) -> Vec<f64> {
        let mut t = vec![0.0; self.max_degree + 1];
        t[0] = 1.0;
        if self.max_degree == 0 {
            return t;
        }
        t[1] = z;
        match self.kind {
            // He_{n+1}(z) = z He_n(z) - n He_{n-1}(z)
            BasisKind::Hermite => {
                for n in 1..self.max_degree {
                    t[n + 1] = z * t[n] - n as f64 * t[n - 1];
                }
            }
            BasisKind::Monomial => {
                for n in 1..self.max_degree {
                    t[n + 1] = z * t[n];
                }
            }
        }
        t
    }
}

/// Multi-indices with total degree <= max_degree, sorted by
/// (total degree, lexicographic) so dictionaries are deterministic.
fn total_degree_indices(dim: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max_degree {
        let mut idx = vec![0usize; dim];
        fill_indices(&mut out, &mut idx, 0, total);
    }
    out
}

fn fill_indices(out: &mut Vec<Vec<usize>>, idx: &mut Vec<usize>, axis: usize, remaining: usize) {
    if axis == idx.len() - 1 {
        idx[axis] = remaining;
        out.push(idx.clone());
        return;
    }
    for d in (0..=remaining).rev() {
        idx[axis] = d;
        fill_indices(out, idx, axis + 1, remaining - d);
    }
    idx[axis] = 0;
}
