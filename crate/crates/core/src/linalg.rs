//! Small dense linear algebra on fibers: norms, induced operator norms and
//! orthonormal bases for the range of a projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Norm placed on the fiber `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    /// `max_i |x_i|`, the default.
    #[default]
    #[serde(alias = "max-norm")]
    Max,
    Euclidean,
}

impl NormKind {
    pub fn vector(self, x: &DVector<f64>) -> f64 {
        self.slice(x.as_slice())
    }

    pub fn slice(self, x: &[f64]) -> f64 {
        match self {
            NormKind::Max => x.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            NormKind::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Norm of the difference of two equally sized slices.
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            NormKind::Max => x.iter().zip(y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())),
            NormKind::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Operator norm induced by `kind`.
///
/// ```text
/// Max:        ‖m‖ = max_i Σ_j |m_ij|     (exact)
/// Euclidean:  ‖m‖ = largest singular value
/// ```
pub fn operator_norm(m: &DMatrix<f64>, kind: NormKind) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    match kind {
        NormKind::Max => m
            .row_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Euclidean => m.clone().singular_values().iter().fold(0.0_f64, |a, &b| a.max(b)),
    }
}

/// Smallest singular value, `+inf` for a matrix without columns.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Orthonormal basis (as columns) of the column space of `m`, extracted by
/// Gram-Schmidt with column pivoting: at each step the remaining column of
/// largest residual norm is taken. Columns whose residual drops below
/// `rel_tol * max column norm` are treated as dependent.
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let d = m.nrows();
    let mut cols: Vec<DVector<f64>> = m.column_iter().map(|c| c.into_owned()).collect();
    let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return DMatrix::zeros(d, 0);
    }
    while basis.len() < d && !cols.is_empty() {
        let (idx, best) = cols
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best <= rel_tol * scale {
            break;
        }
        let q = cols.swap_remove(idx) / best;
        for c in cols.iter_mut() {
            let proj = q.dot(c);
            c.axpy(-proj, &q, 1.0);
        }
        // second pass against earlier vectors keeps orthogonality tight
        let mut q = q;
        for b in &basis {
            let proj = b.dot(&q);
            q.axpy(-proj, b, 1.0);
        }
        let n = q.norm();
        basis.push(q / n);
    }
    if basis.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Moore-Penrose pseudo-inverse through the SVD.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let eps = smax * 1e-14 * (m.nrows().max(m.ncols()) as f64);
    svd.pseudo_inverse(eps)
        .unwrap_or_else(|_| DMatrix::zeros(m.ncols(), m.nrows()))
}

/// `out = m * x` for a row-major `d x d` slice.
#[inline]
pub(crate) fn matvec_into(m: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(d) {
        let row = &m[i * d..(i + 1) * d];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `out += w * m * x` for a row-major `d x d` slice.
#[inline]
pub(crate) fn matvec_acc(m: &[f64], d: usize, x: &[f64], w: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(d) {
        let row = &m[i * d..(i + 1) * d];
        *o += w * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Relative size of `a - b`, measured against `max(1, ‖a‖, ‖b‖)`.
pub(crate) fn relative_matrix_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, kind: NormKind) -> f64 {
    let scale = 1.0_f64.max(operator_norm(a, kind)).max(operator_norm(b, kind));
    operator_norm(&(a - b), kind) / scale
}
