//! Small dense helpers bridging `ndarray` storage and `nalgebra` factorizations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub(crate) fn to_na(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub(crate) fn vec_to_na(v: ArrayView1<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().cloned())
}

pub(crate) fn vec_from_na(v: &DVector<f64>) -> Array1<f64> {
    v.iter().cloned().collect()
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub(crate) struct SymEig {
    pub values: Array1<f64>,
    /// columns are eigenvectors
    pub vectors: Array2<f64>,
}

pub(crate) fn sym_eig(m: ArrayView2<f64>) -> SymEig {
    let n = m.nrows();
    if n == 0 {
        return SymEig {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        };
    }
    let mut sym = to_na(m);
    // symmetrize against round-off
    for i in 0..n {
        for j in 0..i {
            let a = 0.5 * (sym[(i, j)] + sym[(j, i)]);
            sym[(i, j)] = a;
            sym[(j, i)] = a;
        }
    }
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, idx[c])]);
    SymEig { values, vectors }
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
pub(crate) fn psd_pinv(m: ArrayView2<f64>) -> Array2<f64> {
    let n = m.nrows();
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let eig = sym_eig(m);
    let top = eig.values.iter().cloned().fold(0.0, f64::max);
    let cut = top * 1e-12 * n as f64;
    let mut out = Array2::zeros((n, n));
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > cut {
            let v = eig.vectors.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[[i, j]] += v[i] * v[j] / lam;
                }
            }
        }
    }
    out
}

/// Solves the square system `a x = b`; `None` when singular.
pub(crate) fn solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let lu = to_na(a).lu();
    lu.solve(&vec_to_na(b)).map(|x| vec_from_na(&x)).filter(|x| x.iter().all(|v| v.is_finite()))
}
