//! Dense fallbacks for small operators.

use super::sparse::SparseOperator;
use nalgebra::{DMatrix, DVector};

/// Size limit for dense fallbacks.
pub const DENSE_LIMIT: usize = 400;

/// Relative singular-value threshold separating the kernel.
pub const KERNEL_RTOL: f64 = 1e-9;

/// Singular values of the balanced matrix, descending.
pub fn singular_values(op: &SparseOperator) -> Vec<f64> {
    let m = padded_balanced(op);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s.truncate(op.nrows().min(op.ncols()));
    s
}

fn padded_balanced(op: &SparseOperator) -> DMatrix<f64> {
    let b = op.to_dense_balanced();
    if b.nrows() >= b.ncols() {
        b
    } else {
        let mut p = DMatrix::zeros(b.ncols(), b.ncols());
        p.view_mut((0, 0), (b.nrows(), b.ncols())).copy_from(&b);
        p
    }
}

/// Weighted-orthonormal basis of `ker op`.
pub fn nullspace(op: &SparseOperator) -> Vec<Vec<f64>> {
    let n = op.ncols();
    if n == 0 {
        return Vec::new();
    }
    let m = padded_balanced(op);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let wd = op.domain().weights();
    let mut out = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= KERNEL_RTOL * smax || smax == 0.0 {
            let v: Vec<f64> = (0..n).map(|i| vt[(k, i)] / wd[i].sqrt()).collect();
            out.push(v);
        }
    }
    out
}

/// Numerical rank of the balanced matrix.
pub fn rank(op: &SparseOperator) -> usize {
    let s = singular_values(op);
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > KERNEL_RTOL * smax).count()
}

/// Moore–Penrose inverse of the plain matrix.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    svd.pseudo_inverse(KERNEL_RTOL * smax).expect("svd with u and v")
}

/// Eigen-decomposition of a symmetric matrix, ascending, sign-normalized.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| (l, fix_sign(eig.eigenvectors.column(k).into_owned())))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs
}

/// Makes the largest-magnitude entry positive.
pub fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
    v
}
