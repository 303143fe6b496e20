//! Small dense complex linear-algebra helpers shared by the SDP layer and the
//! non-reciprocal pipeline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

/// Largest absolute deviation `|A - A^H|` entry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    a.is_square() && hermitian_defect(a) <= tol * (1.0 + max_abs(a))
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Re tr(A B)`; for Hermitian arguments the trace is real.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// `v v^H`
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `conj(f) f^T`, the lifted form of `|f^T w|^2 = w^H (conj(f) f^T) w`.
pub fn lifted_gain(f: &CVec) -> CMat {
    f.map(|z| z.conj()) * f.transpose()
}

pub fn diag(d: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        d.len(),
        d.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

/// Real symmetric embedding `[Re A, -Im A; Im A, Re A]` of a Hermitian matrix.
pub fn embed(a: &CMat) -> RMat {
    let n = a.nrows();
    let mut out = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

/// Inverse of [`embed`], averaging the two copies so that an unstructured
/// symmetric matrix is projected onto the embedded-Hermitian subspace.
pub fn unembed(x: &RMat) -> CMat {
    let n = x.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
        let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
        Complex64::new(re, im)
    })
}

/// Hermitian eigen-decomposition with eigenvalues sorted in descending order.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).0.last().copied().unwrap_or(0.0)
}

pub fn to_complex(v: &[f64]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}
