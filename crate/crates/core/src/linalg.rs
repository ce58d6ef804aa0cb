//! Thin wrappers over nalgebra's complex SVD and Hermitian eigensolver
//! that return factors sorted by decreasing singular value / eigenvalue.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Thin SVD `A = U diag(s) V^H` with `s` sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn new(a: &CMatrix) -> Self {
        let (m, n) = a.shape();
        let k = m.min(n);
        if k == 0 {
            return Svd {
                u: CMatrix::zeros(m, 0),
                singular_values: Vec::new(),
                v: CMatrix::zeros(n, 0),
            };
        }
        let svd = nalgebra::linalg::SVD::new(a.clone(), true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let s = svd.singular_values;

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

        let mut u_sorted = CMatrix::zeros(m, k);
        let mut v_sorted = CMatrix::zeros(n, k);
        let mut singular_values = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            u_sorted.set_column(dst, &u.column(src));
            v_sorted.set_column(dst, &v_t.row(src).adjoint());
            singular_values.push(s[src]);
        }
        Svd {
            u: u_sorted,
            singular_values,
            v: v_sorted,
        }
    }

    /// `V_k diag(1/s_k) U_k^H b` using the leading `keep` singular triplets.
    pub fn solve_truncated(&self, b: &CVector, keep: usize) -> CVector {
        let mut x = CVector::zeros(self.v.nrows());
        for i in 0..keep.min(self.singular_values.len()) {
            let s = self.singular_values[i];
            if s <= 0.0 {
                break;
            }
            let coeff = self.u.column(i).dotc(b) / s;
            x.axpy(coeff, &self.v.column(i), Complex64::new(1.0, 0.0));
        }
        x
    }
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// decreasing order together with the matching orthonormal eigenvectors.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        values.push(eig.eigenvalues[src]);
    }
    (values, vectors)
}

/// Squared Euclidean norm of a complex slice.
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// `sum_i conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|a - b|^2` summed over entries.
pub fn diff_norm_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Kronecker product of two vectors, second factor varying fastest.
pub fn kron(outer: &[Complex64], inner: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(outer.len() * inner.len());
    for &o in outer {
        out.extend(inner.iter().map(|&i| o * i));
    }
    out
}
