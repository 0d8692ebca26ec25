//! Symmetric and Hermitian eigendecompositions.
//!
//! nalgebra's `SymmetricEigen` can stop with residuals far above rounding
//! level on matrices with a zero diagonal, which every Majorana Hamiltonian
//! has, so these go through faer. faer is built without its thread pool; the
//! results do not depend on the number of workers.

use faer::complex_native::c64;
use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues in ascending order with the matching eigenvector columns.
pub(crate) struct Eigen<T> {
    pub values: Vec<f64>,
    pub vectors: DMatrix<T>,
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

pub(crate) fn symmetric(m: &DMatrix<f64>) -> Eigen<f64> {
    let n = m.nrows();
    let fm = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let raw: Vec<f64> = (0..n).map(|k| s.read(k)).collect();
    let order = ascending(&raw);
    let u = evd.u();
    Eigen {
        values: order.iter().map(|&k| raw[k]).collect(),
        vectors: DMatrix::from_fn(n, n, |i, c| u.read(i, order[c])),
    }
}

pub(crate) fn hermitian(m: &DMatrix<Complex64>) -> Eigen<Complex64> {
    let n = m.nrows();
    let fm = Mat::<c64>::from_fn(n, n, |i, j| {
        let z = m[(i, j)];
        c64::new(z.re, z.im)
    });
    let evd = fm.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let raw: Vec<f64> = (0..n).map(|k| s.read(k).re).collect();
    let order = ascending(&raw);
    let u = evd.u();
    Eigen {
        values: order.iter().map(|&k| raw[k]).collect(),
        vectors: DMatrix::from_fn(n, n, |i, c| {
            let z = u.read(i, order[c]);
            Complex64::new(z.re, z.im)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_diagonal_tridiagonal_is_resolved() {
        // Off-diagonal 0.3, 1, 0.3, 1, ...: eigenvalues come in ± pairs.
        let dim = 40;
        let m = DMatrix::from_fn(dim, dim, |r, c| match r.abs_diff(c) {
            1 => {
                if r.min(c) % 2 == 0 {
                    0.3
                } else {
                    1.0
                }
            }
            _ => 0.0,
        });
        let e = symmetric(&m);
        let residual = (&m * &e.vectors - &e.vectors * DMatrix::from_diagonal(&e.values.clone().into())).amax();
        assert!(residual < 1e-13);
        for k in 0..dim {
            assert!((e.values[k] + e.values[dim - 1 - k]).abs() < 1e-13);
        }
    }

    #[test]
    fn hermitian_matches_real_symmetric() {
        let re = DMatrix::from_fn(6, 6, |r, c| ((r * 7 + c * 7) % 5) as f64 - 2.0);
        let e = symmetric(&re);
        let h = hermitian(&re.map(|x| Complex64::new(x, 0.0)));
        for (a, b) in e.values.iter().zip(&h.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
