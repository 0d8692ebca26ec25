//! Linear algebra over real antisymmetric matrices.
//!
//! Every quadratic Majorana Hamiltonian `H = (i/4) Σ A_pq c_p c_q` and every
//! covariance matrix of a fermionic Gaussian state is carried by a real
//! antisymmetric matrix of even size. This module provides the canonical
//! (Williamson) form of such matrices, the orthogonal exponential `exp(A t)`
//! built on top of it, and Pfaffians for real and complex antisymmetric input.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::eigen;
use crate::error::{Error, Result};

/// Williamson eigenvalues below this are reported as exact zeros.
pub const ZERO_MODE_REPORT_CLAMP: f64 = 1e-12;
/// Eigenvalues below this fraction of `max |A|` are decomposed in a real basis.
const SMALL_CLUSTER: f64 = 1e-6;

/// Relative tolerance used to accept input as antisymmetric.
const ANTISYMMETRY_TOL: f64 = 1e-12;

/// Real antisymmetric matrix of even dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    inner: DMatrix<f64>,
}

impl SkewMatrix {
    /// Validates `m` and stores its exactly antisymmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let dim = m.nrows();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "antisymmetric matrix must have even positive dimension, got {dim}"
            )));
        }
        let scale = m.amax().max(1.0);
        let mut deviation = 0.0f64;
        for p in 0..dim {
            for q in p..dim {
                deviation = deviation.max((m[(p, q)] + m[(q, p)]).abs());
            }
        }
        if deviation > ANTISYMMETRY_TOL * scale {
            return Err(Error::NotAntisymmetric { deviation });
        }
        let inner = (&m - m.transpose()) * 0.5;
        Ok(Self { inner })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    /// Builds a matrix from its strictly upper triangle.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = DMatrix::zeros(dim, dim);
        for p in 0..dim {
            for q in p + 1..dim {
                let v = f(p, q);
                m[(p, q)] = v;
                m[(q, p)] = -v;
            }
        }
        Self::new(m)
    }

    pub(crate) fn from_matrix_unchecked(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.nrows() == inner.ncols() && inner.nrows() % 2 == 0);
        Self { inner }
    }

    /// Sets entry `(p, q)` to `v` and `(q, p)` to `-v` (0-based).
    pub fn set(&mut self, p: usize, q: usize, v: f64) {
        if p == q {
            return;
        }
        self.inner[(p, q)] = v;
        self.inner[(q, p)] = -v;
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.inner[(p, q)]
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    /// Number of fermionic modes, half the dimension.
    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.amax()
    }

    pub fn add(&self, other: &SkewMatrix) -> Result<SkewMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(Self { inner: &self.inner + &other.inner })
    }

    /// Returns `Q A Q^T`.
    pub fn conjugate_by(&self, q: &DMatrix<f64>) -> Result<SkewMatrix> {
        if q.nrows() != self.dim() || q.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: q.nrows() });
        }
        let m = q * &self.inner * q.transpose();
        Ok(Self { inner: (&m - m.transpose()) * 0.5 })
    }
}

/// Real orthogonal matrix, typically an element of SO(2N).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    inner: DMatrix<f64>,
}

impl OrthogonalMatrix {
    /// Validates orthogonality and unit determinant.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let dim = m.nrows();
        let tol = 1e-10 * dim.max(1) as f64;
        let residual = (&m * m.transpose() - DMatrix::identity(dim, dim)).amax();
        if residual > tol {
            return Err(Error::NumericalConsistency(format!("matrix is not orthogonal (|R R^T - I| = {residual:e})")));
        }
        let det = m.clone().determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::NumericalConsistency(format!("orthogonal matrix has determinant {det}, expected +1")));
        }
        Ok(Self { inner: m })
    }

    pub fn identity(dim: usize) -> Self {
        Self { inner: DMatrix::identity(dim, dim) }
    }

    pub(crate) fn from_matrix_unchecked(inner: DMatrix<f64>) -> Self {
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn compose(&self, other: &OrthogonalMatrix) -> OrthogonalMatrix {
        Self { inner: &self.inner * &other.inner }
    }

    pub fn orthogonality_residual(&self) -> f64 {
        let dim = self.dim();
        (&self.inner * self.inner.transpose() - DMatrix::identity(dim, dim)).amax()
    }
}

/// Canonical form `A = W^T (⊕_j λ_j [[0,1],[-1,0]]) W` of a real
/// antisymmetric matrix.
///
/// Rows `2j` and `2j+1` of `modes` hold the canonical Majorana modes of the
/// `j`-th eigenvalue (0-based), expressed in the original Majorana basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WilliamsonForm {
    lambdas: Vec<f64>,
    modes: DMatrix<f64>,
}

impl WilliamsonForm {
    /// Raw eigenvalues, ascending. Never clamped.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Eigenvalues with values below [`ZERO_MODE_REPORT_CLAMP`] set to zero.
    pub fn lambdas_reported(&self) -> Vec<f64> {
        self.lambdas.iter().map(|&l| if l < ZERO_MODE_REPORT_CLAMP { 0.0 } else { l }).collect()
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// Smallest eigenvalue: the ground-state splitting of the chain.
    pub fn splitting(&self) -> f64 {
        self.lambdas[0]
    }

    /// Gap above the two lowest many-body levels, `λ_2 - λ_1`.
    pub fn gap(&self) -> Option<f64> {
        (self.lambdas.len() >= 2).then(|| self.lambdas[1] - self.lambdas[0])
    }

    /// Ground-state energy `-(1/2) Σ λ_j` of the quadratic Hamiltonian.
    pub fn ground_energy(&self) -> f64 {
        -0.5 * self.lambdas.iter().sum::<f64>()
    }

    /// The block-diagonal canonical matrix.
    pub fn canonical_matrix(&self) -> DMatrix<f64> {
        let dim = 2 * self.n_modes();
        let mut m = DMatrix::zeros(dim, dim);
        for (j, &l) in self.lambdas.iter().enumerate() {
            m[(2 * j, 2 * j + 1)] = l;
            m[(2 * j + 1, 2 * j)] = -l;
        }
        m
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.modes.transpose() * self.canonical_matrix() * &self.modes
    }

    /// `exp(A t)`: a rotation by `λ_j t` in every canonical plane.
    pub fn rotation(&self, t: f64) -> OrthogonalMatrix {
        let dim = 2 * self.n_modes();
        if t == 0.0 {
            return OrthogonalMatrix::identity(dim);
        }
        let mut rotated = DMatrix::zeros(dim, dim);
        for (j, &l) in self.lambdas.iter().enumerate() {
            let (s, c) = (l * t).sin_cos();
            for p in 0..dim {
                let u = self.modes[(2 * j, p)];
                let v = self.modes[(2 * j + 1, p)];
                rotated[(2 * j, p)] = c * u + s * v;
                rotated[(2 * j + 1, p)] = -s * u + c * v;
            }
        }
        OrthogonalMatrix::from_matrix_unchecked(self.modes.transpose() * rotated)
    }
}

/// Computes the Williamson normal form of `a`.
///
/// The Hermitian matrix `iA` is diagonalized through its real form. For each
/// cluster of equal `λ` the real and imaginary parts of the eigenvectors of
/// `±λ` span an invariant real subspace; canonical pairs are built inside it
/// from the restriction of `A`. The small-`λ` subspace is rescaled and
/// decomposed recursively so that exponentially small splittings keep their
/// magnitude.
pub fn williamson(a: &SkewMatrix) -> Result<WilliamsonForm> {
    let dim = a.dim();
    let n = dim / 2;
    let am = a.as_matrix();
    let scale = a.max_abs();

    // Real form of the Hermitian matrix iA: an eigenvector (x, y) of
    // [[0, -A], [A, 0]] is ψ = x + iy with iAψ = eψ. Every e appears twice.
    let embedded = DMatrix::<f64>::from_fn(2 * dim, 2 * dim, |r, c| match (r < dim, c < dim) {
        (true, false) => -am[(r, c - dim)],
        (false, true) => am[(r - dim, c)],
        _ => 0.0,
    });
    let eig = eigen::symmetric(&embedded);

    let mut order: Vec<usize> = (0..2 * dim).collect();
    order.sort_by(|&x, &y| eig.values[x].total_cmp(&eig.values[y]));
    let e: Vec<f64> = order.iter().map(|&k| eig.values[k]).collect();

    // λ in ascending order, averaged over the four copies of ±λ.
    let lambda_sym: Vec<f64> = (0..n)
        .map(|j| 0.25 * (e[dim + 2 * j] + e[dim + 2 * j + 1] - e[dim - 1 - 2 * j] - e[dim - 2 - 2 * j]))
        .collect();

    if scale == 0.0 {
        return Ok(WilliamsonForm { lambdas: vec![0.0; n], modes: DMatrix::identity(dim, dim) });
    }

    // Below this the ±λ eigenvectors are not resolved reliably.
    let small_tol = SMALL_CLUSTER * scale;
    let n_zero = lambda_sym.iter().take_while(|&&l| l <= small_tol).count();

    let mut pairs: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::with_capacity(n);

    // Both halves of the spectrum of a cluster span the same real subspace;
    // taking both keeps the span well defined when ψ and ψ̄ mix.
    let cluster_members = |lo: usize, hi: usize| -> Vec<usize> {
        order[dim - 2 * hi..dim - 2 * lo].iter().chain(&order[dim + 2 * lo..dim + 2 * hi]).copied().collect()
    };

    if n_zero > 0 {
        // The restriction of A to the small subspace is rescaled and
        // decomposed on its own.
        let q = cluster_basis(&eig.vectors, &cluster_members(0, n_zero), 2 * n_zero);
        let restricted = q.transpose() * am * &q;
        let sub_scale = restricted.amax();
        let sub = SkewMatrix::from_upper(2 * n_zero, |r, c| {
            if sub_scale > 0.0 {
                0.5 * (restricted[(r, c)] - restricted[(c, r)]) / sub_scale
            } else {
                0.0
            }
        })?;
        let inner = williamson(&sub)?;
        let rows = inner.modes() * q.transpose();
        for (j, &l) in inner.lambdas().iter().enumerate() {
            let u: Vec<f64> = rows.row(2 * j).iter().copied().collect();
            let v: Vec<f64> = rows.row(2 * j + 1).iter().copied().collect();
            pairs.push((l * sub_scale, u, v));
        }
    }

    let cluster_tol = SMALL_CLUSTER * scale;
    let mut j = n_zero;
    while j < n {
        let mut end = j + 1;
        while end < n && lambda_sym[end] - lambda_sym[end - 1] < cluster_tol {
            end += 1;
        }
        let q = cluster_basis(&eig.vectors, &cluster_members(j, end), 2 * (end - j));
        let restricted = q.transpose() * am * &q;
        let mut cluster = canonical_pairs(&restricted)
            .into_iter()
            .map(|(l, u, v)| (l, (&q * u).iter().copied().collect(), (&q * v).iter().copied().collect()))
            .collect::<Vec<(f64, Vec<f64>, Vec<f64>)>>();
        cluster.sort_by(|x, y| x.0.total_cmp(&y.0));
        pairs.extend(cluster);
        j = end;
    }

    let mut modes = DMatrix::<f64>::zeros(dim, dim);
    let mut lambdas = Vec::with_capacity(n);
    for (j, (l, u, v)) in pairs.into_iter().enumerate() {
        lambdas.push(l);
        for p in 0..dim {
            modes[(2 * j, p)] = u[p];
            modes[(2 * j + 1, p)] = v[p];
        }
    }

    let form = WilliamsonForm { lambdas, modes };
    let residual = (form.reconstruct() - am).amax();
    let ortho = (&form.modes * form.modes.transpose() - DMatrix::identity(dim, dim)).amax();
    if residual > 1e-8 * scale.max(f64::MIN_POSITIVE) || ortho > 1e-8 {
        return Err(Error::NumericalFailure { residual: residual.max(ortho) });
    }
    Ok(form)
}

/// `exp(A t)` computed through the canonical form of `A`.
pub fn expm_skew(a: &SkewMatrix, t: f64) -> Result<OrthogonalMatrix> {
    Ok(williamson(a)?.rotation(t))
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Orthonormal real basis (`dim × rank`) of the span of the real and
/// imaginary parts `x`, `y` of the given eigenvectors `(x, y)` of the real
/// form, by pivoted Gram-Schmidt. Ties go to the earliest candidate.
fn cluster_basis(vectors: &DMatrix<f64>, members: &[usize], rank: usize) -> DMatrix<f64> {
    let dim = vectors.nrows() / 2;
    let mut residual: Vec<Vec<f64>> = Vec::with_capacity(2 * members.len());
    for &k in members {
        let col = vectors.column(k);
        residual.push(col.rows(0, dim).iter().copied().collect());
        residual.push(col.rows(dim, dim).iter().copied().collect());
    }
    let mut basis = DMatrix::<f64>::zeros(dim, rank);
    for c in 0..rank {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (q, r) in residual.iter().enumerate() {
            let nrm = dot(r, r);
            if nrm > best_norm * (1.0 + 1e-12) {
                best = q;
                best_norm = nrm;
            }
        }
        let mut b = residual[best].clone();
        normalize(&mut b);
        for r in residual.iter_mut() {
            let proj = dot(&b, r);
            for (x, y) in r.iter_mut().zip(&b) {
                *x -= proj * y;
            }
        }
        basis.column_mut(c).copy_from_slice(&b);
    }
    basis
}

/// Canonical pairs of a small antisymmetric `b` whose eigenvalues are
/// clustered: `u` runs over eigenvectors of `bᵀb`, pivoted on what is left
/// after earlier pairs, and `v = bᵀu / |bᵀu|`, so that `uᵀ b v > 0`.
fn canonical_pairs(b: &DMatrix<f64>) -> Vec<(f64, DVector<f64>, DVector<f64>)> {
    let k = b.nrows();
    let sq = eigen::symmetric(&(b.transpose() * b));
    let mut remaining: Vec<DVector<f64>> = sq.vectors.column_iter().map(|c| c.into_owned()).collect();
    let mut out: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(k / 2);
    for _ in 0..k / 2 {
        let best = (0..remaining.len())
            .max_by(|&x, &y| remaining[x].norm_squared().total_cmp(&remaining[y].norm_squared()).then(y.cmp(&x)))
            .expect("remaining vectors");
        let u = remaining.remove(best).normalize();
        let mut v = -(b * &u);
        for (_, pu, pv) in &out {
            v -= pu * pu.dot(&v) + pv * pv.dot(&v);
        }
        v -= &u * u.dot(&v);
        let v = v.normalize();
        let l = u.dot(&(b * &v));
        for r in remaining.iter_mut() {
            *r -= &u * u.dot(r) + &v * v.dot(r);
        }
        out.push((l, u, v));
    }
    out
}

/// Pfaffian of an antisymmetric matrix stored row-major in `a` (`n × n`).
///
/// Skew-symmetric Gaussian elimination with partial pivoting on the column
/// below the current pivot. Only the strict upper triangle is read or
/// updated; `a` is consumed as scratch space.
pub(crate) fn pfaffian_in_place<T>(a: &mut [T], n: usize) -> T
where
    T: ComplexField<RealField = f64> + Copy,
{
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return T::one();
    }
    if n % 2 == 1 {
        return T::zero();
    }
    let get = |a: &[T], i: usize, j: usize| -> T {
        if i < j {
            a[i * n + j]
        } else if i > j {
            -a[j * n + i]
        } else {
            T::zero()
        }
    };
    let mut pf = T::one();
    let mut tau: Vec<T> = vec![T::zero(); n];
    let mut col: Vec<T> = vec![T::zero(); n];
    for k in (0..n - 1).step_by(2) {
        // Column k below the diagonal equals minus row k to the right.
        let mut kp = k + 1;
        let mut best = a[k * n + k + 1].modulus();
        for i in k + 2..n {
            let m = a[k * n + i].modulus();
            if m > best {
                best = m;
                kp = i;
            }
        }
        if best == 0.0 {
            return T::zero();
        }
        if kp != k + 1 {
            let (r, s) = (k + 1, kp);
            for x in k..n {
                if x == r || x == s {
                    continue;
                }
                let u = get(a, x, r);
                let v = get(a, x, s);
                set_upper(a, n, x, r, v);
                set_upper(a, n, x, s, u);
            }
            a[r * n + s] = -a[r * n + s];
            pf = -pf;
        }
        let piv = a[k * n + k + 1];
        pf *= piv;
        if k + 2 < n {
            let inv = T::one() / piv;
            for i in k + 2..n {
                tau[i] = a[k * n + i] * inv;
                // A[i][k+1] = -A[k+1][i]
                col[i] = -a[(k + 1) * n + i];
            }
            // A[i][j] += tau_i A[j][k+1] - A[i][k+1] tau_j, for i < j.
            for i in k + 2..n {
                let ti = tau[i];
                let ci = col[i];
                let row = &mut a[i * n..(i + 1) * n];
                for j in i + 1..n {
                    row[j] += ti * col[j] - ci * tau[j];
                }
            }
        }
    }
    pf
}

#[inline]
fn set_upper<T: ComplexField<RealField = f64> + Copy>(a: &mut [T], n: usize, i: usize, j: usize, v: T) {
    if i < j {
        a[i * n + j] = v;
    } else if i > j {
        a[j * n + i] = -v;
    }
}

fn to_row_major<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<T> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Pfaffian of a real antisymmetric matrix, sign included.
pub fn pfaffian(a: &SkewMatrix) -> f64 {
    let n = a.dim();
    let mut buf = to_row_major(a.as_matrix());
    pfaffian_in_place(&mut buf, n)
}

/// Pfaffian of a complex antisymmetric matrix (any even size, including 0).
pub fn pfaffian_complex(a: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    let mut deviation = 0.0f64;
    for p in 0..n {
        for q in p..n {
            deviation = deviation.max((a[(p, q)] + a[(q, p)]).norm());
        }
    }
    if deviation > ANTISYMMETRY_TOL * scale {
        return Err(Error::NotAntisymmetric { deviation });
    }
    let mut buf = to_row_major(a);
    Ok(pfaffian_in_place(&mut buf, n))
}

/// Determinant of a real antisymmetric matrix as `pf(A)^2` (never negative).
pub fn det_skew(a: &SkewMatrix) -> f64 {
    let pf = pfaffian(a);
    pf * pf
}

/// Determinant of a complex antisymmetric matrix as `pf(A)^2`.
pub fn det_skew_complex(a: &DMatrix<Complex64>) -> Result<Complex64> {
    let pf = pfaffian_complex(a)?;
    Ok(pf * pf)
}
