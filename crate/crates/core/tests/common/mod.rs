//! Bisection oracle for the single-particle levels of the chain.
#![allow(dead_code)]

/// Eigenvalues of the symmetric tridiagonal matrix with zero diagonal and the
/// given off-diagonal, counted below `x` by the Sturm sequence.
pub fn sturm_count(off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q < 0.0 {
        count += 1;
    }
    for &b in off {
        let prev = if q == 0.0 { 1e-300 } else { q };
        q = -x - b * b / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by bisection.
pub fn tridiagonal_eigenvalue(off: &[f64], k: usize) -> f64 {
    let bound = 1.0 + 2.0 * off.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Single-particle energies of the chain: the non-negative half of the
/// spectrum of the `2N` tridiagonal matrix with off-diagonal `μ_1, 1, μ_2, 1, …`.
pub fn chain_levels(mus: &[f64], count: usize) -> Vec<f64> {
    let n = mus.len();
    let mut off = Vec::with_capacity(2 * n - 1);
    for (j, &m) in mus.iter().enumerate() {
        off.push(m);
        if j + 1 < n {
            off.push(1.0);
        }
    }
    (0..count).map(|k| tridiagonal_eigenvalue(&off, n + k)).collect()
}
