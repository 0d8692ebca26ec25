use majorana::chain::{hamiltonian_from_mus, one_particle_hamiltonian, realize_potential, ChainParams, Disorder};
use majorana::skewlin::{det_skew, expm_skew, pfaffian, williamson, SkewMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::chain_levels;

fn random_skew(dim: usize, rng: &mut ChaCha8Rng) -> SkewMatrix {
    SkewMatrix::from_upper(dim, |_, _| rng.gen_range(-1.0..1.0)).unwrap()
}

/// Taylor series with scaling and squaring, independent of the Williamson route.
fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().map(|x| x.abs()).sum::<f64>();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 2;
    let scaled = a / 2f64.powi(squarings as i32);
    let dim = a.nrows();
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..40 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn expm_matches_taylor_series() {
    let h = hamiltonian_from_mus(&[0.5, 0.2, 0.7, 0.1, 0.4, 0.6], 1.0, 0.0).unwrap();
    let r = expm_skew(&h, 0.7).unwrap();
    let expected = taylor_expm(&(h.as_matrix() * 0.7));
    assert!((r.as_matrix() - expected).amax() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for dim in [2, 6, 10, 16] {
        let a = random_skew(dim, &mut rng);
        let r = expm_skew(&a, -1.3).unwrap();
        assert!((r.as_matrix() - taylor_expm(&(a.as_matrix() * -1.3))).amax() < 1e-9, "dim {dim}");
    }
}

#[test]
fn pfaffian_squared_is_lu_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_skew(8, &mut rng);
    let det = a.as_matrix().clone().lu().determinant();
    let pf = pfaffian(&a);
    assert!((pf * pf - det).abs() <= 1e-10 * det.abs());

    let b = random_skew(6, &mut rng);
    let det = b.as_matrix().clone().lu().determinant();
    assert!((det_skew(&b) - det).abs() <= 1e-10 * det.abs());
}

#[test]
fn pfaffian_of_small_matrices() {
    let a = SkewMatrix::from_upper(2, |_, _| 3.0).unwrap();
    assert_eq!(pfaffian(&a), 3.0);
    // pf = a12 a34 - a13 a24 + a14 a23
    let v = [[0.0, 1.0, 2.0, 3.0], [0.0, 0.0, 4.0, 5.0], [0.0, 0.0, 0.0, 6.0]];
    let b = SkewMatrix::from_upper(4, |p, q| v[p][q]).unwrap();
    assert!((pfaffian(&b) - (1.0 * 6.0 - 2.0 * 5.0 + 3.0 * 4.0)).abs() < 1e-14);
    assert!(SkewMatrix::from_upper(3, |_, _| 1.0).is_err());
}

#[test]
fn clean_chain_levels() {
    let h = hamiltonian_from_mus(&[0.0; 4], 1.0, 0.0).unwrap();
    let w = williamson(&h).unwrap();
    let lambdas = w.lambdas_reported();
    assert_eq!(lambdas[0], 0.0);
    for &l in &lambdas[1..] {
        assert!((l - 1.0).abs() < 1e-10);
    }
}

#[test]
fn homogeneous_levels_match_tridiagonal_bisection() {
    for eps in [0.2, 0.5, 0.8] {
        for n in [8, 16, 32] {
            let h = hamiltonian_from_mus(&vec![eps; n], 1.0, 0.0).unwrap();
            let w = williamson(&h).unwrap();
            let reference = chain_levels(&vec![eps; n], n);
            for (l, r) in w.lambdas().iter().zip(&reference) {
                assert!((l - r).abs() < 1e-10, "eps {eps} n {n}: {l} vs {r}");
            }
        }
    }
}

#[test]
fn disordered_levels_match_squared_hamiltonian() {
    let p = ChainParams::new(8, 0.5, 0.25, Disorder::UniformIid { seed: 3 }).unwrap();
    let h = one_particle_hamiltonian(&p, &realize_potential(&p, 2)).unwrap();
    let w = williamson(&h).unwrap();
    // -A² has every λ_j² twice.
    let a = h.as_matrix();
    let mut sq: Vec<f64> = SymmetricEigen::new(-(a * a)).eigenvalues.iter().copied().collect();
    sq.sort_by(f64::total_cmp);
    for (j, l) in w.lambdas().iter().enumerate() {
        assert!((l * l - sq[2 * j]).abs() < 1e-10);
        assert!((l * l - sq[2 * j + 1]).abs() < 1e-10);
    }
    assert!((w.reconstruct() - a).amax() < 1e-10);
}

#[test]
fn homogeneous_gap_approaches_one_minus_mu() {
    let h = hamiltonian_from_mus(&[0.5; 8], 1.0, 0.0).unwrap();
    let w = williamson(&h).unwrap();
    assert!(w.gap().unwrap() >= 0.5);
    assert!(w.splitting() <= (2.0f64 / 3.0).powf(8.0 / 6.0));
    // The bulk band edge of the infinite chain.
    for eps in [0.2, 0.5, 0.8] {
        let levels = chain_levels(&vec![eps; 200_000], 2);
        assert!((levels[1] - levels[0] - (1.0 - eps)).abs() < 1e-6, "eps {eps}");
    }
}
