use majorana::chain::{hamiltonian_from_mus, one_particle_hamiltonian, realize_potential, ChainParams, Disorder};
use majorana::skewlin::williamson;
use majorana::storage::{
    cosine_baseline, exact_fidelity, monte_carlo_fidelity, storage_time, uniform_grid, EncodedState, Estimator,
    SampleStream, StorageTime,
};
use num_complex::Complex64;

fn clean(n: usize, mu: f64) -> majorana::skewlin::SkewMatrix {
    hamiltonian_from_mus(&vec![mu; n], 1.0, 0.0).unwrap()
}

fn splitting_bound(eps: f64, n: usize) -> f64 {
    (2.0 * eps / (1.0 + eps)).powf(n as f64 / 6.0)
}

#[test]
fn zero_time_is_perfect() {
    let h = clean(8, 0.4);
    let enc = EncodedState::maximally_entangled();
    let exact = exact_fidelity(&enc, &h, 0.0).unwrap();
    assert_eq!(exact.value, 1.0);
    let mc = monte_carlo_fidelity(&enc, &h, 0.0, 300, SampleStream { seed: 4, realization: 0, t_index: 0 }).unwrap();
    assert_eq!((mc.value, mc.stderr), (1.0, 0.0));
}

#[test]
fn zero_threshold_never_crosses() {
    let h = clean(6, 0.5);
    let grid = uniform_grid(20.0, 11);
    let res = storage_time(&EncodedState::maximally_entangled(), &h, &grid, 0.0, &Estimator::Exact).unwrap();
    assert_eq!(res.time, StorageTime::Censored(20.0));
}

#[test]
fn splitting_and_gap_bounds() {
    for eps in [0.2, 0.5, 0.8] {
        for n in [8, 16, 32] {
            let w = williamson(&clean(n, eps)).unwrap();
            let bound = splitting_bound(eps, n);
            assert!(w.splitting() <= bound, "eps {eps} n {n}: {} > {bound}", w.splitting());
            assert!(w.gap().unwrap() >= 1.0 - eps - bound, "eps {eps} n {n}");
        }
    }
}

#[test]
fn small_mu_follows_cosine_law() {
    let h = clean(6, 0.1);
    let enc = EncodedState::maximally_entangled();
    let delta = williamson(&h).unwrap().splitting();
    let bound = 8.0 * 0.1 * 6f64.sqrt();
    for t in [0.5, 5.0, 50.0, 5e3, 5e5, 3e6] {
        let f = exact_fidelity(&enc, &h, t).unwrap().value;
        let c = (0.5 * delta * t).cos().powi(2);
        assert!((cosine_baseline(&h, t).unwrap() - c).abs() < 1e-15);
        assert!((f - c).abs() <= bound);
        // Observed deviation stays at the 1e-2 level.
        assert!((f - c).abs() < 1e-2, "t {t}: F {f} cos² {c}");
    }
}

#[test]
fn storage_time_brackets_cosine_prediction() {
    let h = clean(6, 0.1);
    let enc = EncodedState::maximally_entangled();
    let delta = williamson(&h).unwrap().splitting();
    let f0: f64 = 0.99;
    let predicted = 2.0 * f0.sqrt().acos() / delta;
    let grid = uniform_grid(2.0 * predicted, 201);
    let step = grid[1];
    let res = storage_time(&enc, &h, &grid, f0, &Estimator::Exact).unwrap();
    let t = match res.time {
        StorageTime::Crossed(t) => t,
        other => panic!("no crossing: {other:?}"),
    };
    let dev = res.curve.iter().map(|e| (e.value - (0.5 * delta * e.t).cos().powi(2)).abs()).fold(0.0f64, f64::max);
    let cos_time = |f: f64| 2.0 * f.sqrt().acos() / delta;
    // F stays within `dev` of cos², so the first crossing lies between the
    // cosine times of F0 + dev and F0 - dev.
    assert!(t >= cos_time(f0 + dev) - 1e-9, "t {t} dev {dev}");
    assert!(t - step <= cos_time(f0 - dev), "t {t} dev {dev}");
    assert!(t < predicted);
}

#[test]
fn monte_carlo_matches_exact() {
    let h = clean(8, 0.5);
    let enc = EncodedState::maximally_entangled();
    let exact = exact_fidelity(&enc, &h, 3.0).unwrap().value;
    let mc =
        monte_carlo_fidelity(&enc, &h, 3.0, 100_000, SampleStream { seed: 12, realization: 0, t_index: 0 }).unwrap();
    assert!(mc.stderr > 0.0);
    assert!((mc.value - exact).abs() <= 3.0 * mc.stderr, "mc {} ± {} exact {exact}", mc.value, mc.stderr);
}

#[test]
fn monte_carlo_matches_exact_with_disorder_and_unequal_weights() {
    let p = ChainParams::new(12, 0.5, 0.25, Disorder::UniformIid { seed: 21 }).unwrap();
    let h = one_particle_hamiltonian(&p, &realize_potential(&p, 1)).unwrap();
    let enc = EncodedState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
    for (k, t) in [2.0, 9.0].into_iter().enumerate() {
        let exact = exact_fidelity(&enc, &h, t).unwrap().value;
        let mc = monte_carlo_fidelity(&enc, &h, t, 20_000, SampleStream { seed: 5, realization: 1, t_index: k as u64 })
            .unwrap();
        assert!((mc.value - exact).abs() <= 3.0 * mc.stderr, "t {t}: mc {} ± {} exact {exact}", mc.value, mc.stderr);
    }
}

#[test]
fn single_sector_states_are_not_degraded() {
    let h = clean(8, 0.5);
    for enc in [
        EncodedState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap(),
        EncodedState::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap(),
    ] {
        for t in [1.0, 3.0, 7.0] {
            assert!((exact_fidelity(&enc, &h, t).unwrap().value - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn fidelity_decays_for_strong_perturbation() {
    // At μ = 0.8 and N = 6 the splitting is large; F drops well below 1 early.
    let h = clean(6, 0.8);
    let enc = EncodedState::maximally_entangled();
    let delta = williamson(&h).unwrap().splitting();
    let f = exact_fidelity(&enc, &h, std::f64::consts::PI / delta).unwrap().value;
    assert!(f < 0.5, "F {f}");
}
