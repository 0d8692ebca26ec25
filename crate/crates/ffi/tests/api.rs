use std::ffi::CStr;
use std::ptr;

use majorana::chain::{hamiltonian_from_mus, ChainParams, Disorder};
use majorana::storage::{exact_fidelity, EncodedState};
use majorana_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { mj_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn params(n: usize, mu: f64, eta: f64, disorder: MjDisorder) -> MjChainParams {
    MjChainParams { n, mu, eta, disorder, seed: 7, y1: 0.2845, a: 3.9914, realization: 0 }
}

fn chain(p: &MjChainParams) -> *mut MjChain {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { mj_chain_new(p, &mut c) }, MjStatus::Ok, "{}", last_error());
    assert!(!c.is_null());
    c
}

#[test]
fn exact_fidelity_matches_core() {
    let mus = [0.3, 0.5, 0.2, 0.45, 0.35];
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { mj_chain_from_potentials(mus.as_ptr(), mus.len(), &mut c) }, MjStatus::Ok);
    let h = hamiltonian_from_mus(&mus, 1.0, 0.0).unwrap();
    for t in [0.0, 1.3, 4.0] {
        let mut f = 0.0;
        assert_eq!(unsafe { mj_exact_fidelity(c, t, &mut f) }, MjStatus::Ok);
        let expected = exact_fidelity(&EncodedState::maximally_entangled(), &h, t).unwrap().value;
        assert!((f - expected).abs() < 1e-14);
    }
    let mut n = 0;
    assert_eq!(unsafe { mj_chain_n(c, &mut n) }, MjStatus::Ok);
    assert_eq!(n, 5);
    let mut back = [0.0; 5];
    assert_eq!(unsafe { mj_chain_potential(c, back.as_mut_ptr(), 5) }, MjStatus::Ok);
    assert_eq!(back, mus);
    unsafe { mj_chain_free(c) };
}

#[test]
fn monte_carlo_is_reproducible_and_close_to_exact() {
    let c = chain(&params(6, 0.4, 0.2, MjDisorder::Uniform));
    let (mut exact, mut a, mut sa, mut b, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(mj_exact_fidelity(c, 2.5, &mut exact), MjStatus::Ok);
        assert_eq!(mj_monte_carlo_fidelity(c, 2.5, 4000, 11, 0, 0, &mut a, &mut sa), MjStatus::Ok);
        assert_eq!(mj_monte_carlo_fidelity(c, 2.5, 4000, 11, 0, 0, &mut b, &mut sb), MjStatus::Ok);
        mj_chain_free(c);
    }
    assert_eq!(a.to_bits(), b.to_bits());
    assert!((a - exact).abs() < 4.0 * sa.max(1e-12), "{a} vs {exact} ± {sa}");
}

#[test]
fn storage_time_and_censoring() {
    let c = chain(&params(6, 0.5, 0.0, MjDisorder::None));
    let grid: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    let (mut t, mut censored) = (0.0, -1);
    unsafe {
        assert_eq!(mj_storage_time(c, grid.as_ptr(), grid.len(), 0.9, 0, 0, 0, &mut t, &mut censored), MjStatus::Ok);
        assert_eq!(censored, 0);
        assert!(t > 0.0 && t < 10.0);
        let mut f = 0.0;
        mj_exact_fidelity(c, t, &mut f);
        assert!(f < 0.9);
        let short = [0.0, 0.01];
        assert_eq!(mj_storage_time(c, short.as_ptr(), 2, 0.9, 0, 0, 0, &mut t, &mut censored), MjStatus::Ok);
        assert_eq!((t, censored), (0.01, 1));
        assert_eq!(
            mj_storage_time(c, grid.as_ptr(), grid.len(), 1.5, 0, 0, 0, &mut t, &mut censored),
            MjStatus::InvalidArgument
        );
        mj_chain_free(c);
    }
}

#[test]
fn spectrum_of_clean_chain() {
    let c = chain(&params(8, 0.0, 0.0, MjDisorder::None));
    let mut l = [9.0; 8];
    let mut delta = 1.0;
    unsafe {
        assert_eq!(mj_chain_lambdas(c, l.as_mut_ptr(), 8), MjStatus::Ok);
        assert_eq!(mj_chain_splitting(c, &mut delta), MjStatus::Ok);
        assert_eq!(mj_chain_lambdas(c, l.as_mut_ptr(), 7), MjStatus::BufferTooSmall);
        mj_chain_free(c);
    }
    assert_eq!(l[0], 0.0);
    assert!(l[1..].iter().all(|x| (x - 1.0).abs() < 1e-10));
    assert!(delta.abs() < 1e-12);
}

#[test]
fn localization_entry_points() {
    let c = chain(&params(32, 0.5, 0.5, MjDisorder::Uniform));
    let mut xi = 0.0;
    assert_eq!(unsafe { mj_xi_effective(c, &mut xi) }, MjStatus::Ok);
    unsafe { mj_chain_free(c) };
    assert!(xi > 0.0 && xi < 32.0);

    let p = params(0, 0.125, 0.0625, MjDisorder::Uniform);
    let mut l = 0.0;
    assert_eq!(unsafe { mj_lyapunov_exponent(&p, 100_000, 0.0, &mut l) }, MjStatus::Ok);
    let core = majorana::localization::lyapunov_exponent(
        &ChainParams::new(2, 0.125, 0.0625, Disorder::UniformIid { seed: 7 }).unwrap(),
        0,
        100_000,
        0.0,
    )
    .unwrap();
    assert_eq!(l, core);
    let clean = params(0, 0.125, 0.0, MjDisorder::None);
    assert_eq!(unsafe { mj_lyapunov_exponent(&clean, 1000, 0.0, &mut l) }, MjStatus::InvalidArgument);
}

#[test]
fn pfaffian_and_validation() {
    let a = [0.0, 2.0, -2.0, 0.0];
    let mut pf = 0.0;
    assert_eq!(unsafe { mj_pfaffian(a.as_ptr(), 2, &mut pf) }, MjStatus::Ok);
    assert_eq!(pf, 2.0);
    let sym = [0.0, 2.0, 2.0, 0.0];
    assert_eq!(unsafe { mj_pfaffian(sym.as_ptr(), 2, &mut pf) }, MjStatus::InvalidArgument);
    assert!(last_error().contains("antisymmetric"), "{}", last_error());
    assert_eq!(unsafe { mj_pfaffian(a.as_ptr(), 2, &mut pf) }, MjStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn null_and_invalid_arguments() {
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(mj_chain_new(ptr::null(), &mut out), MjStatus::NullPointer);
        assert!(last_error().contains("params"));
        assert_eq!(mj_chain_new(&params(1, 0.1, 0.0, MjDisorder::None), &mut out), MjStatus::InvalidArgument);
        assert!(out.is_null());
        let mut f = 0.0;
        assert_eq!(mj_exact_fidelity(ptr::null(), 0.0, &mut f), MjStatus::NullPointer);
        let big = chain(&params(14, 0.1, 0.0, MjDisorder::None));
        assert_eq!(mj_exact_fidelity(big, 1.0, &mut f), MjStatus::OverLimit);
        let (mut v, mut s) = (0.0, 0.0);
        assert_eq!(mj_monte_carlo_fidelity(big, 1.0, 0, 0, 0, 0, &mut v, &mut s), MjStatus::InvalidArgument);
        mj_chain_free(big);
        mj_chain_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(mj_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn errors_are_per_thread() {
    let sym = [0.0, 1.0, 1.0, 0.0];
    let mut pf = 0.0;
    assert_eq!(unsafe { mj_pfaffian(sym.as_ptr(), 2, &mut pf) }, MjStatus::InvalidArgument);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}
