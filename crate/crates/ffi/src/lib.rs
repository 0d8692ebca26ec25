//! C interface to `majorana-core`.
//!
//! Every function returns an [`MjStatus`]; results are written through out
//! pointers. On failure a message is stored per thread and can be read with
//! [`mj_last_error_message`]. Chains are opaque handles created by
//! [`mj_chain_new`] or [`mj_chain_from_potentials`] and released with
//! [`mj_chain_free`]. A handle is immutable after creation, so it may be shared
//! between threads.
//!
//! Fidelities refer to the encoded state `(|g_0> + |g_1>)/√2`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use majorana::chain::{one_particle_hamiltonian, realize_potential, ChainParams, Disorder, PotentialRealization};
use majorana::localization::{lyapunov_exponent, xi_effective};
use majorana::skewlin::{pfaffian, SkewMatrix};
use majorana::storage::{
    exact_fidelity_model, monte_carlo_fidelity_model, storage_times, EncodedState, Estimator, MemoryModel,
    SampleStream, DEFAULT_EXACT_LIMIT,
};
use majorana::Error;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    OverLimit = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MjDisorder {
    None = 0,
    Uniform = 1,
    Logistic = 2,
}

/// Chain description. `seed` is used by uniform disorder, `y1` and `a` by
/// the logistic map; `realization` selects the disorder stream.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MjChainParams {
    pub n: usize,
    pub mu: f64,
    pub eta: f64,
    pub disorder: MjDisorder,
    pub seed: u64,
    pub y1: f64,
    pub a: f64,
    pub realization: u64,
}

/// Opaque chain handle.
pub struct MjChain {
    potential: PotentialRealization,
    model: MemoryModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MjStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::NotAntisymmetric { .. } => {
                MjStatus::InvalidArgument
            }
            Error::OverLimit { .. } => MjStatus::OverLimit,
            _ => MjStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("no interior nul"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            MjStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(Some(format!("internal panic: {msg}")));
            MjStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(MjStatus::NullPointer, format!("{name} is null"))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn chain_ref<'a>(p: *const MjChain) -> Result<&'a MjChain, Failure> {
    p.as_ref().ok_or_else(|| null("chain"))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, needed: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len < needed {
        return Err(Failure(MjStatus::BufferTooSmall, format!("{name} holds {len} values, {needed} needed")));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn params_from(p: &MjChainParams) -> Result<ChainParams, Failure> {
    let disorder = match p.disorder {
        MjDisorder::None => Disorder::None,
        MjDisorder::Uniform => Disorder::UniformIid { seed: p.seed },
        MjDisorder::Logistic => Disorder::Logistic { y1: p.y1, a: p.a },
    };
    Ok(ChainParams::new(p.n, p.mu, p.eta, disorder)?)
}

fn boxed_chain(potential: PotentialRealization, h: SkewMatrix, out: &mut *mut MjChain) -> Result<(), Failure> {
    let model = MemoryModel::new(h)?;
    *out = Box::into_raw(Box::new(MjChain { potential, model }));
    Ok(())
}

/// Version string of the library, static storage.
#[no_mangle]
pub extern "C" fn mj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (nul
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator, 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mj_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, k);
            *buf.add(k) = 0;
        }
        bytes.len()
    })
}

/// Builds a chain from parameters.
///
/// # Safety
/// `params` must point to a valid `MjChainParams`; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_new(params: *const MjChainParams, out: *mut *mut MjChain) -> MjStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let out = self::out(out, "out")?;
        let p = params_from(params)?;
        let pot = realize_potential(&p, params.realization);
        let h = one_particle_hamiltonian(&p, &pot)?;
        boxed_chain(pot, h, out)
    })
}

/// Builds a chain with `J = 1` from explicit site potentials `mus[0..n]`.
///
/// # Safety
/// `mus` must point to `n` doubles; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_from_potentials(mus: *const f64, n: usize, out: *mut *mut MjChain) -> MjStatus {
    guard(|| {
        let mus = input(mus, n, "mus")?;
        let out = self::out(out, "out")?;
        if n < 2 {
            return Err(Failure(MjStatus::InvalidArgument, format!("chain needs N >= 2 sites, got {n}")));
        }
        let pot = PotentialRealization::from_mus(mus.to_vec());
        let h = majorana::chain::hamiltonian_from_mus(mus, 1.0, 0.0)?;
        boxed_chain(pot, h, out)
    })
}

/// Releases a chain. Null is ignored.
///
/// # Safety
/// `chain` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_free(chain: *mut MjChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of sites.
///
/// # Safety
/// `chain` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_n(chain: *const MjChain, n: *mut usize) -> MjStatus {
    guard(|| {
        *out(n, "n")? = chain_ref(chain)?.model.n();
        Ok(())
    })
}

/// Site potentials `μ_1..μ_N` into `buf` (length `len >= N`).
///
/// # Safety
/// `chain` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_potential(chain: *const MjChain, buf: *mut f64, len: usize) -> MjStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let dst = output(buf, len, c.potential.mus.len(), "buf")?;
        dst[..c.potential.mus.len()].copy_from_slice(&c.potential.mus);
        Ok(())
    })
}

/// Williamson eigenvalues `λ_1 <= ... <= λ_N` into `buf` (length `len >= N`).
///
/// # Safety
/// `chain` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_lambdas(chain: *const MjChain, buf: *mut f64, len: usize) -> MjStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let lambdas = c.model.form().lambdas_reported();
        let dst = output(buf, len, lambdas.len(), "buf")?;
        dst[..lambdas.len()].copy_from_slice(&lambdas);
        Ok(())
    })
}

/// Ground-state splitting `δ = λ_1`.
///
/// # Safety
/// `chain` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_chain_splitting(chain: *const MjChain, delta: *mut f64) -> MjStatus {
    guard(|| {
        *out(delta, "delta")? = chain_ref(chain)?.model.splitting();
        Ok(())
    })
}

/// `F(t)` by exact enumeration of all syndromes (N <= 12).
///
/// # Safety
/// `chain` must be a live handle; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_exact_fidelity(chain: *const MjChain, t: f64, value: *mut f64) -> MjStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let value = out(value, "value")?;
        let f = exact_fidelity_model(&c.model, &EncodedState::maximally_entangled(), t, DEFAULT_EXACT_LIMIT)?;
        *value = f.value;
        Ok(())
    })
}

/// Monte Carlo estimate of `F(t)`. The samples are determined by
/// `(seed, realization, t_index)`.
///
/// # Safety
/// `chain` must be a live handle; `value` and `stderr` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_monte_carlo_fidelity(
    chain: *const MjChain,
    t: f64,
    samples: usize,
    seed: u64,
    realization: u64,
    t_index: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> MjStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let value = out(value, "value")?;
        let stderr = out(stderr, "stderr")?;
        let stream = SampleStream { seed, realization, t_index };
        let f = monte_carlo_fidelity_model(&c.model, &EncodedState::maximally_entangled(), t, samples, stream)?;
        *value = f.value;
        *stderr = f.stderr;
        Ok(())
    })
}

/// First time on `grid` (strictly increasing) with `F < f0`. With
/// `samples == 0` fidelities are exact, otherwise Monte Carlo. If no grid
/// point crosses, `time` is the last grid point and `censored` is set to 1.
///
/// # Safety
/// `chain` must be a live handle; `grid` must hold `len` doubles; `time` and
/// `censored` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_storage_time(
    chain: *const MjChain,
    grid: *const f64,
    len: usize,
    f0: f64,
    samples: usize,
    seed: u64,
    realization: u64,
    time: *mut f64,
    censored: *mut c_int,
) -> MjStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let grid = input(grid, len, "grid")?;
        let time = out(time, "time")?;
        let censored = out(censored, "censored")?;
        if !(f0 > 0.0 && f0 < 1.0) {
            return Err(Failure(MjStatus::InvalidArgument, format!("f0 = {f0} is outside (0, 1)")));
        }
        let est = if samples == 0 {
            Estimator::Exact
        } else {
            Estimator::MonteCarlo { n_samples: samples, seed, realization }
        };
        let res = storage_times(&c.model, &EncodedState::maximally_entangled(), grid, &[f0], &est)?;
        *time = res[0].time.value();
        *censored = res[0].time.is_censored() as c_int;
        Ok(())
    })
}

/// Effective localization length of the chain's potential (N >= 8).
///
/// # Safety
/// `chain` must be a live handle; `xi` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_xi_effective(chain: *const MjChain, xi: *mut f64) -> MjStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let xi = out(xi, "xi")?;
        *xi = xi_effective(&c.potential)?.xi_eff;
        Ok(())
    })
}

/// Lyapunov exponent `ℓ(E)` over `n_sites` sites of the disorder stream
/// described by `params` (`params.n` is ignored).
///
/// # Safety
/// `params` must point to a valid `MjChainParams`; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_lyapunov_exponent(
    params: *const MjChainParams,
    n_sites: usize,
    energy: f64,
    value: *mut f64,
) -> MjStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let value = out(value, "value")?;
        let p = params_from(&MjChainParams { n: n_sites.max(2), ..*params })?;
        *value = lyapunov_exponent(&p, params.realization, n_sites, energy)?;
        Ok(())
    })
}

/// Pfaffian of the antisymmetric `dim x dim` matrix stored row-major in `a`.
///
/// # Safety
/// `a` must hold `dim * dim` doubles; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn mj_pfaffian(a: *const f64, dim: usize, value: *mut f64) -> MjStatus {
    guard(|| {
        let entries = input(a, dim * dim, "a")?;
        let value = out(value, "value")?;
        let m = nalgebra::DMatrix::from_row_slice(dim, dim, entries);
        *value = pfaffian(&SkewMatrix::new(m)?);
        Ok(())
    })
}
