//! Storage fidelity of the Majorana chain memory and storage times.
//!
//! For a code state `|g> = α_0 |g_0>|0_R> + α_1 |g_1>|1_R>` the fidelity after
//! ideal error correction at time `t` is
//! `F(t) = Σ_s |Σ_σ |α_σ|² A_σ(s)|²` with the corrected amplitude
//! `A_σ(s) = <g_σ|C(s) e^{iĤt}|g_σ>`. Each `A_σ(s)` is a Pfaffian; for many
//! syndromes at one time the common `2N × 2N` block is factored out once
//! (see [`AmplitudeKernel`]).

use std::collections::HashMap;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{correction_operator_forms, decode, Correction};
use crate::error::{Error, Result};
use crate::gaussian::{
    evolved_ground_state, ground_state, sample_syndrome_with, syndrome_probability, wick_expectation, GaussianState,
    MajoranaForm, Parity, Syndrome,
};
use crate::skewlin::{pfaffian_complex, pfaffian_in_place, williamson, SkewMatrix, WilliamsonForm};

/// Largest `N` for which syndromes are enumerated by default.
pub const DEFAULT_EXACT_LIMIT: usize = 12;
/// Samples per deterministic work unit of the Monte Carlo estimator.
const CHUNK: usize = 128;
/// Above this condition estimate the factored kernel is abandoned.
const KERNEL_CONDITION_LIMIT: f64 = 1e9;
/// Amplitude-probability mismatch tolerated by the debug cross-check.
const DEBUG_CHECK_TOL: f64 = 1e-8;
/// The debug cross-check is skipped above this many sites.
const DEBUG_CHECK_MAX_N: usize = 24;

/// Encoded logical state, amplitudes of the even and odd code states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedState {
    pub alpha0: Complex64,
    pub alpha1: Complex64,
}

impl Default for EncodedState {
    fn default() -> Self {
        Self::maximally_entangled()
    }
}

impl EncodedState {
    pub fn new(alpha0: Complex64, alpha1: Complex64) -> Result<Self> {
        let norm = alpha0.norm_sqr() + alpha1.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("encoded state has norm² {norm}, expected 1")));
        }
        Ok(Self { alpha0, alpha1 })
    }

    pub fn maximally_entangled() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { alpha0: a, alpha1: a }
    }

    /// Sector weights `|α_σ|²`, renormalized so they sum to one in floating point.
    pub fn weights(&self) -> [f64; 2] {
        let (a, b) = (self.alpha0.norm_sqr(), self.alpha1.norm_sqr());
        if a >= b {
            let w0 = a / (a + b);
            [w0, 1.0 - w0]
        } else {
            let w1 = b / (a + b);
            [1.0 - w1, w1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub mode: EstimateMode,
}

/// How `F(t)` is evaluated at a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Exact,
    MonteCarlo {
        n_samples: usize,
        /// Global seed of the sample streams.
        seed: u64,
        /// Disorder realization the samples belong to (part of the stream key).
        realization: u64,
    },
    /// Monte Carlo with `n_samples`, refined in storage-time searches: while
    /// an estimate lies within `REFINE_Z` standard errors of an open
    /// threshold, the sample count is multiplied by `REFINE_FACTOR`, up to
    /// `max_samples`. The larger runs extend the same sample stream.
    Sequential { n_samples: usize, max_samples: usize, seed: u64, realization: u64 },
}

/// Standard errors within which a storage-time comparison counts as unresolved.
pub const REFINE_Z: f64 = 2.0;
/// Growth of the sample count per refinement step.
pub const REFINE_FACTOR: usize = 4;

/// Identifies the random stream of one Monte Carlo time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleStream {
    pub seed: u64,
    pub realization: u64,
    pub t_index: u64,
}

impl SampleStream {
    /// Generator for sample `index`, independent of all other samples.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (k, w) in [self.seed, self.realization, self.t_index, index].iter().enumerate() {
            key[8 * k..8 * k + 8].copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StorageTime {
    /// First grid time with `F < F0`.
    Crossed(f64),
    /// No crossing up to the given time.
    Censored(f64),
}

impl StorageTime {
    pub fn value(&self) -> f64 {
        match *self {
            StorageTime::Crossed(t) | StorageTime::Censored(t) => t,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, StorageTime::Censored(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTimeResult {
    pub f0: f64,
    pub time: StorageTime,
    pub grid: Vec<f64>,
    /// Fidelity estimates computed on the way, in grid order.
    pub curve: Vec<FidelityEstimate>,
}

/// Uniform grid of `n_points` times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        0 => vec![],
        1 => vec![t_max],
        _ => (0..n_points).map(|k| t_max * k as f64 / (n_points - 1) as f64).collect(),
    }
}

/// A chain Hamiltonian together with its canonical form.
#[derive(Debug, Clone)]
pub struct MemoryModel {
    h: SkewMatrix,
    form: WilliamsonForm,
}

impl MemoryModel {
    pub fn new(h: SkewMatrix) -> Result<Self> {
        if h.n_modes() < 2 {
            return Err(Error::InvalidParameter("memory needs N >= 2".into()));
        }
        let form = williamson(&h)?;
        Ok(Self { h, form })
    }

    pub fn n(&self) -> usize {
        self.h.n_modes()
    }

    pub fn hamiltonian(&self) -> &SkewMatrix {
        &self.h
    }

    pub fn form(&self) -> &WilliamsonForm {
        &self.form
    }

    /// Splitting `δ = λ_1`.
    pub fn splitting(&self) -> f64 {
        self.form.splitting()
    }

    /// Coefficient rows of the forms `L'_1 … L'_{2N}` whose product is `e^{iĤt}`.
    pub fn evolution_forms(&self, t: f64) -> DMatrix<f64> {
        let dim = 2 * self.n();
        let w = self.form.modes();
        let mut out = DMatrix::zeros(dim, dim);
        for (j, &l) in self.form.lambdas().iter().enumerate() {
            let (s, c) = (0.5 * l * t).sin_cos();
            for p in 0..dim {
                out[(2 * j, p)] = w[(2 * j, p)];
                out[(2 * j + 1, p)] = c * w[(2 * j, p)] - s * w[(2 * j + 1, p)];
            }
        }
        out
    }

    pub fn cosine_baseline(&self, t: f64) -> f64 {
        let c = (0.5 * self.splitting() * t).cos();
        c * c
    }
}

/// `A_σ(s) = <g_σ|C(s) e^{iĤt}|g_σ>` by a single Wick contraction over the
/// `2q + 2N` forms.
pub fn corrected_amplitude(parity: Parity, s: &Syndrome, h: &SkewMatrix, t: f64) -> Result<Complex64> {
    let model = MemoryModel::new(h.clone())?;
    direct_amplitude(&model, parity, &decode(s, model.n()), t)
}

fn direct_amplitude(model: &MemoryModel, parity: Parity, c: &Correction, t: f64) -> Result<Complex64> {
    let g = ground_state(model.n(), parity)?;
    let mut forms = correction_operator_forms(c);
    // At t = 0 the evolution is the identity and contributes no forms.
    if t != 0.0 {
        let ev = model.evolution_forms(t);
        for r in 0..ev.nrows() {
            forms.push(MajoranaForm::real(ev.row(r).iter().copied().collect::<Vec<_>>().as_slice()));
        }
    }
    if forms.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    wick_expectation(&g, &forms)
}

/// Precomputed data for evaluating `A_σ(s)` for many syndromes at one `t`.
///
/// With the correction forms first, the Wick matrix is
/// `[[P, Q], [-Q^T, R]]` where `R` only involves the evolution forms. Then
/// `pf = pf(R) pf(P + Q R^{-1} Q^T)`, and the second factor only needs the
/// rows of `K = G R^{-1} G^T` belonging to corrected sites.
pub struct AmplitudeKernel {
    parity: Parity,
    n: usize,
    /// `M^σ` of the code state.
    m0: DMatrix<f64>,
    inner: KernelInner,
}

enum KernelInner {
    Factored { pf_r: Complex64, k: DMatrix<Complex64> },
    Direct { forms: Vec<MajoranaForm>, state: GaussianState },
}

impl AmplitudeKernel {
    pub fn new(model: &MemoryModel, parity: Parity, t: f64) -> Result<Self> {
        let n = model.n();
        let dim = 2 * n;
        let g = ground_state(n, parity)?;
        let m0 = g.covariance().as_matrix().clone();
        if t == 0.0 {
            let k = DMatrix::zeros(dim, dim);
            return Ok(Self { parity, n, m0, inner: KernelInner::Factored { pf_r: Complex64::new(1.0, 0.0), k } });
        }
        let wp = model.evolution_forms(t);

        let s = &wp * wp.transpose();
        let tm = &wp * &m0 * wp.transpose();
        let r = DMatrix::<Complex64>::from_fn(dim, dim, |j, k| {
            if j < k {
                Complex64::new(s[(j, k)], tm[(j, k)])
            } else if j > k {
                -Complex64::new(s[(k, j)], tm[(k, j)])
            } else {
                Complex64::new(0.0, 0.0)
            }
        });

        let factored = (|| {
            let inv = r.clone().lu().try_inverse()?;
            let cond = r.iter().map(|z| z.norm()).fold(0.0, f64::max)
                * inv.iter().map(|z| z.norm()).fold(0.0, f64::max)
                * dim as f64;
            if !cond.is_finite() || cond > KERNEL_CONDITION_LIMIT {
                return None;
            }
            let pf_r = pfaffian_complex(&r).ok()?;
            // G = (I + i M^σ) W'^T
            let gamma = DMatrix::<Complex64>::from_fn(dim, dim, |p, q| {
                Complex64::new(if p == q { 1.0 } else { 0.0 }, m0[(p, q)])
            });
            let wpt = wp.transpose().map(|x| Complex64::new(x, 0.0));
            let gm = gamma * wpt;
            let k = &gm * inv * gm.transpose();
            Some((pf_r, k))
        })();

        let inner = match factored {
            Some((pf_r, k)) => KernelInner::Factored { pf_r, k },
            None => {
                warn!("amplitude kernel at t = {t} is ill-conditioned; using direct Pfaffians");
                let forms = (0..dim)
                    .map(|r| MajoranaForm::real(wp.row(r).iter().copied().collect::<Vec<_>>().as_slice()))
                    .collect();
                KernelInner::Direct { forms, state: g }
            }
        };
        Ok(Self { parity, n, m0, inner })
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.inner, KernelInner::Factored { .. })
    }

    /// `<g_σ|C e^{iĤt}|g_σ>` for the correction `c`.
    pub fn amplitude(&self, c: &Correction) -> Result<Complex64> {
        match &self.inner {
            KernelInner::Factored { pf_r, k } => {
                let q = c.sites.len();
                if q == 0 {
                    return Ok(*pf_r);
                }
                let sel: Vec<usize> = c.sites.iter().flat_map(|&j| [2 * j - 2, 2 * j - 1]).collect();
                let d = sel.len();
                let mut x = Vec::with_capacity(d * d);
                for &a in &sel {
                    for &b in &sel {
                        x.push(Complex64::new(0.0, self.m0[(a, b)]) + k[(a, b)]);
                    }
                }
                let pf_x = pfaffian_in_place(&mut x, d);
                // det of diag(-i, 1, -i, 1, ...) is (-i)^q.
                let phase = match q % 4 {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, -1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, 1.0),
                };
                Ok(phase * pf_r * pf_x)
            }
            KernelInner::Direct { forms, state } => {
                let mut all = correction_operator_forms(c);
                all.extend(forms.iter().cloned());
                wick_expectation(state, &all)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Both sector kernels and evolved states for one time point.
struct TimeSlice {
    t: f64,
    kernels: [AmplitudeKernel; 2],
    states: [GaussianState; 2],
}

impl TimeSlice {
    fn new(model: &MemoryModel, t: f64) -> Result<Self> {
        let kernels = [AmplitudeKernel::new(model, Parity::Even, t)?, AmplitudeKernel::new(model, Parity::Odd, t)?];
        let states =
            [evolved_ground_state(model.form(), Parity::Even, t)?, evolved_ground_state(model.form(), Parity::Odd, t)?];
        Ok(Self { t, kernels, states })
    }

    fn amplitudes(&self, s: &Syndrome) -> Result<[Complex64; 2]> {
        let c = decode(s, self.kernels[0].n());
        Ok([self.kernels[0].amplitude(&c)?, self.kernels[1].amplitude(&c)?])
    }

    /// `(|Σ_σ w_σ A_σ|², π(s))`, using `|A_σ(s)|² = <g_σ(t)|Q_s|g_σ(t)>`.
    fn contributions(&self, s: &Syndrome, w: [f64; 2]) -> Result<(f64, f64)> {
        let a = self.amplitudes(s)?;
        let num = (a[0] * w[0] + a[1] * w[1]).norm_sqr();
        let pi = w[0] * a[0].norm_sqr() + w[1] * a[1].norm_sqr();
        if cfg!(debug_assertions) && self.kernels[0].n() <= DEBUG_CHECK_MAX_N {
            for sigma in 0..2 {
                if w[sigma] == 0.0 {
                    continue;
                }
                let direct = syndrome_probability(&self.states[sigma], s)?;
                let diff = (direct - a[sigma].norm_sqr()).abs();
                if diff > DEBUG_CHECK_TOL {
                    return Err(Error::NumericalConsistency(format!(
                        "amplitude and syndrome probability disagree by {diff:e} at t = {}",
                        self.t
                    )));
                }
            }
        }
        Ok((num, pi))
    }
}

/// `f_s = |Σ_σ |α_σ|² A_σ(s)|² / π(s)` with `π(s)` from the covariance matrices.
pub fn conditional_fidelity(s: &Syndrome, enc: &EncodedState, h: &SkewMatrix, t: f64) -> Result<f64> {
    let model = MemoryModel::new(h.clone())?;
    let w = enc.weights();
    let c = decode(s, model.n());
    let mut num = Complex64::new(0.0, 0.0);
    let mut pi = 0.0;
    for (sigma, parity) in [Parity::Even, Parity::Odd].into_iter().enumerate() {
        if w[sigma] == 0.0 {
            continue;
        }
        num += direct_amplitude(&model, parity, &c, t)? * w[sigma];
        pi += w[sigma] * syndrome_probability(&evolved_ground_state(model.form(), parity, t)?, s)?;
    }
    if pi < 1e-300 {
        return Err(Error::DegenerateSyndrome { prob: pi });
    }
    Ok(num.norm_sqr() / pi)
}

/// Exact `F(t)` by summing over all `2^{N-1}` syndromes (`N ≤ 12`).
pub fn exact_fidelity(enc: &EncodedState, h: &SkewMatrix, t: f64) -> Result<FidelityEstimate> {
    exact_fidelity_model(&MemoryModel::new(h.clone())?, enc, t, DEFAULT_EXACT_LIMIT)
}

pub fn exact_fidelity_model(model: &MemoryModel, enc: &EncodedState, t: f64, limit: usize) -> Result<FidelityEstimate> {
    let n = model.n();
    if n > limit {
        return Err(Error::OverLimit { n, limit });
    }
    let slice = TimeSlice::new(model, t)?;
    let w = enc.weights();
    let mut total = 0.0;
    for idx in 0..1u64 << (n - 1) {
        total += slice.contributions(&Syndrome::from_index(n, idx), w)?.0;
    }
    Ok(FidelityEstimate { t, value: total, stderr: 0.0, n_samples: 0, mode: EstimateMode::Exact })
}

/// Per-syndrome sector probabilities `<g_σ(t)|Q_s|g_σ(t)>` for all `s`.
pub fn exact_syndrome_distribution(model: &MemoryModel, parity: Parity, t: f64) -> Result<Vec<f64>> {
    let n = model.n();
    if n > DEFAULT_EXACT_LIMIT {
        return Err(Error::OverLimit { n, limit: DEFAULT_EXACT_LIMIT });
    }
    let st = evolved_ground_state(model.form(), parity, t)?;
    (0..1u64 << (n - 1)).map(|idx| syndrome_probability(&st, &Syndrome::from_index(n, idx))).collect()
}

/// Monte Carlo estimate of `F(t) = E_s[f_s]` with `s ~ π`.
pub fn monte_carlo_fidelity(
    enc: &EncodedState,
    h: &SkewMatrix,
    t: f64,
    n_samples: usize,
    stream: SampleStream,
) -> Result<FidelityEstimate> {
    monte_carlo_fidelity_model(&MemoryModel::new(h.clone())?, enc, t, n_samples, stream)
}

pub fn monte_carlo_fidelity_model(
    model: &MemoryModel,
    enc: &EncodedState,
    t: f64,
    n_samples: usize,
    stream: SampleStream,
) -> Result<FidelityEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least one sample".into()));
    }
    let slice = TimeSlice::new(model, t)?;
    let w = enc.weights();
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partial: Vec<Result<(f64, f64, f64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(n_samples);
            let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
            let mut scratch = Vec::new();
            // Running mean and sum of squared deviations of the chunk.
            let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for idx in lo..hi {
                let mut rng = stream.rng(idx as u64);
                let sigma = if rng.gen::<f64>() < w[0] { 0 } else { 1 };
                let sample = sample_syndrome_with(&slice.states[sigma], &mut rng, &mut scratch)?;
                let key = sample.syndrome.packed();
                let f = match cache.get(&key) {
                    Some(&f) => f,
                    None => {
                        let (num, pi) = slice.contributions(&sample.syndrome, w)?;
                        if pi < 1e-300 {
                            return Err(Error::DegenerateSyndrome { prob: pi });
                        }
                        // Σ_σ w_σ = 1 analytically; keeping the factor makes f = 1 exact
                        // for a perfect return.
                        let f = num / (pi * (w[0] + w[1]));
                        cache.insert(key, f);
                        f
                    }
                };
                count += 1.0;
                let delta = f - mean;
                mean += delta / count;
                m2 += delta * (f - mean);
            }
            Ok((count, mean, m2))
        })
        .collect();
    // Chunks are merged in index order, independent of scheduling.
    let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for r in partial {
        let (nb, mb, m2b) = r?;
        let total = count + nb;
        let delta = mb - mean;
        mean += delta * nb / total;
        m2 += m2b + delta * delta * count * nb / total;
        count = total;
    }
    let nf = n_samples as f64;
    let stderr = if n_samples > 1 { (m2 / (nf - 1.0) / nf).sqrt() } else { 0.0 };
    Ok(FidelityEstimate { t, value: mean, stderr, n_samples, mode: EstimateMode::MonteCarlo })
}

/// `F(t_k)` with the chosen estimator; `t_index` keys the random stream.
pub fn estimate_fidelity(
    model: &MemoryModel,
    enc: &EncodedState,
    t: f64,
    t_index: usize,
    estimator: &Estimator,
) -> Result<FidelityEstimate> {
    match *estimator {
        Estimator::Exact => exact_fidelity_model(model, enc, t, DEFAULT_EXACT_LIMIT),
        Estimator::MonteCarlo { n_samples, seed, realization }
        | Estimator::Sequential { n_samples, seed, realization, .. } => monte_carlo_fidelity_model(
            model,
            enc,
            t,
            n_samples,
            SampleStream { seed, realization, t_index: t_index as u64 },
        ),
    }
}

fn unresolved(est: &FidelityEstimate, f0s: &[f64], crossed: &[Option<f64>]) -> bool {
    f0s.iter().zip(crossed).any(|(&f0, c)| c.is_none() && (est.value - f0).abs() < REFINE_Z * est.stderr)
}

/// The whole curve `F(t)` over `grid`.
pub fn fidelity_curve(
    model: &MemoryModel,
    enc: &EncodedState,
    grid: &[f64],
    estimator: &Estimator,
) -> Result<Vec<FidelityEstimate>> {
    grid.iter().enumerate().map(|(k, &t)| estimate_fidelity(model, enc, t, k, estimator)).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// First grid time at which `F < F0`.
pub fn storage_time(
    enc: &EncodedState,
    h: &SkewMatrix,
    grid: &[f64],
    f0: f64,
    estimator: &Estimator,
) -> Result<StorageTimeResult> {
    let model = MemoryModel::new(h.clone())?;
    Ok(storage_times(&model, enc, grid, &[f0], estimator)?.remove(0))
}

/// Storage times for several thresholds in one sweep; evaluation stops once
/// every threshold has been crossed.
pub fn storage_times(
    model: &MemoryModel,
    enc: &EncodedState,
    grid: &[f64],
    f0s: &[f64],
    estimator: &Estimator,
) -> Result<Vec<StorageTimeResult>> {
    check_grid(grid)?;
    let mut crossed: Vec<Option<f64>> = vec![None; f0s.len()];
    let mut curve = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        if crossed.iter().all(Option::is_some) {
            break;
        }
        let mut est = estimate_fidelity(model, enc, t, k, estimator)?;
        if let Estimator::Sequential { max_samples, seed, realization, .. } = *estimator {
            let stream = SampleStream { seed, realization, t_index: k as u64 };
            while est.n_samples < max_samples && unresolved(&est, f0s, &crossed) {
                let n = (est.n_samples * REFINE_FACTOR).min(max_samples);
                est = monte_carlo_fidelity_model(model, enc, t, n, stream)?;
            }
        }
        for (slot, &f0) in crossed.iter_mut().zip(f0s) {
            if slot.is_none() && est.value < f0 {
                *slot = Some(t);
            }
        }
        curve.push(est);
    }
    let t_max = *grid.last().unwrap();
    Ok(f0s
        .iter()
        .zip(crossed)
        .map(|(&f0, c)| StorageTimeResult {
            f0,
            time: c.map_or(StorageTime::Censored(t_max), StorageTime::Crossed),
            grid: grid.to_vec(),
            curve: curve.clone(),
        })
        .collect())
}

/// `cos²(δt/2)` with `δ = λ_1` of `h`.
pub fn cosine_baseline(h: &SkewMatrix, t: f64) -> Result<f64> {
    Ok(MemoryModel::new(h.clone())?.cosine_baseline(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::hamiltonian_from_mus;

    fn model(mus: &[f64]) -> MemoryModel {
        MemoryModel::new(hamiltonian_from_mus(mus, 1.0, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn kernel_matches_direct_wick() {
        let m = model(&[0.5, 0.3, 0.6, 0.45, 0.2]);
        for t in [0.0, 0.7, 3.1] {
            for parity in [Parity::Even, Parity::Odd] {
                let kernel = AmplitudeKernel::new(&m, parity, t).unwrap();
                assert!(kernel.is_factored());
                for idx in 0..16 {
                    let c = decode(&Syndrome::from_index(5, idx), 5);
                    let a = kernel.amplitude(&c).unwrap();
                    let b = direct_amplitude(&m, parity, &c, t).unwrap();
                    assert!((a - b).norm() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn trivial_time_values() {
        let h = hamiltonian_from_mus(&[0.3, 0.2, 0.4], 1.0, 0.0).unwrap();
        let enc = EncodedState::default();
        assert!((exact_fidelity(&enc, &h, 0.0).unwrap().value - 1.0).abs() < 1e-14);
        let s0 = Syndrome::trivial(3);
        assert!((corrected_amplitude(Parity::Even, &s0, &h, 0.0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let s1 = Syndrome::from_index(3, 2);
        assert!(corrected_amplitude(Parity::Odd, &s1, &h, 0.0).unwrap().norm() < 1e-14);
        assert!((conditional_fidelity(&s0, &enc, &h, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let mc = monte_carlo_fidelity(&enc, &h, 0.0, 50, SampleStream { seed: 1, realization: 0, t_index: 0 }).unwrap();
        assert_eq!((mc.value, mc.stderr), (1.0, 0.0));
    }

    #[test]
    fn amplitude_modulus_is_probability() {
        let m = model(&[0.5, 0.5, 0.5, 0.5]);
        let probs = exact_syndrome_distribution(&m, Parity::Odd, 2.0).unwrap();
        let kernel = AmplitudeKernel::new(&m, Parity::Odd, 2.0).unwrap();
        for (idx, p) in probs.iter().enumerate() {
            let c = decode(&Syndrome::from_index(4, idx as u64), 4);
            assert!((kernel.amplitude(&c).unwrap().norm_sqr() - p).abs() < 1e-12);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn storage_time_threshold_zero_is_censored() {
        let h = hamiltonian_from_mus(&[0.1; 4], 1.0, 0.0).unwrap();
        let grid = uniform_grid(10.0, 11);
        let r = storage_time(&EncodedState::default(), &h, &grid, 0.0, &Estimator::Exact).unwrap();
        assert_eq!(r.time, StorageTime::Censored(10.0));
        assert!(storage_time(&EncodedState::default(), &h, &[1.0, 1.0], 0.5, &Estimator::Exact).is_err());
    }

    #[test]
    fn cosine_baseline_limits() {
        let h = hamiltonian_from_mus(&[0.0; 4], 1.0, 0.0).unwrap();
        assert_eq!(cosine_baseline(&h, 0.0).unwrap(), 1.0);
        assert_eq!(cosine_baseline(&h, 123.0).unwrap(), 1.0);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let h = hamiltonian_from_mus(&[0.5; 6], 1.0, 0.0).unwrap();
        let stream = SampleStream { seed: 9, realization: 2, t_index: 4 };
        let a = monte_carlo_fidelity(&EncodedState::default(), &h, 3.0, 300, stream).unwrap();
        let b = monte_carlo_fidelity(&EncodedState::default(), &h, 3.0, 300, stream).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encoded_state_normalization() {
        assert!(EncodedState::new(Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)).is_err());
        let w = EncodedState::default().weights();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sequential_refines_only_ambiguous_points() {
        let m = model(&[0.5; 8]);
        let enc = EncodedState::default();
        let grid = uniform_grid(12.0, 25);
        let seq = Estimator::Sequential { n_samples: 200, max_samples: 3200, seed: 5, realization: 0 };
        let r = storage_times(&m, &enc, &grid, &[0.9], &seq).unwrap().remove(0);
        for e in &r.curve {
            match e.n_samples {
                200 => assert!((e.value - 0.9).abs() >= REFINE_Z * e.stderr || e.stderr == 0.0),
                3200 => {}
                n => assert!((e.value - 0.9).abs() >= REFINE_Z * e.stderr, "stopped at {n} while unresolved"),
            }
        }
        assert!(r.curve.iter().any(|e| e.n_samples > 200));

        let flat = Estimator::Sequential { n_samples: 200, max_samples: 200, seed: 5, realization: 0 };
        let plain = Estimator::MonteCarlo { n_samples: 200, seed: 5, realization: 0 };
        let a = storage_times(&m, &enc, &grid, &[0.9], &flat).unwrap();
        let b = storage_times(&m, &enc, &grid, &[0.9], &plain).unwrap();
        assert_eq!(a, b);
    }
}
