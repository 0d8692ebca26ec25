//! Fermionic Gaussian states described by their covariance matrix
//! `M_pq = (-i/2) <[c_p, c_q]>`.
//!
//! Majorana indices are 0-based throughout the API: `c_1` of the usual
//! notation is index 0. Stabilizer `S_j = (-i) c_{2j} c_{2j+1}` (1-based `j`)
//! acts on indices `2j-1, 2j`, and syndrome bit `k` (0-based) refers to
//! `S_{k+1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skewlin::{pfaffian, pfaffian_complex, OrthogonalMatrix, SkewMatrix, WilliamsonForm};

/// Outcome probabilities closer than this to 0 or 1 are treated as certain.
const DETERMINISTIC_TOL: f64 = 1e-12;
/// Conditional probabilities may leave `[0, 1]` by at most this much.
const PROBABILITY_SLACK: f64 = 1e-9;

/// Fermionic parity sector. `Even` is `σ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    /// Superposition of both sectors; only used to label encoded states.
    Mixed,
}

impl Parity {
    pub fn from_sigma(sigma: u8) -> Self {
        if sigma % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sigma(self) -> Result<u8> {
        match self {
            Parity::Even => Ok(0),
            Parity::Odd => Ok(1),
            Parity::Mixed => Err(Error::InvalidParameter("operation needs a definite parity sector".into())),
        }
    }

    /// `(-1)^σ`.
    pub fn sign(self) -> Result<f64> {
        Ok(if self.sigma()? == 0 { 1.0 } else { -1.0 })
    }
}

/// A stabilizer measurement record `s ∈ {0,1}^{N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syndrome {
    pub bits: Vec<bool>,
}

impl Syndrome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn trivial(n_sites: usize) -> Self {
        Self { bits: vec![false; n_sites.saturating_sub(1)] }
    }

    /// Syndrome number `index` in little-endian bit order.
    pub fn from_index(n_sites: usize, index: u64) -> Self {
        Self { bits: (0..n_sites - 1).map(|k| (index >> k) & 1 == 1).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `σ(s)`: number of set bits modulo two.
    pub fn parity(&self) -> u8 {
        (self.weight() % 2) as u8
    }

    /// Bits packed into 64-bit words, for hashing.
    pub fn packed(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.bits.len().div_ceil(64)];
        for (k, &b) in self.bits.iter().enumerate() {
            if b {
                words[k / 64] |= 1 << (k % 64);
            }
        }
        words
    }
}

/// Result of sequential syndrome measurement.
#[derive(Debug, Clone)]
pub struct SyndromeSample {
    pub syndrome: Syndrome,
    /// Probability of this outcome, `∏_j p_j(s_j)`.
    pub prob: f64,
    /// Post-measurement state.
    pub state: GaussianState,
}

/// Complex linear combination `Σ_p α_p c_p` of Majorana operators.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaForm {
    pub coeffs: Vec<Complex64>,
}

impl MajoranaForm {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    /// `coeff · c_p` in a space of `dim` Majoranas.
    pub fn single(dim: usize, p: usize, coeff: Complex64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        coeffs[p] = coeff;
        Self { coeffs }
    }

    /// Real combination `Σ_p v_p c_p`.
    pub fn real(v: &[f64]) -> Self {
        Self { coeffs: v.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    m: SkewMatrix,
    parity: Parity,
}

impl GaussianState {
    /// Wraps a covariance matrix after checking `‖M‖ ≤ 1`.
    pub fn new(m: SkewMatrix, parity: Parity) -> Result<Self> {
        let a = m.as_matrix();
        let gram = crate::eigen::symmetric(&(a.transpose() * a));
        let top = gram.values.last().map_or(0.0, |&v| v.max(0.0).sqrt());
        if top > 1.0 + 1e-9 {
            return Err(Error::NumericalConsistency(format!("covariance matrix has singular value {top} > 1")));
        }
        Ok(Self { m, parity })
    }

    pub fn covariance(&self) -> &SkewMatrix {
        &self.m
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn n_modes(&self) -> usize {
        self.m.n_modes()
    }

    /// `max |M^T M - I|`; zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        let m = self.m.as_matrix();
        let dim = m.nrows();
        (m.transpose() * m - DMatrix::identity(dim, dim)).amax()
    }

    /// `<S_j> = M_{2j,2j+1}` for 0-based stabilizer index `k = j - 1`.
    pub fn stabilizer_expectation(&self, k: usize) -> f64 {
        self.m.get(2 * k + 1, 2 * k + 2)
    }
}

/// Code state `|g_σ>`: `M_{1,2N} = (-1)^σ`, `M_{2j,2j+1} = 1`.
pub fn ground_state(n: usize, parity: Parity) -> Result<GaussianState> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ground state needs N >= 2, got {n}")));
    }
    let sign = parity.sign()?;
    let mut m = SkewMatrix::zeros(2 * n)?;
    m.set(0, 2 * n - 1, sign);
    for j in 0..n - 1 {
        m.set(2 * j + 1, 2 * j + 2, 1.0);
    }
    Ok(GaussianState { m, parity })
}

/// `M ← R M R^T`.
pub fn evolve(state: &GaussianState, r: &OrthogonalMatrix) -> Result<GaussianState> {
    let m = state.m.conjugate_by(r.as_matrix())?;
    Ok(GaussianState { m, parity: state.parity })
}

/// State `e^{iĤt}|g_σ>` for the Hamiltonian with canonical form `form`.
///
/// Majoranas evolve as `e^{-iĤt} c e^{iĤt} = e^{-Ht} c`, so the covariance
/// is conjugated by `exp(-H t)`.
pub fn evolved_ground_state(form: &WilliamsonForm, parity: Parity, t: f64) -> Result<GaussianState> {
    let g = ground_state(form.n_modes(), parity)?;
    evolve(&g, &form.rotation(-t))
}

/// Projectively measures the stabilizer `k` (0-based) with outcome `bit`,
/// updating the full covariance matrix. Returns the outcome probability and
/// the normalized post-measurement state.
pub fn measure_stabilizer(state: &GaussianState, k: usize, bit: bool) -> Result<(f64, GaussianState)> {
    let dim = state.m.dim();
    if 2 * k + 2 >= dim {
        return Err(Error::InvalidParameter(format!("stabilizer index {k} out of range")));
    }
    let (a, b) = (2 * k + 1, 2 * k + 2);
    let nu = if bit { -1.0 } else { 1.0 };
    let prob = checked_probability(0.5 * (1.0 + nu * state.m.get(a, b)))?;
    if prob <= DETERMINISTIC_TOL {
        return Err(Error::DegenerateSyndrome { prob });
    }
    let src = state.m.as_matrix();
    let c = nu / (2.0 * prob);
    let mut out = DMatrix::zeros(dim, dim);
    for p in 0..dim {
        if p == a || p == b {
            continue;
        }
        for q in p + 1..dim {
            if q == a || q == b {
                continue;
            }
            let v = src[(p, q)] - c * src[(a, p)] * src[(b, q)] + c * src[(a, q)] * src[(b, p)];
            out[(p, q)] = v;
            out[(q, p)] = -v;
        }
    }
    out[(a, b)] = nu;
    out[(b, a)] = -nu;
    Ok((prob, GaussianState { m: SkewMatrix::from_matrix_unchecked(out), parity: state.parity }))
}

fn checked_probability(p: f64) -> Result<f64> {
    if !(p >= -PROBABILITY_SLACK && p <= 1.0 + PROBABILITY_SLACK) {
        return Err(Error::NumericalConsistency(format!("conditional probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Samples a complete syndrome by measuring `S_1, …, S_{N-1}` in order.
///
/// Only the entries of the covariance matrix that later steps read are
/// updated: row 1 and the trailing block. Cost `O(N³)`.
pub fn sample_syndrome<R: Rng + ?Sized>(state: &GaussianState, rng: &mut R) -> Result<SyndromeSample> {
    let mut scratch = Vec::new();
    sample_syndrome_with(state, rng, &mut scratch)
}

/// Like [`sample_syndrome`], reusing `scratch` for the working matrix.
pub fn sample_syndrome_with<R: Rng + ?Sized>(
    state: &GaussianState,
    rng: &mut R,
    scratch: &mut Vec<f64>,
) -> Result<SyndromeSample> {
    let dim = state.m.dim();
    let n = dim / 2;
    let src = state.m.as_matrix();
    scratch.clear();
    scratch.resize(dim * dim, 0.0);
    let w = scratch.as_mut_slice();
    // Upper triangle only, row-major.
    for p in 0..dim {
        for q in p + 1..dim {
            w[p * dim + q] = src[(p, q)];
        }
    }

    let mut bits = Vec::with_capacity(n - 1);
    let mut prob = 1.0;
    let mut ua = vec![0.0; dim];
    let mut ub = vec![0.0; dim];
    for k in 0..n - 1 {
        let (a, b) = (2 * k + 1, 2 * k + 2);
        let p0 = checked_probability(0.5 * (1.0 + w[a * dim + b]))?;
        let bit = if p0 >= 1.0 - DETERMINISTIC_TOL {
            false
        } else if p0 <= DETERMINISTIC_TOL {
            true
        } else {
            rng.gen::<f64>() >= p0
        };
        let (ps, nu) = if bit { (1.0 - p0, -1.0) } else { (p0, 1.0) };
        bits.push(bit);
        prob *= ps;

        let lo = b + 1;
        if lo >= dim {
            continue;
        }
        // M_{a,0} = -M_{0,a}; the other active indices lie above a and b.
        ua[0] = -w[a];
        ub[0] = -w[b];
        ua[lo..].copy_from_slice(&w[a * dim + lo..(a + 1) * dim]);
        ub[lo..].copy_from_slice(&w[b * dim + lo..(b + 1) * dim]);
        let c = nu / (2.0 * ps);
        rank_two_update(&mut w[lo..dim], c * ub[0], &ua[lo..], c * ua[0], &ub[lo..]);
        for p in lo..dim - 1 {
            let (uap, ubp) = (c * ua[p], c * ub[p]);
            rank_two_update(&mut w[p * dim + p + 1..(p + 1) * dim], ubp, &ua[p + 1..], uap, &ub[p + 1..]);
        }
    }

    let corner = w[dim - 1];
    let mut m = SkewMatrix::zeros(dim)?;
    m.set(0, dim - 1, corner);
    for (k, &bit) in bits.iter().enumerate() {
        m.set(2 * k + 1, 2 * k + 2, if bit { -1.0 } else { 1.0 });
    }
    Ok(SyndromeSample { syndrome: Syndrome { bits }, prob, state: GaussianState { m, parity: state.parity } })
}

#[inline]
fn rank_two_update(row: &mut [f64], x: f64, u: &[f64], y: f64, v: &[f64]) {
    for ((r, &a), &b) in row.iter_mut().zip(u).zip(v) {
        *r += x * a - y * b;
    }
}

/// Code-space projector state `M_s^σ` for syndrome `s`.
pub fn syndrome_covariance(n: usize, s: &Syndrome, parity: Parity) -> Result<SkewMatrix> {
    if s.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: s.len() });
    }
    let sigma = parity.sigma()?;
    let mut m = SkewMatrix::zeros(2 * n)?;
    let corner = if (sigma + s.parity()) % 2 == 0 { 1.0 } else { -1.0 };
    m.set(0, 2 * n - 1, corner);
    for (k, &bit) in s.bits.iter().enumerate() {
        m.set(2 * k + 1, 2 * k + 2, if bit { -1.0 } else { 1.0 });
    }
    Ok(m)
}

/// `<ψ|Q_s|ψ> = 2^{-N} |pf(M + M_s^σ)|` for a state of definite parity.
pub fn syndrome_probability(state: &GaussianState, s: &Syndrome) -> Result<f64> {
    let n = state.n_modes();
    let ms = syndrome_covariance(n, s, state.parity)?;
    let sum = state.m.add(&ms)?;
    let pf = pfaffian(&sum);
    Ok(pf.abs() * 0.5f64.powi(n as i32))
}

/// `<ψ|L_1 ⋯ L_{2m}|ψ>` by Wick's theorem.
pub fn wick_expectation(state: &GaussianState, ops: &[MajoranaForm]) -> Result<Complex64> {
    if ops.len() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "Wick contraction needs an even number of operators, got {}",
            ops.len()
        )));
    }
    let dim = state.m.dim();
    if let Some(bad) = ops.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
    }
    if ops.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let k = ops.len();
    let alpha = DMatrix::<Complex64>::from_fn(k, dim, |r, p| ops[r].coeffs[p]);
    let m = state.m.as_matrix();
    let gamma =
        DMatrix::<Complex64>::from_fn(dim, dim, |p, q| Complex64::new(if p == q { 1.0 } else { 0.0 }, m[(p, q)]));
    let full = &alpha * gamma * alpha.transpose();
    let a = DMatrix::<Complex64>::from_fn(k, k, |j, l| {
        if j < l {
            full[(j, l)]
        } else if j > l {
            -full[(l, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    pfaffian_complex(&a)
}
