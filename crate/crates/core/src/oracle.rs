//! Brute-force many-body simulator on the full `2^N`-dimensional Hilbert space.
//!
//! Intended for cross-checking the Gaussian formalism at `N ≤ 10`. Basis state
//! `x` has site `j` (1-based) in bit `j-1`, with `Z|0> = |0>`. Majoranas are
//! `c_{2j-1} = Z_1⋯Z_{j-1} X_j` and `c_{2j} = Z_1⋯Z_{j-1} Y_j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chain::{hamiltonian_from_mus, ChainParams, PotentialRealization};
use crate::decoder::decode;
use crate::error::{Error, Result};
use crate::gaussian::{MajoranaForm, Syndrome};
use crate::skewlin::SkewMatrix;
use crate::storage::EncodedState;

pub const ORACLE_LIMIT: usize = 10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_limit(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("oracle needs N >= 1".into()));
    }
    if n > ORACLE_LIMIT {
        return Err(Error::OverLimit { n, limit: ORACLE_LIMIT });
    }
    Ok(())
}

/// Dense operator on `N` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub n: usize,
    pub mat: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Operator mapping each basis state to a single basis state with a phase.
#[derive(Debug, Clone)]
struct Monomial {
    target: Vec<usize>,
    phase: Vec<Complex64>,
}

impl Monomial {
    fn identity(dim: usize) -> Self {
        Self { target: (0..dim).collect(), phase: vec![ONE; dim] }
    }

    fn majorana(n: usize, p: usize) -> Self {
        let dim = 1usize << n;
        let site = p / 2;
        let below = (1usize << site) - 1;
        let mut target = Vec::with_capacity(dim);
        let mut phase = Vec::with_capacity(dim);
        for x in 0..dim {
            let z = if (x & below).count_ones() % 2 == 0 { ONE } else { -ONE };
            let up = (x >> site) & 1 == 1;
            let local = if p % 2 == 0 {
                ONE
            } else if up {
                -I
            } else {
                I
            };
            target.push(x ^ (1 << site));
            phase.push(z * local);
        }
        Self { target, phase }
    }

    /// `self · other`.
    fn then_after(&self, other: &Monomial) -> Monomial {
        let dim = self.target.len();
        let mut target = Vec::with_capacity(dim);
        let mut phase = Vec::with_capacity(dim);
        for x in 0..dim {
            let y = other.target[x];
            target.push(self.target[y]);
            phase.push(self.phase[y] * other.phase[x]);
        }
        Monomial { target, phase }
    }

    fn scaled(mut self, c: Complex64) -> Monomial {
        self.phase.iter_mut().for_each(|z| *z *= c);
        self
    }

    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::from_element(v.len(), ZERO);
        for x in 0..v.len() {
            out[self.target[x]] += self.phase[x] * v[x];
        }
        out
    }

    fn dense(&self) -> DMatrix<Complex64> {
        let dim = self.target.len();
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for x in 0..dim {
            m[(self.target[x], x)] += self.phase[x];
        }
        m
    }
}

/// The `2N` Jordan-Wigner Majorana operators as dense matrices.
pub fn build_majoranas(n: usize) -> Result<Vec<DenseOperator>> {
    check_limit(n)?;
    Ok((0..2 * n).map(|p| DenseOperator { n, mat: Monomial::majorana(n, p).dense() }).collect())
}

/// `P̂ = ∏_j (-i) c_{2j-1} c_{2j}` as a dense matrix.
pub fn parity_operator(n: usize) -> Result<DenseOperator> {
    check_limit(n)?;
    Ok(DenseOperator { n, mat: parity_monomial(n).dense() })
}

fn parity_monomial(n: usize) -> Monomial {
    let mut acc = Monomial::identity(1 << n);
    for j in 0..n {
        let e = Monomial::majorana(n, 2 * j).then_after(&Monomial::majorana(n, 2 * j + 1)).scaled(-I);
        acc = acc.then_after(&e);
    }
    acc
}

/// `Ĥ = (i/4) Σ_pq H_pq c_p c_q` as a dense matrix.
pub fn hamiltonian_dense(h: &SkewMatrix) -> Result<DenseOperator> {
    let n = h.n_modes();
    check_limit(n)?;
    let dim = 1usize << n;
    let majoranas: Vec<Monomial> = (0..2 * n).map(|p| Monomial::majorana(n, p)).collect();
    let mut mat = DMatrix::from_element(dim, dim, ZERO);
    for p in 0..2 * n {
        for q in p + 1..2 * n {
            let coef = h.get(p, q);
            if coef == 0.0 {
                continue;
            }
            let pq = majoranas[p].then_after(&majoranas[q]);
            let c = I * 0.5 * coef;
            for x in 0..dim {
                mat[(pq.target[x], x)] += c * pq.phase[x];
            }
        }
    }
    Ok(DenseOperator { n, mat })
}

/// Eigen-decomposition of a Hamiltonian restricted to both parity sectors.
struct SectorSpectrum {
    /// Basis states of the sector.
    basis: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

fn sector_spectra(hd: &DenseOperator) -> Result<[SectorSpectrum; 2]> {
    let n = hd.n;
    let dim = 1usize << n;
    let mut out = Vec::with_capacity(2);
    for sigma in 0..2u32 {
        let basis: Vec<usize> = (0..dim).filter(|x| x.count_ones() % 2 == sigma).collect();
        let d = basis.len();
        let sub = DMatrix::from_fn(d, d, |r, c| hd.mat[(basis[r], basis[c])]);
        let leak = (0..dim)
            .filter(|x| x.count_ones() % 2 != sigma)
            .flat_map(|r| basis.iter().map(move |&c| (r, c)))
            .fold(0.0f64, |m, (r, c)| m.max(hd.mat[(r, c)].norm()));
        if leak > 1e-12 {
            return Err(Error::NumericalConsistency(format!("Hamiltonian does not conserve parity ({leak:e})")));
        }
        let imag = sub.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        let (values, vectors) = if imag < 1e-14 {
            let re = sub.map(|z| z.re);
            let eig = crate::eigen::symmetric(&re);
            (eig.values, eig.vectors.map(|x| Complex64::new(x, 0.0)))
        } else {
            let eig = crate::eigen::hermitian(&sub);
            (eig.values, eig.vectors)
        };
        out.push(SectorSpectrum { basis, values, vectors });
    }
    let second = out.pop().unwrap();
    let first = out.pop().unwrap();
    Ok([first, second])
}

/// Dense model of the memory: Hamiltonian spectrum and the code states.
pub struct OracleChain {
    n: usize,
    spectra: [SectorSpectrum; 2],
    code_states: [DVector<Complex64>; 2],
    majoranas: Vec<Monomial>,
}

impl OracleChain {
    /// Builds the oracle for the one-particle Hamiltonian `h`. The code states
    /// `|g_σ>` are the sector ground states of the clean chain.
    pub fn new(h: &SkewMatrix) -> Result<Self> {
        let n = h.n_modes();
        check_limit(n)?;
        if n < 2 {
            return Err(Error::InvalidParameter("oracle memory needs N >= 2".into()));
        }
        let spectra = sector_spectra(&hamiltonian_dense(h)?)?;
        let clean = hamiltonian_from_mus(&vec![0.0; n], 1.0, 0.0)?;
        let clean_spectra = sector_spectra(&hamiltonian_dense(&clean)?)?;
        let dim = 1usize << n;
        let code_states = [0, 1].map(|sigma| {
            let sp = &clean_spectra[sigma];
            let k = (0..sp.values.len()).min_by(|&a, &b| sp.values[a].total_cmp(&sp.values[b])).unwrap();
            let mut v = DVector::from_element(dim, ZERO);
            for (r, &x) in sp.basis.iter().enumerate() {
                v[x] = sp.vectors[(r, k)];
            }
            v
        });
        let majoranas = (0..2 * n).map(|p| Monomial::majorana(n, p)).collect();
        Ok(Self { n, spectra, code_states, majoranas })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// All `2^N` many-body energies, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.spectra.iter().flat_map(|s| s.values.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn code_state(&self, sigma: usize) -> &DVector<Complex64> {
        &self.code_states[sigma]
    }

    /// `e^{iĤt} ψ` for an arbitrary state.
    pub fn evolve(&self, psi: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let mut out = DVector::from_element(psi.len(), ZERO);
        for sp in &self.spectra {
            let local = DVector::from_fn(sp.basis.len(), |r, _| psi[sp.basis[r]]);
            let coeffs = sp.vectors.adjoint() * local;
            let phased =
                DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * Complex64::from_polar(1.0, sp.values[k] * t));
            let back = &sp.vectors * phased;
            for (r, &x) in sp.basis.iter().enumerate() {
                out[x] = back[r];
            }
        }
        out
    }

    pub fn evolved_code_state(&self, sigma: usize, t: f64) -> DVector<Complex64> {
        self.evolve(&self.code_states[sigma], t)
    }

    fn product(&self, p: usize, q: usize) -> Monomial {
        self.majoranas[p].then_after(&self.majoranas[q])
    }

    fn stabilizer(&self, k: usize) -> Monomial {
        self.product(2 * k + 1, 2 * k + 2).scaled(-I)
    }

    fn elementary_error(&self, j: usize) -> Monomial {
        self.product(2 * j - 2, 2 * j - 1).scaled(-I)
    }

    /// `Q_s ψ`.
    pub fn project_syndrome(&self, psi: &DVector<Complex64>, s: &Syndrome) -> DVector<Complex64> {
        let mut v = psi.clone();
        for (k, &bit) in s.bits.iter().enumerate() {
            let sv = self.stabilizer(k).apply(&v);
            let nu = if bit { -0.5 } else { 0.5 };
            v = v * Complex64::new(0.5, 0.0) + sv * Complex64::new(nu, 0.0);
        }
        v
    }

    /// `C(s) ψ` with the minimum-weight correction.
    pub fn apply_correction(&self, psi: &DVector<Complex64>, s: &Syndrome) -> DVector<Complex64> {
        let c = decode(s, self.n);
        let mut v = psi.clone();
        for &j in c.sites.iter().rev() {
            v = self.elementary_error(j).apply(&v);
        }
        v
    }

    /// `<g_σ(t)|Q_s|g_σ(t)>`.
    pub fn syndrome_probability(&self, sigma: usize, t: f64, s: &Syndrome) -> f64 {
        let psi = self.evolved_code_state(sigma, t);
        self.project_syndrome(&psi, s).norm_squared()
    }

    /// `<g_σ|C(s) Q_s e^{iĤt}|g_σ>`.
    pub fn corrected_amplitude(&self, sigma: usize, t: f64, s: &Syndrome) -> Complex64 {
        let psi = self.evolved_code_state(sigma, t);
        let v = self.apply_correction(&self.project_syndrome(&psi, s), s);
        self.code_states[sigma].dotc(&v)
    }

    /// `Σ_s |Σ_σ |α_σ|² <g_σ|C(s) Q_s e^{iĤt}|g_σ>|²`.
    pub fn fidelity(&self, enc: &EncodedState, t: f64) -> f64 {
        let w = enc.weights();
        let psi = [self.evolved_code_state(0, t), self.evolved_code_state(1, t)];
        (0..1u64 << (self.n - 1))
            .map(|idx| {
                let s = Syndrome::from_index(self.n, idx);
                let mut amp = ZERO;
                for sigma in 0..2 {
                    let v = self.apply_correction(&self.project_syndrome(&psi[sigma], &s), &s);
                    amp += self.code_states[sigma].dotc(&v) * w[sigma];
                }
                amp.norm_sqr()
            })
            .sum()
    }

    /// Covariance matrix `M_pq = Im <ψ|c_p c_q|ψ>` of a state.
    pub fn covariance(&self, psi: &DVector<Complex64>) -> DMatrix<f64> {
        let dim = 2 * self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for p in 0..dim {
            for q in p + 1..dim {
                let v = psi.dotc(&self.product(p, q).apply(psi)).im;
                m[(p, q)] = v;
                m[(q, p)] = -v;
            }
        }
        m
    }

    /// `<ψ|L_1 ⋯ L_k|ψ>` by direct multiplication.
    pub fn expectation(&self, psi: &DVector<Complex64>, ops: &[MajoranaForm]) -> Complex64 {
        let mut v = psi.clone();
        for form in ops.iter().rev() {
            let mut next = DVector::from_element(v.len(), ZERO);
            for (p, &a) in form.coeffs.iter().enumerate() {
                if a != ZERO {
                    next += self.majoranas[p].apply(&v) * a;
                }
            }
            v = next;
        }
        psi.dotc(&v)
    }
}

/// Exact storage fidelity of the chain `params` with potential `pot`.
pub fn oracle_fidelity(params: &ChainParams, pot: &PotentialRealization, enc: &EncodedState, t: f64) -> Result<f64> {
    let h = crate::chain::one_particle_hamiltonian(params, pot)?;
    Ok(OracleChain::new(&h)?.fidelity(enc, t))
}

/// `m^x(t) = (1/N) Σ_j <ψ(t)|X_j|ψ(t)>` for `ψ(0) = |+>^N` evolving under
/// `-(1/2) Σ X_j X_{j+1} + (1/2) Σ μ_j Z_j`.
pub fn oracle_magnetization(pot: &PotentialRealization, t: f64) -> Result<f64> {
    let n = pot.n();
    check_limit(n)?;
    let dim = 1usize << n;
    let mut hd = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..dim {
        for j in 0..n {
            let z = if (x >> j) & 1 == 0 { 1.0 } else { -1.0 };
            hd[(x, x)] += 0.5 * pot.mus[j] * z;
            if j + 1 < n {
                hd[(x ^ (0b11 << j), x)] -= 0.5;
            }
        }
    }
    let eig = crate::eigen::symmetric(&hd);
    let plus = DVector::from_element(dim, (dim as f64).sqrt().recip());
    let coeffs = eig.vectors.transpose() * plus;
    let phased = DVector::from_fn(dim, |k, _| Complex64::from_polar(coeffs[k], -eig.values[k] * t));
    let vecs = eig.vectors.map(|x| Complex64::new(x, 0.0));
    let psi = vecs * phased;
    let mut total = 0.0;
    for j in 0..n {
        let mut acc = ZERO;
        for x in 0..dim {
            acc += psi[x].conj() * psi[x ^ (1 << j)];
        }
        total += acc.re;
    }
    Ok(total / n as f64)
}
