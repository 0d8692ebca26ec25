//! Majorana chain Hamiltonians and disorder potentials.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skewlin::SkewMatrix;

/// How the site offsets `x_j` of `μ_j = μ + η x_j` are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disorder {
    None,
    /// Independent uniform offsets on `[-1, 1]`.
    UniformIid {
        seed: u64,
    },
    /// `x_j = 1 - 2 y_j` with `y_{j+1} = a y_j (1 - y_j)`.
    Logistic {
        y1: f64,
        a: f64,
    },
}

impl Disorder {
    /// Short human-readable label, stable across runs (used in CSV output).
    pub fn label(&self) -> String {
        match self {
            Disorder::None => "none".to_string(),
            Disorder::UniformIid { seed } => format!("uniform(seed={seed})"),
            Disorder::Logistic { y1, a } => format!("logistic(y1={y1},a={a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    /// Nearest-neighbour coupling `J = Δ + w`.
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    pub mu: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_disorder")]
    pub disorder: Disorder,
    /// Coefficient `|Δ| - w` of the range-3 term.
    #[serde(default)]
    pub w_minus_absdelta: f64,
}

fn default_coupling() -> f64 {
    1.0
}

fn default_disorder() -> Disorder {
    Disorder::None
}

impl ChainParams {
    pub fn new(n: usize, mu: f64, eta: f64, disorder: Disorder) -> Result<Self> {
        let p = Self { n, coupling: 1.0, mu, eta, disorder, w_minus_absdelta: 0.0 };
        p.validate()?;
        Ok(p)
    }

    /// Homogeneous chain `μ_j = μ`.
    pub fn clean(n: usize, mu: f64) -> Result<Self> {
        Self::new(n, mu, 0.0, Disorder::None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("chain needs N >= 2 sites, got {}", self.n)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("disorder strength must be >= 0, got {}", self.eta)));
        }
        if !self.mu.is_finite() || !self.coupling.is_finite() || !self.w_minus_absdelta.is_finite() {
            return Err(Error::InvalidParameter("chain parameters must be finite".into()));
        }
        if let Disorder::Logistic { y1, a } = self.disorder {
            if !(0.0..=1.0).contains(&y1) || !(0.0..=4.0).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "logistic map needs 0 <= y1 <= 1 and 0 <= a <= 4, got y1={y1}, a={a}"
                )));
            }
        }
        Ok(())
    }

    /// Streams `μ_1, μ_2, ...` for the given realization without bound on the
    /// length. The first `N` values are the realized potential.
    pub fn potential_stream(&self, realization_index: u64) -> PotentialStream {
        let source = match self.disorder {
            Disorder::None => Source::Clean,
            Disorder::UniformIid { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(realization_index);
                Source::Uniform(Box::new(rng))
            }
            Disorder::Logistic { y1, a } => Source::Logistic { y: y1, a },
        };
        PotentialStream { mu: self.mu, eta: self.eta, source }
    }
}

enum Source {
    Clean,
    Uniform(Box<ChaCha8Rng>),
    Logistic { y: f64, a: f64 },
}

/// Infinite iterator over site potentials.
pub struct PotentialStream {
    mu: f64,
    eta: f64,
    source: Source,
}

impl Iterator for PotentialStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let x = match &mut self.source {
            Source::Clean => 0.0,
            Source::Uniform(rng) => rng.gen_range(-1.0..=1.0),
            Source::Logistic { y, a } => {
                let x = 1.0 - 2.0 * *y;
                *y = *a * (*y * (1.0 - *y));
                x
            }
        };
        Some(self.mu + self.eta * x)
    }
}

/// One realization of the site potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialRealization {
    pub mus: Vec<f64>,
    pub seed_used: Option<u64>,
}

impl PotentialRealization {
    pub fn from_mus(mus: Vec<f64>) -> Self {
        Self { mus, seed_used: None }
    }

    pub fn n(&self) -> usize {
        self.mus.len()
    }
}

pub fn realize_potential(p: &ChainParams, realization_index: u64) -> PotentialRealization {
    let mus = p.potential_stream(realization_index).take(p.n).collect();
    let seed_used = match p.disorder {
        Disorder::UniformIid { seed } => Some(seed),
        _ => None,
    };
    PotentialRealization { mus, seed_used }
}

/// Perturbation strength `ε = max_j |μ_j| + |w - |Δ||`.
pub fn perturbation_strength(p: &ChainParams, pot: &PotentialRealization) -> f64 {
    pot.mus.iter().fold(0.0f64, |m, x| m.max(x.abs())) + p.w_minus_absdelta.abs()
}

/// The `2N × 2N` matrix `H_0 + V` of the chain.
pub fn one_particle_hamiltonian(p: &ChainParams, pot: &PotentialRealization) -> Result<SkewMatrix> {
    if pot.n() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: pot.n() });
    }
    hamiltonian_from_mus(&pot.mus, p.coupling, p.w_minus_absdelta)
}

/// `H_0 + V` for explicit potentials, any `N >= 1`.
pub fn hamiltonian_from_mus(mus: &[f64], coupling: f64, w_minus_absdelta: f64) -> Result<SkewMatrix> {
    let n = mus.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty potential".into()));
    }
    let mut h = SkewMatrix::zeros(2 * n)?;
    for (j, &m) in mus.iter().enumerate() {
        h.set(2 * j, 2 * j + 1, -m);
    }
    for j in 0..n - 1 {
        h.set(2 * j + 1, 2 * j + 2, coupling);
        if w_minus_absdelta != 0.0 {
            h.set(2 * j, 2 * j + 3, w_minus_absdelta);
        }
    }
    Ok(h)
}

/// Tridiagonal `H_+ = (T+S)(T^†+S) - I`, spectrum `λ_j² - 1`.
pub fn anderson_h_plus(pot: &PotentialRealization) -> DMatrix<f64> {
    let n = pot.n();
    let mus = &pot.mus;
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = mus[j] * mus[j];
        if j + 1 < n {
            h[(j, j + 1)] = mus[j + 1];
            h[(j + 1, j)] = mus[j + 1];
        }
    }
    h[(n - 1, n - 1)] -= 1.0;
    h
}

/// Off-diagonal Anderson model `H_s = i U (H_0+V) U^†`, spectrum `±λ_j`.
pub fn anderson_h_s(pot: &PotentialRealization) -> DMatrix<f64> {
    let n = pot.n();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for (j, &m) in pot.mus.iter().enumerate() {
        h[(2 * j, 2 * j + 1)] = m;
        h[(2 * j + 1, 2 * j)] = m;
        if j + 1 < n {
            h[(2 * j + 1, 2 * j + 2)] = -1.0;
            h[(2 * j + 2, 2 * j + 1)] = -1.0;
        }
    }
    h
}
