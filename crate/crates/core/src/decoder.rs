//! Minimum-weight decoding of the chain's stabilizer syndrome.
//!
//! Under Jordan-Wigner `S_j = X_j X_{j+1}` and `E_j = Z_j`, so a site set `T`
//! produces syndrome bit `s_j = |T ∩ {j, j+1}| mod 2`. Every syndrome has
//! exactly two solutions, complements of each other.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gaussian::{MajoranaForm, Syndrome};

/// Set of sites (1-based, ascending) carrying an elementary error
/// `E_j = (-i) c_{2j-1} c_{2j}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Correction {
    pub n_sites: usize,
    pub sites: Vec<usize>,
}

impl Correction {
    pub fn weight(&self) -> usize {
        self.sites.len()
    }

    pub fn complement(&self) -> Correction {
        let mut sites = Vec::with_capacity(self.n_sites - self.sites.len());
        let mut it = self.sites.iter().peekable();
        for j in 1..=self.n_sites {
            if it.peek() == Some(&&j) {
                it.next();
            } else {
                sites.push(j);
            }
        }
        Correction { n_sites: self.n_sites, sites }
    }

    /// Syndrome produced by applying this correction to the code space.
    pub fn syndrome(&self) -> Syndrome {
        let mut on = vec![false; self.n_sites + 1];
        for &j in &self.sites {
            on[j] = true;
        }
        Syndrome::new((1..self.n_sites).map(|j| on[j] ^ on[j + 1]).collect())
    }
}

/// Smallest-weight site set reproducing `s`. On a tie the solution containing
/// site 1 is returned.
pub fn decode(s: &Syndrome, n: usize) -> Correction {
    assert_eq!(s.len() + 1, n, "syndrome length must be N - 1");
    // Prefix parities with t_1 = 0; its complement is the other solution.
    let mut t = false;
    let mut prefix = Vec::new();
    let mut complement = vec![1];
    for (k, &bit) in s.bits.iter().enumerate() {
        t ^= bit;
        if t {
            prefix.push(k + 2);
        } else {
            complement.push(k + 2);
        }
    }
    let sites = if prefix.len() < complement.len() { prefix } else { complement };
    Correction { n_sites: n, sites }
}

/// Forms `(-i) c_{2j-1}, c_{2j}` for each corrected site, ascending, so that
/// their product equals `C(s)`.
pub fn correction_operator_forms(c: &Correction) -> Vec<MajoranaForm> {
    let dim = 2 * c.n_sites;
    let mut out = Vec::with_capacity(2 * c.sites.len());
    for &j in &c.sites {
        out.push(MajoranaForm::single(dim, 2 * j - 2, Complex64::new(0.0, -1.0)));
        out.push(MajoranaForm::single(dim, 2 * j - 1, Complex64::new(1.0, 0.0)));
    }
    out
}
