//! Localization of the one-particle problem: Lyapunov exponents of the
//! Anderson model `H_+` and effective localization lengths from the
//! eigenvectors of `H_s`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{anderson_h_s, realize_potential, ChainParams, Disorder, PotentialRealization};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};

/// Sites used for reported Lyapunov scans unless stated otherwise.
pub const DEFAULT_LYAPUNOV_SITES: usize = 1_000_000;
/// Uniform energies on `[-1, 1]` in the default scan grid.
pub const COARSE_ENERGIES: usize = 512;
/// Extra energies on `[μ² - 0.1, μ² + 0.1]`.
pub const FINE_ENERGIES: usize = 128;
/// Shift applied to `E` when the recursion hits a pole.
const RESONANCE_SHIFT: f64 = 1e-12;
/// Exponents below this are treated as a failed (too short) estimate.
const NEGATIVE_EXPONENT_TOL: f64 = -1e-3;
/// Steps between renormalizations of the transfer-matrix product.
const RENORMALIZE_EVERY: usize = 32;
/// Fits with lower coefficient of determination are not used for `ξ_eff`.
pub const MIN_FIT_R2: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovScan {
    pub energies: Vec<f64>,
    pub exponents: Vec<f64>,
    pub n_sites: usize,
    pub mu: f64,
    pub eta: f64,
    pub disorder: Disorder,
}

impl LyapunovScan {
    /// Grid point with the smallest exponent.
    pub fn argmin(&self) -> (f64, f64) {
        let k = (0..self.exponents.len())
            .min_by(|&a, &b| self.exponents[a].total_cmp(&self.exponents[b]))
            .expect("empty scan");
        (self.energies[k], self.exponents[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovMinimum {
    pub energy: f64,
    pub exponent: f64,
    pub scan: LyapunovScan,
}

/// Per-row fit of `log T_pq` against `|p - q|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFit {
    /// Row index, 1-based.
    pub p: usize,
    pub xi: f64,
    pub r_squared: f64,
    /// Root-mean-square residual of the fit in `log T`.
    pub rms_residual: f64,
    /// Whether the fit passed the quality cut and counts towards `ξ_eff`.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiEffResult {
    pub xi_eff: f64,
    pub per_row_fits: Vec<RowFit>,
    pub potential: PotentialRealization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub y1: f64,
    pub a: f64,
    pub xi_eff: f64,
}

/// Log-accumulator for long products, avoiding a logarithm per factor.
struct LogProduct {
    mantissa: f64,
    log: f64,
}

impl LogProduct {
    fn new() -> Self {
        Self { mantissa: 1.0, log: 0.0 }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        self.mantissa *= x;
        if !(1e-150..=1e150).contains(&self.mantissa) {
            self.log += self.mantissa.ln();
            self.mantissa = 1.0;
        }
    }

    fn ln(&self) -> f64 {
        self.log + self.mantissa.ln()
    }
}

/// `ℓ(E)` from the ratio recursion over the given potentials.
///
/// With `z_n = ψ_{n-1}/ψ_n`, `Σ_{j≥2} log|z_j| = log|ψ_1/ψ_N|`; the
/// exponent is reported as the growth rate `-(1/N) Σ log|z_j|`, which is
/// positive for localized states.
pub fn lyapunov_from_potentials(mus: &[f64], energy: f64) -> Result<f64> {
    match z_recursion(mus, energy) {
        Err(Error::Resonance { .. }) => {
            warn!("resonance at E = {energy}; retrying at E + {RESONANCE_SHIFT:e}");
            z_recursion(mus, energy + RESONANCE_SHIFT)
        }
        other => other,
    }
}

fn z_recursion(mus: &[f64], energy: f64) -> Result<f64> {
    let n = mus.len();
    if n < 2 {
        return Err(Error::InvalidParameter("Lyapunov exponent needs at least two sites".into()));
    }
    let resonance = |site| Error::Resonance { energy, site };
    let mut acc = LogProduct::new();
    let mut z = 0.0;
    for k in 0..n - 1 {
        let m = mus[k];
        if m == 0.0 {
            return Err(resonance(k + 1));
        }
        let den = m * m - energy - m * z;
        if den.abs() < 1e-300 {
            return Err(resonance(k + 1));
        }
        z = mus[k + 1] / den;
        if k + 2 < n {
            acc.push(z.abs());
        }
    }
    let last = mus[n - 1];
    if last == 0.0 {
        return Err(resonance(n));
    }
    let z_n = (last * last - energy - 1.0) / last;
    if z_n == 0.0 {
        return Err(resonance(n));
    }
    acc.push(z_n.abs());
    let ell = -acc.ln() / n as f64;
    if ell < NEGATIVE_EXPONENT_TOL {
        return Err(Error::NumericalConsistency(format!(
            "Lyapunov estimate {ell} at E = {energy} is negative; chain too short"
        )));
    }
    Ok(ell)
}

/// Transfer matrix `T(ζ) = [[(ζ² - E)/ζ, -ζ], [1/ζ, 0]]`, mapping
/// `(μ_n ψ_n, ψ_{n-1})` to `(μ_{n+1} ψ_{n+1}, ψ_n)`.
pub fn transfer_matrix(zeta: f64, energy: f64) -> [[f64; 2]; 2] {
    [[(zeta * zeta - energy) / zeta, -zeta], [1.0 / zeta, 0.0]]
}

/// `(1/n) log ‖T(μ_n) ⋯ T(μ_1) e_1‖` with periodic renormalization.
pub fn transfer_product_lyapunov(mus: &[f64], energy: f64) -> Result<f64> {
    if mus.is_empty() {
        return Err(Error::InvalidParameter("empty potential".into()));
    }
    let mut v = [1.0, 0.0];
    let mut log_norm = 0.0;
    for (k, &m) in mus.iter().enumerate() {
        if m == 0.0 {
            return Err(Error::Resonance { energy, site: k + 1 });
        }
        let t = transfer_matrix(m, energy);
        v = [t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]];
        if (k + 1) % RENORMALIZE_EVERY == 0 {
            let nrm = v[0].hypot(v[1]);
            log_norm += nrm.ln();
            v = [v[0] / nrm, v[1] / nrm];
        }
    }
    Ok((log_norm + v[0].hypot(v[1]).ln()) / mus.len() as f64)
}

fn check_disordered(params: &ChainParams) -> Result<()> {
    params.validate()?;
    if params.eta == 0.0 {
        return Err(Error::InvalidParameter(
            "Lyapunov exponents need disorder (eta > 0); the clean chain has extended states".into(),
        ));
    }
    Ok(())
}

/// Potentials of one realization over `n_sites` sites.
pub fn lyapunov_potentials(params: &ChainParams, realization: u64, n_sites: usize) -> Vec<f64> {
    params.potential_stream(realization).take(n_sites).collect()
}

/// `ℓ(E)` for realization `realization` of `params` over `n_sites` sites.
pub fn lyapunov_exponent(params: &ChainParams, realization: u64, n_sites: usize, energy: f64) -> Result<f64> {
    check_disordered(params)?;
    lyapunov_from_potentials(&lyapunov_potentials(params, realization, n_sites), energy)
}

/// Default scan grid: uniform on `[-1, 1]` plus a refinement around `E = μ²`.
pub fn default_energy_grid(mu: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..COARSE_ENERGIES).map(|k| -1.0 + 2.0 * k as f64 / (COARSE_ENERGIES - 1) as f64).collect();
    let c = mu * mu;
    e.extend((0..FINE_ENERGIES).map(|k| c - 0.1 + 0.2 * k as f64 / (FINE_ENERGIES - 1) as f64));
    e.sort_by(f64::total_cmp);
    e.dedup();
    e
}

/// `ℓ(E)` over `energies` on a single realization (shared by all energies).
pub fn lyapunov_scan(params: &ChainParams, realization: u64, n_sites: usize, energies: &[f64]) -> Result<LyapunovScan> {
    check_disordered(params)?;
    let mus = lyapunov_potentials(params, realization, n_sites);
    let exponents = energies.par_iter().map(|&e| lyapunov_from_potentials(&mus, e)).collect::<Result<Vec<f64>>>()?;
    Ok(LyapunovScan {
        energies: energies.to_vec(),
        exponents,
        n_sites,
        mu: params.mu,
        eta: params.eta,
        disorder: params.disorder,
    })
}

/// `ℓ_min = min_E ℓ(E)`: grid minimum refined by golden-section search
/// between the neighbouring grid points.
pub fn minimal_lyapunov(params: &ChainParams, realization: u64, n_sites: usize) -> Result<LyapunovMinimum> {
    let energies = default_energy_grid(params.mu);
    let scan = lyapunov_scan(params, realization, n_sites, &energies)?;
    let mus = lyapunov_potentials(params, realization, n_sites);
    let (energy, exponent) = refine_minimum(&mus, &scan)?;
    Ok(LyapunovMinimum { energy, exponent, scan })
}

/// Golden-section refinement of the scan minimum on the potentials `mus`.
pub fn refine_minimum(mus: &[f64], scan: &LyapunovScan) -> Result<(f64, f64)> {
    let k = (0..scan.exponents.len())
        .min_by(|&a, &b| scan.exponents[a].total_cmp(&scan.exponents[b]))
        .ok_or_else(|| Error::InvalidParameter("empty scan".into()))?;
    let mut lo = scan.energies[k.saturating_sub(1)];
    let mut hi = scan.energies[(k + 1).min(scan.energies.len() - 1)];
    let mut best = (scan.energies[k], scan.exponents[k]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = lyapunov_from_potentials(mus, x1)?;
    let mut f2 = lyapunov_from_potentials(mus, x2)?;
    for _ in 0..40 {
        if hi - lo < 1e-9 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = lyapunov_from_potentials(mus, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = lyapunov_from_potentials(mus, x2)?;
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < best.1 {
            best = (x, f);
        }
    }
    Ok(best)
}

/// Effective localization length from the bulk eigenvectors of `H_s`.
pub fn xi_effective(pot: &PotentialRealization) -> Result<XiEffResult> {
    let n = pot.n();
    if n < 8 {
        return Err(Error::InvalidParameter(format!("xi_eff needs N >= 8, got {n}")));
    }
    let dim = 2 * n;
    let eig = crate::eigen::symmetric(&anderson_h_s(pot));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.values[a].abs().total_cmp(&eig.values[b].abs()).then(a.cmp(&b)));
    let kept = &order[2..];

    // T_pq = Σ_α |φ_α(p)| |φ_α(q)| over the bulk modes.
    let phi = eig.vectors.map(f64::abs);
    let mut t = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for &k in kept {
        let col = phi.column(k);
        t.ger(1.0, &col, &col, 1.0);
    }

    let mut rows = Vec::with_capacity(dim);
    for p in 1..=dim {
        let qs: Vec<usize> = if p <= n { (n..=dim).collect() } else { (1..=n).collect() };
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for q in qs {
            let v = t[(p - 1, q - 1)];
            if v > 1e-300 {
                xs.push((p as f64 - q as f64).abs());
                ys.push(v.ln());
            }
        }
        if xs.len() < 3 {
            warn!("row {p}: correlation underflows over the fit range; skipped");
            continue;
        }
        let Some(fit) = linear_fit(&xs, &ys) else {
            warn!("row {p}: degenerate fit; skipped");
            continue;
        };
        let xi = if fit.slope < 0.0 { -1.0 / fit.slope } else { f64::INFINITY };
        let accepted = fit.r_squared >= MIN_FIT_R2 && xi.is_finite();
        rows.push(RowFit { p, xi, r_squared: fit.r_squared, rms_residual: rms(&fit, &xs, &ys), accepted });
    }
    let xi_eff = rows
        .iter()
        .filter(|r| r.accepted)
        .map(|r| r.xi)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let xi_eff = xi_eff.unwrap_or_else(|| {
        warn!("no row passed the fit quality cut; reporting xi_eff = inf");
        f64::INFINITY
    });
    Ok(XiEffResult { xi_eff, per_row_fits: rows, potential: pot.clone() })
}

fn rms(fit: &LinearFit, xs: &[f64], ys: &[f64]) -> f64 {
    let sse: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - fit.predict(x)).powi(2)).sum();
    (sse / xs.len() as f64).sqrt()
}

/// `ξ_eff` for logistic potentials `μ_j = μ + η(1 - 2y_j)` at each `(y1, a)`,
/// sorted ascending (ties keep grid order).
pub fn pseudorandom_scan(grid: &[(f64, f64)], base: &ChainParams) -> Result<Vec<ScanEntry>> {
    let mut out = grid
        .par_iter()
        .map(|&(y1, a)| {
            let mut p = base.clone();
            p.disorder = Disorder::Logistic { y1, a };
            p.validate()?;
            let xi = xi_effective(&realize_potential(&p, 0))?;
            Ok(ScanEntry { y1, a, xi_eff: xi.xi_eff })
        })
        .collect::<Result<Vec<ScanEntry>>>()?;
    out.sort_by(|x, y| x.xi_eff.total_cmp(&y.xi_eff));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, eta: f64, seed: u64) -> ChainParams {
        ChainParams::new(2, mu, eta, Disorder::UniformIid { seed }).unwrap()
    }

    #[test]
    fn transfer_matrices_are_unimodular() {
        for &(z, e) in &[(0.3, 0.1), (1.7, -0.5), (-0.2, 0.9)] {
            let t = transfer_matrix(z, e);
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            assert!((det - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn recursion_matches_transfer_product() {
        let p = params(0.125, 0.0625, 3);
        let mus = lyapunov_potentials(&p, 0, 200_000);
        for e in [-0.5, 0.0, 0.015625, 0.4] {
            let a = lyapunov_from_potentials(&mus, e).unwrap();
            let b = transfer_product_lyapunov(&mus, e).unwrap();
            assert!((a - b).abs() < 5e-3, "E={e}: {a} vs {b}");
            assert!(a > 0.0);
        }
    }

    #[test]
    fn refuses_clean_chain_and_zero_potential() {
        let clean = ChainParams::new(2, 0.1, 0.0, Disorder::None).unwrap();
        assert!(lyapunov_exponent(&clean, 0, 100, 0.0).is_err());
        assert!(matches!(lyapunov_from_potentials(&[0.1, 0.0, 0.2], 0.0), Err(Error::Resonance { .. })));
    }

    #[test]
    fn energy_grid_layout() {
        let g = default_energy_grid(0.125);
        assert_eq!(g.len(), COARSE_ENERGIES + FINE_ENERGIES);
        assert_eq!(g[0], -1.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refined_minimum_not_above_grid() {
        let p = params(0.125, 0.0625, 1);
        let m = minimal_lyapunov(&p, 0, 20_000).unwrap();
        assert!(m.scan.exponents.iter().all(|&l| m.exponent <= l));
    }

    #[test]
    fn xi_eff_is_deterministic_and_finite_under_strong_disorder() {
        let p = ChainParams::new(32, 0.5, 0.5, Disorder::UniformIid { seed: 4 }).unwrap();
        let pot = realize_potential(&p, 0);
        let a = xi_effective(&pot).unwrap();
        let b = xi_effective(&pot).unwrap();
        assert_eq!(a, b);
        assert!(a.xi_eff > 0.0 && a.xi_eff < 32.0);
        assert!(xi_effective(&PotentialRealization::from_mus(vec![0.5; 4])).is_err());
    }
}
