//! The Lanczos recursion carried out in the eigenbasis of a dense `H`.
//!
//! There `L = [H, .]` multiplies entry `(m, n)` by `E_m - E_n`, so every chain element is
//! `f(E_m - E_n) dH_{mn}` for a function `f` of the transition frequency. Entries sharing a
//! frequency move together and the recursion reduces to one amplitude per distinct
//! frequency. Grouping frequencies that agree to a tolerance keeps roundoff from splitting
//! exact degeneracies, which would otherwise let the chain grow far past its true length.

use nalgebra::{DMatrix, DVector};

use crate::error::{CdError, Result};
use crate::lanczos::{run_lanczos, KrylovChain, KrylovSpace, LanczosOptions};
use crate::linalg::hermitian_eigen;
use crate::measure::{gibbs_weights, Measure};
use crate::C64;

/// Frequencies closer than this fraction of the spectral width are treated as equal.
pub const FREQUENCY_TOL: f64 = 1e-9;

/// Entries of `dH` in the eigenbasis below this fraction of the largest are roundoff from
/// symmetry sectors that `dH` does not connect, and are dropped.
pub const AMPLITUDE_TOL: f64 = 1e-12;

/// Amplitudes over frequency clusters with weights `w_c = sum_{(m,n) in c} rho_mn |dH_mn|^2`.
pub struct FrequencySpace {
    omega: Vec<f64>,
    weight: Vec<f64>,
}

impl KrylovSpace for FrequencySpace {
    type Vector = DVector<C64>;

    fn liouvillian(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        Ok(DVector::from_iterator(v.len(), v.iter().zip(&self.omega).map(|(x, w)| x * *w)))
    }

    fn lower(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        Ok(DVector::from_iterator(v.len(), v.iter().zip(&self.weight).map(|(x, w)| x * *w)))
    }

    fn pair(&self, u: &DVector<C64>, lowered: &DVector<C64>) -> Result<C64> {
        Ok(u.dotc(lowered))
    }

    fn axpy(&self, y: &mut DVector<C64>, a: C64, x: &DVector<C64>) -> Result<()> {
        y.axpy(a, x, C64::new(1.0, 0.0));
        Ok(())
    }

    fn scale(&self, v: &mut DVector<C64>, a: C64) {
        *v *= a;
    }
}

/// A chain over frequency clusters together with what is needed to turn amplitudes back
/// into matrices.
pub struct SpectralChain {
    pub chain: KrylovChain<DVector<C64>>,
    pub energies: DVector<f64>,
    eigenvectors: DMatrix<C64>,
    dh_eigen: DMatrix<C64>,
    /// Cluster of each entry `(m, n)`, `None` for entries with zero weight.
    cluster_of: DMatrix<Option<usize>>,
    pub frequencies: Vec<f64>,
}

impl SpectralChain {
    /// The matrix `sum_{mn} f_{c(m,n)} dH_mn |m><n|` back in the original basis.
    pub fn operator(&self, amplitudes: &DVector<C64>) -> DMatrix<C64> {
        let n = self.energies.len();
        let x = DMatrix::from_fn(n, n, |r, c| match self.cluster_of[(r, c)] {
            Some(k) => amplitudes[k] * self.dh_eigen[(r, c)],
            None => C64::new(0.0, 0.0),
        });
        &self.eigenvectors * x * self.eigenvectors.adjoint()
    }
}

/// Measure weights `(p_m + p_n) / 2` for each pair of levels.
fn pair_weights(energies: &[f64], measure: &Measure) -> Result<Vec<f64>> {
    measure.validate()?;
    let dim = energies.len();
    Ok(match *measure {
        Measure::Uniform { scale } => vec![scale / dim as f64; dim],
        Measure::Gibbs { beta } => gibbs_weights(energies, beta),
    })
}

pub fn build_spectral_chain(
    h: &DMatrix<C64>,
    dh: &DMatrix<C64>,
    measure: &Measure,
    opts: &LanczosOptions,
) -> Result<SpectralChain> {
    if h.shape() != dh.shape() || !h.is_square() {
        return Err(CdError::SiteCountMismatch { left: h.nrows(), right: dh.nrows() });
    }
    let (energies, u) = hermitian_eigen(h);
    let dh_eigen = u.adjoint() * dh * &u;
    let n = h.nrows();
    let p = pair_weights(energies.as_slice(), measure)?;
    let width = energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(f64::MIN_POSITIVE);
    let scale = dh_eigen.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(CdError::ZeroDerivative);
    }

    let mut entries: Vec<(f64, usize, usize, f64)> = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let w = 0.5 * (p[r] + p[c]) * dh_eigen[(r, c)].norm_sqr();
            if dh_eigen[(r, c)].norm_sqr() > AMPLITUDE_TOL * AMPLITUDE_TOL * scale && w > 0.0 {
                entries.push((energies[r] - energies[c], r, c, w));
            }
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cluster_of = DMatrix::from_element(n, n, None);
    let mut frequencies: Vec<f64> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    let mut weighted_sum = 0.0;
    let mut last = f64::NEG_INFINITY;
    for (omega, r, c, w) in entries {
        if omega - last > FREQUENCY_TOL * width || frequencies.is_empty() {
            if let (Some(f), Some(wt)) = (frequencies.last_mut(), weight.last()) {
                *f = weighted_sum / wt;
            }
            frequencies.push(omega);
            weight.push(0.0);
            weighted_sum = 0.0;
        }
        let k = frequencies.len() - 1;
        weight[k] += w;
        weighted_sum += w * omega;
        cluster_of[(r, c)] = Some(k);
        last = omega;
    }
    if let (Some(f), Some(wt)) = (frequencies.last_mut(), weight.last()) {
        *f = weighted_sum / wt;
    }

    let space = FrequencySpace { omega: frequencies.clone(), weight };
    let start = DVector::from_element(frequencies.len(), C64::new(1.0, 0.0));
    let chain = run_lanczos(&space, &start, opts)?;
    Ok(SpectralChain { chain, energies, eigenvectors: u, dh_eigen, cluster_of, frequencies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::{expand, spectral_agp_oracle};
    use crate::lanczos::build_krylov_chain;
    use crate::operator::OperatorExpr;
    use rand::{Rng, SeedableRng};

    fn random_pair(n: usize, seed: u64) -> (DMatrix<C64>, DMatrix<C64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut herm = || {
            let a = DMatrix::<C64>::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            (&a + a.adjoint()) * C64::new(0.5, 0.0)
        };
        (herm(), herm())
    }

    #[test]
    fn matches_operator_space_chain() {
        for measure in [Measure::default(), Measure::Gibbs { beta: 0.8 }] {
            let (h, dh) = random_pair(4, 5);
            let opts = LanczosOptions::default();
            let spectral = build_spectral_chain(&h, &dh, &measure, &opts).unwrap();
            let direct =
                build_krylov_chain(&OperatorExpr::Dense(h.clone()), &OperatorExpr::Dense(dh.clone()), &measure, &opts)
                    .unwrap();
            assert_eq!(spectral.chain.d(), direct.d());
            for (a, b) in spectral.chain.b.iter().zip(&direct.b) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{measure:?}: {a} vs {b}");
            }
            for (k, v) in spectral.chain.basis.iter().enumerate() {
                let m = spectral.operator(v);
                assert!((m - direct.basis[k].as_dense().unwrap()).camax() < 1e-8);
            }
            let cd = spectral.operator(&expand(&spectral.chain).unwrap().cd_operator);
            assert!((cd - spectral_agp_oracle(&h, &dh).unwrap()).camax() < 1e-9);
        }
    }

    #[test]
    fn degenerate_frequencies_are_merged() {
        // Equally spaced levels: transitions share frequencies, so d stays small.
        let n = 5;
        let h = DMatrix::from_fn(n, n, |r, c| if r == c { C64::new(r as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let dh =
            DMatrix::from_fn(n, n, |r, c| if r.abs_diff(c) == 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let chain = build_spectral_chain(&h, &dh, &Measure::default(), &LanczosOptions::default()).unwrap();
        assert_eq!(chain.chain.d(), 2);
    }
}
