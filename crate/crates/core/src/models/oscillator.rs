//! Harmonic trap with a moving centre and a time-dependent frequency.
//!
//! Coordinates run over `(X_1, X_2, X_3; Y_1, Y_2)`, built from `C^dag C + 1/2`, `C^dag + C`,
//! `C^dag^2 + C^2` and `i (C^dag - C)`, `i (C^dag^2 - C^2)`, each normalized by its thermal
//! average on a truncated Fock space. The algebra closes on these five elements, so the
//! Liouvillian is the fixed 3x2 block below and no Fock-space matrices are needed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::LiouvillianMatrix;
use crate::error::{CdError, Result};
use crate::lanczos::{build_chain_from_coordinates, KrylovChain, LanczosOptions};
use crate::measure::Measure;
use crate::C64;

pub const DEFAULT_FOCK_CUTOFF: usize = 120;
pub const MIN_FOCK_CUTOFF: usize = 40;
/// Largest thermal weight allowed on the top quarter of the Fock space.
pub const TAIL_WEIGHT_LIMIT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oscillator {
    #[serde(default = "unit")]
    pub mass: f64,
    pub omega: f64,
    #[serde(default)]
    pub q0: f64,
    pub omega_dot: f64,
    pub q0_dot: f64,
    #[serde(default = "default_cutoff")]
    pub fock_cutoff: usize,
}

fn unit() -> f64 {
    1.0
}

fn default_cutoff() -> usize {
    DEFAULT_FOCK_CUTOFF
}

/// Square roots of the thermal second moments that normalize the five basis elements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizations {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub y1: f64,
    pub y2: f64,
}

impl Oscillator {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !(self.mass > 0.0) {
            return Err(CdError::InvalidParameter("mass and frequency must be positive".into()));
        }
        if self.fock_cutoff < MIN_FOCK_CUTOFF {
            return Err(CdError::InvalidParameter(format!(
                "Fock cutoff {} is below the minimum {MIN_FOCK_CUTOFF}",
                self.fock_cutoff
            )));
        }
        Ok(())
    }

    /// Occupation probabilities `p_n ~ exp(-beta omega n)` on the truncated Fock space.
    pub fn fock_weights(&self, measure: &Measure) -> Result<Vec<f64>> {
        self.validate()?;
        let beta = match *measure {
            Measure::Gibbs { beta } if beta > 0.0 => beta,
            Measure::Gibbs { .. } => {
                return Err(CdError::InvalidMeasure("the oscillator needs a positive inverse temperature".into()))
            }
            // The trace over an infinite Fock space diverges.
            Measure::Uniform { .. } => {
                return Err(CdError::Unsupported { op: "oscillator averages", backend: "uniform measure" })
            }
        };
        let raw: Vec<f64> = (0..self.fock_cutoff).map(|n| (-beta * self.omega * n as f64).exp()).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let tail: f64 = p[3 * self.fock_cutoff / 4..].iter().sum();
        if tail >= TAIL_WEIGHT_LIMIT {
            return Err(CdError::InvalidParameter(format!(
                "Fock cutoff {} too small: top-quarter occupancy {tail:e}",
                self.fock_cutoff
            )));
        }
        Ok(p)
    }

    pub fn normalizations(&self, measure: &Measure) -> Result<Normalizations> {
        let p = self.fock_weights(measure)?;
        let avg = |f: &dyn Fn(f64) -> f64| p.iter().enumerate().map(|(n, w)| w * f(n as f64)).sum::<f64>().sqrt();
        let linear = avg(&|n| 2.0 * n + 1.0);
        let quadratic = avg(&|n| n * (n - 1.0) + (n + 1.0) * (n + 2.0));
        Ok(Normalizations { x1: avg(&|n| (n + 0.5) * (n + 0.5)), x2: linear, x3: quadratic, y1: linear, y2: quadratic })
    }

    /// `M_{mu nu} = (X_mu, [H, Y_nu])`.
    pub fn m_block(&self) -> DMatrix<C64> {
        let w = C64::new(0.0, self.omega);
        let mut m = DMatrix::<C64>::zeros(3, 2);
        m[(1, 0)] = w;
        m[(2, 1)] = w * 2.0;
        m
    }

    /// `dH` in joint coordinates, unnormalized.
    pub fn dh_coordinates(&self, measure: &Measure) -> Result<DVector<C64>> {
        let n = self.normalizations(measure)?;
        let mut v = DVector::<C64>::zeros(5);
        v[0] = C64::new(self.omega_dot * n.x1, 0.0);
        v[1] = C64::new(-self.q0_dot * (self.mass * self.omega.powi(3) / 2.0).sqrt() * n.x2, 0.0);
        v[2] = C64::new(0.5 * self.omega_dot * n.x3, 0.0);
        Ok(v)
    }

    pub fn chain(&self, measure: &Measure, opts: &LanczosOptions) -> Result<KrylovChain<DVector<C64>>> {
        let l = LiouvillianMatrix::from_block(&self.m_block());
        build_chain_from_coordinates(&l, &self.dh_coordinates(measure)?, opts)
    }

    /// Exact CD coefficients on `(Y_1, Y_2)`.
    pub fn reference_cd(&self, measure: &Measure) -> Result<[f64; 2]> {
        let n = self.normalizations(measure)?;
        Ok([self.q0_dot * (self.mass * self.omega / 2.0).sqrt() * n.y1, -self.omega_dot / (4.0 * self.omega) * n.y2])
    }

    /// Weight `r` of the first chain term relative to the exact coefficients.
    pub fn first_term_ratio(&self, measure: &Measure) -> Result<f64> {
        let n = self.normalizations(measure)?;
        let z1 = self.mass * self.omega / 2.0 * n.y1 * n.y1;
        let z2 = n.y2 * n.y2;
        let q = self.q0_dot * self.q0_dot * z1;
        let w = (self.omega_dot / self.omega).powi(2) * z2;
        Ok((q + w / 4.0) / (q + w))
    }

    /// Coefficients of the first chain term on `(Y_1, Y_2)`.
    pub fn first_term_reference(&self, measure: &Measure) -> Result<[f64; 2]> {
        let r = self.first_term_ratio(measure)?;
        let [a1, a2] = self.reference_cd(measure)?;
        Ok([r * a1, 4.0 * r * a2])
    }

    /// `b_1 .. b_4` from the normalized start vector `(x, y, z)`.
    pub fn reference_b(&self, measure: &Measure) -> Result<Vec<f64>> {
        let v = self.dh_coordinates(measure)?;
        let norm = v.norm();
        let (x, y, z) = (v[0].re / norm, v[1].re / norm, v[2].re / norm);
        let s = y * y + 4.0 * z * z;
        let g = y * y + 16.0 * z * z - s * s;
        let w = self.omega;
        Ok(vec![
            w * s.sqrt(),
            w * (g / s).sqrt(),
            6.0 * w * (y * z).abs() / (s * g).sqrt(),
            2.0 * w * x.abs() * (s / g).sqrt(),
        ])
    }

    /// `(d, d_A)` for the three driving cases.
    pub fn expected_dimension(&self) -> Option<(usize, usize)> {
        match (self.q0_dot != 0.0, self.omega_dot != 0.0) {
            (true, true) => Some((5, 2)),
            (false, true) => Some((3, 1)),
            (true, false) => Some((2, 1)),
            (false, false) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::expand;

    fn sample(q0_dot: f64, omega_dot: f64) -> Oscillator {
        Oscillator { mass: 1.3, omega: 0.8, q0: 0.2, omega_dot, q0_dot, fock_cutoff: DEFAULT_FOCK_CUTOFF }
    }

    const GIBBS: Measure = Measure::Gibbs { beta: 1.0 };

    #[test]
    fn thermal_averages_match_closed_forms() {
        // For the untruncated geometric distribution, <n> = 1 / (e^{beta omega} - 1).
        let m = sample(0.3, 0.2);
        let nbar = 1.0 / ((m.omega).exp() - 1.0);
        let n = m.normalizations(&GIBBS).unwrap();
        assert!((n.x2 * n.x2 - (2.0 * nbar + 1.0)).abs() < 1e-12);
        let second = 2.0 * nbar * nbar + nbar;
        assert!((n.x3 * n.x3 - (2.0 * second + 2.0 * nbar + 2.0)).abs() < 1e-10);
    }

    #[test]
    fn chain_reproduces_closed_form_coefficients() {
        let m = sample(0.3, 0.2);
        let chain = m.chain(&GIBBS, &LanczosOptions::default()).unwrap();
        assert_eq!(chain.d(), 5);
        let reference = m.reference_b(&GIBBS).unwrap();
        for (k, b) in reference.iter().enumerate() {
            assert!((chain.b[k + 1] - b).abs() < 1e-10, "b_{} = {} vs {}", k + 1, chain.b[k + 1], b);
        }
    }

    #[test]
    fn case_table() {
        for (q, w) in [(0.3, 0.2), (0.0, 0.2), (0.3, 0.0)] {
            let m = sample(q, w);
            let chain = m.chain(&GIBBS, &LanczosOptions::default()).unwrap();
            assert_eq!(Some((chain.d(), chain.d_a())), m.expected_dimension());
        }
    }

    #[test]
    fn assembled_cd_and_first_term() {
        for (q, w) in [(0.3, 0.2), (0.0, 0.2), (0.3, 0.0), (-1.1, 0.05)] {
            let m = sample(q, w);
            let chain = m.chain(&GIBBS, &LanczosOptions::default()).unwrap();
            let expansion = expand(&chain).unwrap();
            let exact = m.reference_cd(&GIBBS).unwrap();
            for nu in 0..2 {
                let got = expansion.cd_operator[3 + nu];
                assert!(got.im.abs() < 1e-12);
                assert!((got.re - exact[nu]).abs() < 1e-10, "{nu}: {} vs {}", got.re, exact[nu]);
            }
            if chain.d() == 5 {
                let first = &chain.basis[1] * C64::new(0.0, chain.b[0] * expansion.alpha[0]);
                let reference = m.first_term_reference(&GIBBS).unwrap();
                for nu in 0..2 {
                    assert!((first[3 + nu].re - reference[nu]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn first_term_depends_on_the_measure() {
        let m = sample(0.3, 0.2);
        let r1 = m.first_term_ratio(&Measure::Gibbs { beta: 1.0 }).unwrap();
        let r2 = m.first_term_ratio(&Measure::Gibbs { beta: 2.0 }).unwrap();
        assert!((r1 - r2).abs() > 1e-3);
    }

    #[test]
    fn small_cutoff_and_uniform_measure_are_rejected() {
        let mut m = sample(0.3, 0.2);
        assert!(m.fock_weights(&Measure::default()).is_err());
        m.fock_cutoff = 40;
        assert!(m.fock_weights(&Measure::Gibbs { beta: 0.05 }).is_err());
        m.fock_cutoff = 10;
        assert!(m.validate().is_err());
    }
}
