//! Three-level population transfer driven by two Gaussian pulses.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Protocol;
use crate::agp::expand;
use crate::basis::{BasisDeclaration, LiouvillianMatrix, Sector};
use crate::error::Result;
use crate::lanczos::{build_chain_from_coordinates, KrylovChain, LanczosOptions};
use crate::measure::{Measure, Metric};
use crate::operator::OperatorExpr;
use crate::C64;

/// `rho = 1/2` on three levels.
pub const MEASURE: Measure = Measure::Uniform { scale: 1.5 };

/// Pulse sequence: Stokes pulse centred at `t1`, pump at `t2`, common width `sigma`,
/// all given as fractions of `t_final`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stirap {
    pub detuning: f64,
    pub peak: f64,
    pub t_final: f64,
    #[serde(default = "t1_default")]
    pub stokes_centre: f64,
    #[serde(default = "t2_default")]
    pub pump_centre: f64,
    #[serde(default = "sigma_default")]
    pub width: f64,
}

fn t1_default() -> f64 {
    0.4
}
fn t2_default() -> f64 {
    0.6
}
fn sigma_default() -> f64 {
    0.1
}

/// Pulse amplitudes and their time derivatives at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulses {
    pub pump: f64,
    pub stokes: f64,
    pub pump_dot: f64,
    pub stokes_dot: f64,
}

impl Default for Stirap {
    fn default() -> Self {
        Stirap::standard(100.0)
    }
}

impl Stirap {
    /// Unit detuning, peak Rabi frequency four times the detuning, and `detuning * t_final`
    /// equal to `detuning_time`.
    pub fn standard(detuning_time: f64) -> Self {
        Stirap {
            detuning: 1.0,
            peak: 4.0,
            t_final: detuning_time,
            stokes_centre: t1_default(),
            pump_centre: t2_default(),
            width: sigma_default(),
        }
    }

    pub fn pulses(&self, t: f64) -> Pulses {
        let sigma = self.width * self.t_final;
        let gauss = |centre: f64| {
            let x = t - centre * self.t_final;
            let value = self.peak * (-x * x / (2.0 * sigma * sigma)).exp();
            (value, -x / (sigma * sigma) * value)
        };
        let (stokes, stokes_dot) = gauss(self.stokes_centre);
        let (pump, pump_dot) = gauss(self.pump_centre);
        Pulses { pump, stokes, pump_dot, stokes_dot }
    }

    pub fn dense_h(&self, t: f64) -> DMatrix<C64> {
        let p = self.pulses(t);
        three_level(p.pump, self.detuning, p.stokes)
    }

    pub fn dense_dh(&self, t: f64) -> DMatrix<C64> {
        let p = self.pulses(t);
        three_level(p.pump_dot, 0.0, p.stokes_dot)
    }

    /// Mixing angles `theta = arctan(pump / stokes)` and `phi = arctan(Omega / delta) / 2`
    /// with their rates.
    pub fn mixing_angles(&self, t: f64) -> (f64, f64, f64, f64) {
        let p = self.pulses(t);
        let rabi2 = p.pump * p.pump + p.stokes * p.stokes;
        let rabi = rabi2.sqrt();
        let theta = p.pump.atan2(p.stokes);
        let theta_dot = (p.pump_dot * p.stokes - p.pump * p.stokes_dot) / rabi2;
        let rabi_dot = (p.pump * p.pump_dot + p.stokes * p.stokes_dot) / rabi;
        let d = self.detuning;
        let phi = 0.5 * (rabi / d).atan();
        let phi_dot = 0.5 * d * rabi_dot / (d * d + rabi2);
        (theta, theta_dot, phi, phi_dot)
    }

    /// Exact CD coefficients on `(Y_1, Y_2, Y_3)`.
    pub fn reference_coefficients(&self, t: f64) -> [f64; 3] {
        let (theta, theta_dot, _, phi_dot) = self.mixing_angles(t);
        [-phi_dot * theta.sin(), phi_dot * theta.cos(), -theta_dot]
    }

    pub fn reference_dense_cd(&self, t: f64) -> DMatrix<C64> {
        let y = odd_elements();
        let a = self.reference_coefficients(t);
        &y[0] * C64::new(a[0], 0.0) + &y[1] * C64::new(a[1], 0.0) + &y[2] * C64::new(a[2], 0.0)
    }

    /// `M_{mu nu} = (X_mu, [H, Y_nu])` in closed form.
    pub fn m_block(&self, t: f64) -> DMatrix<C64> {
        let p = self.pulses(t);
        let (d, wp, ws) = (self.detuning, p.pump, p.stokes);
        let r3 = 3f64.sqrt();
        let entries = [
            [d, 0.0, ws / 2.0],
            [0.0, -d, -wp / 2.0],
            [ws / 2.0, -wp / 2.0, 0.0],
            [wp, -ws / 2.0, 0.0],
            [0.0, r3 * ws / 2.0, 0.0],
        ];
        DMatrix::from_fn(5, 3, |r, c| C64::new(0.0, entries[r][c]))
    }

    /// `dH` on the even elements, followed by three zeros.
    pub fn dh_coordinates(&self, t: f64) -> Result<DVector<C64>> {
        let x = BasisDeclaration::new_unchecked(
            even_elements().into_iter().map(OperatorExpr::Dense).collect(),
            vec![Sector::Even; 5],
            labels("X", 5),
        )?;
        let c = x.coordinates(&OperatorExpr::Dense(self.dense_dh(t)), &Metric::uniform(1.5))?;
        let mut v = DVector::<C64>::zeros(8);
        v.rows_mut(0, 5).copy_from(&c);
        Ok(v)
    }

    pub fn chain(&self, t: f64, opts: &LanczosOptions) -> Result<KrylovChain<DVector<C64>>> {
        let l = LiouvillianMatrix::from_block(&self.m_block(t));
        build_chain_from_coordinates(&l, &self.dh_coordinates(t)?, opts)
    }

    /// `a_mu^{(k)} = i b_0 alpha_k (Y_mu, O_{2k-1})`, one row per chain term.
    pub fn term_decomposition(&self, t: f64, opts: &LanczosOptions) -> Result<TermDecomposition> {
        let chain = self.chain(t, opts)?;
        let expansion = expand(&chain)?;
        let terms = expansion
            .alpha
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let scaled = &chain.basis[2 * k + 1] * C64::new(0.0, chain.b[0] * a);
                [scaled[5].re, scaled[6].re, scaled[7].re]
            })
            .collect();
        Ok(TermDecomposition { d: chain.d(), alpha: expansion.alpha, b: chain.b, terms })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDecomposition {
    pub d: usize,
    pub alpha: Vec<f64>,
    pub b: Vec<f64>,
    pub terms: Vec<[f64; 3]>,
}

impl TermDecomposition {
    pub fn total(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for row in &self.terms {
            for mu in 0..3 {
                s[mu] += row[mu];
            }
        }
        s
    }
}

fn three_level(pump: f64, detuning: f64, stokes: f64) -> DMatrix<C64> {
    DMatrix::from_row_slice(3, 3, &[0.0, pump, 0.0, pump, 2.0 * detuning, stokes, 0.0, stokes, 0.0])
        .map(|x| C64::new(0.5 * x, 0.0))
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

fn real(rows: [[f64; 3]; 3]) -> DMatrix<C64> {
    DMatrix::from_fn(3, 3, |r, c| C64::new(rows[r][c], 0.0))
}

/// The five real symmetric elements.
pub fn even_elements() -> Vec<DMatrix<C64>> {
    let r3 = 3f64.sqrt();
    vec![
        real([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        real([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]),
        real([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        real([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]),
        real([[1.0 / r3, 0.0, 0.0], [0.0, 1.0 / r3, 0.0], [0.0, 0.0, -2.0 / r3]]),
    ]
}

/// The three imaginary antisymmetric elements.
pub fn odd_elements() -> Vec<DMatrix<C64>> {
    let i = C64::new(0.0, 1.0);
    let pair = |a: usize, b: usize| {
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(a, b)] = -i;
        m[(b, a)] = i;
        m
    };
    vec![pair(0, 1), pair(1, 2), pair(0, 2)]
}

/// All eight elements as a tagged basis under `rho = 1/2`.
pub fn basis() -> Result<Arc<BasisDeclaration>> {
    let mut elements: Vec<OperatorExpr> = even_elements().into_iter().map(OperatorExpr::Dense).collect();
    elements.extend(odd_elements().into_iter().map(OperatorExpr::Dense));
    let mut sectors = vec![Sector::Even; 5];
    sectors.extend([Sector::Odd; 3]);
    let mut names = labels("X", 5);
    names.extend(labels("Y", 3));
    Ok(Arc::new(BasisDeclaration::new(elements, sectors, names, &Metric::uniform(1.5))?))
}

impl Protocol for Stirap {
    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
        Ok(OperatorExpr::Dense(self.dense_h(t)))
    }

    fn derivative(&self, t: f64) -> Result<OperatorExpr> {
        Ok(OperatorExpr::Dense(self.dense_dh(t)))
    }

    fn measure(&self) -> Measure {
        MEASURE
    }

    fn reference_cd(&self, t: f64) -> Option<Result<DMatrix<C64>>> {
        Some(Ok(self.reference_dense_cd(t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::spectral_agp_oracle;
    use crate::basis::build_liouvillian_matrix;
    use crate::lanczos::build_krylov_chain;
    use crate::models::derivative_check;

    #[test]
    fn closed_form_m_block_matches_numerics() {
        let s = Stirap::default();
        let b = basis().unwrap();
        for t in [20.0, 50.0, 71.0] {
            let l = build_liouvillian_matrix(&s.hamiltonian(t).unwrap(), &b, &Metric::uniform(1.5)).unwrap();
            let numeric = l.m_block().unwrap();
            assert!((numeric - s.m_block(t)).camax() < 1e-12);
        }
    }

    #[test]
    fn interior_dimension_and_exact_cd() {
        let s = Stirap::default();
        let opts = LanczosOptions::default();
        for t in [20.0, 45.0, 50.0, 63.0, 80.0] {
            let dec = s.term_decomposition(t, &opts).unwrap();
            // At the pulse crossing the Rabi frequency is stationary, so the levels are too.
            assert_eq!(dec.d, if t == 50.0 { 4 } else { 7 });
            let exact = s.reference_coefficients(t);
            let total = dec.total();
            for mu in 0..3 {
                assert!((total[mu] - exact[mu]).abs() < 1e-9, "t = {t}, mu = {mu}: {} vs {}", total[mu], exact[mu]);
            }
            let chain =
                build_krylov_chain(&s.hamiltonian(t).unwrap(), &s.derivative(t).unwrap(), &MEASURE, &opts).unwrap();
            let cd = expand(&chain).unwrap().cd_operator.dense_matrix(9).unwrap();
            assert!((&cd - s.reference_dense_cd(t)).camax() < 1e-9);
            let spectral = spectral_agp_oracle(&s.dense_h(t), &s.dense_dh(t)).unwrap();
            assert!((cd - spectral).camax() < 1e-9);
        }
    }

    #[test]
    fn derivative_is_consistent() {
        let s = Stirap::default();
        for t in [10.0, 40.0, 55.0, 90.0] {
            assert!(derivative_check(&s, t, 1e-5).unwrap() < 1e-6);
        }
    }
}
