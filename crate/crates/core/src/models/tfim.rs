//! Periodic transverse-field Ising chain `H = -(v/2) (sum X_n X_{n+1} + g sum Z_n)`.
//!
//! The odd chain elements are the string operators `W_k`, so the Lanczos coefficients obey a
//! two-term recursion and the AGP coefficients follow from a tridiagonal Toeplitz inverse.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Protocol;
use crate::error::{CdError, Result};
use crate::measure::Measure;
use crate::operator::OperatorExpr;
use crate::pauli::{Letter, PauliString, PauliSum};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tfim {
    pub n_sites: usize,
    pub v: f64,
    pub g: f64,
    pub g_dot: f64,
}

/// `A_n Z .. Z B_{n+k}` on a ring of `n_sites`.
fn ring_string(n_sites: usize, n: usize, k: usize, first: Letter, last: Letter) -> PauliString {
    let mut letters = vec![(n % n_sites, first)];
    letters.extend((n + 1..n + k).map(|j| (j % n_sites, Letter::Z)));
    letters.push(((n + k) % n_sites, last));
    PauliString::from_letters(&letters)
}

fn ring_sum(n_sites: usize, k: usize, parts: &[(f64, Letter, Letter)]) -> Result<PauliSum> {
    let mut s = PauliSum::zero(n_sites)?;
    for n in 0..n_sites {
        for &(c, a, b) in parts {
            s.add_term(ring_string(n_sites, n, k, a, b), C64::new(c, 0.0))?;
        }
    }
    Ok(s)
}

impl Tfim {
    pub fn new(n_sites: usize, v: f64, g: f64, g_dot: f64) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 == 1 {
            return Err(CdError::InvalidParameter(format!("the ring needs an even number of sites, got {n_sites}")));
        }
        // Larger rings are fine for the closed forms; Pauli operators enforce their own limit.
        Ok(Tfim { n_sites, v, g, g_dot })
    }

    /// `rho = 1 / (2^{n_s} n_s)`.
    pub fn measure(&self) -> Measure {
        Measure::Uniform { scale: 1.0 / self.n_sites as f64 }
    }

    pub fn hamiltonian(&self) -> Result<OperatorExpr> {
        let mut h = ring_sum(self.n_sites, 1, &[(-0.5 * self.v, Letter::X, Letter::X)])?;
        h.axpy(C64::new(-0.5 * self.v * self.g, 0.0), &self.magnetization()?)?;
        Ok(OperatorExpr::Pauli(h))
    }

    pub fn derivative(&self) -> Result<OperatorExpr> {
        Ok(OperatorExpr::Pauli(self.magnetization()?.scaled(C64::new(-0.5 * self.v * self.g_dot, 0.0))))
    }

    /// `sum_n Z_n`.
    pub fn magnetization(&self) -> Result<PauliSum> {
        PauliSum::from_terms(
            self.n_sites,
            (0..self.n_sites).map(|n| (PauliString::single(n, Letter::Z), C64::new(1.0, 0.0))),
        )
    }

    /// `sum_n X_n Z .. Z X_{n+k}`.
    pub fn v_x(&self, k: usize) -> Result<PauliSum> {
        ring_sum(self.n_sites, k, &[(1.0, Letter::X, Letter::X)])
    }

    /// `sum_n Y_n Z .. Z Y_{n+k}`.
    pub fn v_y(&self, k: usize) -> Result<PauliSum> {
        ring_sum(self.n_sites, k, &[(1.0, Letter::Y, Letter::Y)])
    }

    /// `(1/sqrt 2) sum_n (X_n Z .. Z Y_{n+k} + Y_n Z .. Z X_{n+k})`.
    pub fn w(&self, k: usize) -> Result<PauliSum> {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        ring_sum(self.n_sites, k, &[(c, Letter::X, Letter::Y), (c, Letter::Y, Letter::X)])
    }

    /// Parity `prod_n Z_n`.
    pub fn parity(&self) -> Result<PauliSum> {
        let letters: Vec<(usize, Letter)> = (0..self.n_sites).map(|n| (n, Letter::Z)).collect();
        PauliSum::from_terms(self.n_sites, [(PauliString::from_letters(&letters), C64::new(1.0, 0.0))])
    }

    /// Number of AGP coefficients: one per `W_k`, `k = 1 .. n_s - 1`.
    pub fn d_a(&self) -> usize {
        self.n_sites - 1
    }

    /// `b_0` under the uniform measure `rho = scale / 2^{n_s}`.
    pub fn b0(&self, scale: f64) -> f64 {
        (scale * self.n_sites as f64).sqrt() * 0.5 * self.v * self.g_dot.abs()
    }

    /// `b_0 .. b_{d-1}` from the two-term recursion, `d = 2 n_s - 1`.
    pub fn analytic_b(&self, scale: f64) -> Vec<f64> {
        analytic_b(self.v, self.g, 2 * self.n_sites - 1, self.b0(scale))
    }

    /// `(-1)^{k-1} b_0 alpha_k`, the coefficient of the normalized `W_k` in the CD term, from
    /// the sine-transform inverse of the tridiagonal Toeplitz system.
    pub fn closed_form_signed(&self, scale: f64) -> Vec<f64> {
        let d_a = self.d_a();
        let m = (d_a + 1) as f64;
        let pi = std::f64::consts::PI;
        let g = self.g;
        let prefactor = -self.g_dot * (scale * self.n_sites as f64 / 2.0).sqrt() / (2.0 * m);
        (1..=d_a)
            .map(|k| {
                let sum: f64 = (1..=d_a)
                    .map(|l| {
                        let q = pi * l as f64 / m;
                        q.sin() * (k as f64 * q).sin() / (1.0 + g * g - 2.0 * g * q.cos())
                    })
                    .sum();
                prefactor * sum
            })
            .collect()
    }

    /// `lambda_l = 4 v^2 (1 + g^2 - 2 g cos(pi l / (d_A + 1)))`.
    pub fn toeplitz_eigenvalues(&self) -> Vec<f64> {
        let m = (self.d_a() + 1) as f64;
        (1..=self.d_a())
            .map(|l| {
                let q = std::f64::consts::PI * l as f64 / m;
                4.0 * self.v * self.v * (1.0 + self.g * self.g - 2.0 * self.g * q.cos())
            })
            .collect()
    }
}

/// Lanczos coefficients with `b_1 = sqrt 2 v`, `b_2 = sqrt 2 v sqrt(1 + 2 g^2)`,
/// `b_{2k} b_{2k+1} = 4 v^2 g` and `b_{2k+1}^2 + b_{2k+2}^2 = 4 v^2 (1 + g^2)`.
pub fn analytic_b(v: f64, g: f64, d: usize, b0: f64) -> Vec<f64> {
    let mut b = vec![b0];
    let band = 4.0 * v * v * (1.0 + g * g);
    let coupling = 4.0 * v * v * g.abs();
    for n in 1..d {
        let next = match n {
            1 => 2f64.sqrt() * v.abs(),
            2 => 2f64.sqrt() * v.abs() * (1.0 + 2.0 * g * g).sqrt(),
            _ if n % 2 == 1 => coupling / b[n - 1],
            _ => (band - b[n - 1] * b[n - 1]).max(0.0).sqrt(),
        };
        b.push(next);
    }
    b
}

/// Linear ramp `g(t) = g_start + (g_end - g_start) t / t_f` on a ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfimRamp {
    pub n_sites: usize,
    pub v: f64,
    pub g_start: f64,
    pub g_end: f64,
    pub t_final: f64,
}

impl TfimRamp {
    pub fn at(&self, t: f64) -> Result<Tfim> {
        let rate = (self.g_end - self.g_start) / self.t_final;
        Tfim::new(self.n_sites, self.v, self.g_start + rate * t, rate)
    }
}

impl Protocol for TfimRamp {
    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
        self.at(t)?.hamiltonian()
    }

    fn derivative(&self, t: f64) -> Result<OperatorExpr> {
        self.at(t)?.derivative()
    }

    fn measure(&self) -> Measure {
        Measure::Uniform { scale: 1.0 / self.n_sites as f64 }
    }

    fn reference_cd(&self, t: f64) -> Option<Result<DMatrix<C64>>> {
        Some((|| {
            let model = self.at(t)?;
            let scale = 1.0 / self.n_sites as f64;
            let norm = scale.sqrt().recip();
            let mut cd = PauliSum::zero(self.n_sites)?;
            for (k, c) in model.closed_form_signed(scale).iter().enumerate() {
                // Normalized W_k under this measure is the unit-scale W_k divided by sqrt(scale).
                cd.axpy(C64::new(c * norm, 0.0), &model.w(k + 1)?)?;
            }
            cd.to_dense(crate::operator::DEFAULT_DENSE_CAP)
        })())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::expand;
    use crate::lanczos::{build_krylov_chain, LanczosOptions};
    use crate::measure::Metric;
    use crate::models::derivative_check;

    #[test]
    fn chain_matches_recursion_and_closed_form() {
        for n in [4usize, 6, 8] {
            for g in [0.5, 1.0, 1.7] {
                let m = Tfim::new(n, 1.0, g, 0.8).unwrap();
                let measure = m.measure();
                let chain = build_krylov_chain(
                    &m.hamiltonian().unwrap(),
                    &m.derivative().unwrap(),
                    &measure,
                    &LanczosOptions::default(),
                )
                .unwrap();
                let scale = 1.0 / n as f64;
                let analytic = m.analytic_b(scale);
                assert_eq!(chain.d(), analytic.len(), "n = {n}, g = {g}, b = {:?}", chain.b);
                for (a, b) in chain.b.iter().zip(&analytic) {
                    assert!((a - b).abs() < 1e-9, "n = {n}, g = {g}: {a} vs {b}");
                }
                let signed = expand(&chain).unwrap().signed_coefficients();
                let closed = m.closed_form_signed(scale);
                for (a, b) in signed.iter().zip(&closed) {
                    assert!((a - b).abs() < 1e-9, "n = {n}, g = {g}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn odd_elements_are_string_operators() {
        let m = Tfim::new(6, 1.0, 0.6, 1.0).unwrap();
        let measure = m.measure();
        let chain = build_krylov_chain(
            &m.hamiltonian().unwrap(),
            &m.derivative().unwrap(),
            &measure,
            &LanczosOptions::default(),
        )
        .unwrap();
        let metric = Metric::uniform(1.0 / 6.0);
        for k in 1..=m.d_a() {
            let w = OperatorExpr::Pauli(m.w(k).unwrap());
            let wn = w.scaled(C64::new(1.0 / metric.norm(&w).unwrap(), 0.0));
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut diff = chain.basis[2 * k - 1].clone();
            diff.axpy(C64::new(0.0, -sign), &wn).unwrap();
            assert!(diff.max_abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn parity_relations() {
        let m = Tfim::new(4, 1.0, 0.3, 1.0).unwrap();
        let p = m.parity().unwrap();
        for k in 1..4 {
            let lhs = m.v_x(4 - k).unwrap();
            let rhs = p.product(&m.v_y(k).unwrap()).unwrap().scaled(C64::new(-1.0, 0.0));
            assert_eq!(lhs.to_dense(16).unwrap(), rhs.to_dense(16).unwrap());
            let lhs = m.w(4 - k).unwrap().to_dense(16).unwrap();
            let rhs = p.product(&m.w(k).unwrap()).unwrap().to_dense(16).unwrap();
            assert!((lhs - rhs).camax() < 1e-15);
        }
    }

    #[test]
    fn odd_ring_is_rejected() {
        assert!(Tfim::new(5, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn ramp_derivative_is_consistent() {
        let p = TfimRamp { n_sites: 4, v: 1.0, g_start: 2.0, g_end: 0.0, t_final: 3.0 };
        assert!(derivative_check(&p, 1.1, 1e-5).unwrap() < 1e-6);
    }
}
