//! XX chains whose fields and couplings follow the Toda equations
//! `dh_n/dt = 2 (v_n^2 - v_{n-1}^2)`, `dv_n/dt = v_n (h_{n+1} - h_n)`.
//!
//! Along such a flow the spectrum is frozen and the CD term is the two-body
//! `(1/sqrt 2) sum_n v_n W_n^1`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::xx::XxModel;
use super::Protocol;
use crate::error::{CdError, Result};
use crate::operator::OperatorExpr;

/// Right-hand side of the flow; `v` has one entry fewer than `h`.
pub fn toda_rhs(h: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ns = h.len();
    let bond = |j: isize| if j >= 0 && (j as usize) < v.len() { v[j as usize] } else { 0.0 };
    let h_dot = (0..ns)
        .map(|n| {
            let n = n as isize;
            2.0 * (bond(n).powi(2) - bond(n - 1).powi(2))
        })
        .collect();
    let v_dot = (0..ns - 1).map(|n| v[n] * (h[n + 1] - h[n])).collect();
    (h_dot, v_dot)
}

/// The XX snapshot at a point of a Toda trajectory, rates taken from the flow.
pub fn snapshot(h: &[f64], v: &[f64]) -> Result<XxModel> {
    let (h_dot, v_dot) = toda_rhs(h, v);
    XxModel::new(v.to_vec(), h.to_vec(), v_dot, h_dot)
}

/// Fixed-step classical RK4 for the flow; returns the state after `steps` steps of `dt`.
pub fn integrate(h0: &[f64], v0: &[f64], dt: f64, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut h, mut v) = (h0.to_vec(), v0.to_vec());
    let shifted = |h: &[f64], v: &[f64], dh: &[f64], dv: &[f64], s: f64| {
        (
            h.iter().zip(dh).map(|(a, b)| a + s * b).collect::<Vec<_>>(),
            v.iter().zip(dv).map(|(a, b)| a + s * b).collect::<Vec<_>>(),
        )
    };
    for _ in 0..steps {
        let (k1h, k1v) = toda_rhs(&h, &v);
        let (h2, v2) = shifted(&h, &v, &k1h, &k1v, 0.5 * dt);
        let (k2h, k2v) = toda_rhs(&h2, &v2);
        let (h3, v3) = shifted(&h, &v, &k2h, &k2v, 0.5 * dt);
        let (k3h, k3v) = toda_rhs(&h3, &v3);
        let (h4, v4) = shifted(&h, &v, &k3h, &k3v, dt);
        let (k4h, k4v) = toda_rhs(&h4, &v4);
        for j in 0..h.len() {
            h[j] += dt / 6.0 * (k1h[j] + 2.0 * k2h[j] + 2.0 * k3h[j] + k4h[j]);
        }
        for j in 0..v.len() {
            v[j] += dt / 6.0 * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j]);
        }
    }
    (h, v)
}

/// Equidistant fields and parabolic couplings driven by one angle with
/// `d theta / dt = (2 h_1 / (n_s - 1)) cos theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TodaFlow {
    pub n_sites: usize,
    pub h1: f64,
    pub theta0: f64,
    pub t_final: f64,
}

impl TodaFlow {
    pub fn new(n_sites: usize, h1: f64, theta0: f64, t_final: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(CdError::InvalidParameter("the chain needs at least two sites".into()));
        }
        if !(theta0.abs() < FRAC_PI_2) {
            return Err(CdError::InvalidParameter(format!("initial angle {theta0} outside (-pi/2, pi/2)")));
        }
        Ok(TodaFlow { n_sites, h1, theta0, t_final })
    }

    pub fn rate(&self) -> f64 {
        2.0 * self.h1 / (self.n_sites as f64 - 1.0)
    }

    /// `theta(t) = 2 arctan(tan(theta_0/2 + pi/4) e^{c t}) - pi/2`.
    pub fn theta(&self, t: f64) -> Result<(f64, f64)> {
        let c = self.rate();
        let theta = 2.0 * ((0.5 * self.theta0 + 0.5 * FRAC_PI_2).tan() * (c * t).exp()).atan() - FRAC_PI_2;
        if !(theta.abs() < FRAC_PI_2) {
            return Err(CdError::InvalidParameter(format!("angle left (-pi/2, pi/2) at t = {t}")));
        }
        Ok((theta, c * theta.cos()))
    }

    pub fn at(&self, t: f64) -> Result<XxModel> {
        let (theta, theta_dot) = self.theta(t)?;
        let ns = self.n_sites as f64;
        let c = self.rate();
        let (s, co) = theta.sin_cos();
        let mut h = Vec::new();
        let mut h_dot = Vec::new();
        for n in 1..=self.n_sites {
            let offset = n as f64 - 0.5 * (ns + 1.0);
            h.push(-c * offset * s);
            h_dot.push(-c * offset * co * theta_dot);
        }
        let mut v = Vec::new();
        let mut v_dot = Vec::new();
        for n in 1..self.n_sites {
            let amp = (n as f64 * (ns - n as f64)).sqrt() * self.h1 / (ns - 1.0);
            v.push(amp * co);
            v_dot.push(-amp * s * theta_dot);
        }
        XxModel::new(v, h, v_dot, h_dot)
    }
}

impl Protocol for TodaFlow {
    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
        self.at(t)?.hamiltonian()
    }

    fn derivative(&self, t: f64) -> Result<OperatorExpr> {
        self.at(t)?.derivative()
    }

    fn reference_cd(&self, t: f64) -> Option<Result<nalgebra::DMatrix<crate::C64>>> {
        Some(self.at(t).and_then(|m| m.toda_cd()?.to_dense(crate::operator::DEFAULT_DENSE_CAP)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::expand;
    use crate::lanczos::{build_krylov_chain, LanczosOptions};
    use crate::linalg::symmetric_eigen_sorted;
    use crate::measure::Measure;
    use crate::models::derivative_check;
    use crate::C64;

    #[test]
    fn special_flow_terminates_after_two_elements() {
        let flow = TodaFlow::new(6, 1.0, 0.3, 5.0).unwrap();
        for t in [0.0, 0.8, 2.5] {
            let m = flow.at(t).unwrap();
            let (h_dot, v_dot) = toda_rhs(&m.h, &m.v);
            for (a, b) in h_dot.iter().zip(&m.h_dot).chain(v_dot.iter().zip(&m.v_dot)) {
                assert!((a - b).abs() < 1e-12);
            }
            let chain = build_krylov_chain(
                &m.hamiltonian().unwrap(),
                &m.derivative().unwrap(),
                &Measure::default(),
                &LanczosOptions::default(),
            )
            .unwrap();
            assert_eq!(chain.d(), 2);
            let cd = expand(&chain).unwrap().cd_operator;
            let mut diff = cd.clone();
            diff.axpy(C64::new(-1.0, 0.0), &OperatorExpr::Pauli(m.toda_cd().unwrap())).unwrap();
            assert!(diff.max_abs() < 1e-12);
        }
    }

    #[test]
    fn generic_flow_has_two_body_cd_and_frozen_spectrum() {
        let h0 = vec![0.4, -0.3, 0.9, 0.1, -0.6];
        let v0 = vec![0.7, -0.5, 0.8, 0.3];
        let (h, v) = integrate(&h0, &v0, 1e-3, 1500);
        let (before, _) = symmetric_eigen_sorted(&snapshot(&h0, &v0).unwrap().single_particle_matrix());
        let (after, _) = symmetric_eigen_sorted(&snapshot(&h, &v).unwrap().single_particle_matrix());
        assert!((before - after).amax() < 1e-9);
        let m = snapshot(&h, &v).unwrap();
        let chain = m.chain(&LanczosOptions::default()).unwrap();
        let e = expand(&chain).unwrap();
        let idx = m.index();
        for (j, (n, k)) in idx.pairs().into_iter().enumerate() {
            let c = e.cd_operator[m.sector_sizes().0 + j];
            let expected = if k == 1 { m.v[n] * std::f64::consts::FRAC_1_SQRT_2 } else { 0.0 };
            assert!((c.re - expected).abs() < 1e-8 && c.im.abs() < 1e-12, "({n},{k}): {c} vs {expected}");
        }
    }

    #[test]
    fn angle_bounds() {
        assert!(TodaFlow::new(4, 1.0, 1.6, 1.0).is_err());
        let flow = TodaFlow::new(4, 1.0, -1.2, 1.0).unwrap();
        assert!(derivative_check(&flow, 0.4, 1e-5).unwrap() < 1e-6);
        let (theta, _) = flow.theta(0.0).unwrap();
        assert!((theta + 1.2).abs() < 1e-14);
    }
}
