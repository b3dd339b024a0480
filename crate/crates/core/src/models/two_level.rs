//! `H = (h/2) n . sigma` with a unit vector `n`.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use super::Protocol;
use crate::error::{CdError, Result};
use crate::operator::OperatorExpr;
use crate::C64;

fn pauli_matrices() -> [DMatrix<C64>; 3] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        DMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        DMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

/// `v . sigma` as a dense 2x2 matrix.
pub fn sigma_dot(v: &Vector3<f64>) -> DMatrix<C64> {
    let s = pauli_matrices();
    &s[0] * C64::new(v.x, 0.0) + &s[1] * C64::new(v.y, 0.0) + &s[2] * C64::new(v.z, 0.0)
}

/// One instant of the two-level family: field strength, direction and their rates.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLevel {
    pub h: f64,
    pub n: Vector3<f64>,
    pub h_dot: f64,
    /// Projected so that `n . n_dot = 0`.
    pub n_dot: Vector3<f64>,
}

impl TwoLevel {
    pub fn new(h: f64, n: Vector3<f64>, h_dot: f64, n_dot: Vector3<f64>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(CdError::InvalidParameter(format!("field strength must be positive, got {h}")));
        }
        let norm = n.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(CdError::InvalidParameter("direction must be nonzero".into()));
        }
        let n = n / norm;
        let n_dot = n_dot - n * n.dot(&n_dot);
        Ok(TwoLevel { h, n, h_dot, n_dot })
    }

    pub fn hamiltonian(&self) -> OperatorExpr {
        OperatorExpr::Dense(sigma_dot(&(self.n * (0.5 * self.h))))
    }

    pub fn derivative(&self) -> OperatorExpr {
        OperatorExpr::Dense(sigma_dot(&((self.n * self.h_dot + self.n_dot * self.h) * 0.5)))
    }

    /// `(1/2) (n x n_dot) . sigma`.
    pub fn reference_cd(&self) -> DMatrix<C64> {
        sigma_dot(&(self.n.cross(&self.n_dot) * 0.5))
    }

    /// `(b_1, b_2)`; `b_2` vanishes when the field strength is constant.
    pub fn reference_b(&self) -> (f64, f64) {
        let rate = self.n_dot.norm();
        let denom = (self.h_dot * self.h_dot + self.h * self.h * rate * rate).sqrt();
        (self.h * self.h * rate / denom, self.h * self.h_dot.abs() / denom)
    }
}

/// Sweep of the polar angle from `theta_start` to `theta_end` with a smoothstep profile
/// while the field strength ramps linearly by `ramp` (relative).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelSweep {
    pub h0: f64,
    #[serde(default)]
    pub ramp: f64,
    #[serde(default)]
    pub theta_start: f64,
    #[serde(default = "half_turn")]
    pub theta_end: f64,
    pub t_final: f64,
}

fn half_turn() -> f64 {
    std::f64::consts::PI
}

impl TwoLevelSweep {
    fn theta(&self, t: f64) -> (f64, f64) {
        let tau = t / self.t_final;
        let span = self.theta_end - self.theta_start;
        let s = tau * tau * (3.0 - 2.0 * tau);
        let s_dot = 6.0 * tau * (1.0 - tau) / self.t_final;
        (self.theta_start + span * s, span * s_dot)
    }

    pub fn at(&self, t: f64) -> Result<TwoLevel> {
        let (theta, theta_dot) = self.theta(t);
        let h = self.h0 * (1.0 + self.ramp * t / self.t_final);
        let h_dot = self.h0 * self.ramp / self.t_final;
        let n = Vector3::new(theta.sin(), 0.0, theta.cos());
        let n_dot = Vector3::new(theta.cos(), 0.0, -theta.sin()) * theta_dot;
        TwoLevel::new(h, n, h_dot, n_dot)
    }
}

impl Protocol for TwoLevelSweep {
    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
        Ok(self.at(t)?.hamiltonian())
    }

    fn derivative(&self, t: f64) -> Result<OperatorExpr> {
        Ok(self.at(t)?.derivative())
    }

    fn reference_cd(&self, t: f64) -> Option<Result<DMatrix<C64>>> {
        Some(self.at(t).map(|m| m.reference_cd()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::expand;
    use crate::lanczos::{build_krylov_chain, LanczosOptions};
    use crate::measure::Measure;
    use crate::models::derivative_check;

    #[test]
    fn rotation_in_xz_plane_gives_y_term() {
        let theta: f64 = 0.7;
        let rate = 1.3;
        let m = TwoLevel::new(
            2.0,
            Vector3::new(theta.sin(), 0.0, theta.cos()),
            0.4,
            Vector3::new(theta.cos(), 0.0, -theta.sin()) * rate,
        )
        .unwrap();
        let expected = sigma_dot(&Vector3::new(0.0, rate / 2.0, 0.0));
        assert!((m.reference_cd() - &expected).camax() < 1e-15);

        let chain =
            build_krylov_chain(&m.hamiltonian(), &m.derivative(), &Measure::default(), &LanczosOptions::default())
                .unwrap();
        assert_eq!(chain.d(), 3);
        let (b1, b2) = m.reference_b();
        assert!((chain.b[1] - b1).abs() < 1e-12 && (chain.b[2] - b2).abs() < 1e-12);
        let cd = expand(&chain).unwrap().cd_operator.dense_matrix(4).unwrap();
        assert!((cd - expected).camax() < 1e-12);
    }

    #[test]
    fn constant_field_strength_gives_even_chain() {
        let m = TwoLevel::new(1.0, Vector3::new(0.0, 0.0, 1.0), 0.0, Vector3::new(0.5, 0.2, 0.0)).unwrap();
        let chain =
            build_krylov_chain(&m.hamiltonian(), &m.derivative(), &Measure::default(), &LanczosOptions::default())
                .unwrap();
        assert_eq!(chain.d(), 2);
        let cd = expand(&chain).unwrap().cd_operator.dense_matrix(4).unwrap();
        assert!((cd - m.reference_cd()).camax() < 1e-12);
    }

    #[test]
    fn fixed_direction_has_no_cd() {
        let m = TwoLevel::new(1.0, Vector3::new(1.0, 1.0, 0.0), 0.3, Vector3::zeros()).unwrap();
        assert_eq!(m.reference_cd().camax(), 0.0);
        let chain =
            build_krylov_chain(&m.hamiltonian(), &m.derivative(), &Measure::default(), &LanczosOptions::default())
                .unwrap();
        assert_eq!(chain.d(), 1);
    }

    #[test]
    fn nonpositive_field_is_rejected() {
        assert!(TwoLevel::new(0.0, Vector3::z(), 0.0, Vector3::x()).is_err());
    }

    #[test]
    fn sweep_derivative_is_consistent() {
        let p = TwoLevelSweep { h0: 1.0, ramp: 0.5, theta_start: 0.0, theta_end: 3.0, t_final: 2.0 };
        for t in [0.1, 0.7, 1.9] {
            assert!(derivative_check(&p, t, 1e-5).unwrap() < 1e-6);
        }
    }
}
