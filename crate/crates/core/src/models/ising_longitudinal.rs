//! Annealing Hamiltonian `H = g (-v sum Z Z - h sum Z) + (1 - g)(-gamma sum X)` with
//! `g = t / t_f` on a ring, and the restricted operator sets used for a truncated CD term.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Protocol;
use crate::basis::{BasisDeclaration, Sector};
use crate::error::{CdError, Result};
use crate::measure::{Measure, Metric};
use crate::operator::OperatorExpr;
use crate::pauli::{Letter, PauliString, PauliSum};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingLongitudinal {
    pub n_sites: usize,
    pub v: f64,
    pub h: f64,
    pub gamma: f64,
    pub t_final: f64,
}

/// A translation-invariant sum: each part is a coefficient and letters at offsets from `n`.
fn ring_sum(n_sites: usize, parts: &[(f64, &[(usize, Letter)])]) -> Result<PauliSum> {
    let mut s = PauliSum::zero(n_sites)?;
    for n in 0..n_sites {
        for (c, letters) in parts {
            let placed: Vec<(usize, Letter)> = letters.iter().map(|&(o, l)| ((n + o) % n_sites, l)).collect();
            s.add_term(PauliString::from_letters(&placed), C64::new(*c, 0.0))?;
        }
    }
    Ok(s)
}

use Letter::{X, Y, Z};

impl IsingLongitudinal {
    pub fn new(n_sites: usize, v: f64, h: f64, gamma: f64, t_final: f64) -> Result<Self> {
        if !(4..=crate::pauli::MAX_SITES).contains(&n_sites) {
            return Err(CdError::InvalidParameter(format!("need at least 4 sites, got {n_sites}")));
        }
        if !(t_final > 0.0) {
            return Err(CdError::InvalidParameter("annealing time must be positive".into()));
        }
        Ok(IsingLongitudinal { n_sites, v, h, gamma, t_final })
    }

    fn problem(&self) -> Result<PauliSum> {
        let mut p = ring_sum(self.n_sites, &[(-self.v, &[(0, Z), (1, Z)])])?;
        p.axpy(C64::new(-self.h, 0.0), &ring_sum(self.n_sites, &[(1.0, &[(0, Z)])])?)?;
        Ok(p)
    }

    fn driver(&self) -> Result<PauliSum> {
        ring_sum(self.n_sites, &[(-self.gamma, &[(0, X)])])
    }

    pub fn schedule(&self, t: f64) -> f64 {
        t / self.t_final
    }

    pub fn scale(&self) -> f64 {
        1.0 / self.n_sites as f64
    }

    pub fn metric(&self) -> Metric {
        Metric::uniform(self.scale())
    }

    /// Distinct translation sums of `n_s` strings are already normalized under `rho = 1/(2^n n_s)`.
    ///
    /// The three odd operators: `sum Y`, `sum (Y Z + Z Y) / sqrt 2`, `sum (Y X + X Y) / sqrt 2`.
    pub fn odd_basis(&self) -> Result<Arc<BasisDeclaration>> {
        let r = FRAC_1_SQRT_2;
        let n = self.n_sites;
        let elements = vec![
            ring_sum(n, &[(1.0, &[(0, Y)])])?,
            ring_sum(n, &[(r, &[(0, Y), (1, Z)]), (r, &[(0, Z), (1, Y)])])?,
            ring_sum(n, &[(r, &[(0, Y), (1, X)]), (r, &[(0, X), (1, Y)])])?,
        ];
        self.declare(elements, Sector::Odd, &["Y", "YZ+ZY", "YX+XY"])
    }

    /// The nine even operators reached from `dH` and the odd set.
    pub fn even_basis(&self) -> Result<Arc<BasisDeclaration>> {
        let r = FRAC_1_SQRT_2;
        let n = self.n_sites;
        let elements = vec![
            ring_sum(n, &[(1.0, &[(0, Z)])])?,
            ring_sum(n, &[(1.0, &[(0, X)])])?,
            ring_sum(n, &[(1.0, &[(0, Z), (1, Z)])])?,
            ring_sum(n, &[(1.0, &[(0, X), (1, X)])])?,
            ring_sum(n, &[(1.0, &[(0, Y), (1, Y)])])?,
            ring_sum(n, &[(r, &[(0, Z), (1, X)]), (r, &[(0, X), (1, Z)])])?,
            ring_sum(n, &[(1.0, &[(0, Z), (1, X), (2, Z)])])?,
            ring_sum(n, &[(r, &[(0, Z), (1, X), (2, X)]), (r, &[(0, X), (1, X), (2, Z)])])?,
            ring_sum(n, &[(r, &[(0, Z), (1, Y), (2, Y)]), (r, &[(0, Y), (1, Y), (2, Z)])])?,
        ];
        self.declare(elements, Sector::Even, &["Z", "X", "ZZ", "XX", "YY", "ZX+XZ", "ZXZ", "ZXX+XXZ", "ZYY+YYZ"])
    }

    fn declare(&self, elements: Vec<PauliSum>, sector: Sector, names: &[&str]) -> Result<Arc<BasisDeclaration>> {
        let len = elements.len();
        let elements = elements.into_iter().map(OperatorExpr::Pauli).collect();
        let labels = names.iter().map(|s| s.to_string()).collect();
        Ok(Arc::new(BasisDeclaration::new(elements, vec![sector; len], labels, &self.metric())?))
    }

    /// Plotting convention `H_CD = a_1 Y_1 + sqrt 2 a_2 Y_2 + sqrt 2 a_3 Y_3`.
    pub fn plotted_coefficients(&self, coefficients: &[f64]) -> [f64; 3] {
        [coefficients[0], coefficients[1] * FRAC_1_SQRT_2, coefficients[2] * FRAC_1_SQRT_2]
    }
}

impl Protocol for IsingLongitudinal {
    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
        let g = self.schedule(t);
        let mut h = self.problem()?.scaled(C64::new(g, 0.0));
        h.axpy(C64::new(1.0 - g, 0.0), &self.driver()?)?;
        Ok(OperatorExpr::Pauli(h))
    }

    fn derivative(&self, _t: f64) -> Result<OperatorExpr> {
        let mut dh = self.problem()?;
        dh.axpy(C64::new(-1.0, 0.0), &self.driver()?)?;
        dh.scale(C64::new(1.0 / self.t_final, 0.0));
        Ok(OperatorExpr::Pauli(dh))
    }

    fn measure(&self) -> Measure {
        Measure::Uniform { scale: self.scale() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanczos::LanczosOptions;
    use crate::models::derivative_check;
    use crate::variational::{least_squares_variational_oracle, truncated_cd, truncated_cd_with_even_basis};

    #[test]
    fn restricted_chain_has_dimension_seven_and_matches_least_squares() {
        let m = IsingLongitudinal::new(6, 1.0, 1.0, 1.0, 10.0).unwrap();
        let odd = m.odd_basis().unwrap();
        let even = m.even_basis().unwrap();
        for t in [1.0, 4.0, 7.5] {
            let h = m.hamiltonian(t).unwrap();
            let dh = m.derivative(t).unwrap();
            let declared =
                truncated_cd_with_even_basis(&h, &dh, &even, &odd, &m.measure(), &LanczosOptions::default()).unwrap();
            // The defect is a square root of a difference of squares, so roundoff shows up near 1e-8.
            assert!(declared.coverage_defect < 1e-6, "defect {}", declared.coverage_defect);
            assert_eq!(declared.chain_b.len(), 7);
            let generated = truncated_cd(&h, &dh, &odd, &m.measure(), &LanczosOptions::default()).unwrap();
            let oracle = least_squares_variational_oracle(&h, &dh, odd.elements(), &m.measure()).unwrap();
            for nu in 0..3 {
                assert!((declared.coefficients[nu] - oracle.coefficients[nu]).abs() < 1e-9);
                assert!((generated.coefficients[nu] - oracle.coefficients[nu]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn derivative_is_consistent() {
        let m = IsingLongitudinal::new(4, 1.0, 0.1, 1.0, 5.0).unwrap();
        assert!(derivative_check(&m, 2.0, 1e-5).unwrap() < 1e-6);
    }
}
