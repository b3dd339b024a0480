//! The worked systems: Hamiltonian families, their parameter derivatives, driving
//! protocols and the closed-form results each one is checked against.

pub mod ising_longitudinal;
pub mod oscillator;
pub mod profiles;
pub mod stirap;
pub mod tfim;
pub mod toda;
pub mod two_level;
pub mod xx;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::measure::Measure;
use crate::operator::{OperatorExpr, DEFAULT_DENSE_CAP};
use crate::pauli::PauliString;
use crate::C64;

/// A Hamiltonian family driven along `lambda(t) = t`.
pub trait Protocol: Send + Sync {
    fn t_final(&self) -> f64;
    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr>;
    /// `dH/dt`, analytic.
    fn derivative(&self, t: f64) -> Result<OperatorExpr>;

    fn measure(&self) -> Measure {
        Measure::default()
    }

    fn dense_hamiltonian(&self, t: f64) -> Result<DMatrix<C64>> {
        self.hamiltonian(t)?.dense_matrix(DEFAULT_DENSE_CAP)
    }

    fn dense_derivative(&self, t: f64) -> Result<DMatrix<C64>> {
        self.derivative(t)?.dense_matrix(DEFAULT_DENSE_CAP)
    }

    /// Known exact CD term at time `t`, when the model has one.
    fn reference_cd(&self, _t: f64) -> Option<Result<DMatrix<C64>>> {
        None
    }
}

/// `||(H(t + eps) - H(t - eps)) / 2 eps - dH/dt|| / ||dH/dt||` in the largest-entry norm.
pub fn derivative_check(protocol: &dyn Protocol, t: f64, eps: f64) -> Result<f64> {
    let mut fd = protocol.hamiltonian(t + eps)?;
    fd.axpy(C64::new(-1.0, 0.0), &protocol.hamiltonian(t - eps)?)?;
    fd.scale(C64::new(0.5 / eps, 0.0));
    let exact = protocol.derivative(t)?;
    let scale = exact.max_abs();
    fd.axpy(C64::new(-1.0, 0.0), &exact)?;
    Ok(if scale == 0.0 { fd.max_abs() } else { fd.max_abs() / scale })
}

/// Norm fractions of an odd-element expansion by body count.
///
/// `odd` holds the chain elements `theta_{2k-1}` as coordinate vectors and `body[j]` the body
/// count of coordinate `j`. `per_term` is the weighted sum of per-element fractions
/// `sum_k alpha_k^2 |theta^{(p)}_{2k-1}|^2 / sum_k alpha_k^2`; `exact` is
/// `|H_CD^{(p)}|^2 / |H_CD|^2`, which keeps the cross terms between elements. Both sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct NormFraction {
    pub bodies: Vec<usize>,
    pub per_term: Vec<f64>,
    pub exact: Vec<f64>,
}

pub fn norm_fraction(alpha: &[f64], odd: &[DVector<C64>], body: &[usize]) -> NormFraction {
    let max_body = body.iter().copied().max().unwrap_or(0);
    let min_body = body.iter().copied().min().unwrap_or(0);
    let bodies: Vec<usize> = (min_body..=max_body).collect();
    let mut per_term = vec![0.0; bodies.len()];
    let mut exact = vec![0.0; bodies.len()];
    let weight: f64 = alpha.iter().map(|a| a * a).sum();
    let dim = body.len();
    let mut total = DVector::<C64>::zeros(dim);
    for (a, theta) in alpha.iter().zip(odd) {
        for (j, c) in theta.iter().enumerate() {
            per_term[body[j] - min_body] += a * a * c.norm_sqr();
        }
        total.axpy(C64::new(*a, 0.0), theta, C64::new(1.0, 0.0));
    }
    let total_norm = total.norm_squared();
    for (j, c) in total.iter().enumerate() {
        exact[body[j] - min_body] += c.norm_sqr();
    }
    if weight > 0.0 {
        per_term.iter_mut().for_each(|q| *q /= weight);
    }
    if total_norm > 0.0 {
        exact.iter_mut().for_each(|q| *q /= total_norm);
    }
    NormFraction { bodies, per_term, exact }
}

/// Body counts of Pauli-backend chain elements, using the support length of each string.
pub fn pauli_norm_fraction(alpha: &[f64], odd: &[OperatorExpr]) -> Result<NormFraction> {
    use std::collections::BTreeMap;
    let mut index: BTreeMap<PauliString, usize> = BTreeMap::new();
    for op in odd {
        if let Some(p) = op.as_pauli() {
            for (s, _) in p.terms() {
                let next = index.len();
                index.entry(*s).or_insert(next);
            }
        } else {
            return Err(crate::error::CdError::Unsupported { op: "pauli_norm_fraction", backend: op.backend() });
        }
    }
    let mut body = vec![0; index.len()];
    for (s, &j) in &index {
        body[j] = s.support_length();
    }
    let coords: Vec<DVector<C64>> = odd
        .iter()
        .map(|op| {
            let mut v = DVector::<C64>::zeros(index.len());
            for (s, c) in op.as_pauli().expect("checked above").terms() {
                v[index[s]] = *c;
            }
            v
        })
        .collect();
    // Distinct strings are orthogonal with equal norms, so coordinates can be compared directly.
    Ok(norm_fraction(alpha, &coords, &body))
}
