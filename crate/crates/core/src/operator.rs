//! Operators in one of three backends and the Liouvillian `[H, .]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisDeclaration;
use crate::error::{CdError, Result};
use crate::pauli::PauliSum;
use crate::C64;

/// Largest Hilbert-space dimension `to_dense` will materialize by default.
pub const DEFAULT_DENSE_CAP: usize = 1 << 14;

/// Coordinates over an orthonormal list of basis operators.
#[derive(Clone, Debug)]
pub struct StructuredOp {
    pub coords: DVector<C64>,
    pub basis: Arc<BasisDeclaration>,
}

#[derive(Clone, Debug)]
pub enum OperatorExpr {
    Pauli(PauliSum),
    Dense(DMatrix<C64>),
    Structured(StructuredOp),
}

impl OperatorExpr {
    pub fn backend(&self) -> &'static str {
        match self {
            OperatorExpr::Pauli(_) => "pauli-sum",
            OperatorExpr::Dense(_) => "dense",
            OperatorExpr::Structured(_) => "structured",
        }
    }

    pub fn structured(coords: DVector<C64>, basis: Arc<BasisDeclaration>) -> Result<Self> {
        if coords.len() != basis.len() {
            return Err(CdError::LengthMismatch { expected: basis.len(), got: coords.len() });
        }
        Ok(OperatorExpr::Structured(StructuredOp { coords, basis }))
    }

    pub fn as_pauli(&self) -> Option<&PauliSum> {
        match self {
            OperatorExpr::Pauli(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_dense(&self) -> Option<&DMatrix<C64>> {
        match self {
            OperatorExpr::Dense(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_structured(&self) -> Option<&StructuredOp> {
        match self {
            OperatorExpr::Structured(s) => Some(s),
            _ => None,
        }
    }

    /// Zero operator with the same backend and shape.
    pub fn zero_like(&self) -> OperatorExpr {
        match self {
            OperatorExpr::Pauli(p) => OperatorExpr::Pauli(PauliSum::zero(p.n_sites()).expect("valid size")),
            OperatorExpr::Dense(m) => OperatorExpr::Dense(DMatrix::zeros(m.nrows(), m.ncols())),
            OperatorExpr::Structured(s) => OperatorExpr::Structured(StructuredOp {
                coords: DVector::zeros(s.coords.len()),
                basis: s.basis.clone(),
            }),
        }
    }

    pub(crate) fn check_compatible(&self, other: &OperatorExpr) -> Result<()> {
        match (self, other) {
            (OperatorExpr::Pauli(a), OperatorExpr::Pauli(b)) => {
                if a.n_sites() != b.n_sites() {
                    return Err(CdError::SiteCountMismatch { left: a.n_sites(), right: b.n_sites() });
                }
            }
            (OperatorExpr::Dense(a), OperatorExpr::Dense(b)) => {
                if a.shape() != b.shape() {
                    return Err(CdError::SiteCountMismatch { left: a.nrows(), right: b.nrows() });
                }
            }
            (OperatorExpr::Structured(a), OperatorExpr::Structured(b)) => {
                if !Arc::ptr_eq(&a.basis, &b.basis) && a.coords.len() != b.coords.len() {
                    return Err(CdError::SiteCountMismatch { left: a.coords.len(), right: b.coords.len() });
                }
            }
            _ => {
                return Err(CdError::BackendMismatch { left: self.backend(), right: other.backend() });
            }
        }
        Ok(())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: C64, x: &OperatorExpr) -> Result<()> {
        self.check_compatible(x)?;
        match (self, x) {
            (OperatorExpr::Pauli(y), OperatorExpr::Pauli(x)) => y.axpy(a, x),
            (OperatorExpr::Dense(y), OperatorExpr::Dense(x)) => {
                y.zip_apply(x, |yy, xx| *yy += a * xx);
                Ok(())
            }
            (OperatorExpr::Structured(y), OperatorExpr::Structured(x)) => {
                y.coords.axpy(a, &x.coords, C64::new(1.0, 0.0));
                Ok(())
            }
            _ => unreachable!("compatibility checked"),
        }
    }

    /// Replaces the operator by its Hermitian or anti-Hermitian part.
    pub fn project_parity(&mut self, hermitian: bool) {
        match self {
            OperatorExpr::Pauli(p) => p.project_parity(hermitian),
            OperatorExpr::Dense(m) => {
                let adj = m.adjoint();
                *m = if hermitian { (&*m + adj) * C64::new(0.5, 0.0) } else { (&*m - adj) * C64::new(0.5, 0.0) };
            }
            OperatorExpr::Structured(s) => {
                s.coords.iter_mut().for_each(|c| {
                    *c = if hermitian { C64::new(c.re, 0.0) } else { C64::new(0.0, c.im) };
                });
            }
        }
    }

    pub fn scale(&mut self, a: C64) {
        match self {
            OperatorExpr::Pauli(p) => p.scale(a),
            OperatorExpr::Dense(m) => *m *= a,
            OperatorExpr::Structured(s) => s.coords *= a,
        }
    }

    pub fn scaled(&self, a: C64) -> OperatorExpr {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Linear combination `sum_k c_k op_k`; `ops` must be non-empty and compatible.
    pub fn combination(coeffs: &[C64], ops: &[&OperatorExpr]) -> Result<OperatorExpr> {
        let first = ops.first().ok_or(CdError::EmptyBasis)?;
        if coeffs.len() != ops.len() {
            return Err(CdError::LengthMismatch { expected: ops.len(), got: coeffs.len() });
        }
        let mut acc = first.zero_like();
        for (c, op) in coeffs.iter().zip(ops) {
            acc.axpy(*c, op)?;
        }
        Ok(acc)
    }

    pub fn adjoint(&self) -> OperatorExpr {
        match self {
            OperatorExpr::Pauli(p) => OperatorExpr::Pauli(p.adjoint()),
            OperatorExpr::Dense(m) => OperatorExpr::Dense(m.adjoint()),
            OperatorExpr::Structured(s) => {
                OperatorExpr::Structured(StructuredOp { coords: s.coords.map(|c| c.conj()), basis: s.basis.clone() })
            }
        }
    }

    /// Relative size of the anti-Hermitian part (0 for Hermitian operators).
    ///
    /// Structured coordinates refer to Hermitian basis elements, so real
    /// coordinates mean Hermitian.
    pub fn hermiticity_deviation(&self) -> f64 {
        match self {
            OperatorExpr::Pauli(p) => p.hermiticity_deviation(),
            OperatorExpr::Dense(m) => relative_deviation(m, &m.adjoint()),
            OperatorExpr::Structured(s) => {
                let max = s.coords.camax();
                if max == 0.0 {
                    0.0
                } else {
                    s.coords.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / max
                }
            }
        }
    }

    /// Relative size of the Hermitian part (0 for anti-Hermitian operators).
    pub fn anti_hermiticity_deviation(&self) -> f64 {
        match self {
            OperatorExpr::Pauli(p) => p.anti_hermiticity_deviation(),
            OperatorExpr::Dense(m) => relative_deviation(m, &(-m.adjoint())),
            OperatorExpr::Structured(s) => {
                let max = s.coords.camax();
                if max == 0.0 {
                    0.0
                } else {
                    s.coords.iter().map(|c| c.re.abs()).fold(0.0, f64::max) / max
                }
            }
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.anti_hermiticity_deviation() <= tol
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol {
            return Err(CdError::Hermiticity { expected: "Hermitian", deviation });
        }
        Ok(())
    }

    /// True when every coefficient or entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        match self {
            OperatorExpr::Pauli(p) => p.is_empty(),
            OperatorExpr::Dense(m) => m.iter().all(|c| *c == C64::new(0.0, 0.0)),
            OperatorExpr::Structured(s) => s.coords.iter().all(|c| *c == C64::new(0.0, 0.0)),
        }
    }

    /// Largest coefficient magnitude (backend-specific scale).
    pub fn max_abs(&self) -> f64 {
        match self {
            OperatorExpr::Pauli(p) => p.max_abs(),
            OperatorExpr::Dense(m) => m.camax(),
            OperatorExpr::Structured(s) => s.coords.camax(),
        }
    }

    /// Dense matrix form, refusing dimensions above `cap`.
    pub fn dense_matrix(&self, cap: usize) -> Result<DMatrix<C64>> {
        match self {
            OperatorExpr::Pauli(p) => p.to_dense(cap),
            OperatorExpr::Dense(m) => {
                if m.nrows() > cap {
                    return Err(CdError::DenseCapExceeded { dim: m.nrows(), cap });
                }
                Ok(m.clone())
            }
            OperatorExpr::Structured(s) => {
                let mut acc: Option<DMatrix<C64>> = None;
                for (c, e) in s.coords.iter().zip(s.basis.elements()) {
                    let m = e.dense_matrix(cap)?;
                    match acc.as_mut() {
                        Some(a) => a.zip_apply(&m, |aa, mm| *aa += c * mm),
                        None => acc = Some(m * *c),
                    }
                }
                acc.ok_or(CdError::EmptyBasis)
            }
        }
    }

    pub fn to_dense(&self, cap: usize) -> Result<OperatorExpr> {
        self.dense_matrix(cap).map(OperatorExpr::Dense)
    }
}

fn relative_deviation(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let scale = a.camax();
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).camax() / scale
}

/// `[H, O]`. Structured operators carry no product rule; use a `LiouvillianMatrix` instead.
pub fn apply_liouvillian(h: &OperatorExpr, o: &OperatorExpr) -> Result<OperatorExpr> {
    h.check_compatible(o)?;
    debug_assert!(h.hermiticity_deviation() < 1e-10, "Liouvillian needs a Hermitian H");
    match (h, o) {
        (OperatorExpr::Pauli(h), OperatorExpr::Pauli(o)) => Ok(OperatorExpr::Pauli(h.commutator(o)?)),
        (OperatorExpr::Dense(h), OperatorExpr::Dense(o)) => Ok(OperatorExpr::Dense(h * o - o * h)),
        _ => Err(CdError::Unsupported { op: "apply_liouvillian", backend: h.backend() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Letter, PauliString};

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn pauli(n: usize, terms: &[(&str, f64)]) -> OperatorExpr {
        OperatorExpr::Pauli(
            PauliSum::from_terms(n, terms.iter().map(|(w, c)| (PauliString::parse(w).unwrap(), C64::new(*c, 0.0))))
                .unwrap(),
        )
    }

    #[test]
    fn commutator_parity_flips_hermiticity() {
        let h = pauli(2, &[("ZI", 0.3), ("XX", 1.1), ("IY", -0.4)]);
        let o = pauli(2, &[("XI", 1.0), ("ZY", 0.5)]);
        let lo = apply_liouvillian(&h, &o).unwrap();
        assert!(lo.is_anti_hermitian(1e-14));
        let llo = apply_liouvillian(&h, &lo).unwrap();
        assert!(llo.is_hermitian(1e-14));
    }

    #[test]
    fn pauli_and_dense_liouvillian_agree() {
        let h = pauli(3, &[("ZZI", 0.7), ("XII", 1.3), ("IYZ", 0.2)]);
        let o = pauli(3, &[("XYZ", 1.0), ("IIZ", -0.5)]);
        let lp = apply_liouvillian(&h, &o).unwrap().dense_matrix(DEFAULT_DENSE_CAP).unwrap();
        let hd = h.to_dense(DEFAULT_DENSE_CAP).unwrap();
        let od = o.to_dense(DEFAULT_DENSE_CAP).unwrap();
        let ld = apply_liouvillian(&hd, &od).unwrap().dense_matrix(DEFAULT_DENSE_CAP).unwrap();
        assert!((lp - ld).camax() < 1e-14);
    }

    #[test]
    fn mismatches_are_errors() {
        let a = pauli(2, &[("ZI", 1.0)]);
        let b = pauli(3, &[("ZII", 1.0)]);
        assert!(matches!(apply_liouvillian(&a, &b), Err(CdError::SiteCountMismatch { .. })));
        let d = OperatorExpr::Dense(DMatrix::identity(4, 4));
        assert!(matches!(apply_liouvillian(&a, &d), Err(CdError::BackendMismatch { .. })));
    }

    #[test]
    fn w1_on_two_sites_matches_kronecker_form() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w1 = OperatorExpr::Pauli(
            PauliSum::from_terms(
                2,
                [
                    (PauliString::from_letters(&[(0, Letter::X), (1, Letter::Y)]), C64::new(s, 0.0)),
                    (PauliString::from_letters(&[(0, Letter::Y), (1, Letter::X)]), C64::new(s, 0.0)),
                ],
            )
            .unwrap(),
        );
        let i = C64::new(0.0, 1.0);
        let z = C64::new(0.0, 0.0);
        let x = DMatrix::from_row_slice(2, 2, &[z, one(), one(), z]);
        let y = DMatrix::from_row_slice(2, 2, &[z, -i, i, z]);
        let oracle = (x.kronecker(&y) + y.kronecker(&x)) * C64::new(s, 0.0);
        assert!((w1.dense_matrix(DEFAULT_DENSE_CAP).unwrap() - oracle).camax() < 1e-15);
    }
}
