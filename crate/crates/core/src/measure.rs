//! The weight `rho(H)` of the operator inner product
//! `(X, Y) = 1/2 Tr[rho (X^dagger Y + Y X^dagger)]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};
use crate::linalg::hermitian_eigen;
use crate::operator::{OperatorExpr, DEFAULT_DENSE_CAP};
use crate::C64;

/// `Uniform { scale }` is `rho = scale / dim`, so `scale = 1` is the normalized trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Measure {
    Uniform { scale: f64 },
    Gibbs { beta: f64 },
}

impl Default for Measure {
    fn default() -> Self {
        Measure::Uniform { scale: 1.0 }
    }
}

impl Measure {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Measure::Uniform { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(CdError::InvalidMeasure(format!("uniform scale must be positive, got {scale}")))
            }
            Measure::Gibbs { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                Err(CdError::InvalidMeasure(format!("inverse temperature must be non-negative, got {beta}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
enum MetricKind {
    Uniform { scale: f64 },
    Gibbs { rho: DMatrix<C64> },
    Euclidean,
}

/// A measure specialised to one Hamiltonian, ready to evaluate inner products.
///
/// For Gibbs weights only the dense backend is accepted directly; Pauli sums
/// are converted on the fly in [`inner_product`].
#[derive(Clone, Debug)]
pub struct Metric {
    kind: MetricKind,
}

impl Metric {
    pub fn new(measure: &Measure, h: &OperatorExpr) -> Result<Self> {
        measure.validate()?;
        let kind = match *measure {
            Measure::Uniform { scale } => {
                if let OperatorExpr::Structured(_) = h {
                    MetricKind::Euclidean
                } else {
                    MetricKind::Uniform { scale }
                }
            }
            Measure::Gibbs { beta } => {
                let hd = h.dense_matrix(DEFAULT_DENSE_CAP)?;
                MetricKind::Gibbs { rho: gibbs_state(&hd, beta) }
            }
        };
        Ok(Metric { kind })
    }

    /// Plain coordinate dot product, for coordinates over an orthonormal basis.
    pub fn euclidean() -> Self {
        Metric { kind: MetricKind::Euclidean }
    }

    pub fn uniform(scale: f64) -> Self {
        Metric { kind: MetricKind::Uniform { scale } }
    }

    pub fn is_gibbs(&self) -> bool {
        matches!(self.kind, MetricKind::Gibbs { .. })
    }

    pub fn gibbs_density(&self) -> Option<&DMatrix<C64>> {
        match &self.kind {
            MetricKind::Gibbs { rho } => Some(rho),
            _ => None,
        }
    }

    /// The metric-weighted copy `g(v)` with `(u, v) = pair(u, g(v))`.
    pub fn lower(&self, v: &OperatorExpr) -> Result<OperatorExpr> {
        match (&self.kind, v) {
            (MetricKind::Uniform { scale }, OperatorExpr::Pauli(p)) => {
                Ok(OperatorExpr::Pauli(p.scaled(C64::new(*scale, 0.0))))
            }
            (MetricKind::Uniform { scale }, OperatorExpr::Dense(m)) => {
                Ok(OperatorExpr::Dense(m * C64::new(scale / m.nrows() as f64, 0.0)))
            }
            (MetricKind::Gibbs { rho }, OperatorExpr::Dense(m)) => {
                Ok(OperatorExpr::Dense((rho * m + m * rho) * C64::new(0.5, 0.0)))
            }
            (MetricKind::Gibbs { .. }, OperatorExpr::Pauli(_)) => self.lower(&v.to_dense(DEFAULT_DENSE_CAP)?),
            (_, OperatorExpr::Structured(_)) | (MetricKind::Euclidean, _) => Ok(v.clone()),
        }
    }

    /// Sesquilinear pairing of `u` with an already lowered vector.
    pub fn pair(&self, u: &OperatorExpr, lowered: &OperatorExpr) -> Result<C64> {
        match (u, lowered) {
            (OperatorExpr::Pauli(a), OperatorExpr::Pauli(b)) => a.normalized_hs_inner(b),
            (OperatorExpr::Dense(a), OperatorExpr::Dense(b)) => {
                if a.shape() != b.shape() {
                    return Err(CdError::SiteCountMismatch { left: a.nrows(), right: b.nrows() });
                }
                Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
            }
            (OperatorExpr::Pauli(_), OperatorExpr::Dense(_)) => self.pair(&u.to_dense(DEFAULT_DENSE_CAP)?, lowered),
            (OperatorExpr::Structured(a), OperatorExpr::Structured(b)) => {
                if a.coords.len() != b.coords.len() {
                    return Err(CdError::LengthMismatch { expected: a.coords.len(), got: b.coords.len() });
                }
                Ok(a.coords.dotc(&b.coords))
            }
            _ => Err(CdError::BackendMismatch { left: u.backend(), right: lowered.backend() }),
        }
    }

    pub fn inner(&self, x: &OperatorExpr, y: &OperatorExpr) -> Result<C64> {
        x.check_compatible(y)?;
        let ly = self.lower(y)?;
        self.pair(x, &ly)
    }

    pub fn norm(&self, x: &OperatorExpr) -> Result<f64> {
        Ok(self.inner(x, x)?.re.max(0.0).sqrt())
    }
}

/// `(X, Y)` under a prepared metric.
pub fn inner_product(x: &OperatorExpr, y: &OperatorExpr, metric: &Metric) -> Result<C64> {
    metric.inner(x, y)
}

/// `e^{-beta H} / Z` from a dense eigen-decomposition.
pub fn gibbs_state(h: &DMatrix<C64>, beta: f64) -> DMatrix<C64> {
    let (values, vectors) = hermitian_eigen(h);
    let weights = gibbs_weights(values.as_slice(), beta);
    let w = DMatrix::from_diagonal(&DVector::from_iterator(weights.len(), weights.iter().map(|&x| C64::new(x, 0.0))));
    &vectors * w * vectors.adjoint()
}

/// Normalized Boltzmann weights of a spectrum, shifted by its minimum for stability.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::apply_liouvillian;
    use crate::pauli::{PauliString, PauliSum};
    use proptest::prelude::*;

    fn pauli(n: usize, terms: &[(&str, f64)]) -> OperatorExpr {
        OperatorExpr::Pauli(
            PauliSum::from_terms(n, terms.iter().map(|(w, c)| (PauliString::parse(w).unwrap(), C64::new(*c, 0.0))))
                .unwrap(),
        )
    }

    fn random_pauli(n: usize, coeffs: &[f64]) -> OperatorExpr {
        let words = ["XIZ", "ZZI", "IYY", "XXX", "ZIZ", "YXI", "IIX", "ZYX"];
        let terms: Vec<(&str, f64)> = words.iter().zip(coeffs).map(|(w, c)| (&w[..n], *c)).collect();
        pauli(n, &terms)
    }

    #[test]
    fn normalized_string_has_unit_norm() {
        let x1 = pauli(3, &[("XII", 1.0)]);
        let metric = Metric::new(&Measure::Uniform { scale: 1.0 }, &x1).unwrap();
        assert_eq!(inner_product(&x1, &x1, &metric).unwrap(), C64::new(1.0, 0.0));
        let z1 = pauli(3, &[("ZII", 1.0)]);
        assert_eq!(inner_product(&z1, &x1, &metric).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn invalid_measures_are_rejected() {
        assert!(Measure::Uniform { scale: 0.0 }.validate().is_err());
        assert!(Measure::Gibbs { beta: -1.0 }.validate().is_err());
        assert!(Measure::Gibbs { beta: 0.0 }.validate().is_ok());
    }

    #[test]
    fn gibbs_at_zero_beta_is_uniform() {
        let h = random_pauli(3, &[0.3, -1.0, 0.5, 0.2, 0.9, -0.1, 0.4, 0.7]);
        let x = random_pauli(3, &[1.0, 0.0, 0.5, -0.2, 0.1, 0.0, 0.3, 0.2]);
        let y = random_pauli(3, &[0.2, 0.4, -0.5, 0.1, 0.3, 0.6, 0.0, -0.2]);
        let g = Metric::new(&Measure::Gibbs { beta: 0.0 }, &h).unwrap();
        let u = Metric::new(&Measure::Uniform { scale: 1.0 }, &h).unwrap();
        assert!((g.inner(&x, &y).unwrap() - u.inner(&x, &y).unwrap()).norm() < 1e-13);
    }

    proptest! {
        #[test]
        fn liouvillian_is_orthogonal_and_self_adjoint(
            hc in prop::collection::vec(-1.0f64..1.0, 8),
            xc in prop::collection::vec(-1.0f64..1.0, 8),
            yc in prop::collection::vec(-1.0f64..1.0, 8),
            beta in 0.0f64..2.0,
        ) {
            let h = random_pauli(3, &hc);
            let x = random_pauli(3, &xc);
            let y = random_pauli(3, &yc);
            let lx = apply_liouvillian(&h, &x).unwrap();
            let ly = apply_liouvillian(&h, &y).unwrap();
            for measure in [Measure::Uniform { scale: 1.0 }, Measure::Gibbs { beta }] {
                let m = Metric::new(&measure, &h).unwrap();
                prop_assert!(m.inner(&x, &lx).unwrap().norm() < 1e-12);
                let lhs = m.inner(&x, &ly).unwrap().conj();
                let rhs = m.inner(&y, &lx).unwrap();
                prop_assert!((lhs - rhs).norm() < 1e-12, "{lhs} {rhs}");
            }
        }

        #[test]
        fn pauli_and_dense_inner_products_agree(
            xc in prop::collection::vec(-1.0f64..1.0, 8),
            yc in prop::collection::vec(-1.0f64..1.0, 8),
            scale in 0.1f64..3.0,
        ) {
            let x = random_pauli(3, &xc);
            let y = random_pauli(3, &yc);
            let m = Metric::uniform(scale);
            let xd = x.to_dense(64).unwrap();
            let yd = y.to_dense(64).unwrap();
            prop_assert!((m.inner(&x, &y).unwrap() - m.inner(&xd, &yd).unwrap()).norm() < 1e-12);
        }
    }
}
