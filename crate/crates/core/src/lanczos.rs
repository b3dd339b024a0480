//! Lanczos recursion in operator space.
//!
//! `b_0 O_0 = dH`, `b_1 O_1 = L O_0`, `b_n O_n = L O_{n-1} - b_{n-1} O_{n-2}`,
//! with every new element re-orthogonalized (modified Gram-Schmidt, two
//! passes) against the whole chain. Even elements are Hermitian, odd ones
//! anti-Hermitian, and all `b_n > 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::LiouvillianMatrix;
use crate::error::{CdError, Result};
use crate::measure::{Measure, Metric};
use crate::operator::{apply_liouvillian, OperatorExpr, DEFAULT_DENSE_CAP};
use crate::C64;

/// Residual ratios above this at termination mark the chain as truncated
/// rather than exactly terminated.
pub const TRUNCATION_FLOOR: f64 = 1e-11;

/// A vector space with the Liouvillian and a positive inner product.
///
/// `lower` applies the metric so that `(u, v) = pair(u, lower(v))`; keeping
/// lowered copies lets Gram-Schmidt run at the cost of plain pairings.
pub trait KrylovSpace {
    type Vector: Clone;

    fn liouvillian(&self, v: &Self::Vector) -> Result<Self::Vector>;
    fn lower(&self, v: &Self::Vector) -> Result<Self::Vector>;
    fn pair(&self, u: &Self::Vector, lowered: &Self::Vector) -> Result<C64>;
    fn axpy(&self, y: &mut Self::Vector, a: C64, x: &Self::Vector) -> Result<()>;
    fn scale(&self, v: &mut Self::Vector, a: C64);

    /// Drops roundoff debris; a no-op for dense storage.
    fn compact(&self, _v: &mut Self::Vector) {}

    /// Restores the exact Hermitian (even `n`) or anti-Hermitian (odd `n`) character of
    /// chain element `n`; a no-op where parity is not encoded in the storage.
    fn fix_parity(&self, _v: &mut Self::Vector, _n: usize) {}

    fn inner(&self, u: &Self::Vector, v: &Self::Vector) -> Result<C64> {
        let lv = self.lower(v)?;
        self.pair(u, &lv)
    }
}

/// Operators in the Pauli or dense backend with `L = [H, .]`.
pub struct OperatorSpace {
    h: OperatorExpr,
    metric: Metric,
}

impl OperatorSpace {
    /// Gibbs weights need matrices, so a Pauli `H` is densified in that case.
    pub fn new(h: &OperatorExpr, measure: &Measure) -> Result<Self> {
        let h = match (measure, h) {
            (Measure::Gibbs { .. }, OperatorExpr::Pauli(_)) => h.to_dense(DEFAULT_DENSE_CAP)?,
            _ => h.clone(),
        };
        let metric = Metric::new(measure, &h)?;
        Ok(OperatorSpace { h, metric })
    }

    pub fn hamiltonian(&self) -> &OperatorExpr {
        &self.h
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Brings an operator to the backend this space works in.
    pub fn adapt(&self, op: &OperatorExpr) -> Result<OperatorExpr> {
        match (&self.h, op) {
            (OperatorExpr::Dense(_), OperatorExpr::Pauli(_)) => op.to_dense(DEFAULT_DENSE_CAP),
            _ => Ok(op.clone()),
        }
    }
}

impl KrylovSpace for OperatorSpace {
    type Vector = OperatorExpr;

    fn liouvillian(&self, v: &OperatorExpr) -> Result<OperatorExpr> {
        apply_liouvillian(&self.h, v)
    }

    fn lower(&self, v: &OperatorExpr) -> Result<OperatorExpr> {
        self.metric.lower(v)
    }

    fn pair(&self, u: &OperatorExpr, lowered: &OperatorExpr) -> Result<C64> {
        self.metric.pair(u, lowered)
    }

    fn axpy(&self, y: &mut OperatorExpr, a: C64, x: &OperatorExpr) -> Result<()> {
        y.axpy(a, x)
    }

    fn scale(&self, v: &mut OperatorExpr, a: C64) {
        v.scale(a)
    }

    fn compact(&self, v: &mut OperatorExpr) {
        if let OperatorExpr::Pauli(p) = v {
            p.prune(1e-14);
        }
    }

    fn fix_parity(&self, v: &mut OperatorExpr, n: usize) {
        v.project_parity(n % 2 == 0);
    }
}

/// Coordinates over an orthonormal basis, with `L` given as a matrix.
pub struct MatrixSpace<'a> {
    l: &'a LiouvillianMatrix,
}

impl<'a> MatrixSpace<'a> {
    pub fn new(l: &'a LiouvillianMatrix) -> Self {
        MatrixSpace { l }
    }
}

impl KrylovSpace for MatrixSpace<'_> {
    type Vector = DVector<C64>;

    fn liouvillian(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.l.dim() {
            return Err(CdError::LengthMismatch { expected: self.l.dim(), got: v.len() });
        }
        Ok(self.l.apply(v))
    }

    fn lower(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        Ok(v.clone())
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanczosOptions {
    /// Termination threshold relative to `||L O_{n-1}||`.
    pub tol: f64,
    /// Upper bound on the chain length `d`; hitting it marks the chain truncated.
    pub max_steps: Option<usize>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-9, max_steps: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Output of the recursion: `b_0 .. b_{d-1}` and the orthonormal elements `O_0 .. O_{d-1}`.
#[derive(Clone, Debug)]
pub struct KrylovChain<V> {
    pub b: Vec<f64>,
    pub basis: Vec<V>,
    /// Set when termination was forced by the step cap or by a residual that
    /// was small but not at roundoff level.
    pub truncated: bool,
    /// Residual norm over `||L O_{d-1}||` at the terminating step.
    pub final_residual_ratio: f64,
}

impl<V> KrylovChain<V> {
    pub fn d(&self) -> usize {
        self.b.len()
    }

    pub fn d_a(&self) -> usize {
        self.d() / 2
    }

    pub fn b0(&self) -> f64 {
        self.b[0]
    }

    pub fn parity(&self) -> Parity {
        krylov_dimension_parity(self.d())
    }

    /// `O_n` is Hermitian for even `n`, anti-Hermitian for odd `n`.
    pub fn is_hermitian_element(n: usize) -> bool {
        n % 2 == 0
    }

    pub fn tridiagonal(&self) -> TridiagonalT {
        TridiagonalT::new(self.b[1..].to_vec())
    }
}

pub fn krylov_dimension_parity(d: usize) -> Parity {
    if d % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Real symmetric tridiagonal matrix with zero diagonal and off-diagonal `b_1 .. b_{d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalT {
    off: Vec<f64>,
}

impl TridiagonalT {
    pub fn new(off: Vec<f64>) -> Self {
        TridiagonalT { off }
    }

    pub fn dim(&self) -> usize {
        self.off.len() + 1
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut t = DMatrix::<f64>::zeros(d, d);
        for (k, &b) in self.off.iter().enumerate() {
            t[(k, k + 1)] = b;
            t[(k + 1, k)] = b;
        }
        t
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (k, &b) in self.off.iter().enumerate() {
            out[k] += b * v[k + 1];
            out[k + 1] += b * v[k];
        }
        out
    }
}

/// Runs the recursion from a non-zero start vector, Hermitian for operator spaces.
pub fn run_lanczos<S: KrylovSpace>(
    space: &S,
    start: &S::Vector,
    opts: &LanczosOptions,
) -> Result<KrylovChain<S::Vector>> {
    let b0 = space.inner(start, start)?.re.max(0.0).sqrt();
    if b0 == 0.0 || !b0.is_finite() {
        return Err(CdError::ZeroDerivative);
    }
    let mut o0 = start.clone();
    space.scale(&mut o0, C64::new(1.0 / b0, 0.0));
    let mut lowered = vec![space.lower(&o0)?];
    let mut basis = vec![o0];
    let mut b = vec![b0];
    let mut truncated = false;
    let mut final_ratio = 0.0;

    loop {
        let n = basis.len();
        if opts.max_steps.is_some_and(|cap| n >= cap) {
            truncated = true;
            break;
        }
        let mut w = space.liouvillian(&basis[n - 1])?;
        space.fix_parity(&mut w, n);
        let mut lw = space.lower(&w)?;
        let reference = space.pair(&w, &lw)?.re.max(0.0).sqrt();
        if reference == 0.0 {
            break;
        }
        if n >= 2 {
            let bp = C64::new(-b[n - 1], 0.0);
            space.axpy(&mut w, bp, &basis[n - 2])?;
            space.axpy(&mut lw, bp, &lowered[n - 2])?;
        }
        for pass in 0..2 {
            if pass > 0 {
                // The tracked lowered copy drifts by roundoff of size eps * reference; refresh it
                // once the residual is small so the second pass sees its true projections.
                lw = space.lower(&w)?;
            }
            for k in 0..n {
                let c = space.pair(&basis[k], &lw)?;
                if c != C64::new(0.0, 0.0) {
                    space.axpy(&mut w, -c, &basis[k])?;
                    space.axpy(&mut lw, -c, &lowered[k])?;
                }
            }
        }
        lw = space.lower(&w)?;
        let bn2 = space.pair(&w, &lw)?.re;
        if bn2 < -1e-12 * reference * reference || !bn2.is_finite() {
            return Err(CdError::LanczosBreakdown { step: n, value: bn2 });
        }
        let bn = bn2.max(0.0).sqrt();
        let ratio = bn / reference;
        if ratio <= opts.tol {
            truncated = ratio > TRUNCATION_FLOOR;
            final_ratio = ratio;
            break;
        }
        space.scale(&mut w, C64::new(1.0 / bn, 0.0));
        space.fix_parity(&mut w, n);
        space.compact(&mut w);
        lowered.push(space.lower(&w)?);
        basis.push(w);
        b.push(bn);
    }
    Ok(KrylovChain { b, basis, truncated, final_residual_ratio: final_ratio })
}

/// Chain generated by `dH` under `[H, .]` and the measure `rho(H)`.
pub fn build_krylov_chain(
    h: &OperatorExpr,
    dh: &OperatorExpr,
    measure: &Measure,
    opts: &LanczosOptions,
) -> Result<KrylovChain<OperatorExpr>> {
    if dh.is_zero() {
        return Err(CdError::ZeroDerivative);
    }
    dh.ensure_hermitian(1e-10)?;
    let space = OperatorSpace::new(h, measure)?;
    let start = space.adapt(dh)?;
    run_lanczos(&space, &start, opts)
}

/// Chain from a normalized start vector `theta_0 = |dH> / b_0`; the returned `b_0` is 1.
pub fn build_chain_from_matrix(
    l: &LiouvillianMatrix,
    theta0: &DVector<C64>,
    opts: &LanczosOptions,
) -> Result<KrylovChain<DVector<C64>>> {
    let norm = theta0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(CdError::NotNormalized(norm));
    }
    run_lanczos(&MatrixSpace::new(l), theta0, opts)
}

/// Chain from the unnormalized coordinates of `dH`, keeping the physical `b_0`.
pub fn build_chain_from_coordinates(
    l: &LiouvillianMatrix,
    dh: &DVector<C64>,
    opts: &LanczosOptions,
) -> Result<KrylovChain<DVector<C64>>> {
    run_lanczos(&MatrixSpace::new(l), dh, opts)
}

/// Largest deviation of the chain's Gram matrix from the identity.
pub fn gram_deviation<S: KrylovSpace>(space: &S, chain: &KrylovChain<S::Vector>) -> Result<f64> {
    let lowered: Vec<S::Vector> = chain.basis.iter().map(|v| space.lower(v)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (m, om) in chain.basis.iter().enumerate() {
        for (n, ln) in lowered.iter().enumerate() {
            let target = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((space.pair(om, ln)? - C64::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{PauliString, PauliSum};

    fn pauli(n: usize, terms: &[(&str, f64)]) -> OperatorExpr {
        OperatorExpr::Pauli(
            PauliSum::from_terms(n, terms.iter().map(|(w, c)| (PauliString::parse(w).unwrap(), C64::new(*c, 0.0))))
                .unwrap(),
        )
    }

    #[test]
    fn zero_derivative_is_an_error() {
        let h = pauli(2, &[("ZZ", 1.0)]);
        let dh = pauli(2, &[]);
        let err = build_krylov_chain(&h, &dh, &Measure::default(), &LanczosOptions::default());
        assert_eq!(err.unwrap_err(), CdError::ZeroDerivative);
    }

    #[test]
    fn commuting_derivative_gives_single_element() {
        let h = pauli(2, &[("ZZ", 1.0), ("ZI", 0.4)]);
        let dh = pauli(2, &[("IZ", 0.3)]);
        let chain = build_krylov_chain(&h, &dh, &Measure::default(), &LanczosOptions::default()).unwrap();
        assert_eq!(chain.d(), 1);
        assert!((chain.b0() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_gives_d_one() {
        let l = LiouvillianMatrix::from_dense(DMatrix::zeros(3, 3), None);
        let theta = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::default(), C64::default()]);
        let chain = build_chain_from_matrix(&l, &theta, &LanczosOptions::default()).unwrap();
        assert_eq!(chain.d(), 1);
    }

    #[test]
    fn unnormalized_start_is_rejected() {
        let l = LiouvillianMatrix::from_dense(DMatrix::zeros(2, 2), None);
        let theta = DVector::from_vec(vec![C64::new(2.0, 0.0), C64::default()]);
        assert!(matches!(
            build_chain_from_matrix(&l, &theta, &LanczosOptions::default()),
            Err(CdError::NotNormalized(_))
        ));
    }

    #[test]
    fn chain_is_orthonormal_with_alternating_hermiticity() {
        let h = pauli(3, &[("ZZI", 1.0), ("IZZ", 0.7), ("XII", 0.5), ("IXI", 0.3), ("IIX", 0.9), ("ZII", 0.2)]);
        let dh = pauli(3, &[("XII", 1.0), ("IXI", 1.0), ("IIX", 1.0)]);
        for measure in [Measure::Uniform { scale: 1.0 }, Measure::Gibbs { beta: 0.7 }] {
            let space = OperatorSpace::new(&h, &measure).unwrap();
            let start = space.adapt(&dh).unwrap();
            let chain = run_lanczos(&space, &start, &LanczosOptions::default()).unwrap();
            assert!(chain.d() > 3);
            let dev = gram_deviation(&space, &chain).unwrap();
            assert!(dev < 1e-10, "{measure:?} {dev:e} d={}", chain.d());
            for (n, o) in chain.basis.iter().enumerate() {
                if n % 2 == 0 {
                    assert!(o.is_hermitian(1e-10), "element {n}");
                } else {
                    assert!(o.is_anti_hermitian(1e-10), "element {n}");
                }
            }
            assert!(chain.b.iter().all(|&b| b > 0.0));
            assert!(!chain.truncated, "{measure:?} ratio {:e} d={}", chain.final_residual_ratio, chain.d());
        }
    }

    #[test]
    fn dense_chain_respects_dimension_bound() {
        let h = pauli(2, &[("ZZ", 1.0), ("XI", 0.6), ("IX", 0.35), ("ZI", 0.1)]);
        let dh = pauli(2, &[("XI", 1.0)]);
        let hd = h.to_dense(16).unwrap();
        let dd = dh.to_dense(16).unwrap();
        let chain = build_krylov_chain(&hd, &dd, &Measure::default(), &LanczosOptions::default()).unwrap();
        assert!(chain.d() <= 16 - 4 + 1);
        let pauli_chain = build_krylov_chain(&h, &dh, &Measure::default(), &LanczosOptions::default()).unwrap();
        assert_eq!(chain.d(), pauli_chain.d());
        for (a, b) in chain.b.iter().zip(&pauli_chain.b) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn step_cap_marks_truncation() {
        let h = pauli(3, &[("ZZI", 1.0), ("IZZ", 0.7), ("XII", 0.5), ("IXI", 0.3), ("IIX", 0.9)]);
        let dh = pauli(3, &[("XII", 1.0)]);
        let opts = LanczosOptions { tol: 1e-9, max_steps: Some(3) };
        let chain = build_krylov_chain(&h, &dh, &Measure::default(), &opts).unwrap();
        assert_eq!(chain.d(), 3);
        assert!(chain.truncated);
    }

    #[test]
    fn tridiagonal_apply_matches_dense() {
        let t = TridiagonalT::new(vec![1.0, 2.0, 0.5]);
        let v = [0.3, -1.0, 2.0, 0.7];
        let dense = t.to_dense() * DVector::from_row_slice(&v);
        let fast = t.apply(&v);
        for k in 0..4 {
            assert!((dense[k] - fast[k]).abs() < 1e-15);
        }
    }
}
