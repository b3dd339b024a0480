//! Expansion coefficients of the adiabatic gauge potential on the odd chain
//! elements, `A = i b_0 sum_k alpha_k O_{2k-1}`, and the spectral oracle.
//!
//! In chain coordinates the defining equation reads `r = e_0 + T a` with
//! `a_{2k-1} = alpha_k`. For even `d`, `r = 0`. For odd `d`, `r` is the
//! projection of `e_0` on the zero mode of `T`, which selects the
//! minimal-norm solution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};
use crate::lanczos::{KrylovChain, Parity, TridiagonalT};
use crate::linalg::{hermitian_eigen, hermitian_norm, solve_symmetric_tridiagonal, symmetric_eigen_sorted};
use crate::operator::OperatorExpr;
use crate::wavefunction::{chain_zero_mode, zero_mode};
use crate::C64;

/// Level pairs closer than this (relative to `||H||`) count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Couplings above this (relative to `||dH||`) between degenerate levels are fatal.
pub const COUPLING_TOL: f64 = 1e-8;

fn check_positive(b: &[f64]) -> Result<()> {
    if let Some((k, v)) = b.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(CdError::InvalidParameter(format!("Lanczos coefficient b_{k} = {v} is not positive")));
    }
    Ok(())
}

/// Even `d`: `alpha_1 = -1/b_1`, `alpha_{k+1} = -(b_{2k}/b_{2k+1}) alpha_k`.
///
/// `b` holds `b_0 .. b_{d-1}`; `b_0` is not used.
pub fn solve_alpha_even(b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    if d % 2 != 0 {
        return Err(CdError::WrongRoute("even-d recurrence called with odd d"));
    }
    check_positive(b)?;
    let d_a = d / 2;
    let mut alpha = Vec::with_capacity(d_a);
    alpha.push(-1.0 / b[1]);
    for k in 1..d_a {
        let prev = alpha[k - 1];
        alpha.push(-(b[2 * k] / b[2 * k + 1]) * prev);
    }
    Ok(alpha)
}

/// Odd `d`: the `d_A x d_A` tridiagonal system with diagonal `b_{2k-1}^2 + b_{2k}^2`,
/// off-diagonal `b_{2k} b_{2k+1}` and right-hand side `(-b_1, 0, ..)`.
pub fn solve_alpha_odd_tridiagonal(b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    if d % 2 == 0 {
        return Err(CdError::WrongRoute("tridiagonal system called with even d"));
    }
    check_positive(b)?;
    let d_a = d / 2;
    if d_a == 0 {
        return Ok(Vec::new());
    }
    let diag: Vec<f64> = (1..=d_a).map(|k| b[2 * k - 1].powi(2) + b[2 * k].powi(2)).collect();
    let off: Vec<f64> = (1..d_a).map(|k| b[2 * k] * b[2 * k + 1]).collect();
    let mut rhs = vec![0.0; d_a];
    rhs[0] = -b[1];
    solve_symmetric_tridiagonal(&diag, &off, &rhs)
        .ok_or_else(|| CdError::Singular("odd-d coefficient system has a vanishing pivot".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroModeSolution {
    pub alpha: Vec<f64>,
    /// Normalized null vector of the B-matrix, `(1, 0, b_1/b_2, 0, b_1 b_3/(b_2 b_4), ..)` up to scale.
    pub phi: Vec<f64>,
}

/// Odd `d` via the zero mode:
/// `alpha_1 = (phi_0^2 - 1)/b_1`,
/// `alpha_{k+1} = -(b_{2k}/b_{2k+1}) alpha_k + (-1)^k phi_{2k} phi_0 / b_{2k+1}`.
pub fn solve_alpha_odd_zero_mode(b: &[f64]) -> Result<ZeroModeSolution> {
    let d = b.len();
    if d % 2 == 0 {
        return Err(CdError::WrongRoute("zero-mode route called with even d"));
    }
    check_positive(b)?;
    let phi = zero_mode(b)?;
    let d_a = d / 2;
    let mut alpha = Vec::with_capacity(d_a);
    if d_a > 0 {
        alpha.push((phi[0] * phi[0] - 1.0) / b[1]);
    }
    for k in 1..d_a {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let prev = alpha[k - 1];
        alpha.push(-(b[2 * k] / b[2 * k + 1]) * prev + sign * phi[2 * k] * phi[0] / b[2 * k + 1]);
    }
    Ok(ZeroModeSolution { alpha, phi })
}

/// Default route for either parity. For odd `d` the tridiagonal solve is used; the
/// zero-mode recursion runs forwards and loses accuracy on chains with tiny coefficients.
pub fn solve_alpha(b: &[f64]) -> Result<Vec<f64>> {
    match crate::lanczos::krylov_dimension_parity(b.len()) {
        Parity::Even => solve_alpha_even(b),
        Parity::Odd => solve_alpha_odd_tridiagonal(b),
    }
}

/// `r = e_0 + T a` for the coefficients `alpha` in chain coordinates.
pub fn chain_residual(b: &[f64], alpha: &[f64]) -> Vec<f64> {
    let d = b.len();
    let mut a = vec![0.0; d];
    for (k, al) in alpha.iter().enumerate() {
        a[2 * k + 1] = *al;
    }
    let t = TridiagonalT::new(b[1..].to_vec());
    let mut r = t.apply(&a);
    r[0] += 1.0;
    r
}

/// Combination operations a chain element needs for assembly.
pub trait ChainVector: Clone {
    fn zeroed(&self) -> Self;
    fn add_scaled(&mut self, a: C64, x: &Self) -> Result<()>;
}

impl ChainVector for OperatorExpr {
    fn zeroed(&self) -> Self {
        self.zero_like()
    }

    fn add_scaled(&mut self, a: C64, x: &Self) -> Result<()> {
        self.axpy(a, x)
    }
}

impl ChainVector for DVector<C64> {
    fn zeroed(&self) -> Self {
        DVector::zeros(self.len())
    }

    fn add_scaled(&mut self, a: C64, x: &Self) -> Result<()> {
        if self.len() != x.len() {
            return Err(CdError::LengthMismatch { expected: self.len(), got: x.len() });
        }
        self.axpy(a, x, C64::new(1.0, 0.0));
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AgpExpansion<V> {
    pub d_a: usize,
    pub alpha: Vec<f64>,
    pub b0: f64,
    /// `i b_0 sum_k alpha_k O_{2k-1}`; Hermitian.
    pub cd_operator: V,
}

impl<V> AgpExpansion<V> {
    /// `(-1)^{k-1} b_0 alpha_k`, the coefficient form used for string operators.
    pub fn signed_coefficients(&self) -> Vec<f64> {
        self.alpha.iter().enumerate().map(|(k, a)| if k % 2 == 0 { self.b0 * a } else { -self.b0 * a }).collect()
    }
}

/// Serializable summary of an expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub d: usize,
    pub d_a: usize,
    pub b0: f64,
    pub alpha: Vec<f64>,
    pub signed: Vec<f64>,
}

pub fn assemble_cd<V: ChainVector>(chain: &KrylovChain<V>, alpha: &[f64]) -> Result<AgpExpansion<V>> {
    let d_a = chain.d_a();
    if alpha.len() != d_a {
        return Err(CdError::LengthMismatch { expected: d_a, got: alpha.len() });
    }
    let b0 = chain.b0();
    let mut op = chain.basis[0].zeroed();
    for (k, a) in alpha.iter().enumerate() {
        op.add_scaled(C64::new(0.0, b0 * a), &chain.basis[2 * k + 1])?;
    }
    Ok(AgpExpansion { d_a, alpha: alpha.to_vec(), b0, cd_operator: op })
}

/// Solves for the coefficients with the default route and assembles.
pub fn expand<V: ChainVector>(chain: &KrylovChain<V>) -> Result<AgpExpansion<V>> {
    let alpha = if chain.d() < 2 { Vec::new() } else { solve_alpha(&chain.b)? };
    assemble_cd(chain, &alpha)
}

/// `A_{mn} = i <m|dH|n> / (e_n - e_m)` in the eigenbasis of `H`; a coupling between
/// degenerate levels is an error.
pub fn spectral_agp_oracle(h: &DMatrix<C64>, dh: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    spectral_agp_impl(h, dh, true)
}

/// As [`spectral_agp_oracle`], but degenerate blocks are left at zero whatever `dH` does
/// there. This is the operator the Krylov expansion produces, since zero-frequency parts of
/// `dH` never enter the odd chain elements.
pub fn spectral_agp(h: &DMatrix<C64>, dh: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    spectral_agp_impl(h, dh, false)
}

fn spectral_agp_impl(h: &DMatrix<C64>, dh: &DMatrix<C64>, strict: bool) -> Result<DMatrix<C64>> {
    if h.shape() != dh.shape() {
        return Err(CdError::SiteCountMismatch { left: h.nrows(), right: dh.nrows() });
    }
    let dh_norm = if strict { hermitian_norm(dh) } else { 0.0 };
    let is_real = |m: &DMatrix<C64>| m.iter().all(|c| c.im == 0.0);
    if is_real(h) && is_real(dh) {
        // Real symmetric inputs: A = i U W U^T with W real, at a quarter of the cost.
        let (energies, u) = symmetric_eigen_sorted(&h.map(|c| c.re));
        let d = u.transpose() * dh.map(|c| c.re) * &u;
        let w = divide_by_gaps(energies.as_slice(), &d, |x| x.abs(), dh_norm, strict)?;
        return Ok((&u * w * u.transpose()).map(|x| C64::new(0.0, x)));
    }
    let (energies, u) = hermitian_eigen(h);
    let d = u.adjoint() * dh * &u;
    let w = divide_by_gaps(energies.as_slice(), &d, |x| x.norm(), dh_norm, strict)?;
    Ok((&u * w * u.adjoint()) * C64::new(0.0, 1.0))
}

/// `W_{mk} = D_{mk} / (e_k - e_m)`, zero on degenerate pairs.
fn divide_by_gaps<T>(
    energies: &[f64],
    d: &DMatrix<T>,
    modulus: impl Fn(&T) -> f64,
    dh_norm: f64,
    strict: bool,
) -> Result<DMatrix<T>>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let h_norm = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let n = energies.len();
    let mut w = DMatrix::<T>::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            if m == k {
                continue;
            }
            let gap = energies[k] - energies[m];
            if gap.abs() < DEGENERACY_TOL * h_norm {
                let coupling = modulus(&d[(m, k)]);
                if strict && coupling > COUPLING_TOL * dh_norm {
                    return Err(CdError::DegenerateCoupling { m, n: k, gap, coupling });
                }
                continue;
            }
            w[(m, k)] = d[(m, k)].unscale(gap);
        }
    }
    Ok(w)
}

/// `(A, A) = b_0^2 sum_k alpha_k^2`, checked against `b_0^2 <0|(QTQ)^{-2}|0>` to 1e-9.
pub fn agp_norm(b: &[f64], alpha: &[f64]) -> Result<f64> {
    let b0 = b[0];
    let direct = b0 * b0 * alpha.iter().map(|a| a * a).sum::<f64>();
    if b.len() < 2 {
        return Ok(direct);
    }
    let resolvent = b0 * b0 * resolvent_norm(b)?;
    let scale = direct.abs().max(resolvent.abs()).max(f64::MIN_POSITIVE);
    if (direct - resolvent).abs() > 1e-9 * scale {
        return Err(CdError::NormIdentity { direct, resolvent });
    }
    Ok(direct)
}

/// `<0|(QTQ)^{-2}|0>`, from the bordered system `[[T, phi], [phi^T, 0]] (x, mu) = (e_0, 0)`
/// for odd `d` and from `T x = e_0` for even `d`.
pub fn resolvent_norm(b: &[f64]) -> Result<f64> {
    let d = b.len();
    let t = TridiagonalT::new(b[1..].to_vec()).to_dense();
    let x = if d % 2 == 0 {
        let mut rhs = DVector::<f64>::zeros(d);
        rhs[0] = 1.0;
        t.lu().solve(&rhs).ok_or_else(|| CdError::Singular("T is singular for even d".into()))?
    } else {
        let phi_t = chain_zero_mode(b)?;
        let mut big = DMatrix::<f64>::zeros(d + 1, d + 1);
        big.view_mut((0, 0), (d, d)).copy_from(&t);
        for (n, p) in phi_t.iter().enumerate() {
            big[(n, d)] = *p;
            big[(d, n)] = *p;
        }
        let mut rhs = DVector::<f64>::zeros(d + 1);
        rhs[0] = 1.0;
        let sol = big.lu().solve(&rhs).ok_or_else(|| CdError::Singular("bordered system".into()))?;
        sol.rows(0, d).into_owned()
    };
    Ok(x.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_recurrence_small_cases() {
        assert_eq!(solve_alpha_even(&[1.0, 2.0]).unwrap(), vec![-0.5]);
        let alpha = solve_alpha_even(&[1.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(alpha, vec![-1.0, 0.5]);
        assert!(chain_residual(&[1.0, 1.0, 2.0, 4.0], &alpha).iter().all(|r| r.abs() < 1e-15));
        assert!(solve_alpha_even(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn odd_two_by_two_against_explicit_inverse() {
        // [[2, 1], [1, 2]] alpha = (-1, 0): inverse is [[2, -1], [-1, 2]] / 3.
        let alpha = solve_alpha_odd_tridiagonal(&[1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((alpha[0] + 2.0 / 3.0).abs() < 1e-15);
        assert!((alpha[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn odd_three_matches_closed_form() {
        let (b1, b2) = (0.7, 1.9);
        let alpha = solve_alpha_odd_tridiagonal(&[1.0, b1, b2]).unwrap();
        assert!((alpha[0] + b1 / (b1 * b1 + b2 * b2)).abs() < 1e-15);
        let zm = solve_alpha_odd_zero_mode(&[1.0, 1.0, 1.0]).unwrap();
        assert!((zm.alpha[0] + 0.5).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((zm.phi[0] - s).abs() < 1e-15 && zm.phi[1] == 0.0 && (zm.phi[2] - s).abs() < 1e-15);
    }

    #[test]
    fn norm_of_three_chain() {
        let (b0, b1, b2) = (1.3, 0.7, 1.9);
        let b = [b0, b1, b2];
        let alpha = solve_alpha(&b).unwrap();
        let expected = b0 * b0 * b1 * b1 / (b1 * b1 + b2 * b2).powi(2);
        assert!((agp_norm(&b, &alpha).unwrap() - expected).abs() < 1e-14);
        assert_eq!(agp_norm(&[1.0], &[]).unwrap(), 0.0);
    }

    #[test]
    fn trivial_spectral_cases() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]));
        let dh = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(0.3, 0.0), C64::new(-0.1, 0.0)]));
        assert_eq!(spectral_agp_oracle(&h, &dh).unwrap().camax(), 0.0);
        let degenerate = DMatrix::<C64>::identity(2, 2);
        let mut coupling = DMatrix::<C64>::zeros(2, 2);
        coupling[(0, 1)] = C64::new(1.0, 0.0);
        coupling[(1, 0)] = C64::new(1.0, 0.0);
        assert!(matches!(spectral_agp_oracle(&degenerate, &coupling), Err(CdError::DegenerateCoupling { .. })));
    }

    fn positive_b(max_d: usize) -> impl Strategy<Value = Vec<f64>> {
        (1usize..=max_d / 2).prop_flat_map(|d_a| prop::collection::vec(0.3f64..3.0, 2 * d_a + 1))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn odd_routes_agree(b in positive_b(41)) {
            let tri = solve_alpha_odd_tridiagonal(&b).unwrap();
            let zm = solve_alpha_odd_zero_mode(&b).unwrap();
            let scale = tri.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            for (x, y) in tri.iter().zip(&zm.alpha) {
                prop_assert!((x - y).abs() <= 1e-10 * scale.max(1.0));
            }
            let r = chain_residual(&b, &tri);
            let t = TridiagonalT::new(b[1..].to_vec());
            let tr = t.apply(&r);
            prop_assert!(tr.iter().all(|v| v.abs() < 1e-10));
        }

        #[test]
        fn norm_identity_holds(b in positive_b(41)) {
            let alpha = solve_alpha(&b).unwrap();
            prop_assert!(agp_norm(&b, &alpha).is_ok());
        }
    }
}
