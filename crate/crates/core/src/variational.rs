//! CD terms restricted to a finite ansatz span, and the first-order nested-commutator term.
//!
//! For Hermitian ansatz operators `Y_nu`, the span reached from `dH` is spanned by
//! `{dH, i[H, Y_nu]}` on the even side and `{Y_nu}` on the odd side. Running the chain in
//! that joint space and solving for the AGP is the same as minimizing
//! `G[A] = (dH - i[H, A], dH - i[H, A])` over `A = sum_nu a_nu Y_nu`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agp::{expand, AgpExpansion};
use crate::basis::{BasisDeclaration, LiouvillianMatrix};
use crate::error::{CdError, Result};
use crate::lanczos::{build_chain_from_coordinates, KrylovSpace, LanczosOptions, OperatorSpace};
use crate::linalg::symmetric_eigen_sorted;
use crate::measure::Measure;
use crate::operator::{apply_liouvillian, OperatorExpr, DEFAULT_DENSE_CAP};
use crate::C64;

/// Vectors shorter than this fraction of their original norm are treated as already spanned.
const SPAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct TruncatedCd {
    /// `a_nu` in `A = sum_nu a_nu Y_nu`.
    pub coefficients: Vec<f64>,
    pub cd_operator: OperatorExpr,
    /// The expansion in joint coordinates (even elements first, then the ansatz).
    pub expansion: AgpExpansion<DVector<C64>>,
    pub chain_b: Vec<f64>,
    pub m_block: DMatrix<C64>,
    pub even_elements: Vec<OperatorExpr>,
    pub dh_coordinates: DVector<C64>,
    /// Largest relative norm of `dH` or `[H, Y_nu]` left outside the even span.
    pub coverage_defect: f64,
}

/// Truncated CD with the even span generated from `dH` and the images of the ansatz.
pub fn truncated_cd(
    h: &OperatorExpr,
    dh: &OperatorExpr,
    ansatz: &BasisDeclaration,
    measure: &Measure,
    opts: &LanczosOptions,
) -> Result<TruncatedCd> {
    let space = OperatorSpace::new(h, measure)?;
    let y: Vec<OperatorExpr> = ansatz.elements().iter().map(|e| space.adapt(e)).collect::<Result<_>>()?;
    let dh = space.adapt(dh)?;
    let mut candidates = vec![dh.clone()];
    for e in &y {
        candidates.push(space.liouvillian(e)?.scaled(C64::new(0.0, 1.0)));
    }
    let x = orthonormalize(&space, &candidates)?;
    solve_in_span(&space, &dh, x, y, ansatz, opts)
}

/// Truncated CD with a declared even basis, e.g. one taken from a worked model.
pub fn truncated_cd_with_even_basis(
    h: &OperatorExpr,
    dh: &OperatorExpr,
    even: &BasisDeclaration,
    ansatz: &BasisDeclaration,
    measure: &Measure,
    opts: &LanczosOptions,
) -> Result<TruncatedCd> {
    let space = OperatorSpace::new(h, measure)?;
    let y: Vec<OperatorExpr> = ansatz.elements().iter().map(|e| space.adapt(e)).collect::<Result<_>>()?;
    let x: Vec<OperatorExpr> = even.elements().iter().map(|e| space.adapt(e)).collect::<Result<_>>()?;
    let dh = space.adapt(dh)?;
    solve_in_span(&space, &dh, x, y, ansatz, opts)
}

fn orthonormalize(space: &OperatorSpace, candidates: &[OperatorExpr]) -> Result<Vec<OperatorExpr>> {
    let mut out: Vec<OperatorExpr> = Vec::new();
    for c in candidates {
        let original = space.inner(c, c)?.re.max(0.0).sqrt();
        if original == 0.0 {
            continue;
        }
        let mut w = c.clone();
        for _pass in 0..2 {
            for e in &out {
                let proj = space.inner(e, &w)?;
                w.axpy(-proj, e)?;
            }
        }
        let norm = space.inner(&w, &w)?.re.max(0.0).sqrt();
        if norm > SPAN_TOL * original {
            w.scale(C64::new(1.0 / norm, 0.0));
            w.project_parity(true);
            out.push(w);
        }
    }
    if out.is_empty() {
        return Err(CdError::ZeroDerivative);
    }
    Ok(out)
}

fn solve_in_span(
    space: &OperatorSpace,
    dh: &OperatorExpr,
    x: Vec<OperatorExpr>,
    y: Vec<OperatorExpr>,
    ansatz: &BasisDeclaration,
    opts: &LanczosOptions,
) -> Result<TruncatedCd> {
    if y.is_empty() {
        return Err(CdError::EmptyBasis);
    }
    let (dx, dy) = (x.len(), y.len());
    let lowered_x: Vec<OperatorExpr> = x.iter().map(|e| space.lower(e)).collect::<Result<_>>()?;
    let coords_of = |op: &OperatorExpr| -> Result<(DVector<C64>, f64)> {
        let total = space.inner(op, op)?.re.max(0.0);
        let mut c = DVector::<C64>::zeros(dx);
        for (k, lx) in lowered_x.iter().enumerate() {
            // (X_k, op) = conj((op, X_k)) and the pairing takes the lowered right argument.
            c[k] = space.pair(op, lx)?.conj();
        }
        let kept = c.norm_squared();
        let defect = if total > 0.0 { ((total - kept).max(0.0) / total).sqrt() } else { 0.0 };
        Ok((c, defect))
    };
    let (dh_coords, mut coverage) = coords_of(dh)?;
    let mut m = DMatrix::<C64>::zeros(dx, dy);
    for (nu, e) in y.iter().enumerate() {
        let image = space.liouvillian(e)?;
        let (col, defect) = coords_of(&image)?;
        coverage = coverage.max(defect);
        m.set_column(nu, &col);
    }
    if dh_coords.norm() == 0.0 {
        return Err(CdError::ZeroDerivative);
    }
    let l = LiouvillianMatrix::from_block(&m);
    let mut start = DVector::<C64>::zeros(dx + dy);
    start.rows_mut(0, dx).copy_from(&dh_coords);
    let chain = build_chain_from_coordinates(&l, &start, opts)?;
    let expansion = expand(&chain)?;
    let coefficients: Vec<f64> = (0..dy).map(|nu| expansion.cd_operator[dx + nu].re).collect();
    let refs: Vec<&OperatorExpr> = ansatz.elements().iter().collect();
    let coeffs_c: Vec<C64> = coefficients.iter().map(|a| C64::new(*a, 0.0)).collect();
    let cd_operator = OperatorExpr::combination(&coeffs_c, &refs)?;
    Ok(TruncatedCd {
        coefficients,
        cd_operator,
        expansion,
        chain_b: chain.b.clone(),
        m_block: m,
        even_elements: x,
        dh_coordinates: dh_coords,
        coverage_defect: coverage,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresFit {
    pub coefficients: Vec<f64>,
    /// Set when the normal equations were singular and the minimal-norm solution was taken.
    pub rank_deficient: bool,
    pub cost: f64,
}

/// Direct minimizer of `G[A]` over `A = sum_nu a_nu Y_nu` from the normal equations,
/// evaluated on dense matrices.
pub fn least_squares_variational_oracle(
    h: &OperatorExpr,
    dh: &OperatorExpr,
    ansatz: &[OperatorExpr],
    measure: &Measure,
) -> Result<LeastSquaresFit> {
    if ansatz.is_empty() {
        return Err(CdError::EmptyBasis);
    }
    let hd = h.to_dense(DEFAULT_DENSE_CAP)?;
    let space = OperatorSpace::new(&hd, measure)?;
    let dhd = dh.to_dense(DEFAULT_DENSE_CAP)?;
    let images: Vec<OperatorExpr> = ansatz
        .iter()
        .map(|y| Ok(apply_liouvillian(&hd, &y.to_dense(DEFAULT_DENSE_CAP)?)?.scaled(C64::new(0.0, 1.0))))
        .collect::<Result<_>>()?;
    let n = images.len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for a in 0..n {
        for b in 0..n {
            gram[(a, b)] = space.inner(&images[a], &images[b])?.re;
        }
        rhs[a] = space.inner(&images[a], &dhd)?.re;
    }
    let (vals, vecs) = symmetric_eigen_sorted(&gram);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-12 * top;
    let mut coeffs = DVector::<f64>::zeros(n);
    let mut rank_deficient = false;
    for j in 0..n {
        if vals[j] <= cutoff || top == 0.0 {
            rank_deficient = true;
            continue;
        }
        let u = vecs.column(j);
        coeffs += u * (u.dot(&rhs) / vals[j]);
    }
    let coefficients: Vec<f64> = coeffs.iter().copied().collect();
    let a = combine_real(&coefficients, ansatz)?;
    let cost = variational_cost(&hd, &dhd, &a.to_dense(DEFAULT_DENSE_CAP)?, measure)?;
    Ok(LeastSquaresFit { coefficients, rank_deficient, cost })
}

fn combine_real(coefficients: &[f64], ops: &[OperatorExpr]) -> Result<OperatorExpr> {
    let c: Vec<C64> = coefficients.iter().map(|a| C64::new(*a, 0.0)).collect();
    let refs: Vec<&OperatorExpr> = ops.iter().collect();
    OperatorExpr::combination(&c, &refs)
}

/// `G[A] = (dH - i[H, A], dH - i[H, A])`.
pub fn variational_cost(h: &OperatorExpr, dh: &OperatorExpr, a: &OperatorExpr, measure: &Measure) -> Result<f64> {
    let space = OperatorSpace::new(h, measure)?;
    let dh = space.adapt(dh)?;
    let a = space.adapt(a)?;
    let mut r = dh.clone();
    r.axpy(C64::new(0.0, -1.0), &space.liouvillian(&a)?)?;
    Ok(space.inner(&r, &r)?.re)
}

/// `A = i alpha_nc [H, dH]` with `alpha_nc = -([H,dH], [H,dH]) / ([H,[H,dH]], [H,[H,dH]])`.
#[derive(Clone, Debug)]
pub struct NestedCommutatorCd {
    pub alpha_nc: f64,
    /// The same term in chain normalization, `alpha_1 = alpha_nc b_1`.
    pub alpha1: f64,
    pub b0: f64,
    pub cd_operator: OperatorExpr,
}

pub fn first_order_nc_cd(h: &OperatorExpr, dh: &OperatorExpr, measure: &Measure) -> Result<NestedCommutatorCd> {
    let space = OperatorSpace::new(h, measure)?;
    let dh = space.adapt(dh)?;
    let b0 = space.inner(&dh, &dh)?.re.max(0.0).sqrt();
    if b0 == 0.0 {
        return Err(CdError::ZeroDerivative);
    }
    let l1 = space.liouvillian(&dh)?;
    let l2 = space.liouvillian(&l1)?;
    let n1 = space.inner(&l1, &l1)?.re;
    let n2 = space.inner(&l2, &l2)?.re;
    if n1 <= 0.0 || n2 <= 0.0 {
        return Err(CdError::Singular("the commutator of H with dH vanishes".into()));
    }
    let alpha_nc = -n1 / n2;
    let b1 = n1.sqrt() / b0;
    let mut cd_operator = l1.scaled(C64::new(0.0, alpha_nc));
    cd_operator.project_parity(true);
    Ok(NestedCommutatorCd { alpha_nc, alpha1: alpha_nc * b1, b0, cd_operator })
}
