//! Orthonormal basis declarations and the Liouvillian matrix `L_{mu nu} = (E_mu, [H, E_nu])`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};
use crate::measure::Metric;
use crate::operator::{apply_liouvillian, OperatorExpr};
use crate::pauli::PauliString;
use crate::C64;

/// Relative tolerance for orthonormality of declared bases.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Which half of the block form an element belongs to.
///
/// `Even` elements span the sector of `dH` and the even chain elements;
/// `Odd` elements span the sector reached by one application of `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    Even,
    Odd,
    Untagged,
}

/// Hermitian operators that are orthonormal under a fixed measure.
#[derive(Clone, Debug)]
pub struct BasisDeclaration {
    elements: Vec<OperatorExpr>,
    sectors: Vec<Sector>,
    labels: Vec<String>,
}

impl BasisDeclaration {
    /// Checks Hermiticity and orthonormality under `metric`.
    pub fn new(
        elements: Vec<OperatorExpr>,
        sectors: Vec<Sector>,
        labels: Vec<String>,
        metric: &Metric,
    ) -> Result<Self> {
        let basis = Self::new_unchecked(elements, sectors, labels)?;
        basis.check_orthonormal(metric, ORTHONORMALITY_TOL)?;
        Ok(basis)
    }

    /// For bases whose orthonormality holds by construction.
    pub fn new_unchecked(elements: Vec<OperatorExpr>, sectors: Vec<Sector>, labels: Vec<String>) -> Result<Self> {
        if elements.is_empty() {
            return Err(CdError::EmptyBasis);
        }
        if sectors.len() != elements.len() {
            return Err(CdError::LengthMismatch { expected: elements.len(), got: sectors.len() });
        }
        if labels.len() != elements.len() {
            return Err(CdError::LengthMismatch { expected: elements.len(), got: labels.len() });
        }
        for e in &elements {
            e.check_compatible(&elements[0])?;
            e.ensure_hermitian(1e-12)?;
        }
        Ok(BasisDeclaration { elements, sectors, labels })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[OperatorExpr] {
        &self.elements
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn indices_of(&self, sector: Sector) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.sectors[k] == sector).collect()
    }

    pub fn is_tagged(&self) -> bool {
        self.sectors.iter().all(|s| *s != Sector::Untagged)
    }

    /// Gram matrix under `metric` (sparse string matching for Pauli sums with a uniform metric).
    pub fn gram(&self, metric: &Metric) -> Result<DMatrix<C64>> {
        let n = self.len();
        let mut g = DMatrix::<C64>::zeros(n, n);
        if let Some(entries) = self.sparse_gram(metric)? {
            for ((a, b), v) in entries {
                g[(a, b)] = v;
            }
            return Ok(g);
        }
        let lowered: Vec<OperatorExpr> = self.elements.iter().map(|e| metric.lower(e)).collect::<Result<_>>()?;
        for a in 0..n {
            for b in 0..n {
                g[(a, b)] = metric.pair(&self.elements[a], &lowered[b])?;
            }
        }
        Ok(g)
    }

    /// Nonzero Gram entries when every element is a Pauli sum and the metric is uniform.
    fn sparse_gram(&self, metric: &Metric) -> Result<Option<HashMap<(usize, usize), C64>>> {
        if metric.is_gibbs() || self.elements.iter().any(|e| e.as_pauli().is_none()) {
            return Ok(None);
        }
        let lowered: Vec<OperatorExpr> = self.elements.iter().map(|e| metric.lower(e)).collect::<Result<_>>()?;
        let mut owners: BTreeMap<PauliString, Vec<(usize, C64, C64)>> = BTreeMap::new();
        for (k, (e, l)) in self.elements.iter().zip(&lowered).enumerate() {
            let (p, lp) = (e.as_pauli().expect("checked"), l.as_pauli().expect("same backend"));
            for (s, c) in p.terms() {
                owners.entry(*s).or_default().push((k, *c, lp.coefficient(s)));
            }
        }
        let mut entries: HashMap<(usize, usize), C64> = HashMap::new();
        for list in owners.values() {
            for &(a, ca, _) in list {
                for &(b, _, lb) in list {
                    *entries.entry((a, b)).or_default() += ca.conj() * lb;
                }
            }
        }
        Ok(Some(entries))
    }

    pub fn check_orthonormal(&self, metric: &Metric, tol: f64) -> Result<()> {
        let n = self.len();
        let check = |a: usize, b: usize, v: C64| -> Result<()> {
            let target = if a == b { 1.0 } else { 0.0 };
            let deviation = (v - C64::new(target, 0.0)).norm();
            if deviation > tol {
                return Err(CdError::NotOrthonormal { row: a, col: b, deviation });
            }
            Ok(())
        };
        if let Some(entries) = self.sparse_gram(metric)? {
            for k in 0..n {
                check(k, k, entries.get(&(k, k)).copied().unwrap_or_default())?;
            }
            for (&(a, b), &v) in &entries {
                check(a, b, v)?;
            }
            return Ok(());
        }
        let g = self.gram(metric)?;
        for a in 0..n {
            for b in 0..n {
                check(a, b, g[(a, b)])?;
            }
        }
        Ok(())
    }

    /// Coordinates `(E_mu, op)` of an operator on this basis.
    pub fn coordinates(&self, op: &OperatorExpr, metric: &Metric) -> Result<DVector<C64>> {
        let lowered = metric.lower(op)?;
        let mut out = DVector::<C64>::zeros(self.len());
        for (k, e) in self.elements.iter().enumerate() {
            out[k] = metric.pair(e, &lowered)?;
        }
        Ok(out)
    }

    /// `sum_mu c_mu E_mu` in the backend of the elements.
    pub fn synthesize(&self, coords: &DVector<C64>) -> Result<OperatorExpr> {
        let refs: Vec<&OperatorExpr> = self.elements.iter().collect();
        OperatorExpr::combination(coords.as_slice(), &refs)
    }
}

#[derive(Clone, Debug)]
pub enum MatrixRepr {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix<C64>),
}

/// Index sets of the two sectors when the basis is tagged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockForm {
    pub even: Vec<usize>,
    pub odd: Vec<usize>,
}

/// Matrix of the Liouvillian on an orthonormal basis: Hermitian with purely
/// imaginary entries and zero diagonal.
#[derive(Clone, Debug)]
pub struct LiouvillianMatrix {
    repr: MatrixRepr,
    block: Option<BlockForm>,
}

impl LiouvillianMatrix {
    pub fn from_dense(m: DMatrix<C64>, block: Option<BlockForm>) -> Self {
        LiouvillianMatrix { repr: MatrixRepr::Dense(m), block }
    }

    pub fn from_sparse(m: CsrMatrix<C64>, block: Option<BlockForm>) -> Self {
        LiouvillianMatrix { repr: MatrixRepr::Sparse(m), block }
    }

    /// `L = [[0, M], [M^dagger, 0]]` with even coordinates first.
    pub fn from_block(m: &DMatrix<C64>) -> Self {
        let (dx, dy) = m.shape();
        let mut l = DMatrix::<C64>::zeros(dx + dy, dx + dy);
        l.view_mut((0, dx), (dx, dy)).copy_from(m);
        l.view_mut((dx, 0), (dy, dx)).copy_from(&m.adjoint());
        let block = BlockForm { even: (0..dx).collect(), odd: (dx..dx + dy).collect() };
        LiouvillianMatrix::from_dense(l, Some(block))
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            MatrixRepr::Dense(m) => m.nrows(),
            MatrixRepr::Sparse(m) => m.nrows(),
        }
    }

    pub fn repr(&self) -> &MatrixRepr {
        &self.repr
    }

    pub fn block(&self) -> Option<&BlockForm> {
        self.block.as_ref()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            MatrixRepr::Dense(m) => m.clone(),
            MatrixRepr::Sparse(s) => {
                let mut m = DMatrix::<C64>::zeros(s.nrows(), s.ncols());
                for (r, c, v) in s.triplet_iter() {
                    m[(r, c)] += *v;
                }
                m
            }
        }
    }

    /// The even-by-odd block `M`, if the basis was tagged.
    pub fn m_block(&self) -> Option<DMatrix<C64>> {
        let block = self.block.as_ref()?;
        let full = self.to_dense();
        let mut m = DMatrix::<C64>::zeros(block.even.len(), block.odd.len());
        for (a, &r) in block.even.iter().enumerate() {
            for (b, &c) in block.odd.iter().enumerate() {
                m[(a, b)] = full[(r, c)];
            }
        }
        Some(m)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        match &self.repr {
            MatrixRepr::Dense(m) => m * v,
            MatrixRepr::Sparse(s) => {
                let mut out = DVector::<C64>::zeros(s.nrows());
                for (r, row) in s.row_iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (c, val) in row.col_indices().iter().zip(row.values()) {
                        acc += val * v[*c];
                    }
                    out[r] = acc;
                }
                out
            }
        }
    }

    /// Largest entry magnitude, a cheap bound for the operator scale.
    pub fn max_abs(&self) -> f64 {
        match &self.repr {
            MatrixRepr::Dense(m) => m.camax(),
            MatrixRepr::Sparse(s) => s.values().iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// `(max |L + L^T|, max |L - L^dagger|, max |diag L|)`.
    pub fn symmetry_defects(&self) -> (f64, f64, f64) {
        let l = self.to_dense();
        let anti = (&l + l.transpose()).camax();
        let herm = (&l - l.adjoint()).camax();
        let diag = l.diagonal().camax();
        (anti, herm, diag)
    }
}

/// Builds `L_{mu nu} = (E_mu, [H, E_nu])` on an orthonormal basis.
///
/// Diagonal entries vanish identically and are stored as exact zeros. For a
/// tagged basis, entries inside a sector must vanish; they are checked and the
/// block form is recorded.
pub fn build_liouvillian_matrix(
    h: &OperatorExpr,
    basis: &BasisDeclaration,
    metric: &Metric,
) -> Result<LiouvillianMatrix> {
    basis.check_orthonormal(metric, ORTHONORMALITY_TOL)?;
    let n = basis.len();
    let images: Vec<OperatorExpr> = basis.elements().iter().map(|e| apply_liouvillian(h, e)).collect::<Result<_>>()?;

    let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
    let sparse_path = !metric.is_gibbs() && basis.elements().iter().all(|e| e.as_pauli().is_some());
    if sparse_path {
        let mut owners: BTreeMap<PauliString, Vec<(usize, C64)>> = BTreeMap::new();
        for (k, e) in basis.elements().iter().enumerate() {
            for (s, c) in e.as_pauli().expect("checked").terms() {
                owners.entry(*s).or_default().push((k, *c));
            }
        }
        let scale = metric.lower(&basis.elements()[0])?;
        let ratio = pauli_scale_ratio(&basis.elements()[0], &scale);
        for (nu, img) in images.iter().enumerate() {
            let mut col: BTreeMap<usize, C64> = BTreeMap::new();
            for (s, c) in img.as_pauli().expect("same backend").terms() {
                if let Some(list) = owners.get(s) {
                    for &(mu, cm) in list {
                        *col.entry(mu).or_default() += cm.conj() * c * ratio;
                    }
                }
            }
            for (mu, v) in col {
                if mu != nu && v.norm() > 0.0 {
                    triplets.push((mu, nu, v));
                }
            }
        }
    } else {
        let lowered: Vec<OperatorExpr> = images.iter().map(|x| metric.lower(x)).collect::<Result<_>>()?;
        for nu in 0..n {
            for mu in 0..n {
                if mu == nu {
                    continue;
                }
                let v = metric.pair(&basis.elements()[mu], &lowered[nu])?;
                if v.norm() > 0.0 {
                    triplets.push((mu, nu, v));
                }
            }
        }
    }

    let scale = triplets.iter().map(|t| t.2.norm()).fold(0.0, f64::max);
    let block = if basis.is_tagged() {
        let sectors = basis.sectors();
        for &(mu, nu, v) in &triplets {
            if sectors[mu] == sectors[nu] && v.norm() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(CdError::InvalidParameter(format!(
                    "basis elements {mu} and {nu} share a sector but are coupled by {:e}",
                    v.norm()
                )));
            }
        }
        triplets.retain(|&(mu, nu, _)| sectors[mu] != sectors[nu]);
        Some(BlockForm { even: basis.indices_of(Sector::Even), odd: basis.indices_of(Sector::Odd) })
    } else {
        None
    };

    if n <= 512 {
        let mut m = DMatrix::<C64>::zeros(n, n);
        for (r, c, v) in triplets {
            m[(r, c)] += v;
        }
        Ok(LiouvillianMatrix::from_dense(m, block))
    } else {
        let mut coo = CooMatrix::new(n, n);
        for (r, c, v) in triplets {
            coo.push(r, c, v);
        }
        Ok(LiouvillianMatrix::from_sparse(CsrMatrix::from(&coo), block))
    }
}

/// The uniform metric multiplies Pauli coefficients by a constant; recover it.
fn pauli_scale_ratio(original: &OperatorExpr, lowered: &OperatorExpr) -> C64 {
    let (p, l) = (original.as_pauli().expect("pauli"), lowered.as_pauli().expect("pauli"));
    let (s, c) = p.terms().next().expect("non-empty element");
    l.coefficient(s) / c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;
    use crate::pauli::{Letter, PauliSum};

    fn single(n: usize, site: usize, l: Letter) -> OperatorExpr {
        OperatorExpr::Pauli(PauliSum::from_terms(n, [(PauliString::single(site, l), C64::new(1.0, 0.0))]).unwrap())
    }

    fn spin_basis() -> BasisDeclaration {
        BasisDeclaration::new(
            vec![single(1, 0, Letter::X), single(1, 0, Letter::Y), single(1, 0, Letter::Z)],
            vec![Sector::Untagged; 3],
            vec!["X".into(), "Y".into(), "Z".into()],
            &Metric::uniform(1.0),
        )
        .unwrap()
    }

    #[test]
    fn two_level_l_matrix_is_the_cross_product_form() {
        let (h, n) = (1.7, [0.3f64, -0.5, 0.8]);
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let n = [n[0] / norm, n[1] / norm, n[2] / norm];
        let ham = OperatorExpr::Pauli(
            PauliSum::from_terms(
                1,
                [Letter::X, Letter::Y, Letter::Z]
                    .iter()
                    .zip(n)
                    .map(|(l, c)| (PauliString::single(0, *l), C64::new(0.5 * h * c, 0.0))),
            )
            .unwrap(),
        );
        let basis = spin_basis();
        let metric = Metric::new(&Measure::Uniform { scale: 1.0 }, &ham).unwrap();
        let l = build_liouvillian_matrix(&ham, &basis, &metric).unwrap().to_dense();
        let i = C64::new(0.0, h);
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                C64::default(),
                -i * n[2],
                i * n[1],
                i * n[2],
                C64::default(),
                -i * n[0],
                -i * n[1],
                i * n[0],
                C64::default(),
            ],
        );
        assert!((l - expected).camax() < 1e-14);
    }

    #[test]
    fn zero_hamiltonian_gives_zero_matrix() {
        let ham = OperatorExpr::Pauli(PauliSum::zero(1).unwrap());
        let l = build_liouvillian_matrix(&ham, &spin_basis(), &Metric::uniform(1.0)).unwrap();
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let twice = single(1, 0, Letter::X).scaled(C64::new(2.0, 0.0));
        let err = BasisDeclaration::new(
            vec![twice, single(1, 0, Letter::Z)],
            vec![Sector::Untagged; 2],
            vec!["2X".into(), "Z".into()],
            &Metric::uniform(1.0),
        );
        assert!(matches!(err, Err(CdError::NotOrthonormal { .. })));
    }

    #[test]
    fn sparse_and_dense_gram_paths_agree() {
        let basis = spin_basis();
        let dense: Vec<OperatorExpr> = basis.elements().iter().map(|e| e.to_dense(2).unwrap()).collect();
        let dense_basis =
            BasisDeclaration::new_unchecked(dense, vec![Sector::Untagged; 3], basis.labels().to_vec()).unwrap();
        let g1 = basis.gram(&Metric::uniform(1.0)).unwrap();
        let g2 = dense_basis.gram(&Metric::uniform(1.0)).unwrap();
        assert!((g1 - g2).camax() < 1e-15);
    }

    #[test]
    fn block_constructor_places_m_and_its_adjoint() {
        let i = C64::new(0.0, 1.0);
        let m = DMatrix::from_row_slice(
            3,
            2,
            &[C64::default(), C64::default(), i, C64::default(), C64::default(), i * 2.0],
        );
        let l = LiouvillianMatrix::from_block(&m);
        assert_eq!(l.m_block().unwrap(), m);
        let (anti, herm, diag) = l.symmetry_defects();
        assert_eq!((anti, herm, diag), (0.0, 0.0, 0.0));
    }
}
