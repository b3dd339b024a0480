//! Small dense helpers shared by several modules.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

use crate::C64;

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// The library routine alone can leave residuals near 1e-8 on moderate sizes, so its
/// eigenvectors are re-orthonormalized by QR and polished with cyclic Jacobi sweeps.
pub fn hermitian_eigen(h: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let is_real = h.iter().all(|c| c.im == 0.0);
    if is_real {
        let (values, vectors) = symmetric_eigen_sorted(&h.map(|c| c.re));
        return (values, vectors.map(|x| C64::new(x, 0.0)));
    }
    let start = SymmetricEigen::new(h.clone()).eigenvectors;
    let (values, vectors) = jacobi_polish(h, start);
    sort_pairs(values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
pub fn symmetric_eigen_sorted(t: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let start = SymmetricEigen::new(t.clone()).eigenvectors;
    let (values, vectors) = jacobi_polish(t, start);
    sort_pairs(values, vectors)
}

fn sort_pairs<T: ComplexField>(values: DVector<f64>, vectors: DMatrix<T>) -> (DVector<f64>, DMatrix<T>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let mut out = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        out.set_column(dst, &vectors.column(src));
    }
    (sorted, out)
}

const JACOBI_MAX_SWEEPS: usize = 30;

/// Diagonalizes `U^dagger H U` by cyclic Jacobi rotations, starting from an approximate
/// eigenbasis `U` that is first made exactly unitary.
fn jacobi_polish<T>(h: &DMatrix<T>, start: DMatrix<T>) -> (DVector<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = h.nrows();
    let mut u = start.qr().q();
    let mut a = u.adjoint() * h * &u;
    let scale = a.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (DVector::zeros(n), DMatrix::identity(n, n));
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].modulus_squared())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = a[(p, q)];
                let gm = g.modulus();
                if gm <= 1e-300 || gm <= 1e-18 * scale {
                    continue;
                }
                let phase = g.unscale(gm);
                let app = a[(p, p)].real();
                let aqq = a[(q, q)].real();
                let theta = (aqq - app) / (2.0 * gm);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let conj_phase = phase.conjugate();
                // Columns: G = D P with D = diag(1, e^{-i phi}) on (p, q).
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)] * conj_phase;
                    a[(k, p)] = akp.scale(c) - akq.scale(s);
                    a[(k, q)] = akp.scale(s) + akq.scale(c);
                    let ukp = u[(k, p)];
                    let ukq = u[(k, q)] * conj_phase;
                    u[(k, p)] = ukp.scale(c) - ukq.scale(s);
                    u[(k, q)] = ukp.scale(s) + ukq.scale(c);
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)] * phase;
                    a[(p, k)] = apk.scale(c) - aqk.scale(s);
                    a[(q, k)] = apk.scale(s) + aqk.scale(c);
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                a[(p, p)] = T::from_real(app - t * gm);
                a[(q, q)] = T::from_real(aqq + t * gm);
            }
        }
    }
    (DVector::from_iterator(n, (0..n).map(|k| a[(k, k)].real())), u)
}

/// Spectral norm bound: largest absolute eigenvalue of a Hermitian matrix.
pub fn hermitian_norm(h: &DMatrix<C64>) -> f64 {
    let (values, _) = hermitian_eigen(h);
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solves `A x = rhs` for symmetric tridiagonal `A` (LDLt without pivoting).
///
/// Returns `None` when a pivot vanishes.
pub fn solve_symmetric_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    assert_eq!(off.len() + 1, n.max(1));
    if n == 0 {
        return Some(Vec::new());
    }
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0];
    for k in 1..n {
        if d[k - 1] == 0.0 || !d[k - 1].is_finite() {
            return None;
        }
        l[k - 1] = off[k - 1] / d[k - 1];
        d[k] = diag[k] - l[k - 1] * off[k - 1];
    }
    if d[n - 1] == 0.0 || !d[n - 1].is_finite() {
        return None;
    }
    let mut y = rhs.to_vec();
    for k in 1..n {
        y[k] -= l[k - 1] * y[k - 1];
    }
    for k in 0..n {
        y[k] /= d[k];
    }
    for k in (0..n.saturating_sub(1)).rev() {
        y[k] -= l[k] * y[k + 1];
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_matches_dense_inverse() {
        let diag = [2.0, 3.0, 4.0, 5.0];
        let off = [1.0, -0.5, 0.25];
        let rhs = [1.0, 0.0, -2.0, 0.5];
        let x = solve_symmetric_tridiagonal(&diag, &off, &rhs).unwrap();
        let mut a = DMatrix::<f64>::zeros(4, 4);
        for k in 0..4 {
            a[(k, k)] = diag[k];
        }
        for k in 0..3 {
            a[(k, k + 1)] = off[k];
            a[(k + 1, k)] = off[k];
        }
        let exact = a.lu().solve(&DVector::from_row_slice(&rhs)).unwrap();
        for k in 0..4 {
            assert!((x[k] - exact[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn hermitian_eigen_is_sorted_and_reconstructs() {
        let i = C64::new(0.0, 1.0);
        let h = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), -i, i, C64::new(-1.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals[0] < vals[1]);
        let diag = DMatrix::from_diagonal(&vals.map(|v| C64::new(v, 0.0)));
        assert!((&vecs * diag * vecs.adjoint() - h).camax() < 1e-14);
    }

    #[test]
    fn eigen_residuals_are_at_roundoff() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [4usize, 16, 64, 100] {
            for _ in 0..6 {
                let a =
                    DMatrix::<C64>::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let h = &a + a.adjoint();
                let (vals, u) = hermitian_eigen(&h);
                let lam = DMatrix::from_diagonal(&vals.map(|v| C64::new(v, 0.0)));
                assert!((&h * &u - &u * lam).camax() < 1e-12 * n as f64);
                assert!((u.adjoint() * &u - DMatrix::identity(n, n)).camax() < 1e-13);
                let r = h.map(|c| c.re);
                let (vals, v) = symmetric_eigen_sorted(&r);
                let lam = DMatrix::from_diagonal(&vals);
                assert!((&r * &v - &v * lam).amax() < 1e-12 * n as f64);
                assert!((v.transpose() * &v - DMatrix::identity(n, n)).amax() < 1e-13);
            }
        }
    }
}
