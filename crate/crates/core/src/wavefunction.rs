//! Operator wave function in fictitious time `s`: `d phi / ds = B phi`, `phi(0) = e_0`,
//! with `B` carrying `-b_n` on the superdiagonal and `+b_n` on the subdiagonal.
//!
//! `iB = D^dagger T D` with `D = diag((-i)^n)`, so every spectral quantity is read
//! off the real symmetric chain matrix `T`.

use nalgebra::DMatrix;

use crate::error::{CdError, Result};
use crate::lanczos::TridiagonalT;
use crate::linalg::symmetric_eigen_sorted;
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct BMatrix {
    off: Vec<f64>,
}

impl BMatrix {
    /// From the full coefficient list `b_0 .. b_{d-1}`; `b_0` only fixes `d`.
    pub fn from_chain_coefficients(b: &[f64]) -> Result<Self> {
        if b.is_empty() {
            return Err(CdError::InvalidParameter("empty coefficient list".into()));
        }
        Self::from_off_diagonal(b[1..].to_vec())
    }

    pub fn from_off_diagonal(off: Vec<f64>) -> Result<Self> {
        if let Some(v) = off.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(CdError::InvalidParameter(format!("B-matrix entry {v} is not positive")));
        }
        Ok(BMatrix { off })
    }

    pub fn dim(&self) -> usize {
        self.off.len() + 1
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (n, b) in self.off.iter().enumerate() {
            m[(n, n + 1)] = -b;
            m[(n + 1, n)] = *b;
        }
        m
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (n, b) in self.off.iter().enumerate() {
            out[n] -= b * v[n + 1];
            out[n + 1] += b * v[n];
        }
        out
    }

    pub fn eigensystem(&self) -> BEigensystem {
        let t = TridiagonalT::new(self.off.clone()).to_dense();
        let (omega, vectors) = symmetric_eigen_sorted(&t);
        BEigensystem { omega: omega.iter().copied().collect(), vectors }
    }
}

/// Spectrum of `iB` in ascending order, with the real eigenvectors `v` of `T`.
///
/// The eigenvector of `iB` for `omega[j]` is `D^dagger v_j`, i.e. component `n` is `i^n v_{nj}`.
#[derive(Clone, Debug)]
pub struct BEigensystem {
    pub omega: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl BEigensystem {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Eigenvector of `iB` for the `j`-th eigenvalue.
    pub fn ib_eigenvector(&self, j: usize) -> Vec<C64> {
        (0..self.dim()).map(|n| i_pow(n) * self.vectors[(n, j)]).collect()
    }

    /// Indices of the `floor(d/2)` largest eigenvalues, which are the positive ones.
    pub fn positive_modes(&self) -> std::ops::Range<usize> {
        let d = self.dim();
        d - d / 2..d
    }

    /// Largest `|omega_j + omega_{d-1-j}|`, zero for an exactly paired spectrum.
    pub fn pairing_defect(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|j| (self.omega[j] + self.omega[d - 1 - j]).abs()).fold(0.0, f64::max)
    }
}

fn i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// `phi(s) = exp(sB) e_0`, evaluated mode by mode.
pub fn evolve_wavefunction(system: &BEigensystem, s: f64) -> Vec<f64> {
    let d = system.dim();
    let mut phi = vec![0.0; d];
    for (j, w) in system.omega.iter().enumerate() {
        let v0 = system.vectors[(0, j)];
        let (sin, cos) = (s * w).sin_cos();
        for (n, p) in phi.iter_mut().enumerate() {
            let weight = system.vectors[(n, j)] * v0;
            // Re[i^n e^{-i s w}]
            *p += weight
                * match n % 4 {
                    0 => cos,
                    1 => sin,
                    2 => -cos,
                    _ => -sin,
                };
        }
    }
    phi
}

/// Normalized null vector of `B` for odd `d`: even entries `b_1 b_3 .. / (b_2 b_4 ..)`, odd entries zero.
///
/// Takes the full list `b_0 .. b_{d-1}`. Products are accumulated in log space so long chains
/// neither overflow nor underflow.
pub fn zero_mode(b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    if d % 2 == 0 {
        return Err(CdError::WrongRoute("zero mode exists only for odd d"));
    }
    let mut logs = Vec::with_capacity(d / 2 + 1);
    logs.push(0.0f64);
    for k in 1..=d / 2 {
        let prev = logs[k - 1];
        logs.push(prev + b[2 * k - 1].ln() - b[2 * k].ln());
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut phi = vec![0.0; d];
    for (k, l) in logs.iter().enumerate() {
        phi[2 * k] = (l - top).exp();
    }
    let norm = phi.iter().map(|p| p * p).sum::<f64>().sqrt();
    phi.iter_mut().for_each(|p| *p /= norm);
    Ok(phi)
}

/// Null vector of `T` for odd `d`: the zero mode of `B` with every other even entry negated.
pub fn chain_zero_mode(b: &[f64]) -> Result<Vec<f64>> {
    let mut phi = zero_mode(b)?;
    for (n, p) in phi.iter_mut().enumerate() {
        if (n / 2) % 2 == 1 {
            *p = -*p;
        }
    }
    Ok(phi)
}

/// `Q = 1 - phi phi^T` in chain coordinates (projecting out the null vector of `T`) for odd `d`,
/// identity for even `d`.
pub fn q_projector(b: &[f64]) -> Result<DMatrix<f64>> {
    let d = b.len();
    let mut q = DMatrix::identity(d, d);
    if d % 2 == 1 {
        let phi = chain_zero_mode(b)?;
        for m in 0..d {
            for n in 0..d {
                q[(m, n)] -= phi[m] * phi[n];
            }
        }
    }
    Ok(q)
}

/// `F_n(eta) = int sgn(s) e^{-eta |s|} phi_n(s) ds` over the whole real line, evaluated per mode.
///
/// Even components are even functions of `s` and vanish identically; odd components give
/// `2 (-1)^{(n-1)/2} sum_omega v_n v_0 omega / (omega^2 + eta^2)`. At `eta = 0` the sum runs over
/// positive modes only (paired with their reflections), which keeps the zero mode out.
pub fn regularized_transform(system: &BEigensystem, eta: f64) -> Vec<f64> {
    let d = system.dim();
    (0..d)
        .map(|n| {
            if n % 2 == 0 {
                return 0.0;
            }
            let sign = if (n / 2) % 2 == 0 { 2.0 } else { -2.0 };
            let sum: f64 = if eta == 0.0 {
                system
                    .positive_modes()
                    .map(|j| 2.0 * system.vectors[(n, j)] * system.vectors[(0, j)] / system.omega[j])
                    .sum()
            } else {
                (0..d)
                    .map(|j| {
                        let w = system.omega[j];
                        system.vectors[(n, j)] * system.vectors[(0, j)] * w / (w * w + eta * eta)
                    })
                    .sum()
            };
            sign * sum
        })
        .collect()
}

/// `alpha_k = (-1)^k F_{2k-1}(0) / 2`, the analytic `eta -> 0` limit of the transform.
pub fn alpha_via_laplace(b: &BMatrix) -> Vec<f64> {
    let system = b.eigensystem();
    let f = regularized_transform(&system, 0.0);
    (1..=b.dim() / 2).map(|k| if k % 2 == 0 { 0.5 * f[2 * k - 1] } else { -0.5 * f[2 * k - 1] }).collect()
}
