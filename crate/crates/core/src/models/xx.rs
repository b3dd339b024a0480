//! Open XX chain `H = (1/2) sum v_n (X_n X_{n+1} + Y_n Y_{n+1}) + (1/2) sum h_n Z_n`.
//!
//! The Liouvillian closes on the fermion bilinears `Z_n`, `V_n^k` (even) and `W_n^k` (odd),
//! with `k + 1` the body count of the string. Sites are 0-based here.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{norm_fraction, NormFraction, Protocol};
use crate::basis::{BlockForm, LiouvillianMatrix};
use crate::error::{CdError, Result};
use crate::lanczos::{build_chain_from_coordinates, KrylovChain, LanczosOptions};
use crate::operator::OperatorExpr;
use crate::pauli::{Letter, PauliString, PauliSum};
use crate::C64;

/// One instant: couplings `v_n` (`n_s - 1` bonds), fields `h_n` (`n_s` sites) and their rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XxModel {
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub v_dot: Vec<f64>,
    pub h_dot: Vec<f64>,
}

/// `A_n Z .. Z B_{n+k}` on an open chain.
fn chain_string(n: usize, k: usize, first: Letter, last: Letter) -> PauliString {
    let mut letters = vec![(n, first)];
    letters.extend((n + 1..n + k).map(|j| (j, Letter::Z)));
    letters.push((n + k, last));
    PauliString::from_letters(&letters)
}

/// Index of `(n, k)` among the bilinears with `1 <= k`, `n + k < n_s`, ordered by `k` then `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BilinearIndex {
    n_sites: usize,
}

impl BilinearIndex {
    pub fn new(n_sites: usize) -> Self {
        BilinearIndex { n_sites }
    }

    pub fn len(&self) -> usize {
        self.n_sites * (self.n_sites - 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, n: isize, k: isize) -> Option<usize> {
        let ns = self.n_sites as isize;
        if k < 1 || n < 0 || n + k >= ns {
            return None;
        }
        // Strings of length k' < k come first; there are n_s - k' of each.
        let before: isize = (1..k).map(|kk| ns - kk).sum();
        Some((before + n) as usize)
    }

    /// `(n, k)` pairs in index order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (1..self.n_sites).flat_map(|k| (0..self.n_sites - k).map(move |n| (n, k))).collect()
    }
}

impl XxModel {
    pub fn new(v: Vec<f64>, h: Vec<f64>, v_dot: Vec<f64>, h_dot: Vec<f64>) -> Result<Self> {
        let n = h.len();
        if n < 2 {
            return Err(CdError::InvalidParameter("the chain needs at least two sites".into()));
        }
        if n > crate::pauli::MAX_SITES {
            return Err(CdError::TooManySites(n));
        }
        if v.len() != n - 1 || v_dot.len() != n - 1 {
            return Err(CdError::LengthMismatch { expected: n - 1, got: v.len().min(v_dot.len()) });
        }
        if h_dot.len() != n {
            return Err(CdError::LengthMismatch { expected: n, got: h_dot.len() });
        }
        Ok(XxModel { v, h, v_dot, h_dot })
    }

    pub fn n_sites(&self) -> usize {
        self.h.len()
    }

    fn pauli_form(&self, v: &[f64], h: &[f64]) -> Result<OperatorExpr> {
        let ns = self.n_sites();
        let mut s = PauliSum::zero(ns)?;
        for (n, vn) in v.iter().enumerate() {
            s.add_term(chain_string(n, 1, Letter::X, Letter::X), C64::new(0.5 * vn, 0.0))?;
            s.add_term(chain_string(n, 1, Letter::Y, Letter::Y), C64::new(0.5 * vn, 0.0))?;
        }
        for (n, hn) in h.iter().enumerate() {
            s.add_term(PauliString::single(n, Letter::Z), C64::new(0.5 * hn, 0.0))?;
        }
        Ok(OperatorExpr::Pauli(s))
    }

    pub fn hamiltonian(&self) -> Result<OperatorExpr> {
        self.pauli_form(&self.v, &self.h)
    }

    pub fn derivative(&self) -> Result<OperatorExpr> {
        self.pauli_form(&self.v_dot, &self.h_dot)
    }

    /// `V_n^k = (X Z..Z X + Y Z..Z Y) / sqrt 2`.
    pub fn v_op(&self, n: usize, k: usize) -> Result<PauliSum> {
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        PauliSum::from_terms(
            self.n_sites(),
            [(chain_string(n, k, Letter::X, Letter::X), r), (chain_string(n, k, Letter::Y, Letter::Y), r)],
        )
    }

    /// `W_n^k = (X Z..Z Y - Y Z..Z X) / sqrt 2`.
    pub fn w_op(&self, n: usize, k: usize) -> Result<PauliSum> {
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        PauliSum::from_terms(
            self.n_sites(),
            [(chain_string(n, k, Letter::X, Letter::Y), r), (chain_string(n, k, Letter::Y, Letter::X), -r)],
        )
    }

    pub fn z_op(&self, n: usize) -> Result<PauliSum> {
        PauliSum::from_terms(self.n_sites(), [(PauliString::single(n, Letter::Z), C64::new(1.0, 0.0))])
    }

    pub fn index(&self) -> BilinearIndex {
        BilinearIndex::new(self.n_sites())
    }

    /// `(even, odd)` sizes: `n_s (n_s + 1) / 2` and `n_s (n_s - 1) / 2`.
    pub fn sector_sizes(&self) -> (usize, usize) {
        let ns = self.n_sites();
        (ns * (ns + 1) / 2, ns * (ns - 1) / 2)
    }

    /// `[H, W_n^k]` as `(even index, coefficient)` pairs, even indices being `Z_n` first and
    /// then `V` in [`BilinearIndex`] order.
    pub fn liouvillian_of_w(&self, n: usize, k: usize) -> Vec<(usize, C64)> {
        let ns = self.n_sites();
        let idx = self.index();
        let i = C64::new(0.0, 1.0);
        let (n_i, k_i) = (n as isize, k as isize);
        let v = |j: isize| if j >= 0 && (j as usize) < ns - 1 { self.v[j as usize] } else { 0.0 };
        let mut out = Vec::new();
        let mut push = |nn: isize, kk: isize, c: C64| {
            if c != C64::new(0.0, 0.0) {
                if let Some(j) = idx.get(nn, kk) {
                    out.push((ns + j, c));
                }
            }
        };
        push(n_i, k_i, -i * (self.h[n + k] - self.h[n]));
        push(n_i - 1, k_i + 1, -i * v(n_i - 1));
        push(n_i + 1, k_i - 1, -i * v(n_i));
        push(n_i, k_i - 1, i * v(n_i + k_i - 1));
        push(n_i, k_i + 1, i * v(n_i + k_i));
        if k == 1 {
            let c = i * SQRT_2 * self.v[n];
            out.push((n + 1, c));
            out.push((n, -c));
        }
        out
    }

    /// The block `M` in closed form, sparse.
    pub fn m_sparse(&self) -> CooMatrix<C64> {
        let (dx, dy) = self.sector_sizes();
        let mut coo = CooMatrix::new(dx, dy);
        for (col, (n, k)) in self.index().pairs().into_iter().enumerate() {
            for (row, c) in self.liouvillian_of_w(n, k) {
                coo.push(row, col, c);
            }
        }
        coo
    }

    pub fn m_dense(&self) -> DMatrix<C64> {
        let coo = self.m_sparse();
        let mut m = DMatrix::zeros(coo.nrows(), coo.ncols());
        for (r, c, v) in coo.triplet_iter() {
            m[(r, c)] += *v;
        }
        m
    }

    /// `L = [[0, M], [M^dagger, 0]]` in sparse form.
    pub fn liouvillian_matrix(&self) -> LiouvillianMatrix {
        let (dx, dy) = self.sector_sizes();
        let m = self.m_sparse();
        let mut coo = CooMatrix::new(dx + dy, dx + dy);
        for (r, c, v) in m.triplet_iter() {
            coo.push(r, dx + c, *v);
            coo.push(dx + c, r, v.conj());
        }
        let block = BlockForm { even: (0..dx).collect(), odd: (dx..dx + dy).collect() };
        LiouvillianMatrix::from_sparse(CsrMatrix::from(&coo), Some(block))
    }

    /// `dH` in joint coordinates under `rho = 1/2^{n_s}`.
    pub fn dh_coordinates(&self) -> DVector<C64> {
        let ns = self.n_sites();
        let (dx, dy) = self.sector_sizes();
        let mut c = DVector::<C64>::zeros(dx + dy);
        for (n, hd) in self.h_dot.iter().enumerate() {
            c[n] = C64::new(0.5 * hd, 0.0);
        }
        let idx = self.index();
        for (n, vd) in self.v_dot.iter().enumerate() {
            c[ns + idx.get(n as isize, 1).expect("bond index")] = C64::new(vd * FRAC_1_SQRT_2, 0.0);
        }
        c
    }

    pub fn chain(&self, opts: &LanczosOptions) -> Result<KrylovChain<DVector<C64>>> {
        build_chain_from_coordinates(&self.liouvillian_matrix(), &self.dh_coordinates(), opts)
    }

    /// Body count `k + 1` of each odd coordinate.
    pub fn odd_body_counts(&self) -> Vec<usize> {
        self.index().pairs().into_iter().map(|(_, k)| k + 1).collect()
    }

    /// Hamiltonian in the sector with one flipped spin: tridiagonal `n_s x n_s`.
    pub fn single_particle_matrix(&self) -> DMatrix<f64> {
        let ns = self.n_sites();
        let total: f64 = self.h.iter().sum();
        let mut m = DMatrix::zeros(ns, ns);
        for n in 0..ns {
            m[(n, n)] = 0.5 * (total - 2.0 * self.h[n]);
        }
        for (n, vn) in self.v.iter().enumerate() {
            m[(n, n + 1)] = *vn;
            m[(n + 1, n)] = *vn;
        }
        m
    }

    /// The Pauli operator with joint coordinates `coords` (`Z`, then `V`, then `W`).
    pub fn operator_from_coordinates(&self, coords: &DVector<C64>) -> Result<PauliSum> {
        let ns = self.n_sites();
        let (dx, dy) = self.sector_sizes();
        if coords.len() != dx + dy {
            return Err(CdError::LengthMismatch { expected: dx + dy, got: coords.len() });
        }
        let mut s = PauliSum::zero(ns)?;
        for n in 0..ns {
            s.axpy(coords[n], &self.z_op(n)?)?;
        }
        for (j, (n, k)) in self.index().pairs().into_iter().enumerate() {
            s.axpy(coords[ns + j], &self.v_op(n, k)?)?;
            s.axpy(coords[dx + j], &self.w_op(n, k)?)?;
        }
        Ok(s)
    }

    /// `(1/sqrt 2) sum_n v_n W_n^1`, the CD term along a Toda flow.
    pub fn toda_cd(&self) -> Result<PauliSum> {
        let mut s = PauliSum::zero(self.n_sites())?;
        for (n, vn) in self.v.iter().enumerate() {
            s.axpy(C64::new(vn * FRAC_1_SQRT_2, 0.0), &self.w_op(n, 1)?)?;
        }
        Ok(s)
    }

    /// Odd chain elements restricted to the `W` coordinates.
    fn odd_blocks(&self, chain: &KrylovChain<DVector<C64>>) -> Vec<DVector<C64>> {
        let (dx, dy) = self.sector_sizes();
        chain.basis.iter().skip(1).step_by(2).map(|v| v.rows(dx, dy).into_owned()).collect()
    }

    /// Share of the CD norm carried by `p`-body strings, `p = 2..=n_s`.
    pub fn norm_fractions(&self, chain: &KrylovChain<DVector<C64>>, alpha: &[f64]) -> NormFraction {
        norm_fraction(alpha, &self.odd_blocks(chain), &self.odd_body_counts())
    }

    pub fn norm_traces(&self, chain: &KrylovChain<DVector<C64>>, alpha: &[f64]) -> NormTraces {
        let b = &chain.b;
        let b0 = chain.b0();
        let exact = b0 * alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        let fractions = self.norm_fractions(chain, alpha);
        let two_body =
            fractions.bodies.iter().position(|&p| p == 2).map_or(0.0, |j| exact * fractions.exact[j].max(0.0).sqrt());
        let first_term = alpha.first().map_or(0.0, |a| b0 * a.abs());
        let nested_commutator = match (b.get(1), b.get(2)) {
            (Some(b1), b2) => b0 * b1 / (b1 * b1 + b2.map_or(0.0, |x| x * x)),
            (None, _) => 0.0,
        };
        NormTraces { exact, two_body, first_term, nested_commutator }
    }
}

/// `sqrt((H_CD, H_CD))` next to the same norm after three reductions: keeping the two-body
/// strings, keeping the first chain term, and the first-order nested-commutator term
/// `i alpha_nc [H, dH]` with `alpha_nc = -1 / (b_1^2 + b_2^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTraces {
    pub exact: f64,
    pub two_body: f64,
    pub first_term: f64,
    pub nested_commutator: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Couplings {
    /// `v_n = v_0`.
    Uniform,
    /// `v_n = v_0 r_n` with `r_n` uniform on `[-1, 1]` from a seeded generator.
    Random { seed: u64 },
}

impl Couplings {
    pub fn draw(&self, n_bonds: usize, v0: f64) -> Vec<f64> {
        match self {
            Couplings::Uniform => vec![v0; n_bonds],
            Couplings::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n_bonds).map(|_| v0 * rng.gen_range(-1.0..=1.0)).collect()
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Couplings::Uniform => None,
            Couplings::Random { seed } => Some(*seed),
        }
    }
}

/// Fields sweep from `h_0` to zero site by site: `h_n = h_0 (1 + tanh f_n) / 2` with
/// `f_n = n - 1 + x_0 - (n_s - 1 + 2 x_0) t / t_f` (1-based `n`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XxAnneal {
    pub n_sites: usize,
    pub v0: f64,
    pub h0: f64,
    #[serde(default = "default_offset")]
    pub x0: f64,
    pub t_final: f64,
    pub couplings: Couplings,
}

fn default_offset() -> f64 {
    4.0
}

impl XxAnneal {
    /// Unit `v_0`, `h_0 = 2 v_0`, `x_0 = 4` and `v_0 t_f = 100`.
    pub fn standard(n_sites: usize, couplings: Couplings) -> Self {
        XxAnneal { n_sites, v0: 1.0, h0: 2.0, x0: 4.0, t_final: 100.0, couplings }
    }

    pub fn at(&self, t: f64) -> Result<XxModel> {
        let ns = self.n_sites;
        if ns < 2 {
            return Err(CdError::InvalidParameter("the chain needs at least two sites".into()));
        }
        let speed = (ns as f64 - 1.0 + 2.0 * self.x0) / self.t_final;
        let mut h = Vec::with_capacity(ns);
        let mut h_dot = Vec::with_capacity(ns);
        for n in 0..ns {
            let f = n as f64 + self.x0 - speed * t;
            let th = f.tanh();
            h.push(0.5 * self.h0 * (1.0 + th));
            h_dot.push(-0.5 * self.h0 * (1.0 - th * th) * speed);
        }
        let v = self.couplings.draw(ns - 1, self.v0);
        XxModel::new(v, h, vec![0.0; ns - 1], h_dot)
    }
}

impl Protocol for XxAnneal {
    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
        self.at(t)?.hamiltonian()
    }

    fn derivative(&self, t: f64) -> Result<OperatorExpr> {
        self.at(t)?.derivative()
    }
}
