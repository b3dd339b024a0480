//! Pauli strings on up to 128 sites and sparse sums of them.
//!
//! A string is stored as a pair of bitmasks `(x, z)`; bit `j` refers to site
//! `j`. The letter on a site is `i^{x z} X^x Z^z`, so `(1, 1)` is `Y` and every
//! string with unit phase is Hermitian. Site 0 is the leftmost Kronecker
//! factor when a string is turned into a matrix.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};
use crate::C64;

pub const MAX_SITES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// A power of `i`, stored modulo 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> C64 {
        match self.0 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Tensor product of single-site Pauli letters with unit phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PauliString {
    x: u128,
    z: u128,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn from_masks(x: u128, z: u128) -> Self {
        PauliString { x, z }
    }

    pub fn masks(&self) -> (u128, u128) {
        (self.x, self.z)
    }

    pub fn single(site: usize, letter: Letter) -> Self {
        Self::from_letters(&[(site, letter)])
    }

    /// Builds a string from `(site, letter)` pairs; later pairs overwrite earlier ones.
    pub fn from_letters(letters: &[(usize, Letter)]) -> Self {
        let mut s = PauliString::IDENTITY;
        for &(site, letter) in letters {
            s.set(site, letter);
        }
        s
    }

    /// Parses a dense word such as `"XZIY"`, site 0 first.
    pub fn parse(word: &str) -> Result<Self> {
        if word.chars().count() > MAX_SITES {
            return Err(CdError::TooManySites(word.chars().count()));
        }
        let mut s = PauliString::IDENTITY;
        for (site, c) in word.chars().enumerate() {
            let letter = Letter::from_char(c).ok_or_else(|| CdError::Config(format!("invalid Pauli letter `{c}`")))?;
            s.set(site, letter);
        }
        Ok(s)
    }

    pub fn set(&mut self, site: usize, letter: Letter) {
        assert!(site < MAX_SITES, "site {site} out of range");
        let bit = 1u128 << site;
        let (x, z) = letter.bits();
        self.x = if x { self.x | bit } else { self.x & !bit };
        self.z = if z { self.z | bit } else { self.z & !bit };
    }

    pub fn letter(&self, site: usize) -> Letter {
        let bit = 1u128 << site;
        Letter::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// First and last non-identity site.
    pub fn support_span(&self) -> Option<(usize, usize)> {
        let m = self.x | self.z;
        if m == 0 {
            return None;
        }
        Some((m.trailing_zeros() as usize, 127 - m.leading_zeros() as usize))
    }

    /// Sites from the first to the last non-identity letter, inclusive.
    pub fn support_length(&self) -> usize {
        self.support_span().map_or(0, |(a, b)| b - a + 1)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `self * other = phase * result`.
    pub fn mul(&self, other: &PauliString) -> (Phase, PauliString) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = (self.x & self.z).count_ones() as i64
            + (other.x & other.z).count_ones() as i64
            + 2 * (self.z & other.x).count_ones() as i64
            - (x & z).count_ones() as i64;
        (Phase::from_exponent(k), PauliString { x, z })
    }

    /// Trace over `2^n_sites` states of `phase * self`.
    pub fn trace(&self, phase: Phase, n_sites: usize) -> C64 {
        if self.is_identity() {
            phase.to_complex() * 2f64.powi(n_sites as i32)
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Highest occupied site plus one.
    pub fn min_sites(&self) -> usize {
        let m = self.x | self.z;
        128 - m.leading_zeros() as usize
    }

    pub fn word(&self, n_sites: usize) -> String {
        (0..n_sites).map(|j| self.letter(j).as_char()).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for j in 0..MAX_SITES {
            let l = self.letter(j);
            if l != Letter::I {
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}{}", l.as_char(), j)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Sparse complex combination of Pauli strings on a fixed number of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_sites: usize,
    terms: BTreeMap<PauliString, C64>,
}

impl PauliSum {
    pub fn zero(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(CdError::TooManySites(n_sites));
        }
        Ok(PauliSum { n_sites, terms: BTreeMap::new() })
    }

    pub fn from_terms<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, C64)>,
    {
        let mut sum = PauliSum::zero(n_sites)?;
        for (s, c) in terms {
            sum.add_term(s, c)?;
        }
        Ok(sum)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &C64)> {
        self.terms.iter()
    }

    /// Keeps the real (Hermitian) or imaginary (anti-Hermitian) part of every coefficient.
    pub fn project_parity(&mut self, hermitian: bool) {
        for c in self.terms.values_mut() {
            *c = if hermitian { C64::new(c.re, 0.0) } else { C64::new(0.0, c.im) };
        }
        self.terms.retain(|_, c| *c != C64::new(0.0, 0.0));
    }

    pub fn coefficient(&self, s: &PauliString) -> C64 {
        self.terms.get(s).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, s: PauliString, c: C64) -> Result<()> {
        if s.min_sites() > self.n_sites {
            return Err(CdError::SiteCountMismatch { left: self.n_sites, right: s.min_sites() });
        }
        if c == C64::new(0.0, 0.0) {
            return Ok(());
        }
        let e = self.terms.entry(s).or_default();
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&s);
        }
        Ok(())
    }

    fn check_sites(&self, other: &PauliSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(CdError::SiteCountMismatch { left: self.n_sites, right: other.n_sites });
        }
        Ok(())
    }

    pub fn scale(&mut self, a: C64) {
        if a == C64::new(0.0, 0.0) {
            self.terms.clear();
            return;
        }
        for c in self.terms.values_mut() {
            *c *= a;
        }
    }

    pub fn scaled(&self, a: C64) -> PauliSum {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: C64, x: &PauliSum) -> Result<()> {
        self.check_sites(x)?;
        for (s, c) in &x.terms {
            let e = self.terms.entry(*s).or_default();
            *e += a * c;
        }
        self.terms.retain(|_, c| *c != C64::new(0.0, 0.0));
        Ok(())
    }

    pub fn adjoint(&self) -> PauliSum {
        PauliSum { n_sites: self.n_sites, terms: self.terms.iter().map(|(s, c)| (*s, c.conj())).collect() }
    }

    pub fn product(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut acc: BTreeMap<PauliString, C64> = BTreeMap::new();
        for (s1, c1) in &self.terms {
            for (s2, c2) in &other.terms {
                let (ph, s3) = s1.mul(s2);
                *acc.entry(s3).or_default() += c1 * c2 * ph.to_complex();
            }
        }
        acc.retain(|_, c| *c != C64::new(0.0, 0.0));
        Ok(PauliSum { n_sites: self.n_sites, terms: acc })
    }

    /// `[self, other]`; only anticommuting pairs contribute, each as `2 P1 P2`.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut acc: BTreeMap<PauliString, C64> = BTreeMap::new();
        for (s1, c1) in &self.terms {
            for (s2, c2) in &other.terms {
                if s1.commutes_with(s2) {
                    continue;
                }
                let (ph, s3) = s1.mul(s2);
                *acc.entry(s3).or_default() += 2.0 * c1 * c2 * ph.to_complex();
            }
        }
        let mut out = PauliSum { n_sites: self.n_sites, terms: acc };
        out.prune(1e-15);
        Ok(out)
    }

    /// Drops coefficients below `rel` times the largest magnitude.
    pub fn prune(&mut self, rel: f64) {
        let max = self.max_abs();
        let cut = rel * max;
        self.terms.retain(|_, c| c.norm() > cut);
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Tr(A^dagger B) / 2^n`.
    pub fn normalized_hs_inner(&self, other: &PauliSum) -> Result<C64> {
        self.check_sites(other)?;
        let (small, large, flip) = if self.len() <= other.len() { (self, other, false) } else { (other, self, true) };
        let mut acc = C64::new(0.0, 0.0);
        for (s, c) in &small.terms {
            if let Some(d) = large.terms.get(s) {
                acc += if flip { d.conj() * c } else { c.conj() * d };
            }
        }
        Ok(acc)
    }

    /// Trace over the full Hilbert space.
    pub fn trace(&self) -> C64 {
        self.coefficient(&PauliString::IDENTITY) * 2f64.powi(self.n_sites as i32)
    }

    /// Largest imaginary part relative to the largest coefficient (0 for Hermitian sums).
    pub fn hermiticity_deviation(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max) / max
    }

    /// Largest real part relative to the largest coefficient (0 for anti-Hermitian sums).
    pub fn anti_hermiticity_deviation(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        self.terms.values().map(|c| c.re.abs()).fold(0.0, f64::max) / max
    }

    /// Dense `2^n x 2^n` matrix; site 0 is the most significant bit of the row index.
    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<C64>> {
        let n = self.n_sites;
        if n >= usize::BITS as usize - 1 || (1usize << n) > cap {
            let dim = if n < 63 { 1usize << n } else { usize::MAX };
            return Err(CdError::DenseCapExceeded { dim, cap });
        }
        let dim = 1usize << n;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (s, c) in &self.terms {
            let (x, z) = s.masks();
            let (xi, zi) = (to_index_mask(x, n), to_index_mask(z, n));
            let y_phase = Phase::from_exponent((x & z).count_ones() as i64).to_complex();
            for col in 0..dim {
                let sign = if (zi & col).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(col ^ xi, col)] += c * y_phase * sign;
            }
        }
        Ok(m)
    }
}

/// Maps a site mask (bit j = site j) to a state-index mask (site 0 most significant).
fn to_index_mask(mask: u128, n: usize) -> usize {
    let mut out = 0usize;
    for j in 0..n {
        if mask & (1u128 << j) != 0 {
            out |= 1usize << (n - 1 - j);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn letter_matrix(l: Letter) -> DMatrix<C64> {
        let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        match l {
            Letter::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            Letter::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Letter::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            Letter::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    fn kron_oracle(s: &PauliString, n: usize) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for j in 0..n {
            m = m.kronecker(&letter_matrix(s.letter(j)));
        }
        m
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        prop::collection::vec(0u8..4, n).prop_map(move |v| {
            let letters: Vec<(usize, Letter)> = v
                .iter()
                .enumerate()
                .map(|(j, &k)| (j, [Letter::I, Letter::X, Letter::Y, Letter::Z][k as usize]))
                .collect();
            PauliString::from_letters(&letters)
        })
    }

    #[test]
    fn single_letter_products() {
        let x = PauliString::single(0, Letter::X);
        let y = PauliString::single(0, Letter::Y);
        let z = PauliString::single(0, Letter::Z);
        assert_eq!(x.mul(&y), (Phase::I, z));
        assert_eq!(y.mul(&x), (Phase::MINUS_I, z));
        assert_eq!(z.mul(&x), (Phase::I, y));
        assert_eq!(y.mul(&z), (Phase::I, x));
        assert_eq!(x.mul(&x), (Phase::ONE, PauliString::IDENTITY));
    }

    #[test]
    fn z_x_commutator_is_two_i_y() {
        let z = PauliSum::from_terms(1, [(PauliString::single(0, Letter::Z), c(1.0, 0.0))]).unwrap();
        let x = PauliSum::from_terms(1, [(PauliString::single(0, Letter::X), c(1.0, 0.0))]).unwrap();
        let comm = z.commutator(&x).unwrap();
        assert_eq!(comm.len(), 1);
        assert_eq!(comm.coefficient(&PauliString::single(0, Letter::Y)), c(0.0, 2.0));
        assert!(z.commutator(&z).unwrap().is_empty());
    }

    #[test]
    fn dense_matches_textbook_matrices() {
        let x = PauliSum::from_terms(1, [(PauliString::single(0, Letter::X), c(1.0, 0.0))]).unwrap();
        assert_eq!(x.to_dense(1 << 14).unwrap(), letter_matrix(Letter::X));
        let zz = PauliSum::from_terms(2, [(PauliString::parse("ZZ").unwrap(), c(1.0, 0.0))]).unwrap();
        let d = zz.to_dense(1 << 14).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| d[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let s = PauliSum::zero(15).unwrap();
        assert!(matches!(s.to_dense(1 << 14), Err(CdError::DenseCapExceeded { .. })));
    }

    #[test]
    fn trace_rule() {
        let s = PauliString::parse("XIZ").unwrap();
        assert_eq!(s.trace(Phase::ONE, 3), c(0.0, 0.0));
        assert_eq!(PauliString::IDENTITY.trace(Phase::MINUS_I, 3), c(0.0, -8.0));
    }

    #[test]
    fn support_length_counts_inner_identities() {
        let s = PauliString::parse("IXIIYI").unwrap();
        assert_eq!(s.support_span(), Some((1, 4)));
        assert_eq!(s.support_length(), 4);
        assert_eq!(s.weight(), 2);
        assert_eq!(format!("{s}"), "X1 Y4");
    }

    proptest! {
        #[test]
        fn product_matches_kronecker_oracle(a in arb_string(3), b in arb_string(3)) {
            let (ph, s) = a.mul(&b);
            let lhs = kron_oracle(&a, 3) * kron_oracle(&b, 3);
            let rhs = kron_oracle(&s, 3) * ph.to_complex();
            prop_assert!((lhs - rhs).camax() < 1e-14);
        }

        #[test]
        fn dense_matches_kronecker_oracle(a in arb_string(4)) {
            let sum = PauliSum::from_terms(4, [(a, c(1.0, 0.0))]).unwrap();
            prop_assert!((sum.to_dense(1 << 14).unwrap() - kron_oracle(&a, 4)).camax() < 1e-15);
        }

        #[test]
        fn commutation_parity_matches_matrices(a in arb_string(3), b in arb_string(3)) {
            let (ma, mb) = (kron_oracle(&a, 3), kron_oracle(&b, 3));
            let comm = &ma * &mb - &mb * &ma;
            prop_assert_eq!(a.commutes_with(&b), comm.camax() < 1e-14);
        }
    }
}
