//! Oracle and invariant checks behind `krylov-cd verify` and the acceptance target.
//!
//! Each check compares library output with an independent route: closed forms, the
//! eigenbasis AGP, a least-squares minimizer or a second solver. [`Suite::Quick`] trims
//! system sizes and grids so the whole run stays within a few minutes on one core.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::commands::{cmd_agp, cmd_evolve, cmd_lanczos, Experiment};
use super::output::{Format, Report};
use crate::agp::{
    agp_norm, assemble_cd, solve_alpha, solve_alpha_odd_tridiagonal, solve_alpha_odd_zero_mode, spectral_agp,
    spectral_agp_oracle,
};
use crate::basis::{BasisDeclaration, Sector};
use crate::dynamics::{eigenstate, evolve, CdSource, EvolveOptions, TimeGrid};
use crate::error::{CdError, Result};
use crate::lanczos::{build_krylov_chain, gram_deviation, KrylovChain, LanczosOptions, OperatorSpace};
use crate::linalg::symmetric_eigen_sorted;
use crate::measure::{Measure, Metric};
use crate::models::ising_longitudinal::IsingLongitudinal;
use crate::models::oscillator::{Oscillator, DEFAULT_FOCK_CUTOFF};
use crate::models::stirap::{self, Stirap};
use crate::models::tfim::{analytic_b, Tfim, TfimRamp};
use crate::models::toda::{integrate, snapshot, TodaFlow};
use crate::models::two_level::{TwoLevel, TwoLevelSweep};
use crate::models::xx::{Couplings, XxAnneal, XxModel};
use crate::models::Protocol;
use crate::operator::{OperatorExpr, DEFAULT_DENSE_CAP};
use crate::spectral::build_spectral_chain;
use crate::variational::{least_squares_variational_oracle, truncated_cd, truncated_cd_with_even_basis};
use crate::wavefunction::{alpha_via_laplace, BMatrix};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

/// Deliberate faults, used to confirm that the checks can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Faults {
    /// Scales `b_1, b_2, ..` by `1 + x` wherever a chain is compared with a closed form.
    pub perturb_b: Option<f64>,
}

impl Faults {
    fn apply(&self, b: &mut [f64]) {
        if let Some(x) = self.perturb_b {
            b.iter_mut().skip(1).for_each(|bn| *bn *= 1.0 + x);
        }
    }

    fn chain<V>(&self, mut chain: KrylovChain<V>) -> KrylovChain<V> {
        self.apply(&mut chain.b);
        chain
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const CHECKS: [(usize, &str); 12] = [
    (1, "two-level closed form"),
    (2, "oscillator chain and CD"),
    (3, "three-level transfer CD"),
    (4, "transverse-field ring coefficients"),
    (5, "eigenbasis AGP equivalence"),
    (6, "measure independence"),
    (7, "odd-d route consistency"),
    (8, "truncated CD equals least squares"),
    (9, "annealing fidelities"),
    (10, "Toda flow"),
    (11, "figure data regeneration"),
    (12, "chain orthonormality"),
];

/// Worst error per quantity plus any hard failures.
#[derive(Default)]
struct Tally {
    worst: BTreeMap<&'static str, (f64, f64)>,
    failures: Vec<String>,
}

impl Tally {
    fn close(&mut self, what: &'static str, err: f64, tol: f64) {
        let entry = self.worst.entry(what).or_insert((0.0, tol));
        if err > entry.0 || err.is_nan() {
            entry.0 = err;
        }
        if !(err <= tol) && self.failures.len() < 5 {
            self.failures.push(format!("{what}: {err:.2e} > {tol:.0e}"));
        }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 5 {
            self.failures.push(what());
        }
    }

    fn finish(self) -> (bool, String) {
        let mut detail: Vec<String> = self.worst.iter().map(|(k, (e, t))| format!("{k} {e:.1e}/{t:.0e}")).collect();
        let passed = self.failures.is_empty();
        if !passed {
            detail.insert(0, format!("FAILED {}", self.failures.join("; ")));
        }
        (passed, detail.join(", "))
    }
}

fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).camax()
}

/// `max |a - b| / max(1, max |b|)`.
fn scaled_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    max_abs_diff(a, b) / b.camax().max(1.0)
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(if a.len() == b.len() { 0.0 } else { f64::INFINITY }, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn dense(op: &OperatorExpr) -> Result<DMatrix<C64>> {
    op.dense_matrix(DEFAULT_DENSE_CAP)
}

/// Krylov CD of a protocol at `t`, through the operator-space chain, as a dense matrix.
fn operator_space_cd(
    protocol: &dyn Protocol,
    t: f64,
    measure: &Measure,
    faults: &Faults,
) -> Result<(usize, DMatrix<C64>)> {
    let h = protocol.dense_hamiltonian(t)?;
    let dh = protocol.dense_derivative(t)?;
    let chain =
        build_krylov_chain(&OperatorExpr::Dense(h), &OperatorExpr::Dense(dh), measure, &LanczosOptions::default())?;
    let chain = faults.chain(chain);
    let alpha = solve_alpha(&chain.b)?;
    Ok((chain.d(), dense(&assemble_cd(&chain, &alpha)?.cd_operator)?))
}

/// Krylov CD through the eigenbasis chain, for many-body models.
fn spectral_route_cd(protocol: &dyn Protocol, t: f64, measure: &Measure) -> Result<(usize, DMatrix<C64>)> {
    let chain = build_spectral_chain(
        &protocol.dense_hamiltonian(t)?,
        &protocol.dense_derivative(t)?,
        measure,
        &LanczosOptions::default(),
    )?;
    let alpha = solve_alpha(&chain.chain.b)?;
    let expansion = assemble_cd(&chain.chain, &alpha)?;
    Ok((chain.chain.d(), chain.operator(&expansion.cd_operator)))
}

/// Krylov CD of an XX snapshot from its structured chain, as a dense matrix.
fn xx_cd(model: &XxModel, faults: &Faults) -> Result<(usize, DMatrix<C64>)> {
    let chain = faults.chain(model.chain(&LanczosOptions::default())?);
    let alpha = solve_alpha(&chain.b)?;
    let coords = assemble_cd(&chain, &alpha)?.cd_operator;
    Ok((chain.d(), dense(&OperatorExpr::Pauli(model.operator_from_coordinates(&coords)?))?))
}

/// Midpoints of `count` equal cells of `[start, end] * t_final`.
fn interior_times(t_final: f64, start: f64, end: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| t_final * (start + (end - start) * (j as f64 + 0.5) / count as f64)).collect()
}

fn two_level_sweep() -> TwoLevelSweep {
    TwoLevelSweep { h0: 1.0, ramp: 0.5, theta_start: 0.2, theta_end: 2.9, t_final: 1.0 }
}

fn xx_random(n_sites: usize, seed: u64) -> XxAnneal {
    XxAnneal::standard(n_sites, Couplings::Random { seed })
}

fn check_two_level(faults: &Faults) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let unit = |rng: &mut ChaCha8Rng| {
        Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    };
    for draw in 0..100 {
        let h = rng.gen_range(0.2..3.0);
        let h_dot = if draw % 2 == 0 { rng.gen_range(-2.0..2.0) } else { 0.0 };
        let n = unit(&mut rng);
        let n_dot = unit(&mut rng);
        let m = TwoLevel::new(h, n, h_dot, n_dot)?;
        let chain =
            build_krylov_chain(&m.hamiltonian(), &m.derivative(), &Measure::default(), &LanczosOptions::default())?;
        let chain = faults.chain(chain);
        let expected_d = if h_dot != 0.0 { 3 } else { 2 };
        tally.require(chain.d() == expected_d, || format!("draw {draw}: d = {} instead of {expected_d}", chain.d()));
        let alpha = solve_alpha(&chain.b)?;
        let cd = dense(&assemble_cd(&chain, &alpha)?.cd_operator)?;
        tally.close("cd", max_abs_diff(&cd, &m.reference_cd()), 1e-10);
    }
    Ok(tally.finish())
}

fn check_oscillator(faults: &Faults) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let gibbs = Measure::Gibbs { beta: 1.0 };
    let sample = |q0_dot, omega_dot| Oscillator {
        mass: 1.3,
        omega: 0.8,
        q0: 0.2,
        omega_dot,
        q0_dot,
        fock_cutoff: DEFAULT_FOCK_CUTOFF,
    };
    let m = sample(0.3, 0.2);
    let chain = faults.chain(m.chain(&gibbs, &LanczosOptions::default())?);
    tally.require(chain.d() == 5, || format!("d = {} instead of 5", chain.d()));
    let reference = m.reference_b(&gibbs)?;
    tally.close("b_n", relative(&chain.b[1..], &reference), 1e-8);
    for (q0_dot, omega_dot) in [(0.3, 0.2), (0.0, 0.2), (0.3, 0.0)] {
        let m = sample(q0_dot, omega_dot);
        let chain = faults.chain(m.chain(&gibbs, &LanczosOptions::default())?);
        tally.require(Some((chain.d(), chain.d_a())) == m.expected_dimension(), || {
            format!("q0_dot = {q0_dot}, omega_dot = {omega_dot}: (d, d_A) = ({}, {})", chain.d(), chain.d_a())
        });
        let alpha = solve_alpha(&chain.b)?;
        let cd = assemble_cd(&chain, &alpha)?.cd_operator;
        let exact = m.reference_cd(&gibbs)?;
        // The CD term lives on the two odd elements, stored after the three even ones.
        let got = [cd[3], cd[4]];
        let err = (0..2).map(|nu| (got[nu] - C64::new(exact[nu], 0.0)).norm()).fold(0.0, f64::max);
        tally.close("cd", err / exact.iter().fold(1.0f64, |m, x| m.max(x.abs())), 1e-8);
    }
    Ok(tally.finish())
}

fn check_stirap(faults: &Faults) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let s = Stirap::default();
    for t in interior_times(s.t_final, 0.1, 0.9, 50) {
        let (d, cd) = operator_space_cd(&s, t, &stirap::MEASURE, faults)?;
        tally.require(d == 7, || format!("t = {t}: d = {d} instead of 7"));
        tally.close("cd", scaled_diff(&cd, &s.reference_dense_cd(t)), 1e-8);
    }
    Ok(tally.finish())
}

fn check_tfim(suite: Suite, faults: &Faults) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let sizes: &[usize] = match suite {
        Suite::Quick => &[4, 6, 8],
        Suite::Full => &[4, 6, 8, 10, 12],
    };
    let relations = |tally: &mut Tally, b: &[f64], v: f64, g: f64| {
        tally.close("b_1", (b[1] - 2f64.sqrt() * v).abs(), 1e-9);
        let band = 4.0 * v * v * (1.0 + g * g);
        let coupling = 4.0 * v * v * g;
        for k in 1.. {
            if 2 * k >= b.len() {
                break;
            }
            tally.close("band", (b[2 * k - 1].powi(2) + b[2 * k].powi(2) - band).abs() / band, 1e-9);
            if 2 * k + 1 < b.len() {
                tally.close("coupling", (b[2 * k] * b[2 * k + 1] - coupling).abs() / coupling, 1e-9);
            }
        }
    };
    for &n in sizes {
        for g in [0.5, 1.0, 1.7] {
            let m = Tfim::new(n, 1.0, g, 1.0)?;
            let chain =
                build_krylov_chain(&m.hamiltonian()?, &m.derivative()?, &m.measure(), &LanczosOptions::default())?;
            let chain = faults.chain(chain);
            tally.require(chain.d() == 2 * n - 1, || format!("n_s = {n}, g = {g}: d = {}", chain.d()));
            relations(&mut tally, &chain.b, m.v, g);
            let alpha = solve_alpha(&chain.b)?;
            let signed = assemble_cd(&chain, &alpha)?.signed_coefficients();
            let Measure::Uniform { scale } = m.measure() else { unreachable!("ring measure is uniform") };
            tally.close("alpha", relative(&signed, &m.closed_form_signed(scale)), 1e-9);
        }
    }
    // The recursion alone, far beyond exact diagonalization.
    for g in [0.5, 1.0, 2.0] {
        let mut b = analytic_b(1.0, g, 2 * 200 - 1, 1.0);
        faults.apply(&mut b);
        relations(&mut tally, &b, 1.0, g);
    }
    Ok(tally.finish())
}

fn check_spectral(faults: &Faults) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let sweep = two_level_sweep();
    for t in interior_times(sweep.t_final, 0.0, 1.0, 20) {
        let (_, cd) = operator_space_cd(&sweep, t, &sweep.measure(), faults)?;
        let oracle = spectral_agp_oracle(&sweep.dense_hamiltonian(t)?, &sweep.dense_derivative(t)?)?;
        tally.close("two-level", scaled_diff(&cd, &oracle), 1e-8);
    }
    let s = Stirap::default();
    for t in interior_times(s.t_final, 0.05, 0.95, 20) {
        let (_, cd) = operator_space_cd(&s, t, &stirap::MEASURE, faults)?;
        let oracle = spectral_agp_oracle(&s.dense_h(t), &s.dense_dh(t))?;
        tally.close("three-level", scaled_diff(&cd, &oracle), 1e-8);
    }
    // Many-body spectra have symmetry degeneracies; their blocks carry no AGP. Below
    // g ~ 0.1 the two parity ground states split by less than 1e-8 and the eigensolver
    // mixes them, so the ramp stops short of the ferromagnetic end.
    let ramp = TfimRamp { n_sites: 6, v: 1.0, g_start: 2.0, g_end: 0.4, t_final: 1.0 };
    for t in interior_times(ramp.t_final, 0.0, 1.0, 20) {
        let m = ramp.at(t)?;
        let chain = faults.chain(build_krylov_chain(
            &m.hamiltonian()?,
            &m.derivative()?,
            &m.measure(),
            &LanczosOptions::default(),
        )?);
        let alpha = solve_alpha(&chain.b)?;
        let cd = dense(&assemble_cd(&chain, &alpha)?.cd_operator)?;
        let oracle = spectral_agp(&ramp.dense_hamiltonian(t)?, &ramp.dense_derivative(t)?)?;
        tally.close("ring", scaled_diff(&cd, &oracle), 1e-8);
    }
    let xx = xx_random(6, 3);
    for t in interior_times(xx.t_final, 0.0, 1.0, 20) {
        let (_, cd) = xx_cd(&xx.at(t)?, faults)?;
        let oracle = spectral_agp(&xx.dense_hamiltonian(t)?, &xx.dense_derivative(t)?)?;
        tally.close("xx", scaled_diff(&cd, &oracle), 1e-8);
    }
    Ok(tally.finish())
}

fn check_measures() -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let gibbs = Measure::Gibbs { beta: 1.0 };
    let none = Faults::default();
    let sweep = two_level_sweep();
    for t in interior_times(1.0, 0.0, 1.0, 5) {
        let (_, u) = operator_space_cd(&sweep, t, &Measure::default(), &none)?;
        let (_, g) = operator_space_cd(&sweep, t, &gibbs, &none)?;
        tally.close("two-level", scaled_diff(&g, &u), 1e-8);
    }
    let s = Stirap::default();
    for t in interior_times(s.t_final, 0.1, 0.9, 5) {
        let (_, u) = operator_space_cd(&s, t, &stirap::MEASURE, &none)?;
        let (_, g) = operator_space_cd(&s, t, &gibbs, &none)?;
        tally.close("three-level", scaled_diff(&g, &u), 1e-8);
    }
    let many_body: [(&'static str, Box<dyn Protocol>); 3] = [
        ("ring", Box::new(TfimRamp { n_sites: 4, v: 1.0, g_start: 2.0, g_end: 0.0, t_final: 1.0 })),
        ("xx", Box::new(xx_random(4, 5))),
        ("annealing", Box::new(IsingLongitudinal::new(4, 1.0, 0.5, 1.0, 1.0)?)),
    ];
    for (name, p) in &many_body {
        for t in interior_times(p.t_final(), 0.0, 1.0, 5) {
            let (_, u) = spectral_route_cd(p.as_ref(), t, &p.measure())?;
            let (_, g) = spectral_route_cd(p.as_ref(), t, &gibbs)?;
            tally.close(name, scaled_diff(&g, &u), 1e-8);
        }
    }
    let m =
        Oscillator { mass: 1.3, omega: 0.8, q0: 0.2, omega_dot: 0.2, q0_dot: 0.3, fock_cutoff: DEFAULT_FOCK_CUTOFF };
    let r1 = m.first_term_ratio(&gibbs)?;
    let r2 = m.first_term_ratio(&Measure::Gibbs { beta: 2.0 })?;
    tally.require((r1 - r2).abs() > 1e-3, || format!("first-term ratio barely moves: {r1} vs {r2}"));
    Ok(tally.finish())
}

/// The three odd-d solvers and the norm identity on one sequence.
fn compare_routes(tally: &mut Tally, b: &[f64]) -> Result<()> {
    let tridiagonal = solve_alpha_odd_tridiagonal(b)?;
    let zero_mode = solve_alpha_odd_zero_mode(b)?.alpha;
    let laplace = alpha_via_laplace(&BMatrix::from_chain_coefficients(b)?);
    tally.close("zero mode", relative(&zero_mode, &tridiagonal), 1e-9);
    tally.close("laplace", relative(&laplace, &tridiagonal), 1e-9);
    match agp_norm(b, &tridiagonal) {
        Ok(_) => tally.close("norm identity", 0.0, 1e-9),
        Err(CdError::NormIdentity { direct, resolvent }) => {
            tally.close("norm identity", (direct - resolvent).abs() / direct.abs().max(resolvent.abs()), 1e-9)
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn check_routes(suite: Suite) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = if suite == Suite::Full { 1000 } else { 300 };
    for _ in 0..draws {
        let d = 2 * rng.gen_range(1..=20) + 1;
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
        compare_routes(&mut tally, &b)?;
    }
    let opts = LanczosOptions::default();
    let sweep = two_level_sweep();
    let osc =
        Oscillator { mass: 1.3, omega: 0.8, q0: 0.2, omega_dot: 0.2, q0_dot: 0.3, fock_cutoff: DEFAULT_FOCK_CUTOFF };
    let ising = IsingLongitudinal::new(6, 1.0, 1.0, 1.0, 10.0)?;
    let restricted = truncated_cd_with_even_basis(
        &ising.hamiltonian(4.0)?,
        &ising.derivative(4.0)?,
        &*ising.even_basis()?,
        &*ising.odd_basis()?,
        &ising.measure(),
        &opts,
    )?;
    let ring = Tfim::new(6, 1.0, 0.7, 1.0)?;
    let chains: Vec<(&str, Vec<f64>)> = vec![
        (
            "two-level",
            build_krylov_chain(&sweep.hamiltonian(0.3)?, &sweep.derivative(0.3)?, &sweep.measure(), &opts)?.b,
        ),
        ("oscillator", osc.chain(&Measure::Gibbs { beta: 1.0 }, &opts)?.b),
        ("three-level", Stirap::default().chain(30.0, &opts)?.b),
        ("ring", build_krylov_chain(&ring.hamiltonian()?, &ring.derivative()?, &ring.measure(), &opts)?.b),
        ("annealing", restricted.chain_b),
        ("xx", xx_random(6, 3).at(40.0)?.chain(&opts)?.b),
    ];
    for (name, b) in chains {
        tally.require(b.len() % 2 == 1, || format!("{name}: expected odd d, got {}", b.len()));
        if b.len() % 2 == 1 {
            compare_routes(&mut tally, &b)?;
        }
    }
    Ok(tally.finish())
}

fn check_variational(suite: Suite) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let opts = LanczosOptions::default();
    let ising = IsingLongitudinal::new(6, 1.0, 1.0, 1.0, 10.0)?;
    let (odd, even) = (ising.odd_basis()?, ising.even_basis()?);
    let times: &[f64] = if suite == Suite::Full { &[0.5, 2.0, 3.5, 5.0, 6.5, 8.0, 9.5] } else { &[2.0, 7.0] };
    for &t in times {
        let (h, dh) = (ising.hamiltonian(t)?, ising.derivative(t)?);
        let oracle = least_squares_variational_oracle(&h, &dh, odd.elements(), &ising.measure())?;
        let declared = truncated_cd_with_even_basis(&h, &dh, &even, &odd, &ising.measure(), &opts)?;
        let generated = truncated_cd(&h, &dh, &odd, &ising.measure(), &opts)?;
        tally.close("annealing", relative(&declared.coefficients, &oracle.coefficients), 1e-8);
        tally.close("annealing, generated span", relative(&generated.coefficients, &oracle.coefficients), 1e-8);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let xx = xx_random(6, 4);
    let trials = if suite == Suite::Full { 8 } else { 3 };
    for trial in 0..trials {
        let m = xx.at(rng.gen_range(10.0..90.0))?;
        let pairs = m.index().pairs();
        let size = rng.gen_range(2..=6);
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        while chosen.len() < size {
            let p = pairs[rng.gen_range(0..pairs.len())];
            if !chosen.contains(&p) {
                chosen.push(p);
            }
        }
        let elements =
            chosen.iter().map(|&(n, k)| m.w_op(n, k).map(OperatorExpr::Pauli)).collect::<Result<Vec<_>>>()?;
        let labels = chosen.iter().map(|(n, k)| format!("W({n},{k})")).collect();
        let basis = BasisDeclaration::new(elements, vec![Sector::Odd; size], labels, &Metric::uniform(1.0))?;
        let (h, dh) = (m.hamiltonian()?, m.derivative()?);
        let truncated = truncated_cd(&h, &dh, &basis, &Measure::default(), &opts)?;
        let oracle = least_squares_variational_oracle(&h, &dh, basis.elements(), &Measure::default())?;
        tally.require(!oracle.rank_deficient, || format!("xx trial {trial}: rank-deficient normal equations"));
        tally.close("xx", relative(&truncated.coefficients, &oracle.coefficients), 1e-8);
    }
    Ok(tally.finish())
}

/// Final fidelity of the annealing ring for one field, duration and CD source.
fn annealing_fidelity(h: f64, t_final: f64, which: &str) -> Result<f64> {
    let model = IsingLongitudinal::new(6, 1.0, h, 1.0, t_final)?;
    let source = match which {
        "none" => CdSource::None,
        "exact" => CdSource::Exact,
        _ => CdSource::Truncated { ansatz: model.odd_basis()?, even: Some(model.even_basis()?) },
    };
    let grid = TimeGrid::full(&model, 1)?;
    let psi0 = eigenstate(&model, 0.0, 0)?;
    let run = evolve(&model, &source, &psi0, &grid, &EvolveOptions::default())?;
    Ok(run.final_fidelity().expect("target level set"))
}

fn check_fidelity(suite: Suite, jobs: usize) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let finals = match suite {
        Suite::Full => super::config::log_grid(1.0, 100.0, 10)?,
        Suite::Quick => vec![1.0, 10.0, 100.0],
    };
    let fields = [1.0, 0.1];
    let sources = ["none", "truncated", "exact"];
    let runs: Vec<(usize, usize, usize)> =
        (0..fields.len()).flat_map(|i| (0..finals.len()).flat_map(move |j| (0..3).map(move |k| (i, j, k)))).collect();
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| CdError::Config(e.to_string()))?;
    let values: Vec<f64> = pool.install(|| {
        runs.par_iter().map(|&(i, j, k)| annealing_fidelity(fields[i], finals[j], sources[k])).collect::<Result<_>>()
    })?;
    let f = |i: usize, j: usize, k: usize| values[(i * finals.len() + j) * 3 + k];
    for (i, h) in fields.iter().enumerate() {
        for (j, tf) in finals.iter().enumerate() {
            let (none, truncated, exact) = (f(i, j, 0), f(i, j, 1), f(i, j, 2));
            tally.close("truncated below none", (none - truncated).max(0.0), 1e-6);
            tally.close("exact infidelity", 1.0 - exact, 1e-6);
            tally.require(truncated >= none - 1e-6, || format!("h = {h}, t_f = {tf:.3}: {truncated} < {none}"));
        }
    }
    for (j, tf) in finals.iter().enumerate() {
        let (strong, weak) = (f(0, j, 1), f(1, j, 1));
        tally.require(strong > weak, || format!("t_f = {tf:.3}: h = 1 gives {strong}, h = 0.1 gives {weak}"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..finals.len() {
        let gain = f(0, j, 1) - f(0, j, 0);
        lo = lo.min(gain);
        hi = hi.max(gain);
    }
    let (passed, mut detail) = tally.finish();
    let _ = write!(detail, ", gain at h = 1 in [{lo:.2e}, {hi:.2e}] over {} durations", finals.len());
    Ok((passed, detail))
}

fn check_toda() -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let opts = LanczosOptions::default();
    let flow = TodaFlow::new(6, 1.0, 0.3, 5.0)?;
    for t in [0.0, 0.8, 2.5, 4.0] {
        let m = flow.at(t)?;
        let chain = m.chain(&opts)?;
        tally.require(chain.d() == 2, || format!("t = {t}: d = {}", chain.d()));
        let alpha = solve_alpha(&chain.b)?;
        let coords = assemble_cd(&chain, &alpha)?.cd_operator;
        let cd = dense(&OperatorExpr::Pauli(m.operator_from_coordinates(&coords)?))?;
        tally.close("cd", max_abs_diff(&cd, &dense(&OperatorExpr::Pauli(m.toda_cd()?))?), 1e-9);
        let q = m.norm_fractions(&chain, &alpha);
        for (p, (exact, per_term)) in q.bodies.iter().zip(q.exact.iter().zip(&q.per_term)) {
            let target = if *p == 2 { 1.0 } else { 0.0 };
            tally.close("q", (exact - target).abs().max((per_term - target).abs()), 1e-9);
        }
    }
    // A generic flow from random fields and couplings, integrated to v0 t = 50.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h0: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v0: Vec<f64> = (0..7).map(|_| rng.gen_range(0.5..1.0)).collect();
    let (h, v) = integrate(&h0, &v0, 1e-3, 50_000);
    let (before, _) = symmetric_eigen_sorted(&snapshot(&h0, &v0)?.single_particle_matrix());
    let (after, _) = symmetric_eigen_sorted(&snapshot(&h, &v)?.single_particle_matrix());
    tally.close("spectrum drift", (before - after).amax(), 1e-7);
    let end = snapshot(&h, &v)?;
    let chain = end.chain(&opts)?;
    let alpha = solve_alpha(&chain.b)?;
    let q = end.norm_fractions(&chain, &alpha);
    tally.close("generic two-body share", 1.0 - q.exact[0], 1e-8);
    Ok(tally.finish())
}

/// Bundled experiment configs and the commands run on each.
pub const FIGURE_CONFIGS: [(&str, &str, &[&str]); 8] = [
    ("profiles.toml", include_str!("../../configs/profiles.toml"), &["lanczos", "agp"]),
    ("stirap.toml", include_str!("../../configs/stirap.toml"), &["lanczos", "agp"]),
    ("tfim_ring.toml", include_str!("../../configs/tfim_ring.toml"), &["lanczos", "agp"]),
    ("xx_uniform.toml", include_str!("../../configs/xx_uniform.toml"), &["lanczos", "agp"]),
    ("xx_random.toml", include_str!("../../configs/xx_random.toml"), &["lanczos", "agp"]),
    ("xx_long_chain.toml", include_str!("../../configs/xx_long_chain.toml"), &["lanczos"]),
    ("two_level_exact.toml", include_str!("../../configs/two_level_exact.toml"), &["evolve"]),
    ("stirap_transfer.toml", include_str!("../../configs/stirap_transfer.toml"), &["evolve"]),
];

static SCRATCH: AtomicUsize = AtomicUsize::new(0);

struct ScratchDir(PathBuf);

impl ScratchDir {
    fn new() -> Self {
        let id = SCRATCH.fetch_add(1, Ordering::Relaxed);
        ScratchDir(std::env::temp_dir().join(format!("krylov-cd-verify-{}-{id}", std::process::id())))
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<(String, Vec<u8>)>> {
    paths
        .iter()
        .map(|p| Ok((p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(), std::fs::read(p)?)))
        .collect()
}

/// Every table has rows and every numeric cell is finite.
fn complete(report: &Report) -> std::result::Result<(), String> {
    for table in &report.tables {
        if table.rows.is_empty() {
            return Err(format!("table {} is empty", table.suffix));
        }
        for row in &table.rows {
            if row.iter().any(|c| matches!(c, super::output::Cell::Num(x) if !x.is_finite())) {
                return Err(format!("table {} holds a non-finite value", table.suffix));
            }
        }
    }
    Ok(())
}

/// Runs a config's commands twice into separate directories and compares the bytes.
pub fn regenerate(
    text: &str,
    commands: &[&str],
    jobs: usize,
    dir: &Path,
) -> Result<std::result::Result<usize, String>> {
    let mut outputs = Vec::new();
    for pass in 0..2 {
        let target = dir.join(format!("pass{pass}"));
        let mut written = Vec::new();
        for command in commands {
            let experiment = Experiment::from_text(text, None, jobs)?;
            let report = match *command {
                "lanczos" => cmd_lanczos(&experiment)?,
                "agp" => cmd_agp(&experiment)?,
                _ => cmd_evolve(&experiment)?,
            };
            if let Err(problem) = complete(&report) {
                return Ok(Err(format!("{command}: {problem}")));
            }
            written.extend(report.write(&target, Format::Csv)?);
        }
        outputs.push(read_all(&written)?);
    }
    if outputs[0] != outputs[1] {
        return Ok(Err("reruns differ".into()));
    }
    Ok(Ok(outputs[0].len()))
}

fn check_figure_data(suite: Suite, jobs: usize) -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let scratch = ScratchDir::new();
    let mut files = 0;
    for (name, text, commands) in FIGURE_CONFIGS {
        if suite == Suite::Quick && name == "xx_long_chain.toml" {
            continue;
        }
        match regenerate(text, commands, jobs, &scratch.0.join(name))? {
            Ok(n) => files += n,
            Err(problem) => tally.require(false, || format!("{name}: {problem}")),
        }
    }
    let (passed, detail) = tally.finish();
    Ok((passed, if detail.is_empty() { format!("{files} files, byte-identical reruns") } else { detail }))
}

fn check_orthonormality() -> Result<(bool, String)> {
    let mut tally = Tally::default();
    let opts = LanczosOptions::default();
    let sweep = two_level_sweep();
    let s = Stirap::default();
    let ring = Tfim::new(6, 1.0, 0.7, 1.0)?;
    let cases: Vec<(&'static str, OperatorExpr, OperatorExpr, Measure)> = vec![
        ("two-level", sweep.hamiltonian(0.4)?, sweep.derivative(0.4)?, Measure::Gibbs { beta: 0.7 }),
        ("three-level", s.hamiltonian(35.0)?, s.derivative(35.0)?, stirap::MEASURE),
        ("ring", ring.hamiltonian()?, ring.derivative()?, ring.measure()),
    ];
    for (name, h, dh, measure) in cases {
        let chain = build_krylov_chain(&h, &dh, &measure, &opts)?;
        let space = OperatorSpace::new(&h, &measure)?;
        tally.close(name, gram_deviation(&space, &chain)?, 1e-10);
        for (n, o) in chain.basis.iter().enumerate() {
            let deviation = if n % 2 == 0 { o.hermiticity_deviation() } else { o.anti_hermiticity_deviation() };
            tally.close("alternating hermiticity", deviation, 1e-12);
        }
    }
    Ok(tally.finish())
}

/// Runs one check, turning library errors into failures.
pub fn run_check(id: usize, suite: Suite, faults: &Faults, jobs: usize) -> CheckResult {
    let name = CHECKS.iter().find(|(i, _)| *i == id).map_or("unknown check", |(_, n)| n);
    let start = Instant::now();
    let outcome = match id {
        1 => check_two_level(faults),
        2 => check_oscillator(faults),
        3 => check_stirap(faults),
        4 => check_tfim(suite, faults),
        5 => check_spectral(faults),
        6 => check_measures(),
        7 => check_routes(suite),
        8 => check_variational(suite),
        9 => check_fidelity(suite, jobs),
        10 => check_toda(),
        11 => check_figure_data(suite, jobs),
        12 => check_orthonormality(),
        _ => Err(CdError::Config(format!("no check numbered {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("FAILED with error: {e}")));
    CheckResult { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn run_suite(suite: Suite, faults: &Faults, jobs: usize) -> Vec<CheckResult> {
    CHECKS.iter().map(|(id, _)| run_check(*id, suite, faults, jobs)).collect()
}

pub fn format_line(r: &CheckResult) -> String {
    format!(
        "{:>2}  {:<4}  {:<36} {:>7.1}s  {}",
        r.id,
        if r.passed { "PASS" } else { "FAIL" },
        r.name,
        r.seconds,
        r.detail
    )
}

pub fn table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format_line(r));
        out.push('\n');
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} checks, {} failed", results.len(), failed);
    out
}
