//! Time evolution under `H(t) + H_CD(t)`, adiabatically transported eigenstates and
//! fidelities.
//!
//! The integrator is a fixed-step fourth-order Magnus scheme. The step is halved until the
//! result stops moving, so a run is reproducible bit for bit from its inputs. Being unitary,
//! the scheme is not held to `h ||H|| < 1`; its step is set by how fast `H(t)` changes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agp::{expand, spectral_agp};
use crate::basis::BasisDeclaration;
use crate::error::{CdError, Result};
use crate::lanczos::LanczosOptions;
use crate::linalg::{hermitian_eigen, hermitian_norm};
use crate::models::Protocol;
use crate::operator::DEFAULT_DENSE_CAP;
use crate::spectral::build_spectral_chain;
use crate::variational::{first_order_nc_cd, truncated_cd, truncated_cd_with_even_basis};
use crate::C64;

/// Levels closer than this fraction of `||H||` count as crossing.
pub const CROSSING_TOL: f64 = 1e-10;

/// Eigenbasis points per grid interval used for level tracking; even, for Simpson's rule.
const TRACKING_SUBSTEPS: usize = 8;

/// Initial `h ||H + H_CD||` before any halving.
const INITIAL_STEP_PHASE: f64 = 1.0;

/// Which CD term is added to `H(t)`; each variant is re-solved at every evaluation point.
#[derive(Clone, Debug)]
pub enum CdSource {
    None,
    /// `i <m|dH|n> / (e_n - e_m)` in the instantaneous eigenbasis, zero inside degenerate
    /// blocks; equal to the full Krylov expansion at `O(dim^3)` per point.
    Exact,
    /// Full Krylov expansion, with the chain run in the instantaneous eigenbasis.
    Krylov,
    /// Krylov expansion restricted to `A in span(ansatz)`; `even` fixes the even span,
    /// otherwise it is generated from `dH` and the ansatz images.
    Truncated {
        ansatz: Arc<BasisDeclaration>,
        even: Option<Arc<BasisDeclaration>>,
    },
    /// `i alpha_nc [H, dH]`.
    FirstOrderNc,
}

impl CdSource {
    pub fn name(&self) -> &'static str {
        match self {
            CdSource::None => "none",
            CdSource::Exact => "exact",
            CdSource::Krylov => "krylov",
            CdSource::Truncated { .. } => "truncated",
            CdSource::FirstOrderNc => "first_order_nc",
        }
    }

    /// Dense `H_CD(t)`, or `None` when no term is added.
    pub fn operator(&self, protocol: &dyn Protocol, t: f64) -> Result<Option<DMatrix<C64>>> {
        let measure = protocol.measure();
        let opts = LanczosOptions::default();
        let cd = match self {
            CdSource::None => return Ok(None),
            CdSource::Exact => spectral_agp(&protocol.dense_hamiltonian(t)?, &protocol.dense_derivative(t)?)?,
            CdSource::Krylov => {
                let spectral = build_spectral_chain(
                    &protocol.dense_hamiltonian(t)?,
                    &protocol.dense_derivative(t)?,
                    &measure,
                    &opts,
                )?;
                spectral.operator(&expand(&spectral.chain)?.cd_operator)
            }
            CdSource::Truncated { ansatz, even } => {
                let h = protocol.hamiltonian(t)?;
                let dh = protocol.derivative(t)?;
                let fit = match even {
                    Some(even) => truncated_cd_with_even_basis(&h, &dh, even, ansatz, &measure, &opts)?,
                    None => truncated_cd(&h, &dh, ansatz, &measure, &opts)?,
                };
                fit.cd_operator.dense_matrix(DEFAULT_DENSE_CAP)?
            }
            CdSource::FirstOrderNc => {
                let nc = first_order_nc_cd(&protocol.hamiltonian(t)?, &protocol.derivative(t)?, &measure)?;
                nc.cd_operator.dense_matrix(DEFAULT_DENSE_CAP)?
            }
        };
        Ok(Some(cd))
    }

    /// `H(t) + H_CD(t)` as a dense matrix.
    pub fn generator(&self, protocol: &dyn Protocol, t: f64) -> Result<DMatrix<C64>> {
        let h = protocol.dense_hamiltonian(t)?;
        Ok(match self.operator(protocol, t)? {
            Some(cd) => h + cd,
            None => h,
        })
    }
}

/// Snapshot times `t_start + j (t_end - t_start) / intervals`, `j = 0..=intervals`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub intervals: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 || !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(CdError::InvalidParameter(format!(
                "time grid needs t_end > t_start and at least one interval, got [{t_start}, {t_end}] / {intervals}"
            )));
        }
        Ok(TimeGrid { t_start, t_end, intervals })
    }

    /// The whole protocol `[0, t_f]`.
    pub fn full(protocol: &dyn Protocol, intervals: usize) -> Result<Self> {
        TimeGrid::new(0.0, protocol.t_final(), intervals)
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / self.intervals as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.t_end
        } else {
            self.t_start + j as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.intervals).map(|j| self.time(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Largest accepted change of the fidelity trace (or of the states, without a target)
    /// when the step is halved, and largest accepted norm drift.
    pub tolerance: f64,
    pub max_halvings: usize,
    /// Integrator steps per grid interval for the first attempt; estimated from `||H||`
    /// when absent.
    pub initial_steps: Option<usize>,
    /// Level whose adiabatic continuation defines the fidelity trace.
    pub target_level: Option<usize>,
    pub record_spectra: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            tolerance: 1e-8,
            max_halvings: 12,
            initial_steps: None,
            target_level: Some(0),
            record_spectra: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
    /// `|<n(t)|psi(t)>|^2` against the tracked target level; empty without a target.
    pub fidelity: Vec<f64>,
    /// Instantaneous eigenvalues of `H(t)` at the snapshots, when requested.
    pub spectra: Option<Vec<DVector<f64>>>,
    /// Integrator step of the accepted run and steps per grid interval.
    pub step: f64,
    pub steps_per_interval: usize,
    /// Change of the compared quantity between the accepted run and the one with twice the step.
    pub refinement_change: f64,
    pub max_norm_deviation: f64,
}

impl EvolutionResult {
    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelity.last().copied()
    }

    pub fn final_state(&self) -> &DVector<C64> {
        self.states.last().expect("an evolution has at least one snapshot")
    }
}

/// `|<phi|psi>|^2`, clamped to `[0, 1]` against roundoff.
pub fn fidelity(psi: &DVector<C64>, phi: &DVector<C64>) -> f64 {
    assert_eq!(psi.len(), phi.len(), "fidelity of states with different dimensions");
    phi.dotc(psi).norm_sqr().clamp(0.0, 1.0)
}

fn check_normalized(psi: &DVector<C64>, tol: f64) -> Result<()> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > tol {
        return Err(CdError::NotNormalized(norm));
    }
    Ok(())
}

/// Phase convention shared by all eigenvectors handed out here: largest entry real positive.
fn fix_phase(v: &mut DVector<C64>) {
    let (k, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (k, c)| if c.norm() > best.1 + 1e-12 { (k, c.norm()) } else { best });
    let c = v[k];
    if c.norm() > 0.0 {
        *v *= c.conj() / c.norm();
    }
}

/// Eigenvector of `H(t)` for the `level`-th lowest eigenvalue.
pub fn eigenstate(protocol: &dyn Protocol, t: f64, level: usize) -> Result<DVector<C64>> {
    let (energies, vectors) = hermitian_eigen(&protocol.dense_hamiltonian(t)?);
    if level >= energies.len() {
        return Err(CdError::InvalidParameter(format!("level {level} out of range for dimension {}", energies.len())));
    }
    let mut v = vectors.column(level).into_owned();
    fix_phase(&mut v);
    Ok(v)
}

/// Largest column sum of absolute values, an upper bound on the spectral norm.
fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `K = (G_1 + G_2)/2 - i c [G_2, G_1]`, applied to vectors without forming the commutator.
struct MagnusGenerator {
    g1: DMatrix<C64>,
    g2: DMatrix<C64>,
    c: f64,
}

impl MagnusGenerator {
    fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let a = &self.g1 * v;
        let b = &self.g2 * v;
        let commutator = &self.g2 * &a - &self.g1 * &b;
        (a + b) * C64::new(0.5, 0.0) + commutator * C64::new(0.0, -self.c)
    }

    fn norm_bound(&self) -> f64 {
        let (n1, n2) = (one_norm(&self.g1), one_norm(&self.g2));
        0.5 * (n1 + n2) + 2.0 * self.c * n1 * n2
    }
}

/// `exp(-i dt K) psi` by a Taylor series, split so each piece has `dt ||K|| <= 1`.
fn apply_exponential(k: &MagnusGenerator, dt: f64, psi: &DVector<C64>) -> DVector<C64> {
    let pieces = (dt * k.norm_bound()).ceil().max(1.0) as usize;
    let factor = C64::new(0.0, -dt / pieces as f64);
    let mut out = psi.clone();
    for _ in 0..pieces {
        let mut term = out.clone();
        let mut sum = out.clone();
        for order in 1..=40 {
            term = k.apply(&term) * (factor / order as f64);
            sum += &term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        out = sum;
    }
    out
}

/// Gauss nodes `1/2 -+ sqrt(3)/6` of one step.
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9;

/// One fourth-order Magnus step: `exp(-i dt K)` with
/// `K = (G_1 + G_2)/2 - i (sqrt 3 / 12) dt [G_2, G_1]` from the generator at the Gauss nodes.
fn magnus_step(protocol: &dyn Protocol, cd: &CdSource, psi: &DVector<C64>, t: f64, dt: f64) -> Result<DVector<C64>> {
    let k = MagnusGenerator {
        g1: cd.generator(protocol, t + (0.5 - GAUSS_OFFSET) * dt)?,
        g2: cd.generator(protocol, t + (0.5 + GAUSS_OFFSET) * dt)?,
        c: 3f64.sqrt() / 12.0 * dt,
    };
    Ok(apply_exponential(&k, dt, psi))
}

/// One fixed-step run; returns the snapshots.
fn integrate(
    protocol: &dyn Protocol,
    cd: &CdSource,
    psi0: &DVector<C64>,
    grid: &TimeGrid,
    steps: usize,
) -> Result<Vec<DVector<C64>>> {
    let dt = grid.spacing() / steps as f64;
    let mut psi = psi0.clone();
    let mut states = Vec::with_capacity(grid.intervals + 1);
    states.push(psi.clone());
    for j in 0..grid.intervals {
        let start = grid.time(j);
        for s in 0..steps {
            psi = magnus_step(protocol, cd, &psi, start + s as f64 * dt, dt)?;
        }
        states.push(psi.clone());
    }
    Ok(states)
}

fn initial_steps(protocol: &dyn Protocol, cd: &CdSource, grid: &TimeGrid) -> Result<usize> {
    let samples = 4;
    let mut scale = 0.0f64;
    for k in 0..=samples {
        let t = grid.t_start + (grid.t_end - grid.t_start) * k as f64 / samples as f64;
        scale = scale.max(hermitian_norm(&cd.generator(protocol, t)?));
    }
    Ok(((grid.spacing() * scale / INITIAL_STEP_PHASE).ceil() as usize).max(1))
}

/// Integrates `i d/dt psi = (H + H_CD) psi` on `grid`, halving the step until the fidelity
/// trace (or, without a target level, the state trajectory) changes by less than
/// `opts.tolerance` and the norm stays within it.
pub fn evolve(
    protocol: &dyn Protocol,
    cd: &CdSource,
    psi0: &DVector<C64>,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    check_normalized(psi0, 1e-12)?;
    let dim = protocol.dense_hamiltonian(grid.t_start)?.nrows();
    if psi0.len() != dim {
        return Err(CdError::LengthMismatch { expected: dim, got: psi0.len() });
    }
    let reference = match opts.target_level {
        Some(level) => Some(adiabatic_reference(protocol, level, grid)?),
        None => None,
    };
    let trace = |states: &[DVector<C64>]| -> Vec<f64> {
        match &reference {
            Some(r) => states.iter().zip(&r.states).map(|(psi, n)| fidelity(psi, n)).collect(),
            None => Vec::new(),
        }
    };

    let mut steps = match opts.initial_steps {
        Some(s) => s.max(1),
        None => initial_steps(protocol, cd, grid)?,
    };
    let mut coarse = integrate(protocol, cd, psi0, grid, steps)?;
    let mut coarse_trace = trace(&coarse);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_halvings {
        steps *= 2;
        let fine = integrate(protocol, cd, psi0, grid, steps)?;
        let fine_trace = trace(&fine);
        change = if reference.is_some() {
            fine_trace.iter().zip(&coarse_trace).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let drift = fine.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
        if change < opts.tolerance && drift < opts.tolerance {
            let spectra = if opts.record_spectra {
                Some(
                    grid.times()
                        .iter()
                        .map(|&t| Ok(hermitian_eigen(&protocol.dense_hamiltonian(t)?).0))
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                None
            };
            return Ok(EvolutionResult {
                times: grid.times(),
                states: fine,
                fidelity: fine_trace,
                spectra,
                step: grid.spacing() / steps as f64,
                steps_per_interval: steps,
                refinement_change: change,
                max_norm_deviation: drift,
            });
        }
        coarse = fine;
        coarse_trace = fine_trace;
    }
    Err(CdError::StepRefinement { halvings: opts.max_halvings, change })
}

/// Eigenstate of one level continued along a grid.
#[derive(Clone, Debug)]
pub struct AdiabaticTrajectory {
    pub times: Vec<f64>,
    /// `e^{-i int e_n} |n(t)>` with `|n(t)>` parallel transported from its start.
    pub states: Vec<DVector<C64>>,
    pub energies: Vec<f64>,
    /// Distance from the tracked level to its nearest neighbour.
    pub gaps: Vec<f64>,
}

/// Follows level `level` (counted from the bottom at `grid.t_start`) by maximal overlap
/// between neighbouring eigenbases, fixing phases by discrete parallel transport and
/// attaching the dynamical phase from Simpson's rule on the tracking points.
pub fn adiabatic_reference(protocol: &dyn Protocol, level: usize, grid: &TimeGrid) -> Result<AdiabaticTrajectory> {
    let fine = TimeGrid::new(grid.t_start, grid.t_end, grid.intervals * TRACKING_SUBSTEPS)?;
    let mut current = eigenstate(protocol, grid.t_start, level)?;
    let mut phase = 0.0;
    let mut previous_energy = 0.0;
    let mut out =
        AdiabaticTrajectory { times: grid.times(), states: Vec::new(), energies: Vec::new(), gaps: Vec::new() };
    let mut fine_energies = Vec::with_capacity(fine.intervals + 1);
    for j in 0..=fine.intervals {
        let t = fine.time(j);
        let h = protocol.dense_hamiltonian(t)?;
        let (energies, vectors) = hermitian_eigen(&h);
        let tracked = if j == 0 {
            level
        } else {
            (0..energies.len())
                .map(|k| (k, vectors.column(k).dotc(&current).norm()))
                .fold((0, -1.0), |best, (k, o)| if o > best.1 { (k, o) } else { best })
                .0
        };
        let gap = (0..energies.len())
            .filter(|&k| k != tracked)
            .map(|k| (energies[k] - energies[tracked]).abs())
            .fold(f64::INFINITY, f64::min);
        let h_norm = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if gap <= CROSSING_TOL * h_norm {
            return Err(CdError::LevelCrossing { level: tracked, time: t, gap });
        }
        let mut v = vectors.column(tracked).into_owned();
        if j > 0 {
            let overlap = v.dotc(&current);
            v *= overlap / overlap.norm();
        } else {
            fix_phase(&mut v);
        }
        current = v;
        fine_energies.push(energies[tracked]);
        if j > 0 && j % 2 == 0 {
            // Simpson on the last two sub-intervals.
            let e = &fine_energies;
            phase += fine.spacing() / 3.0 * (e[j - 2] + 4.0 * e[j - 1] + e[j]);
        }
        if j % TRACKING_SUBSTEPS == 0 {
            previous_energy = energies[tracked];
            out.states.push(&current * C64::from_polar(1.0, -phase));
            out.energies.push(previous_energy);
            out.gaps.push(gap);
        }
    }
    debug_assert_eq!(out.energies.last().copied(), Some(previous_energy));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::stirap::Stirap;
    use crate::models::two_level::TwoLevelSweep;
    use crate::operator::OperatorExpr;

    /// A time-independent Hamiltonian.
    struct Constant(DMatrix<C64>);

    impl Protocol for Constant {
        fn t_final(&self) -> f64 {
            1.0
        }
        fn hamiltonian(&self, _t: f64) -> Result<OperatorExpr> {
            Ok(OperatorExpr::Dense(self.0.clone()))
        }
        fn derivative(&self, _t: f64) -> Result<OperatorExpr> {
            Ok(OperatorExpr::Dense(DMatrix::zeros(self.0.nrows(), self.0.nrows())))
        }
    }

    fn sweep(t_final: f64) -> TwoLevelSweep {
        TwoLevelSweep { h0: 1.0, ramp: 0.5, theta_start: 0.2, theta_end: 2.9, t_final }
    }

    #[test]
    fn fidelity_limits() {
        let a = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let b = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, 1.0)]);
        assert_eq!(fidelity(&a, &a), 1.0);
        assert_eq!(fidelity(&a, &b), 0.0);
    }

    #[test]
    fn constant_hamiltonian_reference_is_a_phase() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.3, 0.2), C64::new(0.3, -0.2), C64::new(-0.5, 0.0)],
        );
        let protocol = Constant(h.clone());
        let grid = TimeGrid::new(0.0, 2.0, 4).unwrap();
        let reference = adiabatic_reference(&protocol, 1, &grid).unwrap();
        let (energies, _) = hermitian_eigen(&h);
        let n = eigenstate(&protocol, 0.0, 1).unwrap();
        for (t, state) in grid.times().iter().zip(&reference.states) {
            let expected = &n * C64::from_polar(1.0, -energies[1] * t);
            assert!((state - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_cd_follows_the_reference_state_including_phase() {
        let protocol = sweep(0.8);
        let grid = TimeGrid::full(&protocol, 16).unwrap();
        let psi0 = eigenstate(&protocol, 0.0, 0).unwrap();
        let run = evolve(&protocol, &CdSource::Exact, &psi0, &grid, &EvolveOptions::default()).unwrap();
        let reference = adiabatic_reference(&protocol, 0, &grid).unwrap();
        for (psi, r) in run.states.iter().zip(&reference.states) {
            assert!(fidelity(psi, r) > 1.0 - 1e-8);
            assert!((r.dotc(psi) - C64::new(1.0, 0.0)).norm() < 1e-5);
        }
        assert!(run.max_norm_deviation < 1e-8);
        assert!(run.final_fidelity().unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn fast_sweep_without_cd_leaves_the_ground_state() {
        let protocol = sweep(0.8);
        let grid = TimeGrid::full(&protocol, 4).unwrap();
        let psi0 = eigenstate(&protocol, 0.0, 0).unwrap();
        let run = evolve(&protocol, &CdSource::None, &psi0, &grid, &EvolveOptions::default()).unwrap();
        assert!(run.final_fidelity().unwrap() < 0.9);
        let slow = sweep(400.0);
        let grid = TimeGrid::full(&slow, 4).unwrap();
        let run = evolve(&slow, &CdSource::None, &psi0, &grid, &EvolveOptions::default()).unwrap();
        assert!(run.final_fidelity().unwrap() > 1.0 - 1e-3);
    }

    #[test]
    fn krylov_and_exact_sources_agree() {
        let protocol = Stirap::standard(10.0);
        for t in [2.0, 5.0, 7.5] {
            let exact = CdSource::Exact.operator(&protocol, t).unwrap().unwrap();
            let krylov = CdSource::Krylov.operator(&protocol, t).unwrap().unwrap();
            assert!((exact - krylov).camax() < 1e-9);
        }
    }

    #[test]
    fn stirap_with_exact_cd_transfers_population_at_short_times() {
        let protocol = Stirap::standard(10.0);
        let grid = TimeGrid::full(&protocol, 20).unwrap();
        let one = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let dark = eigenstate(&protocol, 0.0, 1).unwrap();
        assert!(fidelity(&dark, &one) > 1.0 - 1e-6);
        let opts = EvolveOptions { target_level: Some(1), ..EvolveOptions::default() };
        let with = evolve(&protocol, &CdSource::Exact, &one, &grid, &opts).unwrap();
        let without = evolve(&protocol, &CdSource::None, &one, &grid, &opts).unwrap();
        let population = |psi: &DVector<C64>| psi[2].norm_sqr();
        assert!(population(with.final_state()) > 1.0 - 1e-6);
        assert!(population(without.final_state()) < 0.9);
        let reference = adiabatic_reference(&protocol, 1, &grid).unwrap();
        for (psi, r) in with.states.iter().zip(&reference.states) {
            assert!(fidelity(psi, r) > 1.0 - 1e-6);
        }
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let protocol = sweep(1.0);
        let grid = TimeGrid::full(&protocol, 2).unwrap();
        let psi = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(
            evolve(&protocol, &CdSource::None, &psi, &grid, &EvolveOptions::default()),
            Err(CdError::NotNormalized(_))
        ));
    }

    #[test]
    fn crossing_levels_are_reported() {
        struct Crossing;
        impl Protocol for Crossing {
            fn t_final(&self) -> f64 {
                2.0
            }
            fn hamiltonian(&self, t: f64) -> Result<OperatorExpr> {
                let z = t - 1.0;
                Ok(OperatorExpr::Dense(DMatrix::from_row_slice(
                    2,
                    2,
                    &[C64::new(z, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-z, 0.0)],
                )))
            }
            fn derivative(&self, _t: f64) -> Result<OperatorExpr> {
                Ok(OperatorExpr::Dense(DMatrix::from_row_slice(
                    2,
                    2,
                    &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
                )))
            }
        }
        let grid = TimeGrid::new(0.0, 2.0, 2).unwrap();
        assert!(matches!(adiabatic_reference(&Crossing, 0, &grid), Err(CdError::LevelCrossing { .. })));
    }
}
