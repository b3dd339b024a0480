//! Whole-model properties: long chains, approximant norms and driven evolutions.

use krylov_cd::agp::expand;
use krylov_cd::dynamics::{eigenstate, evolve, CdSource, EvolveOptions, TimeGrid};
use krylov_cd::lanczos::{build_krylov_chain, LanczosOptions};
use krylov_cd::measure::{Measure, Metric};
use krylov_cd::models::ising_longitudinal::IsingLongitudinal;
use krylov_cd::models::stirap::Stirap;
use krylov_cd::models::toda::TodaFlow;
use krylov_cd::models::two_level::TwoLevelSweep;
use krylov_cd::models::xx::{Couplings, XxAnneal};
use krylov_cd::models::Protocol;
use krylov_cd::operator::OperatorExpr;
use krylov_cd::variational::first_order_nc_cd;
use nalgebra::DMatrix;

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[sorted.len() / 2]
}

#[test]
fn long_random_xx_chain_has_a_flat_band() {
    let anneal = XxAnneal::standard(100, Couplings::Random { seed: 7 });
    let opts = LanczosOptions { max_steps: Some(400), ..LanczosOptions::default() };
    let chain = anneal.at(50.0).unwrap().chain(&opts).unwrap();
    let b = &chain.b[1..];
    assert!(b.len() > 100, "chain stopped after {} elements", chain.d());
    let max = b.iter().copied().fold(0.0, f64::max);
    let ratio = max / median(b);
    assert!(ratio < 10.0, "max / median = {ratio}");
}

fn norm(op: &OperatorExpr) -> f64 {
    Metric::uniform(1.0).norm(op).unwrap()
}

#[test]
fn nested_commutator_underestimates_the_xx_norm_peak() {
    let anneal = XxAnneal::standard(6, Couplings::Random { seed: 2024 });
    let (mut peak_nc, mut peak_exact) = (0.0f64, 0.0f64);
    for k in 0..=50 {
        let t = anneal.t_final * k as f64 / 50.0;
        let (h, dh) = (anneal.hamiltonian(t).unwrap(), anneal.derivative(t).unwrap());
        let nc = first_order_nc_cd(&h, &dh, &Measure::default()).unwrap();
        let chain = build_krylov_chain(&h, &dh, &Measure::default(), &LanczosOptions::default()).unwrap();
        peak_nc = peak_nc.max(norm(&nc.cd_operator));
        peak_exact = peak_exact.max(norm(&expand(&chain).unwrap().cd_operator));
    }
    assert!(peak_nc <= peak_exact, "{peak_nc} > {peak_exact}");
}

#[test]
fn nested_commutator_is_proportional_to_the_toda_cd_term() {
    let flow = TodaFlow::new(6, 1.0, -0.9, 10.0).unwrap();
    for t in [0.5, 2.0, 6.0] {
        let model = flow.at(t).unwrap();
        let nc = first_order_nc_cd(&model.hamiltonian().unwrap(), &model.derivative().unwrap(), &Measure::default())
            .unwrap();
        let a = nc.cd_operator.dense_matrix(64).unwrap();
        let exact = OperatorExpr::Pauli(model.toda_cd().unwrap()).dense_matrix(64).unwrap();
        let ratio = exact.dotc(&a) / exact.dotc(&exact);
        let residual: DMatrix<_> = &a - &exact * ratio;
        assert!(residual.norm() < 1e-10 * a.norm(), "t = {t}: residual {}", residual.norm());
        assert!(ratio.im.abs() < 1e-12 && ratio.re > 0.0, "ratio {ratio}");
    }
}

fn run(protocol: &dyn Protocol, cd: &CdSource, intervals: usize) -> krylov_cd::dynamics::EvolutionResult {
    let psi0 = eigenstate(protocol, 0.0, 0).unwrap();
    let grid = TimeGrid::full(protocol, intervals).unwrap();
    evolve(protocol, cd, &psi0, &grid, &EvolveOptions::default()).unwrap()
}

fn durations() -> Vec<f64> {
    (0..=8).map(|k| 0.1 * 10f64.powf(k as f64 / 4.0)).collect()
}

fn protocols(t_final: f64) -> Vec<(&'static str, Box<dyn Protocol>)> {
    let stirap = Stirap { t_final, ..Stirap::default() };
    vec![
        ("two-level", Box::new(TwoLevelSweep { h0: 1.0, ramp: 0.5, theta_start: 0.2, theta_end: 2.9, t_final })),
        ("three-level", Box::new(stirap)),
        ("ising ring", Box::new(IsingLongitudinal::new(4, 1.0, 0.5, 1.0, t_final).unwrap())),
    ]
}

#[test]
fn exact_cd_holds_the_tracked_level_and_the_norm() {
    for t_final in durations() {
        for (name, protocol) in protocols(t_final) {
            let result = run(&*protocol, &CdSource::Exact, 8);
            assert!(
                result.max_norm_deviation < 1e-8,
                "{name} t_f = {t_final}: norm drift {}",
                result.max_norm_deviation
            );
            for (t, f) in result.times.iter().zip(&result.fidelity) {
                assert!(*f >= 1.0 - 1e-6, "{name} t_f = {t_final}, t = {t}: fidelity {f}");
            }
        }
    }
}

/// Slower sweeps should not do worse without CD; small dips near quasi-crossings are
/// reported rather than failed.
#[test]
fn bare_sweeps_trend_towards_adiabatic() {
    let grid: Vec<f64> = (0..=20).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    for name in ["two-level", "three-level", "ising ring"] {
        let fidelities: Vec<f64> = grid
            .iter()
            .map(|&t_final| {
                let (_, protocol) = protocols(t_final).into_iter().find(|(n, _)| *n == name).unwrap();
                let result = run(&*protocol, &CdSource::None, 1);
                assert!(result.max_norm_deviation < 1e-8);
                result.final_fidelity().unwrap()
            })
            .collect();
        let dips: Vec<_> = fidelities
            .windows(2)
            .zip(&grid)
            .filter(|(w, _)| w[1] < w[0] - 1e-3)
            .map(|(w, t)| format!("t_f = {t:.3}: {:.4} -> {:.4}", w[0], w[1]))
            .collect();
        if !dips.is_empty() {
            eprintln!("{name}: fidelity dips without CD (flagged): {}", dips.join("; "));
        }
        let first = fidelities[0];
        let last = *fidelities.last().unwrap();
        assert!(last > first, "{name}: {first} at the fastest sweep, {last} at the slowest");
    }
}
