//! The Krylov CD term against the eigenbasis AGP on a small transverse-field ramp, under
//! two different measures.

use krylov_cd::agp::{expand, spectral_agp};
use krylov_cd::lanczos::{build_krylov_chain, LanczosOptions};
use krylov_cd::measure::Measure;
use krylov_cd::models::tfim::TfimRamp;
use krylov_cd::models::Protocol;
use krylov_cd::operator::OperatorExpr;

fn main() -> krylov_cd::Result<()> {
    let ramp = TfimRamp { n_sites: 4, v: 1.0, g_start: 2.0, g_end: 0.4, t_final: 1.0 };
    for t in [0.1, 0.5, 0.9] {
        let h = ramp.dense_hamiltonian(t)?;
        let dh = ramp.dense_derivative(t)?;
        let oracle = spectral_agp(&h, &dh)?;
        for measure in [ramp.measure(), Measure::Gibbs { beta: 1.0 }] {
            let chain = build_krylov_chain(
                &OperatorExpr::Dense(h.clone()),
                &OperatorExpr::Dense(dh.clone()),
                &measure,
                &LanczosOptions::default(),
            )?;
            let cd = expand(&chain)?.cd_operator.dense_matrix(16)?;
            println!(
                "t = {t}, {measure:?}: d = {}, |H_CD - eigenbasis AGP| = {:.2e}",
                chain.d(),
                (cd - &oracle).camax()
            );
        }
    }
    Ok(())
}
