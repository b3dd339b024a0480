//! Six-spin annealing ring: final ground-state fidelity without CD driving, with the
//! truncated three-operator CD term, and with the exact one.

use krylov_cd::dynamics::{eigenstate, evolve, CdSource, EvolveOptions, TimeGrid};
use krylov_cd::models::ising_longitudinal::IsingLongitudinal;

fn main() -> krylov_cd::Result<()> {
    for t_final in [1.0, 10.0] {
        let model = IsingLongitudinal::new(6, 1.0, 1.0, 1.0, t_final)?;
        let sources = [
            CdSource::None,
            CdSource::Truncated { ansatz: model.odd_basis()?, even: Some(model.even_basis()?) },
            CdSource::Exact,
        ];
        let psi0 = eigenstate(&model, 0.0, 0)?;
        let grid = TimeGrid::full(&model, 1)?;
        for source in &sources {
            let run = evolve(&model, source, &psi0, &grid, &EvolveOptions::default())?;
            println!(
                "t_f = {t_final}: {:<9} f = {:.9} ({} steps)",
                source.name(),
                run.final_fidelity().expect("target level set"),
                run.steps_per_interval
            );
        }
    }
    Ok(())
}
