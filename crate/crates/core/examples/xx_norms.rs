//! Six-site XX annealing: body-count fractions of the CD norm and the norm next to its
//! reductions, halfway through the sweep.

use krylov_cd::agp::solve_alpha;
use krylov_cd::lanczos::LanczosOptions;
use krylov_cd::models::xx::{Couplings, XxAnneal};

fn main() -> krylov_cd::Result<()> {
    for couplings in [Couplings::Uniform, Couplings::Random { seed: 2024 }] {
        let protocol = XxAnneal::standard(6, couplings.clone());
        let model = protocol.at(0.5 * protocol.t_final)?;
        let chain = model.chain(&LanczosOptions::default())?;
        let alpha = solve_alpha(&chain.b)?;
        let q = model.norm_fractions(&chain, &alpha);
        println!("{couplings:?}: d = {}", chain.d());
        for (j, p) in q.bodies.iter().enumerate() {
            println!("  p = {p}: per term {:.6}, exact {:.6}", q.per_term[j], q.exact[j]);
        }
        println!("  {:?}", model.norm_traces(&chain, &alpha));
    }
    Ok(())
}
