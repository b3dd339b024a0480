//! Toda flow: the chain stops after two elements and the CD term is the nearest-neighbour
//! current; a generic flow keeps the single-particle spectrum fixed.

use krylov_cd::agp::solve_alpha;
use krylov_cd::lanczos::LanczosOptions;
use krylov_cd::linalg::symmetric_eigen_sorted;
use krylov_cd::models::toda::{integrate, snapshot, TodaFlow};

fn main() -> krylov_cd::Result<()> {
    let flow = TodaFlow::new(6, 1.0, 0.3, 5.0)?;
    for t in [0.0, 2.5, 5.0] {
        let m = flow.at(t)?;
        let chain = m.chain(&LanczosOptions::default())?;
        let q = m.norm_fractions(&chain, &solve_alpha(&chain.b)?);
        println!("t = {t}: d = {}, norm fractions by body count {:?} -> {:?}", chain.d(), q.bodies, q.exact);
    }
    let h0 = [0.4, -0.3, 0.9, 0.1, -0.6, 0.2, 0.7, -0.8];
    let v0 = [0.7, 0.5, 0.8, 0.3, 0.9, 0.6, 0.4];
    let (h, v) = integrate(&h0, &v0, 1e-3, 50_000);
    let (before, _) = symmetric_eigen_sorted(&snapshot(&h0, &v0)?.single_particle_matrix());
    let (after, _) = symmetric_eigen_sorted(&snapshot(&h, &v)?.single_particle_matrix());
    println!("after t = 50 the couplings are {v:.3?}; spectrum drift {:.2e}", (before - after).amax());
    Ok(())
}
