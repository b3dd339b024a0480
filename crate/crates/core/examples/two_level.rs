//! A spin in a rotating, growing field: the Krylov chain has three elements and the
//! assembled CD term is `(1/2) (n x n_dot) . sigma`.

use krylov_cd::agp::expand;
use krylov_cd::lanczos::{build_krylov_chain, LanczosOptions};
use krylov_cd::measure::Measure;
use krylov_cd::models::two_level::TwoLevel;
use nalgebra::Vector3;

fn main() -> krylov_cd::Result<()> {
    let theta: f64 = 0.7;
    let model = TwoLevel::new(
        2.0,
        Vector3::new(theta.sin(), 0.0, theta.cos()),
        0.4,
        Vector3::new(theta.cos(), 0.0, -theta.sin()) * 1.3,
    )?;
    let chain =
        build_krylov_chain(&model.hamiltonian(), &model.derivative(), &Measure::default(), &LanczosOptions::default())?;
    println!("d = {}, b = {:?}", chain.d(), chain.b);
    let expansion = expand(&chain)?;
    let cd = expansion.cd_operator.dense_matrix(4)?;
    println!("alpha = {:?}", expansion.alpha);
    println!("|H_CD - closed form| = {:.2e}", (cd - model.reference_cd()).camax());
    Ok(())
}
