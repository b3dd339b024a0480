//! Transverse-field ring: Pauli-string Lanczos against the two-term recursion, and the
//! slow decay of the AGP coefficients at the critical field.

use krylov_cd::agp::{expand, solve_alpha};
use krylov_cd::lanczos::{build_krylov_chain, LanczosOptions};
use krylov_cd::models::tfim::Tfim;

fn main() -> krylov_cd::Result<()> {
    let ring = Tfim::new(8, 1.0, 0.6, 1.0)?;
    let chain =
        build_krylov_chain(&ring.hamiltonian()?, &ring.derivative()?, &ring.measure(), &LanczosOptions::default())?;
    let analytic = ring.analytic_b(1.0 / 8.0);
    let err = chain.b.iter().zip(&analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("n_s = 8: d = {}, largest deviation from the recursion {err:.2e}", chain.d());
    println!("signed coefficients {:?}", expand(&chain)?.signed_coefficients());

    for g in [0.5, 1.0, 2.0] {
        let big = Tfim::new(200, 1.0, g, 1.0)?;
        let alpha = solve_alpha(&big.analytic_b(1.0 / 200.0))?;
        let tail: Vec<String> = [0, 9, 49, 99, 198].iter().map(|&k| format!("{:.3e}", alpha[k].abs())).collect();
        println!("n_s = 200, g = {g}: |alpha_k| at k = 1, 10, 50, 100, 199: {}", tail.join(" "));
    }
    Ok(())
}
