//! The three ways of solving an odd-length chain: the tridiagonal system, the zero mode
//! of the B-matrix, and the Laplace transform of the operator wave function.

use krylov_cd::agp::{agp_norm, solve_alpha_odd_tridiagonal, solve_alpha_odd_zero_mode};
use krylov_cd::wavefunction::{alpha_via_laplace, evolve_wavefunction, BMatrix};

fn main() -> krylov_cd::Result<()> {
    let b = [1.0, 0.8, 1.3, 0.9, 1.7, 1.1, 0.6];
    let tridiagonal = solve_alpha_odd_tridiagonal(&b)?;
    let zero_mode = solve_alpha_odd_zero_mode(&b)?;
    let laplace = alpha_via_laplace(&BMatrix::from_chain_coefficients(&b)?);
    println!("tridiagonal {tridiagonal:?}");
    println!("zero mode   {:?} (phi = {:?})", zero_mode.alpha, zero_mode.phi);
    println!("laplace     {laplace:?}");
    println!("(A, A) = {:.12}", agp_norm(&b, &tridiagonal)?);

    let system = BMatrix::from_chain_coefficients(&b)?.eigensystem();
    for s in [0.0, 1.0, 5.0] {
        let phi = evolve_wavefunction(&system, s);
        let norm: f64 = phi.iter().map(|x| x * x).sum();
        println!("s = {s}: phi = {:?}, norm {norm:.12}", phi.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    }
    Ok(())
}
