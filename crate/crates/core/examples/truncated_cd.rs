//! Truncated CD on the six-spin annealing ring with three odd operators, next to the
//! direct least-squares minimizer and the first-order nested commutator.

use krylov_cd::lanczos::LanczosOptions;
use krylov_cd::models::ising_longitudinal::IsingLongitudinal;
use krylov_cd::models::Protocol;
use krylov_cd::variational::{first_order_nc_cd, least_squares_variational_oracle, truncated_cd_with_even_basis};

fn main() -> krylov_cd::Result<()> {
    let model = IsingLongitudinal::new(6, 1.0, 1.0, 1.0, 10.0)?;
    let (odd, even) = (model.odd_basis()?, model.even_basis()?);
    for t in [1.0, 5.0, 9.0] {
        let (h, dh) = (model.hamiltonian(t)?, model.derivative(t)?);
        let fit = truncated_cd_with_even_basis(&h, &dh, &even, &odd, &model.measure(), &LanczosOptions::default())?;
        let oracle = least_squares_variational_oracle(&h, &dh, odd.elements(), &model.measure())?;
        let nc = first_order_nc_cd(&h, &dh, &model.measure())?;
        println!(
            "t = {t}: restricted d = {}, a = {:?}, least squares {:?}, nested-commutator alpha = {:.6}",
            fit.chain_b.len(),
            model.plotted_coefficients(&fit.coefficients),
            model.plotted_coefficients(&oracle.coefficients),
            nc.alpha_nc
        );
    }
    Ok(())
}
