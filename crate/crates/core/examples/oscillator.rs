//! Harmonic oscillator with a moving centre and a changing frequency, in the structured
//! five-element basis under a thermal measure.

use krylov_cd::agp::expand;
use krylov_cd::lanczos::LanczosOptions;
use krylov_cd::measure::Measure;
use krylov_cd::models::oscillator::{Oscillator, DEFAULT_FOCK_CUTOFF};

fn main() -> krylov_cd::Result<()> {
    let gibbs = Measure::Gibbs { beta: 1.0 };
    for (q0_dot, omega_dot) in [(0.3, 0.2), (0.0, 0.2), (0.3, 0.0)] {
        let m = Oscillator { mass: 1.3, omega: 0.8, q0: 0.2, omega_dot, q0_dot, fock_cutoff: DEFAULT_FOCK_CUTOFF };
        let chain = m.chain(&gibbs, &LanczosOptions::default())?;
        let cd = expand(&chain)?.cd_operator;
        println!(
            "q0_dot = {q0_dot}, omega_dot = {omega_dot}: d = {}, d_A = {}, CD coordinates ({:.6}, {:.6}), closed form {:?}",
            chain.d(),
            chain.d_a(),
            cd[3].re,
            cd[4].re,
            m.reference_cd(&gibbs)?
        );
    }
    let m =
        Oscillator { mass: 1.3, omega: 0.8, q0: 0.2, omega_dot: 0.2, q0_dot: 0.3, fock_cutoff: DEFAULT_FOCK_CUTOFF };
    for beta in [0.5, 1.0, 2.0] {
        println!("beta = {beta}: first-term share {:.6}", m.first_term_ratio(&Measure::Gibbs { beta })?);
    }
    Ok(())
}
