//! Three-level transfer: how each odd Krylov element contributes to the CD coefficients
//! along the pulse sequence.

use krylov_cd::lanczos::LanczosOptions;
use krylov_cd::models::stirap::Stirap;

fn main() -> krylov_cd::Result<()> {
    let s = Stirap::default();
    let opts = LanczosOptions::default();
    println!("{:>6} {:>2} {:>14} {:>14} {:>14}", "t", "d", "a_1", "a_2", "a_3");
    for j in 1..10 {
        let t = s.t_final * j as f64 / 10.0;
        let split = s.term_decomposition(t, &opts)?;
        let total = split.total();
        println!("{t:>6.1} {:>2} {:>14.6e} {:>14.6e} {:>14.6e}", split.d, total[0], total[1], total[2]);
        let reference = s.reference_coefficients(t);
        let err = (0..3).map(|mu| (total[mu] - reference[mu]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "closed form missed by {err:e}");
    }
    Ok(())
}
