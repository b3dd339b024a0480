//! AGP coefficients for three stylized Lanczos profiles of the same length.

use krylov_cd::agp::solve_alpha;
use krylov_cd::models::profiles::Profile;

fn main() -> krylov_cd::Result<()> {
    for profile in Profile::all() {
        let b = profile.coefficients(21);
        let alpha = solve_alpha(&b)?;
        let shown: Vec<String> = alpha.iter().map(|a| format!("{a:.3e}")).collect();
        println!("{:<6} {}", profile.name(), shown.join(" "));
    }
    Ok(())
}
