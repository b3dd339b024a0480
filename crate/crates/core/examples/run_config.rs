//! Running a config through the library instead of the command line.

use krylov_cd::runner::{cmd_agp, cmd_lanczos, Experiment, Format};

const CONFIG: &str = r#"
name = "xx_quarter"

[model.xx_anneal]
n_sites = 4
v0 = 1.0
h0 = 2.0
t_final = 100.0
couplings = { kind = "random", seed = 3 }

[points]
fractions = [0.25, 0.5, 0.75]

[agp]
norm_fractions = true
"#;

fn main() -> krylov_cd::Result<()> {
    let experiment = Experiment::from_text(CONFIG, None, 1)?;
    let dir = std::env::temp_dir().join("krylov-cd-example");
    for report in [cmd_lanczos(&experiment)?, cmd_agp(&experiment)?] {
        for path in report.write(&dir, Format::Csv)? {
            println!("wrote {}", path.display());
        }
    }
    println!("{}", std::fs::read_to_string(dir.join("xx_quarter_agp_fractions.csv"))?);
    Ok(())
}
