use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use krylov_cd::runner::verify::{run_check, run_suite, Faults, Suite};
use krylov_cd::runner::{cmd_agp, cmd_evolve, cmd_lanczos, Config, Experiment, Format, Report};
use krylov_cd::Result;

#[derive(Parser)]
#[command(name = "krylov-cd", version, about = "Counterdiabatic terms from operator-space Lanczos chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lanczos coefficients at each configured point.
    Lanczos(RunArgs),
    /// AGP coefficients and the decompositions requested in `[agp]`.
    Agp(RunArgs),
    /// Final fidelities with and without CD driving.
    Evolve(RunArgs),
    /// Oracle and invariant checks; exits nonzero on any failure.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent points and runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the seed of stochastic models.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run the complete acceptance sizes instead of the quick ones.
    #[arg(long)]
    full: bool,
    /// Worker threads for the figure-data runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Run only these checks (by number).
    #[arg(long = "check")]
    only: Vec<usize>,
    /// Test hook: scales every chain coefficient checked against a closed form by `1 + x`.
    #[arg(long, hide = true)]
    perturb_b: Option<f64>,
}

fn run(args: &RunArgs, command: fn(&Experiment) -> Result<Report>) -> Result<()> {
    let (config, text) = Config::load(&args.config)?;
    let experiment = Experiment::new(config, text, args.seed, args.jobs)?;
    let report = command(&experiment)?;
    for path in report.write(&args.out, args.format)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Lanczos(args) => run(args, cmd_lanczos),
        Command::Agp(args) => run(args, cmd_agp),
        Command::Evolve(args) => run(args, cmd_evolve),
        Command::Verify(args) => {
            let suite = if args.full { Suite::Full } else { Suite::Quick };
            let faults = Faults { perturb_b: args.perturb_b };
            let results = if args.only.is_empty() {
                run_suite(suite, &faults, args.jobs)
            } else {
                args.only.iter().map(|id| run_check(*id, suite, &faults, args.jobs)).collect()
            };
            print!("{}", krylov_cd::runner::verify::table(&results));
            return if results.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
