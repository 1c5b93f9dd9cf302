use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chainbath_cli::commands;
use chainbath_cli::{CliError, Resolved, RunConfig, Solver};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "chainbath",
    version,
    about = "Star-to-chain bath mapping and exact tracer dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for random initial conditions (overrides `initial.seed`).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Map the bath to a chain and write chain.toml.
    Transform(Common),
    /// Compute x(t) and F_N(t) with the chosen solver.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Solver for x(t) (overrides `[simulate] solver`).
        #[arg(long, value_enum, value_name = "NAME")]
        solver: Option<Solver>,
    },
    /// Dump the nested memory kernels K_0 … K_N.
    Kernels(Common),
    /// Evaluate the generalized Langevin equation residual.
    GleCheck(Common),
    /// Run the verification checks and write a report.
    Verify(Common),
}

fn load(common: &Common) -> Result<(Resolved, PathBuf), CliError> {
    let config = RunConfig::load(&common.config)?;
    let resolved = config.resolve(common.seed)?;
    Ok((resolved, config.output_dir(common.out.as_deref())))
}

type Handler = fn(&Resolved, &Path) -> Result<String, CliError>;

fn run(cli: Cli) -> Result<String, CliError> {
    let (common, handler, solver): (&Common, Handler, Option<Solver>) = match &cli.command {
        Command::Transform(c) => (c, commands::transform, None),
        Command::Simulate { common, solver } => (common, commands::simulate, *solver),
        Command::Kernels(c) => (c, commands::kernels, None),
        Command::GleCheck(c) => (c, commands::gle_check, None),
        Command::Verify(c) => (c, commands::verify, None),
    };
    let (mut resolved, dir) = load(common)?;
    if let Some(s) = solver {
        resolved.solver = s;
    }
    handler(&resolved, &dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            if let Some(hint) = commands::error_hint(&err) {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(err.exit_code())
        }
    }
}
