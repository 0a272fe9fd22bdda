use std::path::PathBuf;
use std::process::ExitCode;

use cavitation_cli::app::{self, Options, Outcome};
use cavitation_cli::config::{Resolved, RunConfig};
use cavitation_cli::AppError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cavitate", version, about = "Self-similar cavitation in radial elastodynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; built-in reference run if omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Output directory (overrides [output].dir).
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// Write SVG figures (overrides [output].svg).
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,

    #[arg(long, overrides_with = "svg")]
    no_svg: bool,

    /// Worker threads for parameter sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the energy hypotheses.
    Check(Common),
    /// Solve the cavitating trajectory and locate the connection point.
    Cavity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated cavity speeds; the sweep grid if omitted.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        phi0: Vec<f64>,
    },
    /// Dynamic and equilibrium bifurcation curves with the phi0 -> 0 checks.
    Bifurcation(Common),
    /// Inner (phi0 -> 0) elastostatic solution.
    Inner {
        #[command(flatten)]
        common: Common,
        /// Cavity volume; the boundary's phi0 = 0 value if omitted.
        #[arg(long)]
        v0: Option<f64>,
    },
    /// Equilibrium boundary stretch over the grid or given speeds.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        phi0: Vec<f64>,
    },
}

fn setup(common: &Common) -> Result<(Resolved, Options), AppError> {
    let config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let resolved = config.resolve()?;
    let mut opts = Options::from_config(&resolved);
    if let Some(out) = &common.out {
        opts.out = out.clone();
    }
    if common.svg {
        opts.svg = true;
    }
    if common.no_svg {
        opts.svg = false;
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(AppError::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, which keeps the earlier one.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok((resolved, opts))
}

fn run(cli: Cli) -> Result<Outcome, AppError> {
    match cli.command {
        Command::Check(common) => {
            let (r, o) = setup(&common)?;
            app::cmd_check(&r, &o)
        }
        Command::Cavity { common, phi0 } => {
            let (r, o) = setup(&common)?;
            let phi0 = if phi0.is_empty() { r.config.grid()? } else { phi0 };
            app::cmd_cavity(&r, &phi0, &o)
        }
        Command::Bifurcation(common) => {
            let (r, o) = setup(&common)?;
            app::cmd_bifurcation(&r, &o).map(|(outcome, _)| outcome)
        }
        Command::Inner { common, v0 } => {
            let (r, o) = setup(&common)?;
            app::cmd_inner(&r, v0, &o)
        }
        Command::Equilibrium { common, phi0 } => {
            let (r, o) = setup(&common)?;
            app::cmd_equilibrium(&r, Some(&phi0), &o)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
