use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holotrace_cli::{cmd_bound, cmd_certify, cmd_cover, cmd_det, cmd_oracle, CliError, Overrides, Report, RunConfig};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "HOLOTRACE_THREADS";

#[derive(Parser)]
#[command(name = "holotrace", version, about = "Certified spectral bounds for holomorphic transfer operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// A priori singular value, eigenvalue and coefficient bounds
    Bound(Opts),
    /// Traces and determinant coefficients with tail bounds
    Det(Opts),
    /// Rouché-certified disks around the leading eigenvalues
    Certify(Opts),
    /// Non-rigorous Galerkin spectrum
    Oracle(Opts),
    /// Relative cover of the system and intermediate domains
    Cover(Opts),
}

#[derive(Args)]
struct Opts {
    config: PathBuf,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    eigs: Option<usize>,
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    tilde: Option<f64>,
    #[arg(long)]
    granularity: Option<usize>,
    #[arg(long)]
    quadrature: bool,
    #[arg(long)]
    budget: Option<u64>,
    /// Write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides {
            order: self.order,
            eigs: self.eigs,
            basis: self.basis,
            tilde: self.tilde,
            granularity: self.granularity,
            quadrature: self.quadrature,
            budget: self.budget,
        }
    }
}

fn emit<R: Report>(report: &R, out: &Option<PathBuf>) -> Result<(), CliError> {
    print!("{}", report.to_text());
    if let Some(path) = out {
        std::fs::write(path, report.to_json())
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let opts = match &cli.command {
        Command::Bound(o) | Command::Det(o) | Command::Certify(o) | Command::Oracle(o) | Command::Cover(o) => o,
    };
    let mut cfg = RunConfig::load(&opts.config)?;
    cfg.apply(&opts.overrides())?;
    match cli.command {
        Command::Bound(_) => emit(&cmd_bound(&cfg)?, &opts.out)?,
        Command::Det(_) => emit(&cmd_det(&cfg)?, &opts.out)?,
        Command::Certify(_) => {
            let report = cmd_certify(&cfg)?;
            emit(&report, &opts.out)?;
            if !report.complete(cfg.params.eigs) {
                eprintln!("certify: certification incomplete");
                return Ok(3);
            }
        }
        Command::Oracle(_) => emit(&cmd_oracle(&cfg)?, &opts.out)?,
        Command::Cover(_) => emit(&cmd_cover(&cfg)?, &opts.out)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var(THREADS_VAR).ok().and_then(|v| v.parse::<usize>().ok()) {
        // an error only means the pool was already built
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
