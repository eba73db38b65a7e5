use clap::{Parser, Subcommand};
use focklattice::job::{run, write_report, Command, Context, JobSpec, Overrides};
use focklattice::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Trace checks, reconstruction and numerical probes for weighted Fock spaces on lattices.
#[derive(Parser, Debug)]
#[command(name = "focklattice", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Job specification (JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Where to write the JSON report (stdout when absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Where to write grid CSV for sigma-eval and reconstruct (stdout when absent for sigma-eval).
    #[arg(long, global = true)]
    grid: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, env = "FOCKLATTICE_THREADS")]
    threads: Option<usize>,
    #[arg(long = "tail-R", global = true)]
    tail_r: Option<f64>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Point count, separation and upper density of the lattice
    LatticeInfo,
    /// Weighted |g| and log g on a grid
    SigmaEval,
    /// Classify trace data against the interpolation conditions
    TraceCheck,
    /// Rebuild f from its trace and write it on a grid
    Reconstruct,
    /// Reconstruction residuals on the lattice
    Verify,
    /// A_p ratios of the weight's disc measure
    ApProbe,
    /// Finite-section norms of the B, L and M matrices
    OpNorm,
    /// Run the acceptance criteria
    Acceptance,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::LatticeInfo => Command::LatticeInfo,
            Cmd::SigmaEval => Command::SigmaEval,
            Cmd::TraceCheck => Command::TraceCheck,
            Cmd::Reconstruct => Command::Reconstruct,
            Cmd::Verify => Command::Verify,
            Cmd::ApProbe => Command::ApProbe,
            Cmd::OpNorm => Command::OpNorm,
            Cmd::Acceptance => Command::Acceptance,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let command: Command = cli.command.into();
    let job = match &cli.input {
        Some(path) => JobSpec::from_json(&fs::read_to_string(path)?)?,
        None if command == Command::Acceptance => JobSpec::from_json("{}")?,
        None => return Err(Error::Schema("--input is required".into())),
    };
    let overrides = Overrides { seed: cli.seed, tail_r: cli.tail_r, tolerance: cli.tolerance, timing: cli.timing };
    let outcome = run(command, &Context::new(job, overrides)?)?;
    if let Some(bytes) = &outcome.csv {
        match (&cli.grid, command) {
            (Some(path), _) => fs::write(path, bytes)?,
            (None, Command::SigmaEval) => std::io::stdout().write_all(bytes)?,
            (None, _) => {}
        }
    }
    let to_stdout = !(command == Command::SigmaEval && cli.grid.is_none());
    match &cli.output {
        Some(path) => write_report(&outcome.report, fs::File::create(path)?)?,
        None if to_stdout => write_report(&outcome.report, std::io::stdout().lock())?,
        None => {}
    }
    if command == Command::Acceptance {
        if let Some(items) = outcome.report.result.as_array() {
            for r in items {
                if let Ok(r) = serde_json::from_value::<focklattice::acceptance::CriterionReport>(r.clone()) {
                    eprintln!("{}", r.summary());
                }
            }
        }
    }
    Ok(!outcome.acceptance_failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
