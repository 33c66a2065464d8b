use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use taperconv::cli;

#[derive(Parser)]
#[command(name = "taperconv", version, about = "chi(2) frequency conversion in width-engineered waveguides")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single propagation: efficiency and transfer-matrix entries
    Propagate(RunArgs),
    /// Conversion spectrum over the idler wavelength
    Spectrum(RunArgs),
    /// Parameter sweep per the config's sweep section
    Sweep(RunArgs),
    /// Numeric versus analytic spectral-area comparison table
    AreaLaw(RunArgs),
    /// Solve the phase-matching width for the configured wavelength
    PhaseMatch(RunArgs),
    /// Run the full invariant suite; exits nonzero on failure
    Validate(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file path, or `-` for stdin
    #[arg(long)]
    config: String,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("TAPERCONV_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => eprintln!("warning: ignoring non-numeric TAPERCONV_THREADS={raw}"),
        }
    }
}

fn run(args: &Args) -> taperconv::Result<cli::RunOutcome> {
    let (cmd, run_args) = match &args.command {
        Command::Propagate(a) => (cli::Subcommand::Propagate, a),
        Command::Spectrum(a) => (cli::Subcommand::Spectrum, a),
        Command::Sweep(a) => (cli::Subcommand::Sweep, a),
        Command::AreaLaw(a) => (cli::Subcommand::AreaLaw, a),
        Command::PhaseMatch(a) => (cli::Subcommand::PhaseMatch, a),
        Command::Validate(a) => (cli::Subcommand::Validate, a),
    };
    let format = match run_args.format {
        Format::Csv => cli::OutputFormat::Csv,
        Format::Json => cli::OutputFormat::Json,
    };
    let config = cli::parse_config(&run_args.config)?;
    match &run_args.out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            let outcome = cli::run(cmd, &config, &mut file, format)?;
            file.flush()?;
            Ok(outcome)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let outcome = cli::run(cmd, &config, &mut lock, format)?;
            lock.flush()?;
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let args = Args::parse();
    match run(&args) {
        Ok(cli::RunOutcome::Clean) => ExitCode::from(0),
        Ok(cli::RunOutcome::ValidationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
