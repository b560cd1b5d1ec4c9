mod commands;
mod format;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qst_core::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "qst", version, about = "State transfer on loop-weighted XX spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Choose Q and report the transfer time and fidelity certificate.
    Design(DesignArgs),
    /// Fidelity |U(t)[1, n]| on a uniform time grid.
    Simulate(SimulateArgs),
    /// Cross-check the spectrum, the closed-form modes and the dense oracle.
    Verify(VerifyArgs),
    /// Design and measure over a grid of chain sizes.
    Sweep(SweepArgs),
    /// Second-node loops against loops further in, at the same n and Q.
    Compare(CompareArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Theorem,
    Relaxed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// `auto` or an explicit end time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TMax {
    Auto,
    Value(f64),
}

fn parse_t_max(s: &str) -> Result<TMax, String> {
    if s == "auto" {
        return Ok(TMax::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(TMax::Value(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

#[derive(Args, Debug)]
pub struct Output {
    /// Write data here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[arg(long)]
    pub n: usize,
    /// Target infidelity; required in theorem mode.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Loop weight; required in relaxed mode.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum, default_value = "theorem")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    /// Loop weight. Without it, the theorem design for `--epsilon` supplies Q.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Loop placement: nodes d and n + 1 - d.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// `auto` (2.5 t0 of the design at this n and Q) or an end time.
    #[arg(long, default_value = "auto", value_parser = parse_t_max)]
    pub t_max: TMax,
    #[arg(long, default_value_t = qst_core::dynamics::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Chain sizes, comma separated. None gives an empty grid.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Target infidelities (theorem mode), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    /// Loop weights (relaxed mode), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    #[arg(long, value_enum, default_value = "theorem")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: f64,
    /// Placement compared against d = 2.
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value = "auto", value_parser = parse_t_max)]
    pub t_max: TMax,
    #[arg(long, default_value_t = qst_core::dynamics::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    out: Output,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1.
    Usage(String),
    /// Exit 1.
    Compute(anyhow::Error),
    /// Exit 2.
    Infeasible(CoreError),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NoFeasibleM(_) => Failure::Infeasible(e),
            other => Failure::Compute(other.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.into())
    }
}

/// What a command produced: data for stdout (or `--output`) and whether all
/// of its checks passed.
pub struct Report {
    pub data: String,
    pub ok: bool,
}

impl Report {
    pub fn ok(data: String) -> Self {
        Report { data, ok: true }
    }
}

fn emit(out: &Output, data: &str) -> Result<(), Failure> {
    match &out.output {
        Some(path) => fs::write(path, data)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(data.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let (report, out) = match &cli.command {
        Command::Design(a) => (commands::design(a)?, &a.out),
        Command::Simulate(a) => (commands::simulate(a)?, &a.out),
        Command::Verify(a) => (commands::verify(a)?, &a.out),
        Command::Sweep(a) => (commands::sweep(a)?, &a.out),
        Command::Compare(a) => (commands::compare(a)?, &a.out),
    };
    emit(out, &report.data)?;
    Ok(report.ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
