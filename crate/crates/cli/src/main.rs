mod commands;
mod error;
mod input;
mod report;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;
use crate::input::Format;

#[derive(Parser, Debug)]
#[command(name = "polycor", version, about = "Robust and maximum likelihood polychoric correlation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the polychoric correlation of one item pair.
    Estimate(EstimateArgs),
    /// Frequencies, fitted probabilities and Pearson residuals of one fit.
    Residuals(ResidualsArgs),
    /// Pairwise correlation matrix of raw multi-item data.
    Matrix(MatrixArgs),
    /// Monte Carlo study from a TOML configuration.
    Simulate(SimulateArgs),
    /// Cross-tabulate an item pair, or normalize a table file.
    Tabulate(TabulateArgs),
    /// Print the JSON schema of all reports.
    Schema,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// CSV file: a table of counts or raw respondent-by-item data.
    #[arg(long)]
    input: PathBuf,
    /// Input layout; detected from the first row when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// 1-based item pair for raw data with more than two items, e.g. `3,7`.
    #[arg(long, value_parser = parse_pair)]
    pair: Option<(usize, usize)>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Print numbers at full precision instead of six significant digits.
    #[arg(long)]
    full_precision: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Tuning constant; `inf` gives maximum likelihood.
    #[arg(long, default_value = "0.6", value_parser = parse_c)]
    c: f64,
    /// Standard errors of maximum likelihood fits.
    #[arg(long, value_enum, default_value_t = MlSe::Fisher)]
    ml_se: MlSe,
    #[arg(long, default_value_t = 5000)]
    max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MlSe {
    Fisher,
    Sandwich,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ml,
    Robust,
    Twostep,
    All,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
    /// Confidence intervals have level 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ResidualsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Robust)]
    method: MethodArg,
    /// Cells with a residual at or above this value are listed.
    #[arg(long, default_value = "3", value_parser = parse_c)]
    flag_threshold: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// `all` fits robust and ML and adds the |robust| - |ML| difference.
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Study file, or the name of a bundled study (`table3`).
    #[arg(long)]
    config: String,
    /// Overrides `replications`.
    #[arg(long)]
    reps: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `alpha`.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TabulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_c(s: &str) -> Result<f64, String> {
    let v = match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => f64::INFINITY,
        other => other.parse::<f64>().map_err(|_| format!("'{s}' is neither a number nor 'inf'"))?,
    };
    if !(v >= 0.0) {
        return Err(format!("{s} must be nonnegative"));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [i, j] = parts.as_slice() else {
        return Err(format!("expected two comma-separated item numbers, got '{s}'"));
    };
    let parse = |v: &str| v.parse::<usize>().ok().filter(|&k| k >= 1).ok_or_else(|| format!("'{v}' is not an item number"));
    let (i, j) = (parse(i)?, parse(j)?);
    if i == j {
        return Err("the two items must differ".into());
    }
    Ok((i, j))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Residuals(a) => commands::residuals(a),
        Command::Matrix(a) => commands::matrix(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Tabulate(a) => commands::tabulate(a),
        Command::Schema => {
            print!("{}", report::SCHEMA);
            Ok(())
        }
    }
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
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
