//! Command-line front end: pricing, implied-vol inversion, GBM
//! simulation, batch solving, and report-data emission.
//!
//! Exit codes are fixed for scripting:
//! 0 success · 1 pricer error · 2 usage error · 3 non-convergence ·
//! 4 I/O error · 5 malformed input schema.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use binvol::batch::{converged_errors, histogram, run_batch, scatter_points};
use binvol::blackscholes::{bs_call_price, BsInputs};
use binvol::ingest::{
    parse_quotes, parse_results, write_diagnostics, write_histogram, write_price_path,
    write_results, write_scatter, IngestError,
};
use binvol::lattice::{price_lattice, LatticeSpec, OptionQuote};
use binvol::simulate::{simulate_gbm, GbmSpec};
use binvol::solver::{solve_implied_vol, SolverConfig, SolverStatus, RETRY_INITIALS_PRESET};

#[derive(Parser)]
#[command(
    name = "binvol",
    version,
    about = "Binomial-lattice implied volatility toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price a European call on the lattice or with the closed form
    Price(PriceArgs),
    /// Invert an observed price for implied volatility
    Iv(IvArgs),
    /// Simulate a geometric Brownian motion path to CSV
    Simulate(SimulateArgs),
    /// Solve every quote in a CSV and write results plus a summary
    Batch(BatchArgs),
    /// Turn batch results into scatter and histogram plot data
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PricingModel {
    Lattice,
    Bs,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity_years: f64,
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    sigma: f64,
    /// Lattice time layers
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[arg(long, value_enum, default_value_t = PricingModel::Lattice)]
    model: PricingModel,
}

#[derive(Args)]
struct IvArgs {
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    maturity_years: f64,
    #[arg(long)]
    rate: f64,
    /// Observed call price to invert
    #[arg(long)]
    price: f64,
    /// Lattice time layers
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    /// Newton starting point
    #[arg(long, default_value_t = 0.2)]
    x0: f64,
    /// Stop when successive function values move less than this
    #[arg(long, default_value = "1e-5")]
    tol: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    max_iter: u32,
    /// On non-convergence retry from 0.1, 0.4 and 0.8
    #[arg(long)]
    retries: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Initial price
    #[arg(long, default_value_t = 100.0)]
    s0: f64,
    /// Annualized drift
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Annualized volatility
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Horizon in days
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    days: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    steps_per_day: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV path (`time_years,price`)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    /// Input quote CSV
    #[arg(long = "in")]
    input: PathBuf,
    /// Output result CSV; the summary lands next to it as
    /// `<out>.summary.json`
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[arg(long, default_value_t = 0.2)]
    x0: f64,
    #[arg(long, default_value = "1e-5")]
    tol: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    max_iter: u32,
    /// Rate for rows without one
    #[arg(long, default_value_t = 0.0)]
    default_rate: f64,
    /// Worker threads; defaults to the available cores
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Batch result CSV
    #[arg(long = "in")]
    input: PathBuf,
    /// Writes `<prefix>.scatter.csv` and `<prefix>.hist.csv`
    #[arg(long)]
    out_prefix: String,
    /// Histogram bin count
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    bins: u64,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
    fn pricer(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 4,
            message: e.to_string(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::MalformedHeader(_) => Self {
                code: 5,
                message: e.to_string(),
            },
            IngestError::Io(io) => io.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Price(args) => cmd_price(args),
        Command::Iv(args) => cmd_iv(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// Render with the given number of significant digits (fixed notation).
fn format_significant(value: f64, digits: i32) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value:.*}", (digits - 1).max(0) as usize);
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

fn build_quote(spot: f64, strike: f64, maturity: f64, rate: f64) -> Result<OptionQuote, Failure> {
    OptionQuote::new(spot, strike, maturity, rate).map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_price(args: PriceArgs) -> Result<u8, Failure> {
    let quote = build_quote(args.spot, args.strike, args.maturity_years, args.rate)?;
    let price = match args.model {
        PricingModel::Lattice => {
            let spec = LatticeSpec::new(args.steps);
            price_lattice(&quote, args.sigma, &spec)
                .map_err(|e| Failure::pricer(e.to_string()))?
                .price
        }
        PricingModel::Bs => bs_call_price(&BsInputs {
            spot: args.spot,
            strike: args.strike,
            rate: args.rate,
            maturity: args.maturity_years,
            sigma: args.sigma,
        })
        .map_err(|e| Failure::pricer(e.to_string()))?,
    };
    println!("{}", format_significant(price, 10));
    Ok(0)
}

fn cmd_iv(args: IvArgs) -> Result<u8, Failure> {
    let quote = build_quote(args.spot, args.strike, args.maturity_years, args.rate)?
        .with_market_price(args.price)
        .map_err(|e| Failure::usage(e.to_string()))?;
    if args.tol <= 0.0 || args.tol.is_nan() {
        return Err(Failure::usage("--tol must be positive"));
    }
    let spec = LatticeSpec::new(args.steps);
    let config = SolverConfig {
        initial_sigma: args.x0,
        tolerance: args.tol,
        max_iterations: args.max_iter,
        retry_initials: if args.retries {
            RETRY_INITIALS_PRESET.to_vec()
        } else {
            Vec::new()
        },
        ..SolverConfig::default()
    };
    let result = solve_implied_vol(&quote, &spec, &config);
    let json = serde_json::json!({
        "implied_vol": result.implied_vol,
        "status": result.status.as_str(),
        "iterations": result.iterations,
        "residual": result.final_residual,
    });
    println!("{json}");
    Ok(if result.status == SolverStatus::Converged {
        0
    } else {
        3
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    if !(args.s0.is_finite() && args.s0 > 0.0) {
        return Err(Failure::usage("--s0 must be positive"));
    }
    if !(args.sigma.is_finite() && args.sigma >= 0.0) {
        return Err(Failure::usage("--sigma must be non-negative"));
    }
    if !args.mu.is_finite() {
        return Err(Failure::usage("--mu must be finite"));
    }
    let path = simulate_gbm(&GbmSpec {
        initial_price: args.s0,
        drift: args.mu,
        volatility: args.sigma,
        horizon_days: args.days,
        steps_per_day: args.steps_per_day,
        seed: args.seed,
    });
    let file = File::create(&args.out)?;
    let mut writer = BufWriter::new(file);
    write_price_path(&mut writer, &path)?;
    writer.flush()?;
    Ok(0)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn cmd_batch(args: BatchArgs) -> Result<u8, Failure> {
    if !args.default_rate.is_finite() {
        return Err(Failure::usage("--default-rate must be finite"));
    }
    if args.tol <= 0.0 || args.tol.is_nan() {
        return Err(Failure::usage("--tol must be positive"));
    }
    let input = BufReader::new(File::open(&args.input)?);
    let (records, diagnostics) = parse_quotes(input, args.default_rate)?;

    let spec = LatticeSpec::new(args.steps);
    let config = SolverConfig {
        initial_sigma: args.x0,
        tolerance: args.tol,
        max_iterations: args.max_iter,
        ..SolverConfig::default()
    };
    let jobs = match args.jobs {
        Some(n) => n as usize,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let report = run_batch(&records, &spec, &config, jobs);

    let mut out = BufWriter::new(File::create(&args.out)?);
    write_results(&mut out, &report.per_quote)?;
    out.flush()?;

    let summary_path = with_suffix(&args.out, ".summary.json");
    let mut summary = BufWriter::new(File::create(&summary_path)?);
    serde_json::to_writer_pretty(&mut summary, &report.summary)
        .map_err(|e| Failure::from(std::io::Error::other(e)))?;
    summary.write_all(b"\n")?;
    summary.flush()?;

    if !diagnostics.is_empty() {
        let sidecar_path = with_suffix(&args.out, ".diagnostics.csv");
        let mut sidecar = BufWriter::new(File::create(&sidecar_path)?);
        write_diagnostics(&mut sidecar, &diagnostics)?;
        sidecar.flush()?;
        eprintln!(
            "{} row(s) skipped; reasons in {}",
            diagnostics.len(),
            sidecar_path.display()
        );
    }
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<u8, Failure> {
    let input = BufReader::new(File::open(&args.input)?);
    let (rows, diagnostics) = parse_results(input)?;
    if !diagnostics.is_empty() {
        eprintln!(
            "warning: {} malformed result row(s) ignored",
            diagnostics.len()
        );
    }

    let scatter = scatter_points(&rows);
    let errors = converged_errors(&rows);
    let bins = histogram(&errors, args.bins as usize);

    let scatter_path = PathBuf::from(format!("{}.scatter.csv", args.out_prefix));
    let mut scatter_out = BufWriter::new(File::create(&scatter_path)?);
    write_scatter(&mut scatter_out, &scatter)?;
    scatter_out.flush()?;

    let hist_path = PathBuf::from(format!("{}.hist.csv", args.out_prefix));
    let mut hist_out = BufWriter::new(File::create(&hist_path)?);
    write_histogram(&mut hist_out, &bins)?;
    hist_out.flush()?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::format_significant;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(11.070137908008492, 10), "11.07013791");
        assert_eq!(format_significant(7.965567455405796, 10), "7.965567455");
        assert_eq!(format_significant(0.0, 10), "0.000000000");
        assert_eq!(format_significant(123456789012.0, 10), "123456789012");
        assert_eq!(format_significant(0.000123456789012, 10), "0.0001234567890");
    }
}
