//! Newton-Raphson inversion of the lattice pricer for implied volatility.
//!
//! The objective is g(σ) = price(σ) − C for an observed price C. Each
//! iterate needs g and g′; in the default mode one dual-number pricing
//! pass yields both. Iteration stops when successive *function values*
//! move by less than the tolerance — |g(xₙ) − g(xₙ₋₁)| < tol — so a stop
//! does not by itself certify a small residual; callers should inspect
//! [`SolverResult::final_residual`] when they need one.
//!
//! Failures never raise: every outcome is encoded in [`SolverStatus`] so
//! batch runs survive any single quote.

use crate::dual::DualScalar;
use crate::lattice::{price_lattice, LatticeError, LatticeSpec, OptionQuote, ProbabilityPolicy};

/// How the solver obtains g′.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    /// Forward-mode AD: value and derivative in one lattice pass.
    Automatic,
    /// Symmetric difference (price(σ+h) − price(σ−h)) / 2h.
    CentralDifference { h: f64 },
}

/// Newton-Raphson hyperparameters.
///
/// The defaults are x₀ = 0.2, tolerance 10⁻⁵ on successive function
/// values, at most 100 iterations, AD derivatives, and no retries.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial iterate x₀.
    pub initial_sigma: f64,
    /// Stopping threshold on |g(xₙ) − g(xₙ₋₁)|, in price units.
    pub tolerance: f64,
    pub max_iterations: u32,
    pub derivative_mode: DerivativeMode,
    /// Fallback starting points tried in order when a solve does not
    /// converge; first converged attempt wins, otherwise the attempt with
    /// the smallest residual is reported.
    pub retry_initials: Vec<f64>,
    /// Record every (iterate, function value) pair in the result.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            initial_sigma: 0.2,
            tolerance: 1e-5,
            max_iterations: 100,
            derivative_mode: DerivativeMode::Automatic,
            retry_initials: Vec::new(),
            record_trace: false,
        }
    }
}

/// Alternative starting points for quotes the single-start method loses:
/// restarting from a spread of initials and keeping the best outcome.
pub const RETRY_INITIALS_PRESET: [f64; 3] = [0.1, 0.4, 0.8];

/// Classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    /// Stopped by the tolerance rule at a positive iterate.
    Converged,
    /// Stopped by the tolerance rule at a non-positive iterate. Absurd as
    /// a volatility, but a real behavior of the method; reported rather
    /// than hidden so downstream counts can surface it.
    ConvergedNegative,
    /// The iteration budget ran out; the best iterate seen is reported.
    MaxIterations,
    /// |g′| < 10⁻¹² at the current iterate (flat payoff region), declared
    /// before dividing.
    ZeroDerivative,
    /// The pricer could not evaluate an iterate, or iterates left the
    /// representable range.
    PricerError,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Converged => "Converged",
            SolverStatus::ConvergedNegative => "ConvergedNegative",
            SolverStatus::MaxIterations => "MaxIterations",
            SolverStatus::ZeroDerivative => "ZeroDerivative",
            SolverStatus::PricerError => "PricerError",
        }
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Converged" => Ok(SolverStatus::Converged),
            "ConvergedNegative" => Ok(SolverStatus::ConvergedNegative),
            "MaxIterations" => Ok(SolverStatus::MaxIterations),
            "ZeroDerivative" => Ok(SolverStatus::ZeroDerivative),
            "PricerError" => Ok(SolverStatus::PricerError),
            other => Err(format!("unknown solver status {other:?}")),
        }
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// The root (σ̂) for converged statuses; the best iterate seen for
    /// `MaxIterations`; absent otherwise.
    pub implied_vol: Option<f64>,
    /// Newton updates performed (≤ max_iterations).
    pub iterations: u32,
    pub status: SolverStatus,
    /// |g| = |price(σ) − C| at the reported iterate.
    pub final_residual: f64,
    /// (iterate, function value) pairs when tracing was requested.
    pub trace: Option<Vec<(f64, f64)>>,
}

const ZERO_DERIVATIVE_EPS: f64 = 1e-12;

/// Evaluate g = price(σ) − C and g′ under the configured derivative mode.
fn eval(
    quote: &OptionQuote,
    spec: &LatticeSpec,
    mode: DerivativeMode,
    target: f64,
    sigma: f64,
) -> Result<(f64, f64), LatticeError> {
    match mode {
        DerivativeMode::Automatic => {
            let priced = price_lattice(quote, DualScalar::variable(sigma), spec)?;
            Ok((priced.price.value - target, priced.price.deriv))
        }
        DerivativeMode::CentralDifference { h } => {
            let g = price_lattice(quote, sigma, spec)?.price - target;
            let up = price_lattice(quote, sigma + h, spec)?.price;
            let down = price_lattice(quote, sigma - h, spec)?.price;
            Ok((g, (up - down) / (2.0 * h)))
        }
    }
}

fn attempt(
    quote: &OptionQuote,
    spec: &LatticeSpec,
    config: &SolverConfig,
    target: f64,
    start: f64,
) -> SolverResult {
    let mut trace = config.record_trace.then(Vec::new);

    let pricer_error =
        |iterations: u32, residual: f64, trace: Option<Vec<(f64, f64)>>| SolverResult {
            implied_vol: None,
            iterations,
            status: SolverStatus::PricerError,
            final_residual: residual,
            trace,
        };

    let (mut g, mut dg) = match eval(quote, spec, config.derivative_mode, target, start) {
        Ok(pair) => pair,
        Err(_) => return pricer_error(0, f64::INFINITY, trace),
    };
    if let Some(t) = trace.as_mut() {
        t.push((start, g));
    }
    if !g.is_finite() {
        return pricer_error(0, f64::INFINITY, trace);
    }

    let mut x = start;
    let mut best = (g.abs(), x);
    for iteration in 1..=config.max_iterations {
        if dg.abs() < ZERO_DERIVATIVE_EPS {
            return SolverResult {
                implied_vol: None,
                iterations: iteration - 1,
                status: SolverStatus::ZeroDerivative,
                final_residual: g.abs(),
                trace,
            };
        }
        let next = x - g / dg;
        if !next.is_finite() {
            return pricer_error(iteration, g.abs(), trace);
        }
        let (g_next, dg_next) = match eval(quote, spec, config.derivative_mode, target, next) {
            Ok(pair) => pair,
            Err(_) => return pricer_error(iteration, g.abs(), trace),
        };
        if let Some(t) = trace.as_mut() {
            t.push((next, g_next));
        }
        if !g_next.is_finite() {
            return pricer_error(iteration, f64::INFINITY, trace);
        }
        if g_next.abs() < best.0 {
            best = (g_next.abs(), next);
        }
        if (g_next - g).abs() < config.tolerance {
            let status = if next > 0.0 {
                SolverStatus::Converged
            } else {
                SolverStatus::ConvergedNegative
            };
            return SolverResult {
                implied_vol: Some(next),
                iterations: iteration,
                status,
                final_residual: g_next.abs(),
                trace,
            };
        }
        x = next;
        g = g_next;
        dg = dg_next;
    }

    SolverResult {
        implied_vol: Some(best.1),
        iterations: config.max_iterations,
        status: SolverStatus::MaxIterations,
        final_residual: best.0,
        trace,
    }
}

/// Solve price(σ) = market price by Newton-Raphson from
/// `config.initial_sigma`, retrying from `config.retry_initials` when the
/// first attempt does not converge.
///
/// The pricer runs under [`ProbabilityPolicy::Flag`] regardless of
/// `spec.probability_policy` so iterates may pass through invalid
/// probability regions without aborting the solve.
pub fn solve_implied_vol(
    quote: &OptionQuote,
    spec: &LatticeSpec,
    config: &SolverConfig,
) -> SolverResult {
    let Some(target) = quote.market_price else {
        return SolverResult {
            implied_vol: None,
            iterations: 0,
            status: SolverStatus::PricerError,
            final_residual: f64::INFINITY,
            trace: None,
        };
    };
    let flagged = spec.with_policy(ProbabilityPolicy::Flag);

    let first = attempt(quote, &flagged, config, target, config.initial_sigma);
    if first.status == SolverStatus::Converged || config.retry_initials.is_empty() {
        return first;
    }

    let mut attempts = vec![first];
    for &retry in &config.retry_initials {
        let result = attempt(quote, &flagged, config, target, retry);
        if result.status == SolverStatus::Converged {
            return result;
        }
        attempts.push(result);
    }
    attempts
        .into_iter()
        .min_by(|a, b| a.final_residual.total_cmp(&b.final_residual))
        .expect("at least the first attempt is present")
}

/// Symmetric finite-difference derivative of the lattice price in σ.
pub fn central_difference_derivative(
    quote: &OptionQuote,
    spec: &LatticeSpec,
    sigma: f64,
    h: f64,
) -> Result<f64, LatticeError> {
    assert!(h > 0.0, "step size must be positive");
    let up = price_lattice(quote, sigma + h, spec)?.price;
    let down = price_lattice(quote, sigma - h, spec)?.price;
    Ok((up - down) / (2.0 * h))
}
