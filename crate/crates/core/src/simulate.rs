//! Seeded geometric Brownian motion paths and synthetic option quotes.
//!
//! Paths use the exact lognormal transition
//! S(t+δ) = S(t)·exp((μ − σ²/2)δ + σ√δ·Z) rather than a two-point
//! up/down scheme, so generated "truth" prices carry no discretization
//! bias; the two-point scheme belongs to the lattice alone.
//!
//! Reproducibility is pinned down to the generator: ChaCha12 seeded via
//! `seed_from_u64`, one uniform per step drawn on the open interval
//! (0, 1), mapped to a normal variate through the inverse CDF
//! ([`crate::blackscholes::norm_quantile`]). Identical seeds give
//! bit-identical paths on any platform with IEEE-754 doubles.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::blackscholes::norm_quantile;
use crate::lattice::{price_lattice, LatticeError, LatticeSpec, OptionQuote};

/// Errors from synthetic-quote generation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    /// `maturity_days` must be at least 1 and inside the path horizon.
    #[error("maturity of {maturity_days} days does not fit the simulated horizon")]
    MaturityOutsideHorizon { maturity_days: u32 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Simulation parameters. Days convert to year fractions at ACT/365.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmSpec {
    /// S₀, > 0.
    pub initial_price: f64,
    /// Annualized drift μ.
    pub drift: f64,
    /// Annualized volatility σ, ≥ 0.
    pub volatility: f64,
    /// Simulated horizon in calendar days, ≥ 1.
    pub horizon_days: u32,
    /// Increments per day, ≥ 1.
    pub steps_per_day: u32,
    pub seed: u64,
}

/// Zero drift, σ = 0.2, one step per day over 90 days, seed 42.
impl Default for GbmSpec {
    fn default() -> Self {
        Self {
            initial_price: 100.0,
            drift: 0.0,
            volatility: 0.2,
            horizon_days: 90,
            steps_per_day: 1,
            seed: 42,
        }
    }
}

/// A discrete price path: year-fraction timestamps and matching prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    /// Strictly increasing times in years, starting at 0.
    pub times: Vec<f64>,
    /// Positive prices; the first equals the initial price.
    pub prices: Vec<f64>,
}

impl PricePath {
    /// Keep every `stride`-th point (always keeping the first).
    pub fn thin(&self, stride: usize) -> PricePath {
        assert!(stride >= 1);
        PricePath {
            times: self.times.iter().copied().step_by(stride).collect(),
            prices: self.prices.iter().copied().step_by(stride).collect(),
        }
    }
}

/// Simulate one GBM path. Deterministic for a fixed seed.
pub fn simulate_gbm(spec: &GbmSpec) -> PricePath {
    assert!(
        spec.initial_price.is_finite() && spec.initial_price > 0.0,
        "initial price must be positive"
    );
    assert!(spec.volatility >= 0.0, "volatility must be non-negative");
    assert!(spec.horizon_days >= 1, "horizon must be at least one day");
    assert!(spec.steps_per_day >= 1, "steps per day must be at least 1");

    let steps = spec.horizon_days as usize * spec.steps_per_day as usize;
    let dt = 1.0 / (365.0 * spec.steps_per_day as f64);
    let drift_term = (spec.drift - 0.5 * spec.volatility * spec.volatility) * dt;
    let vol_term = spec.volatility * dt.sqrt();

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut times = Vec::with_capacity(steps + 1);
    let mut prices = Vec::with_capacity(steps + 1);
    times.push(0.0);
    prices.push(spec.initial_price);
    let mut price = spec.initial_price;
    for k in 1..=steps {
        let u: f64 = rng.sample(Open01);
        let z = norm_quantile(u);
        price *= (drift_term + vol_term * z).exp();
        times.push(k as f64 * dt);
        prices.push(price);
    }
    PricePath { times, prices }
}

/// Price one call per (path point × strike × volatility) with the lattice
/// and return each quote paired with the volatility that generated it.
///
/// Every quote has the same time to expiry, `maturity_days`/365 years.
pub fn generate_synthetic_quotes(
    path: &PricePath,
    strikes: &[f64],
    maturity_days: u32,
    sigmas: &[f64],
    spec: &LatticeSpec,
    rate: f64,
) -> Result<Vec<(OptionQuote, f64)>, SimulateError> {
    let horizon_days = path.times.last().copied().unwrap_or(0.0) * 365.0;
    if maturity_days < 1 || maturity_days as f64 > horizon_days + 1e-9 {
        return Err(SimulateError::MaturityOutsideHorizon { maturity_days });
    }
    let maturity = maturity_days as f64 / 365.0;

    let mut quotes = Vec::with_capacity(path.prices.len() * strikes.len() * sigmas.len());
    for &spot in &path.prices {
        for &strike in strikes {
            for &sigma in sigmas {
                let quote = OptionQuote::new(spot, strike, maturity, rate)?;
                let price = price_lattice(&quote, sigma, spec)?.price;
                quotes.push((quote.with_market_price(price)?, sigma));
            }
        }
    }
    Ok(quotes)
}

/// The default volatility grid for synthetic data: 33 evenly spaced
/// values from 0.10 to 0.42 inclusive.
pub fn default_sigma_grid() -> Vec<f64> {
    (0..33).map(|i| 0.10 + 0.01 * i as f64).collect()
}
