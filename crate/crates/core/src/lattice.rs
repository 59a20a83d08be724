//! Binomial lattice pricer for European calls.
//!
//! Per time step of length δt the underlying moves to S·e^{σ√δt} or
//! S·e^{−σ√δt}, the up branch carrying probability ½ + r√δt/(2σ) and the
//! down branch its complement. Because u·d = 1 the tree recombines, so an
//! n-step valuation is an O(n²) backward induction over n+1 terminal
//! nodes rather than a walk over 2ⁿ paths.
//!
//! The pricer is generic over [`Scalar`]: called on `f64` it prices,
//! called on [`crate::dual::DualScalar`] seeded in σ it prices and
//! differentiates with respect to volatility in a single pass.

use thiserror::Error;

use crate::dual::Scalar;

/// Errors from lattice pricing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    /// A quote field violated its invariant.
    #[error("invalid quote: {0}")]
    InvalidQuote(&'static str),
    /// σ = 0 with a nonzero rate makes the probability term r√δt/(2σ)
    /// divide by zero.
    #[error("sigma is zero while the rate is nonzero; branch probability is undefined")]
    ZeroSigmaWithPositiveRate,
    /// A branch probability left [0, 1] under [`ProbabilityPolicy::Strict`].
    #[error("branch probability {probability} is outside [0, 1]")]
    ProbabilityOutOfRange { probability: f64 },
}

/// What to do when a branch probability leaves [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbabilityPolicy {
    /// Refuse to price (library default).
    #[default]
    Strict,
    /// Price anyway and set [`PricingFlags::probability_out_of_range`].
    /// Root-finding iterates may wander through invalid regions before
    /// converging, so the solver prices under this policy.
    Flag,
}

/// Pricer configuration: number of time layers and probability policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    /// Number of time layers n (≥ 1); δt = T/n.
    pub steps: u32,
    pub probability_policy: ProbabilityPolicy,
}

impl LatticeSpec {
    /// A spec with the given number of steps and the strict policy.
    pub fn new(steps: u32) -> Self {
        assert!(steps >= 1, "a lattice needs at least one step");
        Self {
            steps,
            probability_policy: ProbabilityPolicy::Strict,
        }
    }

    pub fn with_policy(mut self, policy: ProbabilityPolicy) -> Self {
        self.probability_policy = policy;
        self
    }
}

/// Ten layers, strict probability checking.
impl Default for LatticeSpec {
    fn default() -> Self {
        Self::new(10)
    }
}

/// One market or synthetic observation of a European call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionQuote {
    /// Spot price S(0), > 0.
    pub spot: f64,
    /// Strike K, > 0.
    pub strike: f64,
    /// Time to expiry T in years, > 0.
    pub maturity: f64,
    /// Annualized risk-free rate r.
    pub rate: f64,
    /// Observed call price C; absent for pure pricing calls.
    pub market_price: Option<f64>,
}

impl OptionQuote {
    pub fn new(spot: f64, strike: f64, maturity: f64, rate: f64) -> Result<Self, LatticeError> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(LatticeError::InvalidQuote("spot must be positive"));
        }
        if !(strike.is_finite() && strike > 0.0) {
            return Err(LatticeError::InvalidQuote("strike must be positive"));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(LatticeError::InvalidQuote("maturity must be positive"));
        }
        if !rate.is_finite() {
            return Err(LatticeError::InvalidQuote("rate must be finite"));
        }
        Ok(Self {
            spot,
            strike,
            maturity,
            rate,
            market_price: None,
        })
    }

    pub fn with_market_price(mut self, price: f64) -> Result<Self, LatticeError> {
        if !(price.is_finite() && price >= 0.0) {
            return Err(LatticeError::InvalidQuote(
                "market price must be non-negative",
            ));
        }
        self.market_price = Some(price);
        Ok(self)
    }
}

/// Conditions observed while pricing that did not abort the valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PricingFlags {
    /// A branch probability left [0, 1] (only under [`ProbabilityPolicy::Flag`]).
    pub probability_out_of_range: bool,
    /// σ < 0 was accepted; with r = 0 the valuation is even in σ up to
    /// branch relabeling, and the solver owns the interpretation.
    pub negative_sigma: bool,
}

/// A priced value plus the flags raised while computing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priced<S> {
    pub price: S,
    pub flags: PricingFlags,
}

/// Terminal payoff of a call: max(0, S(T) − K).
///
/// On dual input the derivative propagates through the kink convention of
/// [`Scalar::max_zero`].
pub fn payoff<S: Scalar>(terminal_price: S, strike: f64) -> S {
    (terminal_price - S::constant(strike)).max_zero()
}

/// Single-step valuation: δt = T, two terminal nodes.
///
/// Identical to [`price_lattice`] with one step, which is how it is
/// computed.
pub fn price_single_step<S: Scalar>(
    quote: &OptionQuote,
    sigma: S,
    policy: ProbabilityPolicy,
) -> Result<Priced<S>, LatticeError> {
    let spec = LatticeSpec::new(1).with_policy(policy);
    price_lattice(quote, sigma, &spec)
}

/// Value a European call on an n-step recombining lattice.
///
/// Terminal nodes sit at S₀·e^{(2i−n)σ√δt} for i = 0..=n; each interior
/// value is the discounted probability-weighted combination of its two
/// children. Probabilities stay in [0, 1] exactly when σ ≥ r√δt; outside
/// that region behavior follows `spec.probability_policy`.
pub fn price_lattice<S: Scalar>(
    quote: &OptionQuote,
    sigma: S,
    spec: &LatticeSpec,
) -> Result<Priced<S>, LatticeError> {
    assert!(spec.steps >= 1, "a lattice needs at least one step");
    let n = spec.steps as usize;
    let dt = quote.maturity / n as f64;
    let sqrt_dt = dt.sqrt();

    let mut flags = PricingFlags::default();
    if sigma.value() < 0.0 {
        flags.negative_sigma = true;
    }

    // Probability offset r√δt/(2σ); identically zero when r = 0 so that a
    // zero rate never touches the division.
    let offset = if quote.rate == 0.0 {
        S::constant(0.0)
    } else {
        if sigma.value() == 0.0 {
            return Err(LatticeError::ZeroSigmaWithPositiveRate);
        }
        S::constant(quote.rate * sqrt_dt) / (sigma * S::constant(2.0))
    };
    let p_up = S::constant(0.5) + offset;
    let p_down = S::constant(0.5) - offset;
    if !(0.0..=1.0).contains(&p_up.value()) || !(0.0..=1.0).contains(&p_down.value()) {
        let probability = p_up.value().min(p_down.value());
        match spec.probability_policy {
            ProbabilityPolicy::Strict => {
                return Err(LatticeError::ProbabilityOutOfRange { probability })
            }
            ProbabilityPolicy::Flag => flags.probability_out_of_range = true,
        }
    }

    let discount = S::constant((-quote.rate * dt).exp());

    // Terminal layer, lowest node first, climbing by u² per node.
    let up_squared = (sigma * S::constant(2.0 * sqrt_dt)).exp();
    let mut node = S::constant(quote.spot) * (sigma * S::constant(-(n as f64) * sqrt_dt)).exp();
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        values.push(payoff(node, quote.strike));
        if i < n {
            node = node * up_squared;
        }
    }

    for layer in (1..=n).rev() {
        for i in 0..layer {
            values[i] = discount * (p_down * values[i] + p_up * values[i + 1]);
        }
        values.truncate(layer);
    }

    Ok(Priced {
        price: values[0],
        flags,
    })
}
