//! Closed-form Black-Scholes call pricing and its implied volatility.
//!
//! This module is the trusted reference the rest of the crate is checked
//! against, so it shares no machinery with the lattice pricer or the AD
//! solver: the normal CDF is evaluated from first principles (Maclaurin
//! series for small arguments, a Lentz continued fraction for the erfc
//! tail) to roughly machine accuracy, and the implied-volatility inversion
//! runs Newton on the analytic vega inside a bisection bracket.

use thiserror::Error;

use crate::lattice::OptionQuote;

/// Errors from closed-form pricing and inversion.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BsError {
    #[error("invalid inputs: {0}")]
    InvalidInputs(&'static str),
    /// The observed price sits outside the no-arbitrage band
    /// (max(0, S − Ke^{−rT}), S), so no implied volatility exists.
    #[error("option price is outside the no-arbitrage band")]
    PriceOutOfBand,
}

/// Inputs to the closed-form call price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub maturity: f64,
    pub sigma: f64,
}

impl BsInputs {
    fn validate(&self) -> Result<(), BsError> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(BsError::InvalidInputs("spot must be positive"));
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(BsError::InvalidInputs("strike must be positive"));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(BsError::InvalidInputs("maturity must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(BsError::InvalidInputs("sigma must be positive"));
        }
        if !self.rate.is_finite() {
            return Err(BsError::InvalidInputs("rate must be finite"));
        }
        Ok(())
    }
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// erf by its Maclaurin series; converges fast for |z| ≤ 2.
fn erf_series(z: f64) -> f64 {
    let zz = z * z;
    let mut term = z;
    let mut sum = z;
    for k in 1..200 {
        let k = k as f64;
        term *= -zz / k;
        let contribution = term / (2.0 * k + 1.0);
        sum += contribution;
        if contribution.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    std::f64::consts::FRAC_2_SQRT_PI * sum
}

/// erfc for z ≥ 2 via the Laplace continued fraction
/// erfc(z) = e^{−z²}/√π · 1/(z + ½/(z + 1/(z + 3/2/(z + …)))),
/// evaluated with the modified Lentz algorithm.
fn erfc_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        d = z + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = z + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-z * z).exp() / (std::f64::consts::PI.sqrt() * f)
}

fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        2.0 - erfc(-z)
    } else if z < 2.0 {
        1.0 - erf_series(z)
    } else {
        erfc_fraction(z)
    }
}

/// Standard normal CDF Φ(x) = ½·erfc(−x/√2).
///
/// Absolute accuracy is well inside 10⁻¹⁰ over |x| ≤ 8 (in practice near
/// machine epsilon); beyond ±8 the result is clamped to {0, 1}.
pub fn norm_cdf(x: f64) -> f64 {
    if x > 8.0 {
        return 1.0;
    }
    if x < -8.0 {
        return 0.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density φ(x).
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Inverse standard normal CDF on (0, 1).
///
/// Acklam's rational approximation polished by one Halley step against
/// [`norm_cdf`]; the step is skipped in the far tails where the CDF
/// clamps.
pub fn norm_quantile(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "norm_quantile requires p in (0, 1), got {p}"
    );

    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut q = if p < P_LOW {
        let r = (-2.0 * p.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else if p <= 1.0 - P_LOW {
        let r = p - 0.5;
        let s = r * r;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * r
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    } else {
        let r = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };

    if q.abs() < 8.0 {
        let e = norm_cdf(q) - p;
        let u = e * SQRT_2PI * (0.5 * q * q).exp();
        q -= u / (1.0 + 0.5 * q * u);
    }
    q
}

fn d1(inputs: &BsInputs) -> f64 {
    let vol_sqrt_t = inputs.sigma * inputs.maturity.sqrt();
    ((inputs.spot / inputs.strike).ln()
        + (inputs.rate + 0.5 * inputs.sigma * inputs.sigma) * inputs.maturity)
        / vol_sqrt_t
}

/// Closed-form European call price S·Φ(d₁) − K·e^{−rT}·Φ(d₂).
pub fn bs_call_price(inputs: &BsInputs) -> Result<f64, BsError> {
    inputs.validate()?;
    let d1 = d1(inputs);
    let d2 = d1 - inputs.sigma * inputs.maturity.sqrt();
    let discounted_strike = inputs.strike * (-inputs.rate * inputs.maturity).exp();
    Ok(inputs.spot * norm_cdf(d1) - discounted_strike * norm_cdf(d2))
}

/// Analytic vega ∂C/∂σ = S·φ(d₁)·√T.
pub fn bs_vega(inputs: &BsInputs) -> Result<f64, BsError> {
    inputs.validate()?;
    Ok(inputs.spot * norm_pdf(d1(inputs)) * inputs.maturity.sqrt())
}

/// Invert the closed form for the unique σ > 0 reproducing the quote's
/// market price, to a price residual of about 10⁻¹⁰ or floating-point
/// noise, whichever is larger.
///
/// Newton steps on the analytic vega are confined to a bisection bracket,
/// so a wild step can never escape the root. Uniqueness follows from the
/// strict monotonicity of the price in σ.
pub fn bs_implied_vol(quote: &OptionQuote) -> Result<f64, BsError> {
    let target = quote
        .market_price
        .ok_or(BsError::InvalidInputs("market price required"))?;
    if !(quote.spot.is_finite() && quote.spot > 0.0)
        || !(quote.strike.is_finite() && quote.strike > 0.0)
        || !(quote.maturity.is_finite() && quote.maturity > 0.0)
        || !quote.rate.is_finite()
    {
        return Err(BsError::InvalidInputs("quote violates its invariants"));
    }
    let intrinsic = (quote.spot - quote.strike * (-quote.rate * quote.maturity).exp()).max(0.0);
    if target <= intrinsic || target >= quote.spot {
        return Err(BsError::PriceOutOfBand);
    }

    let price_at = |sigma: f64| -> f64 {
        bs_call_price(&BsInputs {
            spot: quote.spot,
            strike: quote.strike,
            rate: quote.rate,
            maturity: quote.maturity,
            sigma,
        })
        .expect("inputs validated above")
    };

    // Grow the bracket until it straddles the target; the price tends to
    // S as σ → ∞, so this terminates for any in-band target.
    let mut lo = 1e-9;
    let mut hi = 1.0;
    while price_at(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            break;
        }
    }

    // Iterate to σ-bracket collapse rather than stopping at a residual
    // threshold: where vega is tiny a loose residual would accept a σ far
    // from the root, while the collapsed bracket pins σ to machine
    // precision and leaves the residual at floating-point noise.
    let mut sigma = 0.2_f64.clamp(lo, hi);
    for _ in 0..200 {
        let diff = price_at(sigma) - target;
        if diff == 0.0 {
            break;
        }
        if diff > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = bs_vega(&BsInputs {
            spot: quote.spot,
            strike: quote.strike,
            rate: quote.rate,
            maturity: quote.maturity,
            sigma,
        })
        .expect("inputs validated above");
        let newton = sigma - diff / vega;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - sigma).abs() <= f64::EPSILON * sigma.abs() {
            sigma = next;
            break;
        }
        sigma = next;
        if hi - lo <= f64::EPSILON * lo {
            break;
        }
    }
    Ok(sigma)
}
