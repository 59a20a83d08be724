//! Lattice pricer properties checked against independent oracles.

use binvol::lattice::{price_lattice, LatticeSpec, OptionQuote, ProbabilityPolicy};
use proptest::prelude::*;

/// Full 2ⁿ-path valuation with no recombination and independently derived
/// factors; deliberately shares no arithmetic shortcuts with the
/// production pricer.
fn brute_force_price(quote: &OptionQuote, sigma: f64, steps: u32) -> f64 {
    struct Tree {
        n: u32,
        strike: f64,
        up: f64,
        down: f64,
        p_up: f64,
        p_down: f64,
        discount: f64,
    }
    impl Tree {
        fn value(&self, depth: u32, price: f64) -> f64 {
            if depth == self.n {
                return (price - self.strike).max(0.0);
            }
            self.discount
                * (self.p_up * self.value(depth + 1, price * self.up)
                    + self.p_down * self.value(depth + 1, price * self.down))
        }
    }
    let dt = quote.maturity / steps as f64;
    let sqrt_dt = dt.sqrt();
    let offset = if quote.rate == 0.0 {
        0.0
    } else {
        quote.rate * sqrt_dt / (2.0 * sigma)
    };
    let tree = Tree {
        n: steps,
        strike: quote.strike,
        up: (sigma * sqrt_dt).exp(),
        down: (-sigma * sqrt_dt).exp(),
        p_up: 0.5 + offset,
        p_down: 0.5 - offset,
        discount: (-quote.rate * dt).exp(),
    };
    tree.value(0, quote.spot)
}

#[test]
fn recombining_induction_equals_full_tree_expansion() {
    let cases = [
        (100.0, 100.0, 1.0, 0.0, 0.2),
        (100.0, 95.0, 0.5, 0.03, 0.25),
        (80.0, 100.0, 2.0, 0.01, 0.4),
        (120.0, 100.0, 0.25, 0.0, 0.15),
        (100.0, 140.0, 1.5, 0.02, 0.55),
    ];
    for steps in 1..=10u32 {
        let spec = LatticeSpec::new(steps);
        for &(spot, strike, maturity, rate, sigma) in &cases {
            let quote = OptionQuote::new(spot, strike, maturity, rate).unwrap();
            let fast = price_lattice(&quote, sigma, &spec).unwrap().price;
            let slow = brute_force_price(&quote, sigma, steps);
            assert!(
                (fast - slow).abs() < 1e-10,
                "steps {steps} quote {quote:?} sigma {sigma}: {fast} vs {slow}"
            );
        }
    }
}

#[test]
fn price_is_monotone_in_sigma_at_zero_rate() {
    let spec = LatticeSpec::default();
    for &(spot, strike) in &[(100.0, 100.0), (100.0, 120.0), (100.0, 80.0)] {
        let quote = OptionQuote::new(spot, strike, 1.0, 0.0).unwrap();
        let mut last = -1.0;
        for i in 1..=80 {
            let sigma = 0.025 * i as f64; // (0, 2]
            let price = price_lattice(&quote, sigma, &spec).unwrap().price;
            assert!(
                price >= last,
                "price decreased at sigma {sigma} for strike {strike}"
            );
            last = price;
        }
    }
}

/// The drift of the paper's branch probabilities keeps the discounted
/// expected stock slightly above the spot, so the usual `price ≤ spot`
/// bound only holds while σ²T/n is small; this documents where it breaks
/// and what the model-consistent ceiling is.
#[test]
fn extreme_volatility_breaks_the_spot_ceiling_but_not_the_expectation_ceiling() {
    let quote = OptionQuote::new(100.0, 1.0, 2.0, 0.0).unwrap();
    let spec = LatticeSpec::default();
    let sigma = 1.5_f64;
    let price = price_lattice(&quote, sigma, &spec).unwrap().price;
    assert!(
        price > quote.spot,
        "expected the ceiling to break, got {price}"
    );
    let dt = quote.maturity / spec.steps as f64;
    let expected_stock = quote.spot * (sigma * dt.sqrt()).cosh().powi(spec.steps as i32);
    assert!(price <= expected_stock);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// 0 ≤ price, the European lower bound, and (inside the moderate
    /// parameter region the artifact targets) price ≤ spot.
    #[test]
    fn bounds_hold_on_random_valid_quotes(
        spot in 10.0..500.0f64,
        moneyness in 0.5..2.0f64,
        maturity in 0.1..2.0f64,
        rate in 0.0..0.05f64,
        sigma in 0.05..0.5f64,
        steps in 1u32..=20,
    ) {
        let strike = spot / moneyness;
        let quote = OptionQuote::new(spot, strike, maturity, rate).unwrap();
        let spec = LatticeSpec::new(steps);
        let dt = maturity / steps as f64;
        prop_assume!(sigma >= rate * dt.sqrt());
        let price = price_lattice(&quote, sigma, &spec).unwrap().price;
        prop_assert!(price >= 0.0);
        let lower = (spot - strike * (-rate * maturity).exp()).max(0.0);
        prop_assert!(price >= lower - 1e-9, "price {} below lower bound {}", price, lower);
        prop_assert!(price <= spot * 1.30, "price {} above spot ceiling {}", price, spot);
    }

    /// Under the flagged policy a negative σ at zero rate mirrors the
    /// positive valuation exactly, and is flagged.
    #[test]
    fn negative_sigma_evenness_at_zero_rate(
        spot in 50.0..150.0f64,
        strike in 50.0..150.0f64,
        maturity in 0.1..2.0f64,
        sigma in 0.05..0.8f64,
    ) {
        let quote = OptionQuote::new(spot, strike, maturity, 0.0).unwrap();
        let spec = LatticeSpec::default().with_policy(ProbabilityPolicy::Flag);
        let pos = price_lattice(&quote, sigma, &spec).unwrap();
        let neg = price_lattice(&quote, -sigma, &spec).unwrap();
        prop_assert!(neg.flags.negative_sigma);
        prop_assert!((pos.price - neg.price).abs() <= 1e-9 * (1.0 + pos.price));
    }
}
