//! Generates the bundled market-like dataset used by the acceptance
//! suite (tests/data/market_like_200.csv): 200 quotes whose prices come
//! from the closed form, with the reference column produced by inverting
//! that same closed form.
//!
//! Run from the crate root:
//! `cargo run -p binvol --example gen_market_like > tests/data/market_like_200.csv`

use binvol::blackscholes::{bs_call_price, bs_implied_vol, BsInputs};
use binvol::ingest::{write_quotes, QuoteRecord};
use binvol::lattice::OptionQuote;
use binvol::simulate::{simulate_gbm, GbmSpec};
use chrono::NaiveDate;

fn main() {
    let path = simulate_gbm(&GbmSpec {
        horizon_days: 200,
        seed: 20180102,
        ..GbmSpec::default()
    });
    let base_date = NaiveDate::from_ymd_opt(2018, 1, 2).unwrap();
    let rate = 0.02;

    let moneyness = [0.85, 0.95, 1.0, 1.05, 1.15];
    let maturities_days = [30u32, 90, 180, 365];
    let sigmas = [0.15, 0.22, 0.28, 0.35, 0.45];

    let mut records = Vec::with_capacity(200);
    'outer: for (i, day) in (0..path.prices.len()).enumerate() {
        let spot = (path.prices[day] * 100.0).round() / 100.0;
        let m = moneyness[i % moneyness.len()];
        let days = maturities_days[(i / moneyness.len()) % maturities_days.len()];
        let sigma = sigmas[i % sigmas.len()];
        let strike = (spot / m * 100.0).round() / 100.0;
        let maturity = days as f64 / 365.0;

        let price = bs_call_price(&BsInputs {
            spot,
            strike,
            rate,
            maturity,
            sigma,
        })
        .expect("generator inputs are valid");
        let quote = OptionQuote::new(spot, strike, maturity, rate)
            .expect("generator inputs are valid")
            .with_market_price(price)
            .expect("prices are non-negative");
        let reference_iv = bs_implied_vol(&quote).expect("in-band by construction");

        let quote_date = base_date + chrono::Days::new(day as u64);
        records.push(QuoteRecord {
            quote_date,
            expiry_date: quote_date + chrono::Days::new(days as u64),
            spot,
            strike,
            option_price: price,
            rate,
            reference_iv: Some(reference_iv),
        });
        if records.len() == 200 {
            break 'outer;
        }
    }

    write_quotes(std::io::stdout().lock(), &records).expect("stdout is writable");
}
