//! Dataset-scale runs: solve every quote, aggregate error statistics.
//!
//! Work is distributed per quote (solves are pure, so this is
//! embarrassingly parallel) and results are collected in input order, so
//! a report is byte-identical whatever the parallelism.

use rayon::prelude::*;

use crate::blackscholes::bs_implied_vol;
use crate::ingest::{to_quote, QuoteRecord, ResultRow};
use crate::lattice::LatticeSpec;
use crate::solver::{solve_implied_vol, SolverConfig, SolverStatus};

/// Aggregate statistics over a batch.
///
/// The error statistics are signed `binomial_iv − reference_iv` over
/// converged rows that have a reference, so systematic underestimation
/// shows up as a negative mean. They are absent (not NaN) when no such
/// pair exists.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BatchSummary {
    pub count_total: usize,
    pub count_converged: usize,
    /// Rows whose iteration settled at σ̂ ≤ 0.
    pub count_negative: usize,
    /// Everything else: iteration budget, flat derivative, pricer failure.
    pub count_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Fraction of converged pairs with binomial_iv < reference_iv.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underestimate_fraction: Option<f64>,
}

/// Per-quote rows plus the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub per_quote: Vec<ResultRow>,
    pub summary: BatchSummary,
}

fn solve_one(record: &QuoteRecord, spec: &LatticeSpec, config: &SolverConfig) -> ResultRow {
    let quote = to_quote(record);
    let result = solve_implied_vol(&quote, spec, config);
    // Prefer the dataset's own reference implied volatility; otherwise
    // derive one from the closed form, leaving it absent for prices with
    // no arbitrage-free volatility.
    let reference_iv = record.reference_iv.or_else(|| bs_implied_vol(&quote).ok());
    ResultRow {
        quote_date: record.quote_date,
        expiry_date: record.expiry_date,
        spot: record.spot,
        strike: record.strike,
        option_price: record.option_price,
        reference_iv,
        binomial_iv: result.implied_vol,
        status: result.status,
        iterations: result.iterations,
        residual: result.final_residual,
    }
}

fn summarize(rows: &[ResultRow]) -> BatchSummary {
    let count_total = rows.len();
    let count_converged = rows
        .iter()
        .filter(|r| r.status == SolverStatus::Converged)
        .count();
    let count_negative = rows
        .iter()
        .filter(|r| r.status == SolverStatus::ConvergedNegative)
        .count();
    let count_failed = count_total - count_converged - count_negative;

    let mut errors: Vec<f64> = rows
        .iter()
        .filter(|r| r.status == SolverStatus::Converged)
        .filter_map(|r| Some(r.binomial_iv? - r.reference_iv?))
        .collect();
    errors.sort_by(f64::total_cmp);

    let (mean_error, median_error, std_error, underestimate_fraction) = if errors.is_empty() {
        (None, None, None, None)
    } else {
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let median = if errors.len() % 2 == 1 {
            errors[errors.len() / 2]
        } else {
            0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
        };
        // population standard deviation, defined for a single pair too
        let variance = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        let below = errors.iter().filter(|&&e| e < 0.0).count() as f64;
        (
            Some(mean),
            Some(median),
            Some(variance.sqrt()),
            Some(below / n),
        )
    };

    BatchSummary {
        count_total,
        count_converged,
        count_negative,
        count_failed,
        mean_error,
        median_error,
        std_error,
        underestimate_fraction,
    }
}

/// Solve every record with `parallelism` worker threads. Output order
/// always matches input order and the report is identical for any
/// parallelism level.
pub fn run_batch(
    records: &[QuoteRecord],
    spec: &LatticeSpec,
    config: &SolverConfig,
    parallelism: usize,
) -> BatchReport {
    assert!(parallelism >= 1, "parallelism must be at least 1");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("building a thread pool cannot fail with a plain size");
    let per_quote: Vec<ResultRow> = pool.install(|| {
        records
            .par_iter()
            .map(|record| solve_one(record, spec, config))
            .collect()
    });
    let summary = summarize(&per_quote);
    BatchReport { per_quote, summary }
}

/// Scatter data for result rows: (reference_iv, binomial_iv) for rows
/// that converged to a positive root and carry a reference. Negative
/// roots are kept out of the scatter by the `Converged`-only filter.
pub fn scatter_points(rows: &[ResultRow]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.status == SolverStatus::Converged)
        .filter_map(|r| Some((r.reference_iv?, r.binomial_iv?)))
        .collect()
}

/// Signed errors binomial_iv − reference_iv over every converged row,
/// negative roots included, for histogramming.
pub fn converged_errors(rows: &[ResultRow]) -> Vec<f64> {
    rows.iter()
        .filter(|r| {
            matches!(
                r.status,
                SolverStatus::Converged | SolverStatus::ConvergedNegative
            )
        })
        .filter_map(|r| Some(r.binomial_iv? - r.reference_iv?))
        .collect()
}

/// One histogram bin: `[lower, upper)` except the last, which includes
/// its upper edge.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width bins spanning the data range. A degenerate range (all
/// values equal) collapses to one unit-width bin centered on the value;
/// empty input gives an empty histogram.
pub fn histogram(errors: &[f64], bin_count: usize) -> Vec<HistogramBin> {
    assert!(bin_count >= 1, "need at least one bin");
    if errors.is_empty() {
        return Vec::new();
    }
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let max = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return vec![HistogramBin {
            lower: min - 0.5,
            upper: min + 0.5,
            count: errors.len(),
        }];
    }
    let width = (max - min) / bin_count as f64;
    let mut bins: Vec<HistogramBin> = (0..bin_count)
        .map(|i| HistogramBin {
            lower: min + i as f64 * width,
            upper: if i + 1 == bin_count {
                max
            } else {
                min + (i + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for &e in errors {
        let index = (((e - min) / width) as usize).min(bin_count - 1);
        bins[index].count += 1;
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::OptionQuote;
    use crate::simulate::{generate_synthetic_quotes, simulate_gbm, GbmSpec};
    use chrono::NaiveDate;

    fn record(spot: f64, strike: f64, days: i64, price: f64) -> QuoteRecord {
        let quote_date = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        QuoteRecord {
            quote_date,
            expiry_date: quote_date + chrono::Days::new(days as u64),
            spot,
            strike,
            option_price: price,
            rate: 0.0,
            reference_iv: None,
        }
    }

    fn lattice_priced_records(count: usize) -> Vec<QuoteRecord> {
        let path = simulate_gbm(&GbmSpec::default());
        let spec = LatticeSpec::default();
        let sigmas = [0.18, 0.24, 0.33];
        let quotes = generate_synthetic_quotes(&path, &[100.0], 90, &sigmas, &spec, 0.0).unwrap();
        quotes
            .into_iter()
            .take(count)
            .map(|(q, sigma)| {
                let mut r = record(q.spot, q.strike, 90, q.market_price.unwrap());
                // carry the generating σ as the reference
                r.reference_iv = Some(sigma);
                r
            })
            .collect()
    }

    #[test]
    fn synthetic_round_trip_batch_converges_everywhere() {
        let records = lattice_priced_records(100);
        let report = run_batch(
            &records,
            &LatticeSpec::default(),
            &SolverConfig::default(),
            4,
        );
        assert_eq!(report.summary.count_total, 100);
        assert_eq!(report.summary.count_converged, 100);
        assert_eq!(report.summary.count_negative, 0);
        assert_eq!(report.summary.count_failed, 0);
        assert!(report.summary.mean_error.unwrap().abs() < 1e-6);
        assert_eq!(report.per_quote.len(), records.len());
    }

    #[test]
    fn empty_input_has_zero_counts_and_no_statistics() {
        let report = run_batch(&[], &LatticeSpec::default(), &SolverConfig::default(), 2);
        assert_eq!(report.summary.count_total, 0);
        assert_eq!(report.summary.count_converged, 0);
        assert_eq!(report.summary.mean_error, None);
        assert_eq!(report.summary.median_error, None);
        assert_eq!(report.summary.std_error, None);
        assert_eq!(report.summary.underestimate_fraction, None);
        let json = serde_json::to_value(&report.summary).unwrap();
        assert!(json.get("mean_error").is_none());
        assert_eq!(json["count_total"], 0);
    }

    #[test]
    fn one_unsolvable_quote_does_not_poison_the_batch() {
        let mut records = lattice_priced_records(10);
        // in-the-money quote priced at zero: no root exists
        records[3] = record(100.0, 90.0, 365, 0.0);
        let report = run_batch(
            &records,
            &LatticeSpec::default(),
            &SolverConfig::default(),
            2,
        );
        assert_eq!(report.summary.count_total, 10);
        assert_eq!(report.summary.count_converged, 9);
        assert_eq!(
            report.summary.count_negative + report.summary.count_failed,
            1
        );
        assert_ne!(report.per_quote[3].status, SolverStatus::Converged);
    }

    #[test]
    fn parallelism_does_not_change_the_report() {
        let records = lattice_priced_records(32);
        let spec = LatticeSpec::default();
        let config = SolverConfig::default();
        let one = run_batch(&records, &spec, &config, 1);
        let eight = run_batch(&records, &spec, &config, 8);
        assert_eq!(one, eight);
    }

    #[test]
    fn reference_iv_falls_back_to_the_closed_form() {
        // Price with the closed form, leave reference_iv empty: the batch
        // derives it by inversion and it matches the generating σ.
        let sigma = 0.3;
        let quote = OptionQuote::new(100.0, 100.0, 90.0 / 365.0, 0.0).unwrap();
        let price = crate::blackscholes::bs_call_price(&crate::blackscholes::BsInputs {
            spot: 100.0,
            strike: 100.0,
            rate: 0.0,
            maturity: quote.maturity,
            sigma,
        })
        .unwrap();
        let records = vec![record(100.0, 100.0, 90, price)];
        let report = run_batch(
            &records,
            &LatticeSpec::default(),
            &SolverConfig::default(),
            1,
        );
        let derived = report.per_quote[0].reference_iv.unwrap();
        assert!((derived - sigma).abs() < 1e-8);
    }

    #[test]
    fn summary_counts_negative_convergence() {
        // below-intrinsic quote that settles at a negative σ
        let records = vec![record(100.0, 90.0, 90, 4.0)];
        let report = run_batch(
            &records,
            &LatticeSpec::default(),
            &SolverConfig::default(),
            1,
        );
        assert_eq!(report.summary.count_negative, 1);
        assert_eq!(report.summary.count_failed, 0);
        assert_eq!(report.per_quote[0].status, SolverStatus::ConvergedNegative);
    }

    #[test]
    fn histogram_hand_counted_example() {
        let bins = histogram(&[0.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(
            bins,
            vec![
                HistogramBin {
                    lower: 0.0,
                    upper: 0.5,
                    count: 3
                },
                HistogramBin {
                    lower: 0.5,
                    upper: 1.0,
                    count: 1
                },
            ]
        );
    }

    #[test]
    fn histogram_degenerate_and_empty_inputs() {
        assert_eq!(histogram(&[], 5), vec![]);
        assert_eq!(
            histogram(&[2.5, 2.5, 2.5], 4),
            vec![HistogramBin {
                lower: 2.0,
                upper: 3.0,
                count: 3
            }]
        );
    }

    #[test]
    fn histogram_counts_are_conserved() {
        let values: Vec<f64> = (0..997).map(|i| (i as f64 * 0.7919).sin()).collect();
        for bins in [1, 2, 7, 50] {
            let h = histogram(&values, bins);
            assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), values.len());
            assert!(h.windows(2).all(|w| w[0].upper == w[1].lower));
        }
    }

    #[test]
    fn underestimation_is_reported_not_asserted() {
        // Quotes priced by the closed form but inverted with the lattice:
        // the summary must carry a signed mean; its sign is data, not a
        // test assertion.
        let mut records = Vec::new();
        for i in 0..20 {
            let sigma = 0.15 + 0.01 * i as f64;
            let price = crate::blackscholes::bs_call_price(&crate::blackscholes::BsInputs {
                spot: 100.0,
                strike: 100.0,
                rate: 0.0,
                maturity: 90.0 / 365.0,
                sigma,
            })
            .unwrap();
            records.push(record(100.0, 100.0, 90, price));
        }
        let report = run_batch(
            &records,
            &LatticeSpec::default(),
            &SolverConfig::default(),
            2,
        );
        assert!(report.summary.count_converged > 0);
        assert!(report.summary.mean_error.is_some());
        assert!(report.summary.underestimate_fraction.is_some());
        let f = report.summary.underestimate_fraction.unwrap();
        assert!((0.0..=1.0).contains(&f));
    }
}
