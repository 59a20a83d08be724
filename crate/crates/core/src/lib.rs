//! European call implied volatility via an invertible binomial lattice.
//!
//! The pricing core is a recombining lattice whose volatility sensitivity
//! comes from forward-mode automatic differentiation, inverted for implied
//! volatility with Newton-Raphson. Around it sit a closed-form
//! Black-Scholes reference, a seeded GBM simulator for synthetic data,
//! CSV ingestion for market quote files, and a parallel batch harness.

pub mod batch;
pub mod blackscholes;
pub mod dual;
pub mod ingest;
pub mod lattice;
pub mod simulate;
pub mod solver;

pub use batch::{histogram, run_batch, BatchReport, BatchSummary, HistogramBin};
pub use dual::{DualError, DualScalar, Scalar};
pub use ingest::{parse_quotes, to_quote, QuoteRecord, ResultRow, RowDiagnostic};
pub use lattice::{
    LatticeError, LatticeSpec, OptionQuote, Priced, PricingFlags, ProbabilityPolicy,
};
pub use simulate::{simulate_gbm, GbmSpec, PricePath};
pub use solver::{solve_implied_vol, DerivativeMode, SolverConfig, SolverResult, SolverStatus};
