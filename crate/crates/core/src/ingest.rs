//! Quote-file ingestion and all tabular output formats.
//!
//! Input schema (UTF-8, comma separated, `.` decimal separator, ISO-8601
//! dates, header required):
//!
//! ```text
//! quote_date,expiry_date,spot,strike,option_price[,rate][,reference_iv]
//! ```
//!
//! Result schema written by batch runs and read back by the report step:
//!
//! ```text
//! quote_date,expiry_date,spot,strike,option_price,reference_iv,binomial_iv,status,iterations,residual
//! ```
//!
//! Absent values are empty fields. A bad header is the only hard parse
//! error; every row-level problem becomes a [`RowDiagnostic`] and the
//! parse carries on. Day counts are ACT/365 fixed.

use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

use crate::lattice::OptionQuote;
use crate::solver::SolverStatus;

/// Errors that abort an ingest operation outright.
#[derive(Debug, Error)]
pub enum IngestError {
    /// The header row does not match the documented schema.
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One validated input row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteRecord {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub spot: f64,
    pub strike: f64,
    pub option_price: f64,
    /// Row-level rate, or the parse-time default when the column was
    /// missing or empty.
    pub rate: f64,
    /// The dataset's own Black-Scholes implied volatility, when present.
    pub reference_iv: Option<f64>,
}

/// A row that failed validation: its 1-based data-row number and why.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDiagnostic {
    pub row: usize,
    pub reason: String,
}

const REQUIRED_COLUMNS: [&str; 5] = [
    "quote_date",
    "expiry_date",
    "spot",
    "strike",
    "option_price",
];

struct HeaderLayout {
    rate: Option<usize>,
    reference_iv: Option<usize>,
    width: usize,
}

fn parse_header(record: &csv::ByteRecord) -> Result<HeaderLayout, IngestError> {
    let fields: Vec<String> = record
        .iter()
        .map(|f| {
            std::str::from_utf8(f)
                .map(|s| s.trim().to_string())
                .map_err(|_| IngestError::MalformedHeader("header is not UTF-8".into()))
        })
        .collect::<Result<_, _>>()?;
    if fields.len() < REQUIRED_COLUMNS.len() {
        return Err(IngestError::MalformedHeader(format!(
            "expected at least {} columns, found {}",
            REQUIRED_COLUMNS.len(),
            fields.len()
        )));
    }
    for (found, expected) in fields.iter().zip(REQUIRED_COLUMNS) {
        if found != expected {
            return Err(IngestError::MalformedHeader(format!(
                "expected column {expected:?}, found {found:?}"
            )));
        }
    }
    let mut layout = HeaderLayout {
        rate: None,
        reference_iv: None,
        width: fields.len(),
    };
    match fields[REQUIRED_COLUMNS.len()..] {
        [] => {}
        [ref a] if a == "rate" => layout.rate = Some(5),
        [ref a] if a == "reference_iv" => layout.reference_iv = Some(5),
        [ref a, ref b] if a == "rate" && b == "reference_iv" => {
            layout.rate = Some(5);
            layout.reference_iv = Some(6);
        }
        _ => {
            return Err(IngestError::MalformedHeader(format!(
                "unrecognized trailing columns {:?}",
                &fields[REQUIRED_COLUMNS.len()..]
            )))
        }
    }
    Ok(layout)
}

fn field(record: &csv::ByteRecord, index: usize) -> Result<&str, String> {
    let bytes = record
        .get(index)
        .ok_or_else(|| format!("missing field {index}"))?;
    std::str::from_utf8(bytes)
        .map(str::trim)
        .map_err(|_| format!("field {index} is not UTF-8"))
}

fn parse_date(record: &csv::ByteRecord, index: usize, name: &str) -> Result<NaiveDate, String> {
    let text = field(record, index)?;
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .map_err(|_| format!("{name} {text:?} is not an ISO-8601 date"))
}

fn parse_number(record: &csv::ByteRecord, index: usize, name: &str) -> Result<f64, String> {
    let text = field(record, index)?;
    let value = f64::from_str(text).map_err(|_| format!("{name} {text:?} is not a number"))?;
    if !value.is_finite() {
        return Err(format!("{name} must be finite, got {text:?}"));
    }
    Ok(value)
}

fn parse_row(
    record: &csv::ByteRecord,
    layout: &HeaderLayout,
    default_rate: f64,
) -> Result<QuoteRecord, String> {
    if record.len() != layout.width {
        return Err(format!(
            "expected {} fields, found {}",
            layout.width,
            record.len()
        ));
    }
    let quote_date = parse_date(record, 0, "quote_date")?;
    let expiry_date = parse_date(record, 1, "expiry_date")?;
    if expiry_date <= quote_date {
        return Err(format!(
            "expiry {expiry_date} is not after quote date {quote_date}"
        ));
    }
    let spot = parse_number(record, 2, "spot")?;
    if spot <= 0.0 {
        return Err(format!("spot must be positive, got {spot}"));
    }
    let strike = parse_number(record, 3, "strike")?;
    if strike <= 0.0 {
        return Err(format!("strike must be positive, got {strike}"));
    }
    let option_price = parse_number(record, 4, "option_price")?;
    if option_price < 0.0 {
        return Err(format!(
            "option_price must be non-negative, got {option_price}"
        ));
    }
    let rate = match layout.rate {
        Some(index) if !field(record, index)?.is_empty() => parse_number(record, index, "rate")?,
        _ => default_rate,
    };
    let reference_iv = match layout.reference_iv {
        Some(index) if !field(record, index)?.is_empty() => {
            Some(parse_number(record, index, "reference_iv")?)
        }
        _ => None,
    };
    Ok(QuoteRecord {
        quote_date,
        expiry_date,
        spot,
        strike,
        option_price,
        rate,
        reference_iv,
    })
}

/// Parse a quote CSV. Valid rows become records; invalid rows become
/// diagnostics; only a bad header aborts.
pub fn parse_quotes<R: Read>(
    reader: R,
    default_rate: f64,
) -> Result<(Vec<QuoteRecord>, Vec<RowDiagnostic>), IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut header = csv::ByteRecord::new();
    match csv_reader.read_byte_record(&mut header) {
        Ok(true) => {}
        Ok(false) => return Err(IngestError::MalformedHeader("empty input".into())),
        Err(e) => return Err(IngestError::MalformedHeader(e.to_string())),
    }
    let layout = parse_header(&header)?;

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut row = 0usize;
    let mut raw = csv::ByteRecord::new();
    loop {
        match csv_reader.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {
                row += 1;
                // Trailing blank lines arrive as a single empty field.
                if raw.len() == 1 && raw.get(0) == Some(b"") {
                    continue;
                }
                match parse_row(&raw, &layout, default_rate) {
                    Ok(record) => records.push(record),
                    Err(reason) => diagnostics.push(RowDiagnostic { row, reason }),
                }
            }
            Err(e) => {
                row += 1;
                diagnostics.push(RowDiagnostic {
                    row,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((records, diagnostics))
}

/// Convert a validated record into a pricing quote; the year fraction is
/// the calendar-day difference over 365.
pub fn to_quote(record: &QuoteRecord) -> OptionQuote {
    let days = (record.expiry_date - record.quote_date).num_days();
    OptionQuote {
        spot: record.spot,
        strike: record.strike,
        maturity: days as f64 / 365.0,
        rate: record.rate,
        market_price: Some(record.option_price),
    }
}

fn optional(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Write records in the input schema (all columns, empty for absent).
pub fn write_quotes<W: Write>(mut writer: W, records: &[QuoteRecord]) -> Result<(), IngestError> {
    writeln!(
        writer,
        "quote_date,expiry_date,spot,strike,option_price,rate,reference_iv"
    )?;
    for r in records {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            r.quote_date,
            r.expiry_date,
            r.spot,
            r.strike,
            r.option_price,
            r.rate,
            optional(r.reference_iv)
        )?;
    }
    Ok(())
}

/// One per-quote outcome of a batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub spot: f64,
    pub strike: f64,
    pub option_price: f64,
    pub reference_iv: Option<f64>,
    pub binomial_iv: Option<f64>,
    pub status: SolverStatus,
    pub iterations: u32,
    pub residual: f64,
}

const RESULT_HEADER: &str =
    "quote_date,expiry_date,spot,strike,option_price,reference_iv,binomial_iv,status,iterations,residual";

/// Write batch results in the output schema.
pub fn write_results<W: Write>(mut writer: W, rows: &[ResultRow]) -> Result<(), IngestError> {
    writeln!(writer, "{RESULT_HEADER}")?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{},{}",
            r.quote_date,
            r.expiry_date,
            r.spot,
            r.strike,
            r.option_price,
            optional(r.reference_iv),
            optional(r.binomial_iv),
            r.status,
            r.iterations,
            r.residual
        )?;
    }
    Ok(())
}

/// Read back a result CSV written by [`write_results`].
pub fn parse_results<R: Read>(
    reader: R,
) -> Result<(Vec<ResultRow>, Vec<RowDiagnostic>), IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut header = csv::ByteRecord::new();
    match csv_reader.read_byte_record(&mut header) {
        Ok(true) => {}
        Ok(false) => return Err(IngestError::MalformedHeader("empty input".into())),
        Err(e) => return Err(IngestError::MalformedHeader(e.to_string())),
    }
    let expected: Vec<&str> = RESULT_HEADER.split(',').collect();
    let fields: Vec<&str> = header
        .iter()
        .map(|f| std::str::from_utf8(f).map(str::trim))
        .collect::<Result<_, _>>()
        .map_err(|_| IngestError::MalformedHeader("header is not UTF-8".into()))?;
    if fields != expected {
        return Err(IngestError::MalformedHeader(format!(
            "expected {RESULT_HEADER:?}"
        )));
    }

    let parse_result_row = |record: &csv::ByteRecord| -> Result<ResultRow, String> {
        if record.len() != expected.len() {
            return Err(format!(
                "expected {} fields, found {}",
                expected.len(),
                record.len()
            ));
        }
        let optional_number = |index: usize, name: &str| -> Result<Option<f64>, String> {
            let text = field(record, index)?;
            if text.is_empty() {
                return Ok(None);
            }
            f64::from_str(text)
                .map(Some)
                .map_err(|_| format!("{name} {text:?} is not a number"))
        };
        let status_text = field(record, 7)?;
        let iterations_text = field(record, 8)?;
        Ok(ResultRow {
            quote_date: parse_date(record, 0, "quote_date")?,
            expiry_date: parse_date(record, 1, "expiry_date")?,
            spot: parse_number(record, 2, "spot")?,
            strike: parse_number(record, 3, "strike")?,
            option_price: parse_number(record, 4, "option_price")?,
            reference_iv: optional_number(5, "reference_iv")?,
            binomial_iv: optional_number(6, "binomial_iv")?,
            status: SolverStatus::from_str(status_text)?,
            iterations: u32::from_str(iterations_text)
                .map_err(|_| format!("iterations {iterations_text:?} is not a count"))?,
            residual: {
                let text = field(record, 9)?;
                f64::from_str(text).map_err(|_| format!("residual {text:?} is not a number"))?
            },
        })
    };

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut row = 0usize;
    let mut raw = csv::ByteRecord::new();
    loop {
        match csv_reader.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {
                row += 1;
                if raw.len() == 1 && raw.get(0) == Some(b"") {
                    continue;
                }
                match parse_result_row(&raw) {
                    Ok(parsed) => rows.push(parsed),
                    Err(reason) => diagnostics.push(RowDiagnostic { row, reason }),
                }
            }
            Err(e) => {
                row += 1;
                diagnostics.push(RowDiagnostic {
                    row,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((rows, diagnostics))
}

/// Write a simulated path as `time_years,price`.
pub fn write_price_path<W: Write>(
    mut writer: W,
    path: &crate::simulate::PricePath,
) -> Result<(), IngestError> {
    writeln!(writer, "time_years,price")?;
    for (t, p) in path.times.iter().zip(&path.prices) {
        writeln!(writer, "{t},{p}")?;
    }
    Ok(())
}

/// Write row-level diagnostics as `row,reason`; reasons are CSV-quoted
/// since they may contain commas.
pub fn write_diagnostics<W: Write>(
    writer: W,
    diagnostics: &[RowDiagnostic],
) -> Result<(), IngestError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer
        .write_record(["row", "reason"])
        .map_err(csv_io_error)?;
    for d in diagnostics {
        csv_writer
            .write_record([d.row.to_string(), d.reason.clone()])
            .map_err(csv_io_error)?;
    }
    csv_writer.flush()?;
    Ok(())
}

fn csv_io_error(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Write scatter data, one `reference_iv,binomial_iv` pair per row.
pub fn write_scatter<W: Write>(mut writer: W, points: &[(f64, f64)]) -> Result<(), IngestError> {
    writeln!(writer, "reference_iv,binomial_iv")?;
    for (reference, binomial) in points {
        writeln!(writer, "{reference},{binomial}")?;
    }
    Ok(())
}

/// Write histogram bins as `bin_lower,bin_upper,count`.
pub fn write_histogram<W: Write>(
    mut writer: W,
    bins: &[crate::batch::HistogramBin],
) -> Result<(), IngestError> {
    writeln!(writer, "bin_lower,bin_upper,count")?;
    for bin in bins {
        writeln!(writer, "{},{},{}", bin.lower, bin.upper, bin.count)?;
    }
    Ok(())
}
