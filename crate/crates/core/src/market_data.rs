//! OHLC ingestion, validation, and panel alignment.
//!
//! Daily candles are loaded one CSV per ticker, validated against the
//! candlestick constraints (low > 0, low <= high, open/close inside the
//! range), sorted, and aligned across tickers by date intersection.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One daily candle. Prices are strictly positive and the usual OHLC
/// ordering constraints hold once validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcBar {
    /// Checks the candlestick constraints, returning a description of the
    /// first violation if any.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.open.is_finite()
            && self.high.is_finite()
            && self.low.is_finite()
            && self.close.is_finite())
        {
            return Err("non-finite price".to_string());
        }
        if self.low <= 0.0 {
            return Err(format!("low must be > 0, got {}", self.low));
        }
        if self.high < self.low {
            return Err(format!("high < low ({} < {})", self.high, self.low));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!(
                "open {} outside [low, high] = [{}, {}]",
                self.open, self.low, self.high
            ));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!(
                "close {} outside [low, high] = [{}, {}]",
                self.close, self.low, self.high
            ));
        }
        Ok(())
    }
}

/// Validated, date-ascending candle series for one ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub ticker: String,
    pub bars: Vec<OhlcBar>,
}

impl PriceSeries {
    /// Builds a series from unsorted bars: sorts by date, then enforces the
    /// bar invariants and strictly increasing timestamps.
    pub fn new(ticker: impl Into<String>, mut bars: Vec<OhlcBar>) -> Result<Self> {
        let ticker = ticker.into();
        if bars.is_empty() {
            return Err(Error::EmptySeries { context: ticker });
        }
        bars.sort_by_key(|b| b.date);
        for (i, bar) in bars.iter().enumerate() {
            if let Err(detail) = bar.validate() {
                return Err(Error::InvariantViolation {
                    context: ticker,
                    row: i + 1,
                    detail,
                });
            }
            if i > 0 && bars[i - 1].date >= bar.date {
                return Err(Error::InvariantViolation {
                    context: ticker,
                    row: i + 1,
                    detail: format!("duplicate timestamp {}", bar.date),
                });
            }
        }
        Ok(PriceSeries { ticker, bars })
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    /// Restricts the series to dates in `[start, end]`, inclusive.
    pub fn slice(&self, start: NaiveDate, end: NaiveDate) -> Result<PriceSeries> {
        let bars: Vec<OhlcBar> = self
            .bars
            .iter()
            .copied()
            .filter(|b| b.date >= start && b.date <= end)
            .collect();
        if bars.is_empty() {
            return Err(Error::EmptyWindow { start, end });
        }
        Ok(PriceSeries {
            ticker: self.ticker.clone(),
            bars,
        })
    }
}

/// Several tickers on an identical date vector, one column per ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `columns[i]` holds the bars of `tickers[i]`, one per date.
    pub columns: Vec<Vec<OhlcBar>>,
}

impl Panel {
    pub fn series(&self, idx: usize) -> PriceSeries {
        PriceSeries {
            ticker: self.tickers[idx].clone(),
            bars: self.columns[idx].clone(),
        }
    }

    pub fn series_by_ticker(&self, ticker: &str) -> Option<PriceSeries> {
        self.tickers
            .iter()
            .position(|t| t == ticker)
            .map(|i| self.series(i))
    }

    pub fn to_series(&self) -> Vec<PriceSeries> {
        (0..self.tickers.len()).map(|i| self.series(i)).collect()
    }
}

/// Abstract price feed. The CSV loader is its only shipped implementation;
/// live feeds slot in here without touching the rest of the pipeline.
pub trait PriceProvider {
    fn fetch(&self, ticker: &str, start: NaiveDate, end: NaiveDate) -> Result<PriceSeries>;
}

/// Loads `<dir>/<TICKER>.csv` files on demand.
pub struct CsvProvider {
    dir: std::path::PathBuf,
}

impl CsvProvider {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        CsvProvider { dir: dir.into() }
    }
}

impl PriceProvider for CsvProvider {
    fn fetch(&self, ticker: &str, start: NaiveDate, end: NaiveDate) -> Result<PriceSeries> {
        let path = self.dir.join(format!("{ticker}.csv"));
        if !path.exists() {
            return Err(Error::MissingData {
                ticker: ticker.to_string(),
                path: path.display().to_string(),
            });
        }
        load_csv(&path, ticker)?.slice(start, end)
    }
}

/// Loads and validates one ticker's candles from a CSV file with header
/// `date,open,high,low,close` (case-insensitive; a trailing volume column
/// is ignored). Rows may arrive out of order; the result is ascending.
pub fn load_csv(path: &Path, ticker: &str) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;

    let headers = rdr.headers()?.clone();
    let ctx = format!("{} ({})", ticker, path.display());
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MalformedRow {
                context: ctx.clone(),
                row: 0,
                detail: format!("missing column `{name}` in header"),
            })
    };
    let (c_date, c_open, c_high, c_low, c_close) = (
        col("date")?,
        col("open")?,
        col("high")?,
        col("low")?,
        col("close")?,
    );

    let mut bars = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |idx: usize, name: &str| -> Result<&str> {
            rec.get(idx).ok_or_else(|| Error::MalformedRow {
                context: ctx.clone(),
                row,
                detail: format!("missing field `{name}`"),
            })
        };
        let date = NaiveDate::parse_from_str(field(c_date, "date")?, "%Y-%m-%d").map_err(|e| {
            Error::MalformedRow {
                context: ctx.clone(),
                row,
                detail: format!("unparseable date: {e}"),
            }
        })?;
        let num = |idx: usize, name: &str| -> Result<f64> {
            field(idx, name)?
                .parse::<f64>()
                .map_err(|e| Error::MalformedRow {
                    context: ctx.clone(),
                    row,
                    detail: format!("unparseable {name}: {e}"),
                })
        };
        let bar = OhlcBar {
            date,
            open: num(c_open, "open")?,
            high: num(c_high, "high")?,
            low: num(c_low, "low")?,
            close: num(c_close, "close")?,
        };
        if let Err(detail) = bar.validate() {
            return Err(Error::InvariantViolation {
                context: ctx,
                row,
                detail,
            });
        }
        bars.push(bar);
    }
    PriceSeries::new(ticker, bars)
}

/// Writes a series back out in the loader's format, prices with 6 decimal
/// places so that `load_csv(write_csv(s)) == s` for such prices.
pub fn write_csv(series: &PriceSeries, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "date,open,high,low,close")?;
    for b in &series.bars {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6}",
            b.date, b.open, b.high, b.low, b.close
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Aligns several validated series to the intersection of their date sets,
/// preserving ticker order.
pub fn align(series_list: &[PriceSeries]) -> Result<Panel> {
    if series_list.len() < 2 {
        return Err(Error::TooFewSeries {
            need: 2,
            got: series_list.len(),
        });
    }
    let mut common: BTreeSet<NaiveDate> = series_list[0].bars.iter().map(|b| b.date).collect();
    for s in &series_list[1..] {
        let dates: BTreeSet<NaiveDate> = s.bars.iter().map(|b| b.date).collect();
        common = common.intersection(&dates).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::NoCommonDates {
            count: series_list.len(),
        });
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    let columns = series_list
        .iter()
        .map(|s| {
            s.bars
                .iter()
                .filter(|b| dates.binary_search(&b.date).is_ok())
                .copied()
                .collect()
        })
        .collect();
    Ok(Panel {
        tickers: series_list.iter().map(|s| s.ticker.clone()).collect(),
        dates,
        columns,
    })
}

/// Restricts a panel to dates in `[start, end]`, inclusive.
pub fn slice_window(panel: &Panel, start: NaiveDate, end: NaiveDate) -> Result<Panel> {
    let keep: Vec<usize> = panel
        .dates
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= start && **d <= end)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyWindow { start, end });
    }
    Ok(Panel {
        tickers: panel.tickers.clone(),
        dates: keep.iter().map(|&i| panel.dates[i]).collect(),
        columns: panel
            .columns
            .iter()
            .map(|col| keep.iter().map(|&i| col[i]).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn bar(date: &str, o: f64, h: f64, l: f64, c: f64) -> OhlcBar {
        OhlcBar {
            date: d(date),
            open: o,
            high: h,
            low: l,
            close: c,
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_minimal_well_formed() {
        let f = write_tmp("date,open,high,low,close\n2023-01-02,10,12,9,11\n2023-01-03,11,13,10,12\n");
        let s = load_csv(f.path(), "T").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.bars[0].date, d("2023-01-02"));
        assert_eq!(s.bars[1].close, 12.0);
    }

    #[test]
    fn load_rejects_high_below_low() {
        let f = write_tmp("date,open,high,low,close\n2023-01-02,10,9,11,10\n");
        match load_csv(f.path(), "T") {
            Err(Error::InvariantViolation { row, detail, .. }) => {
                assert_eq!(row, 1);
                assert!(detail.contains("high < low"), "{detail}");
            }
            other => panic!("expected InvariantViolation, got {other:?}"),
        }
    }

    #[test]
    fn load_sorts_out_of_order_rows() {
        let sorted = write_tmp("date,open,high,low,close\n2023-01-02,10,12,9,11\n2023-01-03,11,13,10,12\n");
        let shuffled = write_tmp("date,open,high,low,close\n2023-01-03,11,13,10,12\n2023-01-02,10,12,9,11\n");
        // sort-then-validate oracle: both orderings load identically
        assert_eq!(
            load_csv(sorted.path(), "T").unwrap(),
            load_csv(shuffled.path(), "T").unwrap()
        );
    }

    #[test]
    fn load_reports_malformed_field_with_row() {
        let f = write_tmp("date,open,high,low,close\n2023-01-02,10,12,9,11\n2023-01-03,x,13,10,12\n");
        match load_csv(f.path(), "T") {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_duplicate_dates() {
        let f = write_tmp("date,open,high,low,close\n2023-01-02,10,12,9,11\n2023-01-02,11,13,10,12\n");
        assert!(matches!(
            load_csv(f.path(), "T"),
            Err(Error::InvariantViolation { .. })
        ));
    }

    #[test]
    fn load_empty_file_is_empty_series() {
        let f = write_tmp("date,open,high,low,close\n");
        assert!(matches!(load_csv(f.path(), "T"), Err(Error::EmptySeries { .. })));
    }

    #[test]
    fn load_ignores_volume_column() {
        let f = write_tmp("Date,Open,High,Low,Close,Volume\n2023-01-02,10,12,9,11,123456\n");
        let s = load_csv(f.path(), "T").unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn align_identical_dates_keeps_all() {
        let a = PriceSeries::new("A", vec![bar("2023-01-02", 1.0, 2.0, 0.5, 1.5)]).unwrap();
        let b = PriceSeries::new("B", vec![bar("2023-01-02", 2.0, 3.0, 1.5, 2.5)]).unwrap();
        let p = align(&[a, b]).unwrap();
        assert_eq!(p.dates.len(), 1);
        assert_eq!(p.tickers, vec!["A", "B"]);
    }

    #[test]
    fn align_takes_date_intersection() {
        let a = PriceSeries::new(
            "A",
            vec![
                bar("2023-01-02", 1.0, 2.0, 0.5, 1.5),
                bar("2023-01-03", 1.0, 2.0, 0.5, 1.5),
                bar("2023-01-04", 1.0, 2.0, 0.5, 1.5),
            ],
        )
        .unwrap();
        let b = PriceSeries::new(
            "B",
            vec![
                bar("2023-01-03", 1.0, 2.0, 0.5, 1.5),
                bar("2023-01-04", 1.0, 2.0, 0.5, 1.5),
                bar("2023-01-05", 1.0, 2.0, 0.5, 1.5),
            ],
        )
        .unwrap();
        let p = align(&[a.clone(), b.clone()]).unwrap();
        // set-intersection oracle
        let expect: Vec<NaiveDate> = {
            let sa: BTreeSet<_> = a.dates().into_iter().collect();
            let sb: BTreeSet<_> = b.dates().into_iter().collect();
            sa.intersection(&sb).copied().collect()
        };
        assert_eq!(p.dates, expect);
        assert_eq!(p.dates, vec![d("2023-01-03"), d("2023-01-04")]);
    }

    #[test]
    fn align_disjoint_dates_errors() {
        let a = PriceSeries::new("A", vec![bar("2023-01-02", 1.0, 2.0, 0.5, 1.5)]).unwrap();
        let b = PriceSeries::new("B", vec![bar("2023-01-03", 1.0, 2.0, 0.5, 1.5)]).unwrap();
        assert!(matches!(align(&[a, b]), Err(Error::NoCommonDates { .. })));
    }

    #[test]
    fn slice_identity_and_empty() {
        let a = PriceSeries::new(
            "A",
            vec![
                bar("2023-01-02", 1.0, 2.0, 0.5, 1.5),
                bar("2023-01-03", 1.0, 2.0, 0.5, 1.5),
            ],
        )
        .unwrap();
        let b = PriceSeries::new(
            "B",
            vec![
                bar("2023-01-02", 1.0, 2.0, 0.5, 1.5),
                bar("2023-01-03", 1.0, 2.0, 0.5, 1.5),
            ],
        )
        .unwrap();
        let p = align(&[a, b]).unwrap();
        let same = slice_window(&p, d("2023-01-02"), d("2023-01-03")).unwrap();
        assert_eq!(same, p);
        assert!(matches!(
            slice_window(&p, d("2024-01-01"), d("2024-02-01")),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn slice_inner_range() {
        let bars: Vec<OhlcBar> = (0..10)
            .map(|i| OhlcBar {
                date: d("2023-01-01") + chrono::Days::new(i),
                open: 10.0,
                high: 11.0,
                low: 9.0,
                close: 10.5,
            })
            .collect();
        let a = PriceSeries::new("A", bars.clone()).unwrap();
        let b = PriceSeries::new("B", bars).unwrap();
        let p = align(&[a, b]).unwrap();
        let s = slice_window(&p, d("2023-01-03"), d("2023-01-05")).unwrap();
        assert_eq!(s.dates.len(), 3);
        assert_eq!(s.dates[0], d("2023-01-03"));
        assert_eq!(s.dates[2], d("2023-01-05"));
    }

    #[test]
    fn csv_provider_missing_ticker_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let p = CsvProvider::new(dir.path());
        match p.fetch("ZZZ", d("2023-01-01"), d("2023-12-31")) {
            Err(Error::MissingData { ticker, .. }) => assert_eq!(ticker, "ZZZ"),
            other => panic!("expected MissingData, got {other:?}"),
        }
    }

    prop_compose! {
        /// Valid candle: low > 0, high >= low, open/close inside the range.
        fn valid_bar(day: u64)
            (low_c in 1u32..=100_000, spread_c in 0u32..=20_000, fo in 0.0f64..=1.0, fc in 0.0f64..=1.0)
            -> OhlcBar
        {
            let low = low_c as f64 / 100.0;
            let high = low + spread_c as f64 / 100.0;
            OhlcBar {
                date: d("2020-01-01") + chrono::Days::new(day),
                open: low + fo * (high - low),
                high,
                low,
                close: low + fc * (high - low),
            }
        }
    }

    proptest! {
        #[test]
        fn generated_bars_satisfy_range_constraints(b in valid_bar(0)) {
            prop_assert!(b.validate().is_ok());
            prop_assert!(b.low <= b.open.min(b.close));
            prop_assert!(b.high >= b.open.max(b.close));
        }

        #[test]
        fn invalid_bars_are_rejected(b in valid_bar(0)) {
            // swap high/low to force a violation unless the bar is flat
            prop_assume!(b.high > b.low);
            let bad = OhlcBar { high: b.low, low: b.high, ..b };
            prop_assert!(bad.validate().is_err());
        }

        #[test]
        fn align_is_idempotent(n in 2usize..5, offset in 0u64..3, len in 3u64..8) {
            let series: Vec<PriceSeries> = (0..n).map(|i| {
                let bars: Vec<OhlcBar> = (0..len).map(|j| OhlcBar {
                    date: d("2020-01-01") + chrono::Days::new(i as u64 * offset + j),
                    open: 10.0, high: 11.0, low: 9.0, close: 10.0,
                }).collect();
                PriceSeries::new(format!("T{i}"), bars).unwrap()
            }).collect();
            if let Ok(p) = align(&series) {
                let again = align(&p.to_series()).unwrap();
                prop_assert_eq!(p, again);
            }
        }

        #[test]
        fn csv_round_trips_six_decimal_prices(bars in proptest::collection::vec(valid_bar(0), 1..20)) {
            // re-date to be strictly increasing
            let bars: Vec<OhlcBar> = bars.into_iter().enumerate().map(|(i, mut b)| {
                b.date = d("2020-01-01") + chrono::Days::new(i as u64);
                b
            }).collect();
            let s = PriceSeries::new("RT", bars).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_csv(&s, f.path()).unwrap();
            let back = load_csv(f.path(), "RT").unwrap();
            prop_assert_eq!(s, back);
        }
    }
}
