//! Vanilla call quotes: Black-Scholes synthesis and CSV ingestion.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoffs::ConstraintBlock;

pub const CSV_HEADER: [&str; 4] = ["expiry_index", "strike", "bid", "ask"];

/// Bid-ask quote on a call expiring at monitoring time `expiry_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub expiry_index: usize,
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
}

impl Quote {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::InvalidQuote(format!("strike {} must be positive", self.strike)));
        }
        if !(self.bid.is_finite() && self.ask.is_finite() && self.bid >= 0.0) {
            return Err(Error::InvalidQuote(format!(
                "bid {} / ask {} must be finite with bid >= 0",
                self.bid, self.ask
            )));
        }
        if self.bid > self.ask {
            return Err(Error::InvalidQuote(format!(
                "crossed quote at strike {}: bid {} > ask {}",
                self.strike, self.bid, self.ask
            )));
        }
        if self.expiry_index == 0 {
            return Err(Error::InvalidQuote("expiry index starts at 1".into()));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }
}

/// Quotes grouped by expiry index. Rates are zero throughout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuoteSet {
    pub spot: Option<f64>,
    pub rate: f64,
    groups: BTreeMap<usize, Vec<Quote>>,
}

impl QuoteSet {
    pub fn new(spot: Option<f64>) -> Self {
        Self {
            spot,
            rate: 0.0,
            groups: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, quote: Quote) -> Result<()> {
        quote.validate()?;
        self.groups.entry(quote.expiry_index).or_default().push(quote);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn expiry(&self, k: usize) -> &[Quote] {
        self.groups.get(&k).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Quote> {
        self.groups.values().flatten()
    }

    pub fn max_expiry_index(&self) -> Option<usize> {
        self.groups.keys().next_back().copied()
    }

    /// One constraint block per monitoring time `1..=n`.
    pub fn blocks(&self, n: usize) -> Result<Vec<ConstraintBlock>> {
        if let Some(k) = self.max_expiry_index() {
            if k > n {
                return Err(Error::InvalidQuote(format!(
                    "quote expiry index {k} beyond horizon n = {n}"
                )));
            }
        }
        Ok((1..=n)
            .map(|k| ConstraintBlock {
                quotes: self.expiry(k).to_vec(),
            })
            .collect())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for q in self.iter() {
            w.write_record([
                q.expiry_index.to_string(),
                q.strike.to_string(),
                q.bid.to_string(),
                q.ask.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Zero-rate Black-Scholes call value.
pub fn bs_call(spot: f64, strike: f64, vol: f64, expiry: f64) -> Result<f64> {
    if !(spot > 0.0) || !(strike >= 0.0) || !(vol >= 0.0) || !(expiry >= 0.0) {
        return Err(Error::NegativeInput(format!(
            "spot {spot}, strike {strike}, vol {vol}, expiry {expiry}"
        )));
    }
    if strike == 0.0 {
        return Ok(spot);
    }
    let sd = vol * expiry.sqrt();
    if sd == 0.0 {
        return Ok((spot - strike).max(0.0));
    }
    let d1 = ((spot / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    Ok(spot * norm_cdf(d1) - strike * norm_cdf(d2))
}

/// Black-Scholes mids with a symmetric half-spread; bids are clipped at 0.
pub fn synthesize_quotes(
    spot: f64,
    vol: f64,
    expiries: &[(usize, f64)],
    strikes: &[f64],
    half_spread: f64,
) -> Result<QuoteSet> {
    if !(half_spread >= 0.0) {
        return Err(Error::NegativeInput(format!("half spread {half_spread}")));
    }
    let mut set = QuoteSet::new(Some(spot));
    for &(k, t) in expiries {
        for &strike in strikes {
            let mid = bs_call(spot, strike, vol, t)?;
            set.push(Quote {
                expiry_index: k,
                strike,
                bid: (mid - half_spread).max(0.0),
                ask: mid + half_spread,
            })?;
        }
    }
    Ok(set)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    expiry_index: usize,
    strike: f64,
    bid: f64,
    ask: f64,
}

/// Reads `expiry_index,strike,bid,ask` rows.
pub fn load_quotes_csv(path: impl AsRef<Path>) -> Result<QuoteSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::ParseError {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut set = QuoteSet::new(None);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: CsvRow = record.deserialize(None).map_err(|e| Error::ParseError {
            line,
            message: e.to_string(),
        })?;
        if row.bid > row.ask {
            return Err(Error::CrossedQuote {
                line,
                bid: row.bid,
                ask: row.ask,
            });
        }
        set.push(Quote {
            expiry_index: row.expiry_index,
            strike: row.strike,
            bid: row.bid,
            ask: row.ask,
        })
        .map_err(|e| Error::ParseError {
            line,
            message: e.to_string(),
        })?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    /// Reference normal CDF by adaptive Simpson quadrature of the density.
    fn cdf_by_quadrature(x: f64) -> f64 {
        fn pdf(t: f64) -> f64 {
            (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
        }
        fn simpson(a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (pdf(a) + 4.0 * pdf(0.5 * (a + b)) + pdf(b))
        }
        fn adapt(a: f64, b: f64, whole: f64, eps: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let (l, r) = (simpson(a, c), simpson(c, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * eps {
                l + r + (l + r - whole) / 15.0
            } else {
                adapt(a, c, l, eps / 2.0, depth - 1) + adapt(c, b, r, eps / 2.0, depth - 1)
            }
        }
        let lo = -12.0;
        if x <= lo {
            return 0.0;
        }
        adapt(lo, x, simpson(lo, x), 1e-15, 40)
    }

    fn bs_by_quadrature(s: f64, k: f64, vol: f64, t: f64) -> f64 {
        let sd = vol * t.sqrt();
        let d1 = ((s / k).ln() + 0.5 * sd * sd) / sd;
        s * cdf_by_quadrature(d1) - k * cdf_by_quadrature(d1 - sd)
    }

    #[test]
    fn cdf_matches_quadrature() {
        for &x in &[-6.0, -2.5, -1.0, -0.1, 0.0, 0.3, 1.7, 4.0] {
            assert_abs_diff_eq!(norm_cdf(x), cdf_by_quadrature(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn at_the_money_call() {
        // Oracle: quadrature-based normal CDF, 5.1467...
        let reference = bs_by_quadrature(100.0, 100.0, 0.2, 5.0 / 12.0);
        let v = bs_call(100.0, 100.0, 0.2, 5.0 / 12.0).unwrap();
        assert_abs_diff_eq!(v, reference, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 5.1467, epsilon = 5e-4);
    }

    #[test]
    fn degenerate_calls() {
        assert_eq!(bs_call(100.0, 0.0, 0.2, 5.0 / 12.0).unwrap(), 100.0);
        assert_eq!(bs_call(100.0, 100.0, 0.0, 5.0 / 12.0).unwrap(), 0.0);
        assert_eq!(bs_call(100.0, 90.0, 0.2, 0.0).unwrap(), 10.0);
        assert!(matches!(
            bs_call(100.0, -1.0, 0.2, 1.0),
            Err(Error::NegativeInput(_))
        ));
        assert!(bs_call(0.0, 1.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn deep_in_the_money_mid() {
        let reference = bs_by_quadrature(100.0, 70.0, 0.2, 5.0 / 12.0);
        let v = bs_call(100.0, 70.0, 0.2, 5.0 / 12.0).unwrap();
        assert_abs_diff_eq!(v, reference, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 30.0093, epsilon = 5e-4);
    }

    #[test]
    fn synthesized_quote_counts() {
        let strikes: Vec<f64> = (7..=13).map(|k| 10.0 * k as f64).collect();
        let set =
            synthesize_quotes(100.0, 0.2, &[(1, 1.0 / 6.0), (2, 5.0 / 12.0)], &strikes, 0.0)
                .unwrap();
        assert_eq!(set.len(), 14);
        let blocks = set.blocks(2).unwrap();
        assert_eq!(blocks.iter().map(ConstraintBlock::dimension).sum::<usize>(), 28);
        assert!(set.iter().all(|q| q.bid == q.ask));
    }

    #[test]
    fn half_spread_clips_bids() {
        let set = synthesize_quotes(100.0, 0.2, &[(1, 1.0 / 6.0)], &[100.0, 200.0], 0.05).unwrap();
        let q = set.expiry(1);
        let mid = bs_call(100.0, 100.0, 0.2, 1.0 / 6.0).unwrap();
        assert_abs_diff_eq!(q[0].bid, mid - 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(q[0].ask, mid + 0.05, epsilon = 1e-15);
        assert_eq!(q[1].bid, 0.0);
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_header_only_is_empty() {
        let f = write_tmp("expiry_index,strike,bid,ask\n");
        assert!(load_quotes_csv(f.path()).unwrap().is_empty());
    }

    #[test]
    fn csv_single_row() {
        let f = write_tmp("expiry_index,strike,bid,ask\n2,100,4.90,5.10\n");
        let set = load_quotes_csv(f.path()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(
            set.expiry(2)[0],
            Quote {
                expiry_index: 2,
                strike: 100.0,
                bid: 4.9,
                ask: 5.1
            }
        );
    }

    #[test]
    fn csv_crossed_quote() {
        let f = write_tmp("expiry_index,strike,bid,ask\n1,90,1,2\n2,100,6,5\n");
        match load_quotes_csv(f.path()) {
            Err(Error::CrossedQuote { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_malformed_row() {
        let f = write_tmp("expiry_index,strike,bid,ask\n1,abc,1,2\n");
        assert!(matches!(
            load_quotes_csv(f.path()),
            Err(Error::ParseError { line: 2, .. })
        ));
        let f = write_tmp("k,strike,bid,ask\n");
        assert!(matches!(load_quotes_csv(f.path()), Err(Error::ParseError { line: 1, .. })));
    }

    #[test]
    fn csv_write_then_read() {
        let set = synthesize_quotes(100.0, 0.2, &[(1, 0.25)], &[90.0, 110.0], 0.1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        set.write_csv(f.path()).unwrap();
        let back = load_quotes_csv(f.path()).unwrap();
        assert_eq!(back.expiry(1), set.expiry(1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn call_monotone_and_slope_bounded(
                k in 50.0f64..150.0,
                vol in 0.05f64..0.6,
                t in 0.05f64..2.0,
            ) {
                let c = |k: f64, v: f64, t: f64| bs_call(100.0, k, v, t).unwrap();
                prop_assert!(c(k + 1.0, vol, t) <= c(k, vol, t) + 1e-12);
                prop_assert!(c(k, vol + 0.01, t) >= c(k, vol, t) - 1e-12);
                prop_assert!(c(k, vol, t + 0.01) >= c(k, vol, t) - 1e-12);
                let h = 1e-4 * 100.0;
                let slope = (c(k + h, vol, t) - c(k - h, vol, t)) / (2.0 * h);
                prop_assert!((-1.0 - 1e-6..=1e-6).contains(&slope));
            }
        }
    }
}
