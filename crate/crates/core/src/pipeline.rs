//! Price files, log returns and the empirical risk-measure workflow.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{check_tau, Error, Result};
use crate::estimators::{
    bandwidth_rule, estimate_expectile, estimate_modile, estimate_quantile, sample_summary, Bandwidths, Sample,
    SummaryStats, BANDWIDTH_RULE, KURTOSIS_CONVENTION, QUANTILE_CONVENTION, SKEWNESS_CONVENTION, TIE_RULE,
};
use crate::simulation::{RiskRow, RiskTable, TableMeta};

/// Returns below this count trigger a warning in [`analyze_returns`].
pub const MIN_RETURNS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub close: f64,
}

/// At least two positive prices on strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    points: Vec<PricePoint>,
}

impl PriceSeries {
    /// Sorts by date and validates.
    pub fn new(mut points: Vec<PricePoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::SampleTooSmall { required: 2, got: points.len() });
        }
        if let Some(p) = points.iter().find(|p| !(p.close.is_finite() && p.close > 0.0)) {
            return Err(Error::InvalidParameter(format!("non-positive price {} on {}", p.close, p.date)));
        }
        if points.windows(2).any(|w| w[0].date > w[1].date) {
            warn!("price rows are not in date order; sorting");
            points.sort_by_key(|p| p.date);
        }
        if let Some(w) = points.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::InvalidParameter(format!("duplicate date {}", w[0].date)));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnPoint {
    pub date: NaiveDate,
    /// Percent log return.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub points: Vec<ReturnPoint>,
}

impl ReturnSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads a `date,close` CSV. `column` selects the price column by header
/// name, for exports that carry several (for example `adj_close`).
pub fn load_price_csv(path: &Path, column: &str) -> Result<PriceSeries> {
    let io_err = |e: &dyn std::fmt::Display| Error::Io { path: path.display().to_string(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| io_err(&e))?;
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    };
    let (date_col, price_col) = (find("date")?, find(column)?);

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        let date_text = record.get(date_col).ok_or_else(|| parse_err("missing date".into()))?;
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date '{date_text}': {e}")))?;
        let price_text = record.get(price_col).ok_or_else(|| parse_err(format!("missing {column}")))?;
        let close: f64 = price_text.parse().map_err(|_| parse_err(format!("bad price '{price_text}'")))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(parse_err(format!("price {close} must be positive")));
        }
        points.push(PricePoint { date, close });
    }
    PriceSeries::new(points)
}

/// `100·ln(p_t / p_{t−1})`, dated at `t`.
pub fn compute_log_returns(prices: &PriceSeries) -> ReturnSeries {
    let points = prices
        .points
        .windows(2)
        .map(|w| ReturnPoint { date: w[1].date, value: 100.0 * (w[1].close / w[0].close).ln() })
        .collect();
    ReturnSeries { points }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub summary: SummaryStats,
    pub bandwidths: Bandwidths,
    pub table: RiskTable,
    pub conventions: BTreeMap<String, String>,
}

/// Estimator conventions recorded alongside every empirical result.
pub fn conventions() -> BTreeMap<String, String> {
    [
        ("quantile", QUANTILE_CONVENTION),
        ("kurtosis", KURTOSIS_CONVENTION),
        ("skewness", SKEWNESS_CONVENTION),
        ("tie_rule", TIE_RULE),
        ("bandwidth_rule", BANDWIDTH_RULE),
        ("returns", "100 * ln(p_t / p_(t-1))"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Summary statistics plus empirical modile, quantile and expectile at each τ.
/// Bandwidths come from the moment rule applied to the values unless given.
pub fn analyze_values(values: Vec<f64>, taus: &[f64], label: &str, bandwidths: Option<Bandwidths>) -> Result<Analysis> {
    for &t in taus {
        check_tau(t)?;
    }
    let mut taus = taus.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    if values.len() < MIN_RETURNS {
        warn!("only {} returns; estimates will be unreliable", values.len());
    }
    let sample = Sample::new(values)?;
    let summary = sample_summary(&sample)?;
    let (h, source) = match bandwidths {
        Some(h) => (h, "explicit"),
        None => (bandwidth_rule(&sample)?, "sample_rule"),
    };
    let rows = taus
        .iter()
        .map(|&tau| {
            Ok(RiskRow {
                tau,
                modile: Some(estimate_modile(&sample, tau, h.h1, h.h2)?.value),
                quantile: Some(estimate_quantile(&sample, tau)?),
                expectile: Some(estimate_expectile(&sample, tau)?),
                method: Some("empirical".to_string()),
                note: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = RiskTable {
        meta: TableMeta {
            distribution: label.to_string(),
            h1: h.h1,
            h2: h.h2,
            bandwidth_source: source.to_string(),
            variant: None,
        },
        rows,
    };
    Ok(Analysis { summary, bandwidths: h, table, conventions: conventions() })
}

pub fn analyze_returns(returns: &ReturnSeries, taus: &[f64]) -> Result<Analysis> {
    analyze_values(returns.values(), taus, "empirical returns", None)
}
