//! CSV and JSON serialisation of results.
//!
//! Numbers are printed with 12 significant digits. JSON output is wrapped in
//! an envelope carrying a schema version, a kind tag and sorted metadata, so
//! identical inputs produce byte-identical files.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::SummaryStats;
use crate::measures::ConservativenessRow;
use crate::simulation::{DivergenceRow, RateStudyResult, RiskRow, RiskTable, StudyResult, TableMeta};
use crate::theory_checks::SuiteReport;

pub const SCHEMA_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Shortest decimal that round-trips the value rounded to 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".to_string()
    } else if (1e-6..1e15).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn opt_bool(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

fn write_csv(comments: &[(String, String)], headers: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut out = String::new();
    for (k, v) in comments {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(headers).map_err(fmt_err)?;
    for row in rows {
        w.write_record(&row).map_err(fmt_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?);
    Ok(out)
}

fn meta_comments(meta: &TableMeta) -> Vec<(String, String)> {
    let mut v = vec![
        ("distribution".to_string(), meta.distribution.clone()),
        ("h1".to_string(), fmt_num(meta.h1)),
        ("h2".to_string(), fmt_num(meta.h2)),
        ("bandwidth_source".to_string(), meta.bandwidth_source.clone()),
    ];
    if let Some(variant) = meta.variant {
        v.push(("variant".to_string(), variant.to_string()));
    }
    v
}

pub fn risk_table_csv(table: &RiskTable) -> Result<String> {
    let rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.tau),
                opt(r.modile),
                opt(r.quantile),
                opt(r.expectile),
                r.method.clone().unwrap_or_default(),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&meta_comments(&table.meta), &["tau", "modile", "quantile", "expectile", "method", "note"], rows)
}

/// Inverse of [`risk_table_csv`].
pub fn parse_risk_table_csv(text: &str) -> Result<RiskTable> {
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once(": ") {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::Format(format!("missing metadata '{k}'")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Format(format!("bad number for '{k}'"))) };
    let variant = meta.get("variant").map(|v| v.parse()).transpose()?;
    let table_meta = TableMeta {
        distribution: get("distribution")?,
        h1: num("h1")?,
        h2: num("h2")?,
        bandwidth_source: get("bandwidth_source")?,
        variant,
    };

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |i: usize| record.get(i).unwrap_or("");
        let number = |i: usize| -> Result<Option<f64>> {
            match cell(i) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| Error::Parse { line, message: format!("bad number '{s}'") }),
            }
        };
        let text_cell = |i: usize| (!cell(i).is_empty()).then(|| cell(i).to_string());
        rows.push(RiskRow {
            tau: number(0)?.ok_or_else(|| Error::Parse { line, message: "missing tau".into() })?,
            modile: number(1)?,
            quantile: number(2)?,
            expectile: number(3)?,
            method: text_cell(4),
            note: text_cell(5),
        });
    }
    Ok(RiskTable { meta: table_meta, rows })
}

/// Long format `tau,measure,value` for plotting.
pub fn plot_data_csv(table: &RiskTable) -> Result<String> {
    let mut rows = Vec::new();
    for r in &table.rows {
        for (name, v) in [("modile", r.modile), ("quantile", r.quantile), ("expectile", r.expectile)] {
            if let Some(v) = v {
                rows.push(vec![fmt_num(r.tau), name.to_string(), fmt_num(v)]);
            }
        }
    }
    write_csv(&[], &["tau", "measure", "value"], rows)
}

pub fn summary_csv(s: &SummaryStats) -> Result<String> {
    let row = [s.mean, s.median, s.std, s.skewness, s.kurtosis, s.min, s.max].map(fmt_num);
    let mut row = row.to_vec();
    row.insert(0, s.n.to_string());
    write_csv(&[], &["n", "mean", "median", "std", "skewness", "kurtosis", "min", "max"], vec![row])
}

pub fn study_csv(r: &StudyResult) -> Result<String> {
    let c = &r.config;
    let comments = vec![
        ("distribution".to_string(), c.distribution.clone()),
        ("n".to_string(), c.n.to_string()),
        ("reps".to_string(), c.reps.to_string()),
        ("seed".to_string(), c.seed.to_string()),
        ("generator".to_string(), c.generator.clone()),
        ("failed_replications".to_string(), r.failed_replications.to_string()),
    ];
    let rows = r
        .records
        .iter()
        .map(|x| {
            vec![
                fmt_num(x.tau),
                fmt_num(x.true_modile),
                fmt_num(x.emodile_mean),
                fmt_num(x.emodile_sd),
                fmt_num(x.ae_mean),
                fmt_num(x.ae_sd),
                x.successes.to_string(),
            ]
        })
        .collect();
    write_csv(
        &comments,
        &["tau", "true_modile", "emodile_mean", "emodile_sd", "ae_mean", "ae_sd", "successes"],
        rows,
    )
}

pub fn rate_csv(r: &RateStudyResult) -> Result<String> {
    let mut comments = vec![
        ("distribution".to_string(), r.distribution.clone()),
        ("tau".to_string(), fmt_num(r.tau)),
        ("h1".to_string(), fmt_num(r.h1)),
        ("h2".to_string(), fmt_num(r.h2)),
        ("reps".to_string(), r.reps.to_string()),
        ("seed".to_string(), r.seed.to_string()),
        ("slope".to_string(), fmt_num(r.slope)),
        ("slope_se".to_string(), fmt_num(r.slope_se)),
    ];
    match (&r.theoretical_constant, &r.constant_error) {
        (Some(c), _) => {
            comments.push(("theorem2_constant".to_string(), fmt_num(c.value)));
            comments.push(("symmetric_bandwidths".to_string(), c.symmetric_bandwidths.to_string()));
        }
        (None, Some(e)) => comments.push(("theorem2_constant".to_string(), format!("unavailable ({e})"))),
        (None, None) => {}
    }
    let rows = r
        .records
        .iter()
        .map(|x| vec![x.n.to_string(), fmt_num(x.estimator_sd), fmt_num(x.estimator_mean)])
        .collect();
    write_csv(&comments, &["n", "estimator_sd", "estimator_mean"], rows)
}

pub fn divergence_csv(rows: &[DivergenceRow]) -> Result<String> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.tau),
                opt(r.paper),
                opt(r.corrected),
                opt(r.difference),
                opt(r.paper_foc_residual),
                opt(r.corrected_foc_residual),
            ]
        })
        .collect();
    write_csv(
        &[],
        &["tau", "paper", "corrected", "difference", "paper_foc_residual", "corrected_foc_residual"],
        rows,
    )
}

pub fn conservativeness_csv(rows: &[ConservativenessRow]) -> Result<String> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.tau),
                fmt_num(r.h1),
                fmt_num(r.h2),
                opt(r.modile),
                r.modile_support_valid.to_string(),
                fmt_num(r.quantile),
                opt(r.expectile),
                fmt_num(r.expectile_approx),
                r.modile_below_quantile.to_string(),
                opt_bool(r.modile_below_expectile),
                r.modile_below_expectile_approx.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &[],
        &[
            "tau",
            "h1",
            "h2",
            "modile",
            "modile_support_valid",
            "quantile",
            "expectile",
            "expectile_approx",
            "modile_below_quantile",
            "modile_below_expectile",
            "modile_below_expectile_approx",
            "error",
        ],
        rows,
    )
}

pub fn suite_csv(report: &SuiteReport) -> Result<String> {
    let rows = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.label.clone(),
                e.expect_pass.to_string(),
                e.checks.to_string(),
                fmt_num(e.max_abs_error),
                e.ok.to_string(),
            ]
        })
        .collect();
    write_csv(
        &[("tolerance".to_string(), fmt_num(report.tolerance))],
        &["check", "expect_pass", "checks", "max_abs_error", "ok"],
        rows,
    )
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    generator: String,
    metadata: &'a BTreeMap<String, Value>,
    data: &'a T,
}

/// Pretty-printed JSON envelope with a trailing newline.
pub fn to_json<T: Serialize>(kind: &str, metadata: &BTreeMap<String, Value>, data: &T) -> Result<String> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        kind,
        generator: format!("modile {}", env!("CARGO_PKG_VERSION")),
        metadata,
        data,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
