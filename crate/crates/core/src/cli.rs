//! Command-line interface.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::estimators::Bandwidths;
use crate::measures::{conservativeness_report, BandwidthSource, ModileSpec, Variant};
use crate::pipeline::{analyze_returns, analyze_values, compute_log_returns, conventions, load_price_csv, Analysis};
use crate::report;
use crate::rng::GENERATOR_ID;
use crate::simulation::{
    convergence_rate_study, default_taus, estimation_study, reproduce_measure_table, variant_divergence,
    DEFAULT_REPS,
};
use crate::theory_checks::{monte_carlo_range_ratio, run_suite};

#[derive(Debug, Parser)]
#[command(name = "modile", version, about = "Modile, quantile and expectile tail risk measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    /// Single probability level.
    #[arg(long, conflicts_with = "taus")]
    pub tau: Option<f64>,
    /// `lo:hi:step` or a comma-separated list. Defaults to 0.1:0.9:0.1.
    #[arg(long)]
    pub taus: Option<String>,
}

impl TauArgs {
    fn resolve(&self) -> Result<Vec<f64>> {
        match (&self.tau, &self.taus) {
            (Some(t), _) => Ok(vec![*t]),
            (None, Some(spec)) => parse_taus(spec),
            (None, None) => Ok(default_taus()),
        }
    }
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    #[arg(long, requires = "h2")]
    pub h1: Option<f64>,
    #[arg(long, requires = "h1")]
    pub h2: Option<f64>,
}

impl BandwidthArgs {
    fn explicit(&self) -> Option<Bandwidths> {
        self.h1.zip(self.h2).map(|(h1, h2)| Bandwidths { h1, h2 })
    }

    fn source(&self) -> BandwidthSource {
        match self.explicit() {
            Some(h) => BandwidthSource::Explicit { h1: h.h1, h2: h.h2 },
            None => BandwidthSource::TheoreticalMoments,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theoretical modile, quantile and expectile over a τ grid.
    Table {
        /// Distribution, e.g. `normal:0,1`, `laplace:1,2`, `gamma:8,7`, `pareto:3`,
        /// `bimodal:0,4`, `split:0.3:normal:0,1`.
        #[arg(long)]
        dist: Distribution,
        #[command(flatten)]
        taus: TauArgs,
        #[command(flatten)]
        bandwidths: BandwidthArgs,
        #[arg(long, default_value = "corrected")]
        variant: Variant,
        /// Compare the `paper` and `corrected` closed-form variants instead of the table.
        #[arg(long)]
        divergence: bool,
        /// Also write long-format plot data to this file.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Empirical measures from a simulated sample or a CSV column.
    Estimate {
        #[arg(long, required_unless_present = "input")]
        dist: Option<Distribution>,
        /// CSV file with a header row; see `--column`.
        #[arg(long, conflicts_with = "dist")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "value")]
        column: String,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        taus: TauArgs,
        #[command(flatten)]
        bandwidths: BandwidthArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Repeated-sampling study of the empirical modile.
    Simulate {
        #[arg(long)]
        dist: Distribution,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        taus: TauArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Convergence-rate experiment and the limiting scale constant.
    Rates {
        #[arg(long)]
        dist: Distribution,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        h1: f64,
        #[arg(long, default_value_t = 1.0)]
        h2: f64,
        /// Comma-separated increasing sample sizes.
        #[arg(long, default_value = "1000,4000,16000,64000")]
        ns: String,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Summary statistics and empirical measures of percent log returns.
    Analyze {
        /// Price file with `date` and price columns.
        prices: PathBuf,
        #[arg(long, default_value = "close")]
        column: String,
        /// Treat the column as returns rather than prices.
        #[arg(long)]
        returns: bool,
        #[command(flatten)]
        taus: TauArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Pareto modile against quantile and expectile as τ approaches 1.
    Conservative {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "0.95,0.99,0.999")]
        taus: String,
        #[command(flatten)]
        bandwidths: BandwidthArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Ratio-characterisation checks on split-symmetric laws.
    Verify {
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Draws for the Monte Carlo cross-check; 0 skips it.
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

/// Parses `lo:hi:step` or `a,b,c`.
pub fn parse_taus(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("cannot parse tau grid '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else { return Err(bad()) };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(step > 0.0) || lo > hi {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        // round to 12 digits so 0.1 + 2·0.1 prints as 0.3
        Ok((0..=count).map(|k| (((lo + k as f64 * step) * 1e12).round()) / 1e12).collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad sample size '{s}'"))))
        .collect()
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Io { path: "<stdout>".into(), message: e.to_string() })
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

fn meta(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    let mut m: BTreeMap<String, Value> = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    m.insert("conventions".into(), json!(conventions()));
    m
}

fn emit_analysis(analysis: &Analysis, output: &Output, extra: &[(&str, Value)]) -> Result<()> {
    match output.format {
        Format::Json => emit(output, &report::to_json("analysis", &meta(extra), analysis)?),
        Format::Csv => {
            let table = report::risk_table_csv(&analysis.table)?;
            let summary = report::summary_csv(&analysis.summary)?;
            match &output.out {
                Some(path) => {
                    write_file(path, &table)?;
                    write_file(&sibling(path, "summary"), &summary)
                }
                None => emit(output, &format!("{summary}\n{table}")),
            }
        }
    }
}

/// `dir/name.csv` → `dir/name.<tag>.csv`.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let io_err = |e: csv::Error| Error::Io { path: path.display().to_string(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(io_err)?;
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{column}'") })?;
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
            let line = r.position().map_or(0, |p| p.line() as usize);
            let text = r.get(col).unwrap_or("");
            text.parse().map_err(|_| Error::Parse { line, message: format!("bad number '{text}'") })
        })
        .collect()
}

/// Exit status for a verification run whose checks did not all hold.
pub const EXIT_CHECKS_FAILED: i32 = 1;

/// Runs one command. `Ok(false)` means the command ran but its checks failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Table { dist, taus, bandwidths, variant, divergence, plot_data, output } => {
            let taus = taus.resolve()?;
            let source = bandwidths.source();
            let h = source.resolve(&dist)?;
            let m = meta(&[
                ("distribution", json!(dist.to_string())),
                ("variant", json!(variant.to_string())),
                ("h1", json!(h.h1)),
                ("h2", json!(h.h2)),
            ]);
            if divergence {
                let rows = variant_divergence(&dist, &taus, source)?;
                let text = match output.format {
                    Format::Csv => report::divergence_csv(&rows)?,
                    Format::Json => report::to_json("variant_divergence", &m, &rows)?,
                };
                return emit(&output, &text).map(|_| true);
            }
            let table = reproduce_measure_table(&dist, &taus, source, variant)?;
            if let Some(path) = plot_data {
                write_file(&path, &report::plot_data_csv(&table)?)?;
            }
            let text = match output.format {
                Format::Csv => report::risk_table_csv(&table)?,
                Format::Json => report::to_json("risk_table", &m, &table)?,
            };
            emit(&output, &text)?;
        }
        Command::Estimate { dist, input, column, n, seed, taus, bandwidths, output } => {
            let taus = taus.resolve()?;
            let (values, label, source_meta) = match (dist, input) {
                (Some(d), _) => {
                    let label = format!("sample of {d}");
                    let values = d.sample(n, seed)?.values().to_vec();
                    (values, label, json!({"distribution": d.to_string(), "n": n, "seed": seed, "generator": GENERATOR_ID}))
                }
                (None, Some(path)) => {
                    let values = read_column(&path, &column)?;
                    (values, path.display().to_string(), json!({"input": path.display().to_string(), "column": column}))
                }
                (None, None) => return Err(Error::InvalidParameter("either --dist or --input is required".into())),
            };
            let analysis = analyze_values(values, &taus, &label, bandwidths.explicit())?;
            emit_analysis(&analysis, &output, &[("source", source_meta)])?;
        }
        Command::Simulate { dist, n, reps, seed, taus, output } => {
            let taus = taus.resolve()?;
            let result = estimation_study(&dist, n, reps, &taus, seed)?;
            let text = match output.format {
                Format::Csv => report::study_csv(&result)?,
                Format::Json => report::to_json("estimation_study", &meta(&[]), &result)?,
            };
            emit(&output, &text)?;
        }
        Command::Rates { dist, tau, h1, h2, ns, reps, seed, output } => {
            let spec = ModileSpec::new(tau, h1, h2)?;
            let result = convergence_rate_study(&dist, &spec, &parse_sizes(&ns)?, reps, seed)?;
            let text = match output.format {
                Format::Csv => report::rate_csv(&result)?,
                Format::Json => report::to_json("rate_study", &meta(&[("generator", json!(GENERATOR_ID))]), &result)?,
            };
            emit(&output, &text)?;
        }
        Command::Analyze { prices, column, returns, taus, output } => {
            let taus = taus.resolve()?;
            let analysis = if returns {
                analyze_values(read_column(&prices, &column)?, &taus, &prices.display().to_string(), None)?
            } else {
                let series = load_price_csv(&prices, &column)?;
                analyze_returns(&compute_log_returns(&series), &taus)?
            };
            emit_analysis(&analysis, &output, &[("input", json!(prices.display().to_string())), ("column", json!(column))])?;
        }
        Command::Conservative { alpha, taus, bandwidths, output } => {
            let taus = parse_taus(&taus)?;
            let source = match bandwidths.explicit() {
                Some(h) => BandwidthSource::Explicit { h1: h.h1, h2: h.h2 },
                None => BandwidthSource::Explicit { h1: 1.0, h2: 1.0 },
            };
            let rows = conservativeness_report(alpha, &taus, source)?;
            let text = match output.format {
                Format::Csv => report::conservativeness_csv(&rows)?,
                Format::Json => report::to_json("conservativeness", &meta(&[("alpha", json!(alpha))]), &rows)?,
            };
            emit(&output, &text)?;
            return Ok(rows.iter().all(|r| {
                r.modile_below_quantile && r.modile_below_expectile_approx && r.modile_below_expectile != Some(false)
            }));
        }
        Command::Verify { tol, grid, draws, seed, output } => {
            let report_data = run_suite(tol, grid)?;
            let mut ok = report_data.all_ok();
            let mut mc = Vec::new();
            if draws > 0 {
                for (i, tau0) in [0.2, 0.3, 0.7].into_iter().enumerate() {
                    let d = Distribution::split_symmetric(tau0, Distribution::normal(0.0, 1.0)?)?;
                    let (ratio, se) = monte_carlo_range_ratio(&d, 0.0, 1.0, draws, seed.wrapping_add(i as u64))?;
                    let target = (1.0 - tau0) / tau0;
                    let within = (ratio - target).abs() <= 3.0 * se;
                    ok &= within;
                    mc.push(json!({"tau0": tau0, "ratio": ratio, "se": se, "target": target, "within_3se": within}));
                }
            }
            let text = match output.format {
                Format::Csv => report::suite_csv(&report_data)?,
                Format::Json => report::to_json(
                    "theory_checks",
                    &meta(&[("monte_carlo", Value::Array(mc))]),
                    &report_data,
                )?,
            };
            emit(&output, &text)?;
            return Ok(ok);
        }
    }
    Ok(true)
}
