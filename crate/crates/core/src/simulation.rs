//! Monte Carlo harnesses and table generators.
//!
//! Replications are independent: replication `r` draws from RNG stream `r`
//! (the rate study uses `grid_index << 32 | r`), so results do not depend on
//! how the work is scheduled. Aggregates are computed from sorted values and
//! are therefore identical under any permutation of the replications.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{check_tau, Error, Result};
use crate::estimators::{bandwidth_rule, estimate_modile, Bandwidths};
use crate::measures::{
    expectile_theoretical, foc_residual, modile, modile_closed_form, modile_foc_numeric, quantile_theoretical,
    BandwidthSource, ModileSpec, Variant,
};
use crate::numerics::ols_fit;
use crate::rng::GENERATOR_ID;

/// τ ∈ {0.1, 0.2, …, 0.9}.
pub fn default_taus() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

pub const DEFAULT_REPS: usize = 100;

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("tau grid is empty".into()));
    }
    for &t in taus {
        check_tau(t)?;
    }
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("tau grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Mean and standard deviation (denominator `n − 1`) after sorting, so the
/// result does not depend on input order.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    let sd = if v.len() > 1 { (dev.iter().sum::<f64>() / (n - 1.0)).sqrt() } else { f64::NAN };
    (mean, sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub tau: f64,
    pub modile: Option<f64>,
    pub quantile: Option<f64>,
    pub expectile: Option<f64>,
    /// How the modile was obtained, or why it is missing.
    pub method: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub distribution: String,
    pub h1: f64,
    pub h2: f64,
    pub bandwidth_source: String,
    pub variant: Option<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub meta: TableMeta,
    pub rows: Vec<RiskRow>,
}

/// Theoretical modile, quantile and expectile at each τ. Failures of one
/// measure are recorded in the row and do not abort the table.
pub fn reproduce_measure_table(
    d: &Distribution,
    taus: &[f64],
    source: BandwidthSource,
    variant: Variant,
) -> Result<RiskTable> {
    check_taus(taus)?;
    let h = source.resolve(d)?;
    let rows = taus
        .iter()
        .map(|&tau| {
            let mut notes = Vec::new();
            let (modile_value, method) = match ModileSpec::with_bandwidths(tau, h).and_then(|s| modile(d, &s, variant)) {
                Ok(r) => (Some(r.value), Some(r.method.as_str().to_string())),
                Err(e) => {
                    notes.push(format!("modile: {e}"));
                    (None, None)
                }
            };
            let quantile = quantile_theoretical(d, tau).map_err(|e| notes.push(format!("quantile: {e}"))).ok();
            let expectile = expectile_theoretical(d, tau).map_err(|e| notes.push(format!("expectile: {e}"))).ok();
            RiskRow {
                tau,
                modile: modile_value,
                quantile,
                expectile,
                method,
                note: (!notes.is_empty()).then(|| notes.join("; ")),
            }
        })
        .collect();
    Ok(RiskTable {
        meta: TableMeta {
            distribution: d.to_string(),
            h1: h.h1,
            h2: h.h2,
            bandwidth_source: source_label(&source),
            variant: Some(variant),
        },
        rows,
    })
}

fn source_label(source: &BandwidthSource) -> String {
    match source {
        BandwidthSource::TheoreticalMoments => "theoretical_moments".into(),
        BandwidthSource::Explicit { .. } => "explicit".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub tau: f64,
    pub paper: Option<f64>,
    pub corrected: Option<f64>,
    pub paper_foc_residual: Option<f64>,
    pub corrected_foc_residual: Option<f64>,
    pub difference: Option<f64>,
}

/// Paper-variant and corrected closed forms side by side, with the
/// first-order-condition residual of each.
pub fn variant_divergence(d: &Distribution, taus: &[f64], source: BandwidthSource) -> Result<Vec<DivergenceRow>> {
    check_taus(taus)?;
    let h = source.resolve(d)?;
    taus.iter()
        .map(|&tau| {
            let spec = ModileSpec::with_bandwidths(tau, h)?;
            let paper = modile_closed_form(d, &spec, Variant::Paper).ok();
            let corrected = modile_closed_form(d, &spec, Variant::Corrected).ok();
            let difference = paper.as_ref().zip(corrected.as_ref()).map(|(p, c)| p.value - c.value);
            Ok(DivergenceRow {
                tau,
                paper_foc_residual: paper.as_ref().map(|r| r.foc_residual),
                corrected_foc_residual: corrected.as_ref().map(|r| r.foc_residual),
                paper: paper.map(|r| r.value),
                corrected: corrected.map(|r| r.value),
                difference,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub distribution: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub generator: String,
    pub bandwidths: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub tau: f64,
    pub true_modile: f64,
    pub emodile_mean: f64,
    pub emodile_sd: f64,
    pub ae_mean: f64,
    pub ae_sd: f64,
    /// Replications that produced an estimate at this τ.
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub records: Vec<StudyRecord>,
    /// Replications at which at least one τ failed.
    pub failed_replications: usize,
}

/// Reference modile for a study: theoretical-moment bandwidths, corrected
/// closed form with numeric fallback.
pub fn reference_modile(d: &Distribution, tau: f64) -> Result<f64> {
    let h = BandwidthSource::TheoreticalMoments.resolve(d)?;
    modile(d, &ModileSpec::with_bandwidths(tau, h)?, Variant::Corrected).map(|r| r.value)
}

/// Repeated-sampling study of the empirical modile. Each replication
/// recomputes its bandwidths from its own sample.
pub fn estimation_study(d: &Distribution, n: usize, reps: usize, taus: &[f64], seed: u64) -> Result<StudyResult> {
    if n < 10 {
        return Err(Error::SampleTooSmall { required: 10, got: n });
    }
    if reps < 2 {
        return Err(Error::InvalidParameter(format!("reps = {reps} must be at least 2")));
    }
    check_taus(taus)?;
    let truth = taus.iter().map(|&t| reference_modile(d, t)).collect::<Result<Vec<f64>>>()?;

    let per_rep: Vec<Vec<Option<f64>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let estimates = d.sample_stream(n, seed, r).and_then(|s| {
                let h = bandwidth_rule(&s)?;
                Ok(taus.iter().map(|&t| estimate_modile(&s, t, h.h1, h.h2).ok().map(|e| e.value)).collect())
            });
            estimates.unwrap_or_else(|_| vec![None; taus.len()])
        })
        .collect();

    let failed_replications = per_rep.iter().filter(|row| row.iter().any(Option::is_none)).count();
    let records = taus
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let values: Vec<f64> = per_rep.iter().filter_map(|row| row[j]).collect();
            let errors: Vec<f64> = values.iter().map(|v| (truth[j] - v).abs()).collect();
            let (emodile_mean, emodile_sd) = mean_sd(&values);
            let (ae_mean, ae_sd) = mean_sd(&errors);
            StudyRecord { tau, true_modile: truth[j], emodile_mean, emodile_sd, ae_mean, ae_sd, successes: values.len() }
        })
        .collect();
    Ok(StudyResult {
        config: StudyConfig {
            distribution: d.to_string(),
            n,
            reps,
            seed,
            generator: GENERATOR_ID.to_string(),
            bandwidths: "per-replication sample rule".to_string(),
        },
        records,
        failed_replications,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Constant {
    pub value: f64,
    pub nu: f64,
    /// `h1 == h2`, the case in which the limit reduces to this constant
    /// times a standard Chernoff variable.
    pub symmetric_bandwidths: bool,
}

/// `[4τf(ν+h2) / {τf′(ν+h2) − (1−τ)f′(ν−h1)}²]^(1/3)` at the numeric modile.
pub fn theorem2_constant(d: &Distribution, spec: &ModileSpec) -> Result<Theorem2Constant> {
    let nu = modile_foc_numeric(d, spec)?.value;
    theorem2_constant_at(d, nu, spec)
}

/// The same constant evaluated at a caller-supplied `ν`.
pub fn theorem2_constant_at(d: &Distribution, nu: f64, spec: &ModileSpec) -> Result<Theorem2Constant> {
    let (tau, h1, h2) = (spec.tau(), spec.h1(), spec.h2());
    let (upper, lower) = (tau * d.pdf_deriv(nu + h2)?, (1.0 - tau) * d.pdf_deriv(nu - h1)?);
    let den = upper - lower;
    let value = (4.0 * tau * d.pdf(nu + h2) / (den * den)).cbrt();
    // relative cancellation below 1e-9 is treated as an exact zero
    if den.abs() <= 1e-9 * (upper.abs() + lower.abs()) || !value.is_finite() {
        return Err(Error::DegenerateAsymptotics(format!("curvature term vanishes at nu = {nu}")));
    }
    Ok(Theorem2Constant { value, nu, symmetric_bandwidths: h1 == h2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: usize,
    pub estimator_sd: f64,
    pub estimator_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    pub distribution: String,
    pub tau: f64,
    pub h1: f64,
    pub h2: f64,
    pub reps: usize,
    pub seed: u64,
    pub records: Vec<RateRecord>,
    /// OLS slope of `ln sd` on `ln n`; −1/3 under cube-root asymptotics.
    pub slope: f64,
    pub slope_se: f64,
    pub theoretical_constant: Option<Theorem2Constant>,
    pub constant_error: Option<String>,
}

/// Standard deviation of the empirical modile across replications at each
/// sample size, with fixed bandwidths, and the fitted log-log slope.
pub fn convergence_rate_study(
    d: &Distribution,
    spec: &ModileSpec,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<RateStudyResult> {
    if n_grid.len() < 3 {
        return Err(Error::InsufficientGrid(format!("need at least 3 sample sizes, got {}", n_grid.len())));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] < 2 {
        return Err(Error::InsufficientGrid("sample sizes must be increasing and at least 2".into()));
    }
    let decades = (n_grid[n_grid.len() - 1] as f64 / n_grid[0] as f64).log10();
    if decades < 1.5 {
        return Err(Error::InsufficientGrid(format!("grid spans {decades:.2} decades, need 1.5")));
    }
    if reps < 2 {
        return Err(Error::InvalidParameter(format!("reps = {reps} must be at least 2")));
    }
    let records = n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let values = (0..reps as u64)
                .into_par_iter()
                .map(|r| {
                    let s = d.sample_stream(n, seed, (g as u64) << 32 | r)?;
                    estimate_modile(&s, spec.tau(), spec.h1(), spec.h2()).map(|e| e.value)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (estimator_mean, estimator_sd) = mean_sd(&values);
            Ok(RateRecord { n, estimator_sd, estimator_mean })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = records.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.estimator_sd.ln()).collect();
    let (slope, _, slope_se) = ols_fit(&x, &y);
    let (theoretical_constant, constant_error) = match theorem2_constant(d, spec) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(RateStudyResult {
        distribution: d.to_string(),
        tau: spec.tau(),
        h1: spec.h1(),
        h2: spec.h2(),
        reps,
        seed,
        records,
        slope,
        slope_se,
        theoretical_constant,
        constant_error,
    })
}

/// Bandwidths for a study or table, resolved once for reporting.
pub fn resolve_bandwidths(d: &Distribution, source: BandwidthSource) -> Result<Bandwidths> {
    source.resolve(d)
}

/// First-order-condition residual of every modile in a table.
pub fn table_foc_residuals(d: &Distribution, table: &RiskTable) -> Vec<Option<f64>> {
    table
        .rows
        .iter()
        .map(|row| {
            let spec = ModileSpec::new(row.tau, table.meta.h1, table.meta.h2).ok()?;
            row.modile.map(|m| foc_residual(d, m, &spec))
        })
        .collect()
}
