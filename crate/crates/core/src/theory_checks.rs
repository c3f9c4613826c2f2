//! Numerical checks of the ratio characterisation of the modile.
//!
//! When the density ratio `f(ν + x)/f(ν − x)` equals `(1−τ)/τ` for every
//! `x > 0`, the same ratio holds for probabilities and partial expectations
//! over any symmetric range around `ν`, and in the limit for the full tails,
//! so `ν` is simultaneously the τ-th modile, quantile and expectile. The
//! split-symmetric family satisfies the hypothesis by construction; plain
//! families serve as negative controls.

use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{check_tau, Error, Result};
use crate::measures::partial_expectations;
use crate::numerics::integrate_piecewise;

const QUAD_TOL: f64 = 1e-12;

/// δ values used for the range-independence sweep.
pub const DELTA_SWEEP: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    PointwiseDensity,
    RangeProbability,
    RangeExpectation,
    TailProbability,
    TailExpectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub kind: RatioKind,
    pub lhs: f64,
    pub target: f64,
    pub abs_error: f64,
}

impl RatioCheck {
    fn new(kind: RatioKind, lhs: f64, tau: f64) -> Self {
        let target = (1.0 - tau) / tau;
        Self { kind, lhs, target, abs_error: (lhs - target).abs() }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.abs_error <= tol
    }
}

fn ratio(kind: RatioKind, num: f64, den: f64, tau: f64, what: &str) -> Result<RatioCheck> {
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator(what.to_string()));
    }
    Ok(RatioCheck::new(kind, num / den, tau))
}

fn check_inputs(nu: f64, tau: f64, delta: f64) -> Result<()> {
    check_tau(tau)?;
    if !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("nu = {nu} must be finite")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be finite and > 0")));
    }
    Ok(())
}

/// Density ratio at `grid_size` equally spaced points strictly inside `(0, δ)`.
pub fn check_pointwise_ratio(
    d: &Distribution,
    nu: f64,
    tau: f64,
    delta: f64,
    grid_size: usize,
) -> Result<Vec<RatioCheck>> {
    check_inputs(nu, tau, delta)?;
    if grid_size == 0 {
        return Err(Error::InvalidParameter("grid_size must be positive".into()));
    }
    (1..=grid_size)
        .map(|i| {
            let x = delta * i as f64 / (grid_size + 1) as f64;
            ratio(RatioKind::PointwiseDensity, d.pdf(nu + x), d.pdf(nu - x), tau, &format!("density at {}", nu - x))
        })
        .collect()
}

/// `P(ν ≤ Y ≤ ν+δ) / P(ν−δ ≤ Y ≤ ν)` from distribution-function differences.
pub fn range_probability_ratio(d: &Distribution, nu: f64, tau: f64, delta: f64) -> Result<RatioCheck> {
    check_inputs(nu, tau, delta)?;
    // upper mass through the survival function avoids cancellation near 1
    let upper = d.sf(nu) - d.sf(nu + delta);
    let lower = d.cdf(nu) - d.cdf(nu - delta);
    ratio(RatioKind::RangeProbability, upper, lower, tau, "probability of [nu - delta, nu]")
}

/// `E{(Y−ν)·I(ν ≤ Y ≤ ν+δ)} / E{(ν−Y)·I(ν−δ ≤ Y ≤ ν)}` by quadrature.
pub fn range_expectation_ratio(d: &Distribution, nu: f64, tau: f64, delta: f64) -> Result<RatioCheck> {
    check_inputs(nu, tau, delta)?;
    let breaks = d.breakpoints();
    let scale = d.scale_hint();
    let upper = integrate_piecewise(|y| (y - nu) * d.pdf(y), nu, nu + delta, &breaks, scale, QUAD_TOL).value;
    let lower = integrate_piecewise(|y| (nu - y) * d.pdf(y), nu - delta, nu, &breaks, scale, QUAD_TOL).value;
    ratio(RatioKind::RangeExpectation, upper, lower, tau, "partial expectation over [nu - delta, nu]")
}

/// Limits of the range ratios as δ → ∞:
/// `P(Y ≥ ν)/P(Y ≤ ν)` and `E(Y−ν)₊/E(ν−Y)₊`.
pub fn tail_ratios(d: &Distribution, nu: f64, tau: f64) -> Result<(RatioCheck, RatioCheck)> {
    check_tau(tau)?;
    let prob = ratio(RatioKind::TailProbability, d.sf(nu), d.cdf(nu), tau, "P(Y <= nu)")?;
    let (up, down) = partial_expectations(d, nu)?;
    let expect = ratio(RatioKind::TailExpectation, up, down, tau, "E(nu - Y)+")?;
    Ok((prob, expect))
}

/// Every check kind at one `(d, ν, τ)`: the pointwise grid and both range
/// ratios at each δ of [`DELTA_SWEEP`], plus the two tail ratios.
pub fn all_checks(d: &Distribution, nu: f64, tau: f64, grid_size: usize) -> Result<Vec<RatioCheck>> {
    let mut out = Vec::new();
    for &delta in &DELTA_SWEEP {
        out.extend(check_pointwise_ratio(d, nu, tau, delta, grid_size)?);
        out.push(range_probability_ratio(d, nu, tau, delta)?);
        out.push(range_expectation_ratio(d, nu, tau, delta)?);
    }
    let (p, e) = tail_ratios(d, nu, tau)?;
    out.push(p);
    out.push(e);
    Ok(out)
}

/// Largest minus smallest ratio across [`DELTA_SWEEP`] for one range kind.
pub fn delta_spread(d: &Distribution, nu: f64, tau: f64, kind: RatioKind) -> Result<f64> {
    let values = DELTA_SWEEP
        .iter()
        .map(|&delta| match kind {
            RatioKind::RangeProbability => range_probability_ratio(d, nu, tau, delta),
            RatioKind::RangeExpectation => range_expectation_ratio(d, nu, tau, delta),
            _ => Err(Error::InvalidParameter(format!("{kind:?} has no delta"))),
        })
        .map(|r| r.map(|c| c.lhs))
        .collect::<Result<Vec<f64>>>()?;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

/// Empirical `#{ν ≤ Y ≤ ν+δ} / #{ν−δ ≤ Y ≤ ν}` with its delta-method
/// standard error `R·√(1/N₁ + 1/N₂)`.
pub fn monte_carlo_range_ratio(d: &Distribution, nu: f64, delta: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    let sample = d.sample(n, seed)?;
    let upper = sample.values().iter().filter(|&&y| y >= nu && y <= nu + delta).count() as f64;
    let lower = sample.values().iter().filter(|&&y| y >= nu - delta && y <= nu).count() as f64;
    if lower == 0.0 || upper == 0.0 {
        return Err(Error::ZeroDenominator("empty range in the sample".into()));
    }
    let r = upper / lower;
    Ok((r, r * (1.0 / upper + 1.0 / lower).sqrt()))
}

/// One labelled line of the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub label: String,
    /// Positive checks must pass; negative controls must fail.
    pub expect_pass: bool,
    pub max_abs_error: f64,
    pub checks: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }
}

fn entry(label: String, expect_pass: bool, checks: &[RatioCheck], tol: f64) -> SuiteEntry {
    let max_abs_error = checks.iter().map(|c| c.abs_error).fold(0.0, f64::max);
    let passed = max_abs_error <= tol;
    SuiteEntry { label, expect_pass, max_abs_error, checks: checks.len(), ok: passed == expect_pass }
}

/// Positive checks for split-symmetric laws over τ0 ∈ {0.1, …, 0.9} on
/// Normal(0,1) and Laplace(0,1) bases, δ-independence sweeps, and negative
/// controls on a plain Normal.
pub fn run_suite(tol: f64, grid_size: usize) -> Result<SuiteReport> {
    let bases = [Distribution::normal(0.0, 1.0)?, Distribution::laplace(0.0, 1.0)?];
    let mut entries = Vec::new();
    for base in &bases {
        for k in 1..=9 {
            let tau0 = k as f64 / 10.0;
            let d = Distribution::split_symmetric(tau0, base.clone())?;
            let checks = all_checks(&d, 0.0, tau0, grid_size)?;
            entries.push(entry(format!("{d} all kinds"), true, &checks, tol));
            for kind in [RatioKind::RangeProbability, RatioKind::RangeExpectation] {
                let spread = delta_spread(&d, 0.0, tau0, kind)?;
                entries.push(SuiteEntry {
                    label: format!("{d} {kind:?} delta spread"),
                    expect_pass: true,
                    max_abs_error: spread,
                    checks: DELTA_SWEEP.len(),
                    ok: spread <= tol,
                });
            }
        }
    }
    let normal = Distribution::normal(0.0, 1.0)?;
    let negatives: [(&str, f64, f64); 3] = [("nu=0.5 tau=0.5", 0.5, 0.5), ("nu=0 tau=0.3", 0.0, 0.3), ("nu=-1 tau=0.7", -1.0, 0.7)];
    for (label, nu, tau) in negatives {
        let checks = all_checks(&normal, nu, tau, grid_size)?;
        entries.push(entry(format!("{normal} control {label}"), false, &checks, tol));
    }
    Ok(SuiteReport { tolerance: tol, entries })
}
