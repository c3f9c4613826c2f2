//! Theoretical modiles, quantiles and expectiles.
//!
//! The τ-th modile with window `[θ − h1, θ + h2]` minimises the expected
//! asymmetric 0-1 loss
//!
//! ```text
//! L(θ) = τ·P(Y > θ + h2) + (1−τ)·P(Y < θ − h1)
//! ```
//!
//! and is characterised by the first-order condition
//! `τ·f(θ + h2) = (1−τ)·f(θ − h1)`.
//!
//! Gamma and Pareto closed forms come in two variants. [`Variant::Corrected`]
//! solves the first-order condition exactly and is the default;
//! [`Variant::Paper`] keeps the exponents of the originally published
//! formulas, which reproduce the published Gamma table but do not satisfy the
//! first-order condition away from τ = 1/2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, Family};
use crate::error::{check_tau, Error, Result};
use crate::estimators::Bandwidths;
use crate::numerics;

/// Number of grid points in the coarse scan of [`modile_foc_numeric`].
pub const FOC_SCAN_POINTS: usize = 4096;
/// Tail probability that bounds the scan window on each side.
pub const FOC_SCAN_TAIL: f64 = 1e-6;
const FOC_BISECT_WIDTH: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-10;

/// `(τ, h1, h2)` with `0 < τ < 1` and positive bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModileSpec {
    tau: f64,
    h1: f64,
    h2: f64,
}

impl ModileSpec {
    pub fn new(tau: f64, h1: f64, h2: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(h1.is_finite() && h2.is_finite() && h1 > 0.0 && h2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidths must be positive, got h1 = {h1}, h2 = {h2}"
            )));
        }
        Ok(Self { tau, h1, h2 })
    }

    pub fn with_bandwidths(tau: f64, h: Bandwidths) -> Result<Self> {
        Self::new(tau, h.h1, h.h2)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// `(1−τ)/τ`, the target ratio of the first-order condition.
    pub fn odds(&self) -> f64 {
        (1.0 - self.tau) / self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Paper,
    #[default]
    Corrected,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Paper => "paper",
            Variant::Corrected => "corrected",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Variant::Paper),
            "corrected" => Ok(Variant::Corrected),
            other => Err(Error::InvalidParameter(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedFormPaper,
    ClosedFormCorrected,
    NumericFoc,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::ClosedFormPaper => "closed_form_paper",
            SolveMethod::ClosedFormCorrected => "closed_form_corrected",
            SolveMethod::NumericFoc => "numeric_foc",
        }
    }
}

/// One root of the bimodal-quadratic closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModileBranch {
    pub value: f64,
    pub expected_loss: f64,
    pub foc_residual: f64,
    /// Both window ends fall inside the support, where the closed form applies.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModileResult {
    pub value: f64,
    pub method: SolveMethod,
    /// `τ·f(ν + h2) − (1−τ)·f(ν − h1)` at the reported value.
    pub foc_residual: f64,
    /// Both candidate roots, for closed forms with a `±` branch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<ModileBranch>,
}

pub fn foc_residual(d: &Distribution, nu: f64, spec: &ModileSpec) -> f64 {
    spec.tau * d.pdf(nu + spec.h2) - (1.0 - spec.tau) * d.pdf(nu - spec.h1)
}

/// `τ − τ·F(θ + h2) + (1−τ)·F(θ − h1)`, evaluated through the survival
/// function to keep precision in the upper tail.
pub fn expected_modile_loss(d: &Distribution, theta: f64, spec: &ModileSpec) -> f64 {
    spec.tau * d.sf(theta + spec.h2) + (1.0 - spec.tau) * d.cdf(theta - spec.h1)
}

fn method_for(variant: Variant) -> SolveMethod {
    match variant {
        Variant::Paper => SolveMethod::ClosedFormPaper,
        Variant::Corrected => SolveMethod::ClosedFormCorrected,
    }
}

/// Raw Pareto closed form `(h1 + A·h2)/(1 − A)` without support checks.
///
/// Corrected: `A = ((1−τ)/τ)^(1/(α+1))`; paper: `A = ((1−τ)/τ)^(α+1)`.
pub fn pareto_modile_formula(alpha: f64, spec: &ModileSpec, variant: Variant) -> f64 {
    let exponent = match variant {
        Variant::Corrected => 1.0 / (alpha + 1.0),
        Variant::Paper => alpha + 1.0,
    };
    let a = spec.odds().powf(exponent);
    (spec.h1 + a * spec.h2) / (1.0 - a)
}

/// Closed-form modile for the families that admit one.
pub fn modile_closed_form(d: &Distribution, spec: &ModileSpec, variant: Variant) -> Result<ModileResult> {
    let (tau, h1, h2) = (spec.tau, spec.h1, spec.h2);
    let log_odds = spec.odds().ln();
    let single = |value: f64| ModileResult {
        value,
        method: method_for(variant),
        foc_residual: foc_residual(d, value, spec),
        branches: Vec::new(),
    };
    match d.family() {
        Family::Normal { mu, sigma } => {
            Ok(single(mu + 0.5 * (h1 - h2) - sigma * sigma / (h1 + h2) * log_odds))
        }
        Family::Laplace { mu, scale } => {
            let nu = mu + 0.5 * (h1 - h2) - 0.5 * scale * log_odds;
            if h1.min(h2) < (nu - mu).abs() {
                return Err(Error::ValidityViolated(format!(
                    "laplace form needs min(h1, h2) >= |nu - mu|; nu = {nu}"
                )));
            }
            Ok(single(nu))
        }
        Family::Gamma { shape, rate } => {
            if *shape <= 1.0 {
                return Err(Error::NoClosedForm(format!("gamma with shape {shape} <= 1")));
            }
            let log_a = match variant {
                Variant::Paper => log_odds + rate * (h1 + h2) / (shape - 1.0),
                Variant::Corrected => (log_odds + rate * (h1 + h2)) / (shape - 1.0),
            };
            let a = log_a.exp();
            if a <= 1.0 {
                return Err(Error::ValidityViolated(format!("gamma form needs A > 1, got {a}")));
            }
            let nu = (a * h1 + h2) / (a - 1.0);
            if nu - h1 <= 0.0 {
                return Err(Error::ValidityViolated(format!(
                    "gamma form needs nu - h1 > 0; nu = {nu}"
                )));
            }
            Ok(single(nu))
        }
        Family::Pareto { alpha } => {
            if tau <= 0.5 {
                return Err(Error::ValidityViolated(format!("pareto form needs tau > 1/2, got {tau}")));
            }
            let nu = pareto_modile_formula(*alpha, spec, variant);
            if nu - h1 < 1.0 {
                return Err(Error::ValidityViolated(format!(
                    "pareto form needs nu - h1 >= 1; nu = {nu}"
                )));
            }
            Ok(single(nu))
        }
        Family::BimodalQuadratic { a, b } => {
            let m = 0.5 * (a + b);
            let root = spec.odds().sqrt();
            let branches: Vec<ModileBranch> = [root, -root]
                .into_iter()
                .filter(|s| (1.0 + s).abs() > f64::EPSILON)
                .map(|s| {
                    let value = (m - h2 + (m + h1) * s) / (1.0 + s);
                    ModileBranch {
                        value,
                        expected_loss: expected_modile_loss(d, value, spec),
                        foc_residual: foc_residual(d, value, spec),
                        valid: value - h1 >= *a && value + h2 <= *b,
                    }
                })
                .collect();
            let best = branches
                .iter()
                .filter(|b| b.valid)
                .min_by(|x, y| x.expected_loss.total_cmp(&y.expected_loss))
                .copied()
                .ok_or_else(|| {
                    Error::ValidityViolated("no branch keeps the window inside [a, b]".into())
                })?;
            Ok(ModileResult {
                value: best.value,
                method: method_for(variant),
                foc_residual: best.foc_residual,
                branches,
            })
        }
        Family::SplitSymmetric { .. } => Err(Error::NoClosedForm("split-symmetric".into())),
    }
}

/// Modile by scanning the first-order condition for sign changes and
/// refining each by bisection.
///
/// Sign changes caused by density jumps are discarded: a candidate is kept
/// only if the residual at the refined point is negligible relative to the
/// scan's largest residual. Among true roots the expected-loss minimiser is
/// returned.
pub fn modile_foc_numeric(d: &Distribution, spec: &ModileSpec) -> Result<ModileResult> {
    let lo = d.inv_cdf(FOC_SCAN_TAIL)? - spec.h2;
    let hi = d.inv_cdf(1.0 - FOC_SCAN_TAIL)? + spec.h1;
    let g = |theta: f64| foc_residual(d, theta, spec);
    let step = (hi - lo) / (FOC_SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..FOC_SCAN_POINTS).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut roots = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 && scale > 0.0 {
            // flat zero regions (outside both supports) are not roots
            let neighbours_zero = (i == 0 || values[i - 1] == 0.0) && (i + 1 == grid.len() || values[i + 1] == 0.0);
            if !neighbours_zero {
                roots.push(grid[i]);
            }
            continue;
        }
        if i + 1 < grid.len() && values[i] * values[i + 1] < 0.0 {
            let root = numerics::bisect(g, grid[i], grid[i + 1], FOC_BISECT_WIDTH);
            if g(root).abs() <= 1e-6 * scale {
                roots.push(root);
            }
        }
    }

    let best = roots
        .into_iter()
        .map(|r| (r, expected_modile_loss(d, r, spec)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((value, _)) => Ok(ModileResult {
            value,
            method: SolveMethod::NumericFoc,
            foc_residual: g(value),
            branches: Vec::new(),
        }),
        None => {
            let fallback = grid
                .iter()
                .copied()
                .min_by(|a, b| expected_modile_loss(d, *a, spec).total_cmp(&expected_modile_loss(d, *b, spec)))
                .expect("grid is non-empty");
            Err(Error::NoSignChange { fallback })
        }
    }
}

/// Closed form for the chosen variant, falling back to the numeric solver
/// when the family has none or its validity condition fails.
pub fn modile(d: &Distribution, spec: &ModileSpec, variant: Variant) -> Result<ModileResult> {
    match modile_closed_form(d, spec, variant) {
        Err(Error::NoClosedForm(_)) | Err(Error::ValidityViolated(_)) => modile_foc_numeric(d, spec),
        other => other,
    }
}

pub fn quantile_theoretical(d: &Distribution, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    d.inv_cdf(tau)
}

/// `(E(Y − ξ)₊, E(ξ − Y)₊)` by quadrature of the survival function above ξ
/// and the distribution function below it.
pub fn partial_expectations(d: &Distribution, xi: f64) -> Result<(f64, f64)> {
    d.mean()?;
    let (lo, hi) = d.support();
    let mut breaks = d.breakpoints();
    breaks.extend([lo, hi].iter().filter(|v| v.is_finite()));
    let scale = d.scale_hint();
    let upper = numerics::integrate_piecewise(|y| d.sf(y), xi, hi.max(xi), &breaks, scale, QUAD_TOL).value;
    let lower = numerics::integrate_piecewise(|y| d.cdf(y), lo.min(xi), xi, &breaks, scale, QUAD_TOL).value;
    Ok((upper, lower))
}

/// Theoretical expectile: root of `τ·E(Y−ξ)₊ − (1−τ)·E(ξ−Y)₊`.
pub fn expectile_theoretical(d: &Distribution, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let mean = d.mean()?;
    if tau == 0.5 {
        return Ok(mean);
    }
    let balance = |xi: f64| {
        let (up, down) = partial_expectations(d, xi).expect("finite mean checked above");
        tau * up - (1.0 - tau) * down
    };
    let step = d.scale_hint();
    let (mut lo, mut hi) = if tau > 0.5 { (mean, mean + step) } else { (mean - step, mean) };
    let mut width = step;
    while balance(hi) > 0.0 {
        lo = hi;
        width *= 2.0;
        hi += width;
    }
    width = step;
    while balance(lo) < 0.0 {
        hi = lo;
        width *= 2.0;
        lo -= width;
    }
    Ok(numerics::bisect(balance, lo, hi, 1e-12 * mean.abs().max(1.0)))
}

/// Heavy-tail approximation `{(1−τ)(α−1)}^(−1/α)` of the Pareto expectile,
/// accurate only as τ → 1.
pub fn pareto_expectile_approx(alpha: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if !(alpha > 1.0) {
        return Err(Error::InfiniteMean);
    }
    Ok(((1.0 - tau) * (alpha - 1.0)).powf(-1.0 / alpha))
}

/// τ-th quantile of a Pareto(α) law truncated to `[ν − h1, ν + h2]`.
pub fn pareto_conditional_quantile(alpha: f64, spec: &ModileSpec, nu: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be > 0")));
    }
    if nu - spec.h1 < 1.0 {
        return Err(Error::ValidityViolated(format!(
            "window start nu - h1 = {} lies below the pareto support",
            nu - spec.h1
        )));
    }
    let t = spec.tau;
    let s = t * (nu + spec.h2).powf(-alpha) + (1.0 - t) * (nu - spec.h1).powf(-alpha);
    Ok(s.powf(-1.0 / alpha))
}

/// Where a computation takes its bandwidths from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum BandwidthSource {
    /// The moment rule applied to the distribution's theoretical mean,
    /// standard deviation and skewness.
    TheoreticalMoments,
    Explicit { h1: f64, h2: f64 },
}

impl BandwidthSource {
    pub fn resolve(&self, d: &Distribution) -> Result<Bandwidths> {
        match *self {
            BandwidthSource::TheoreticalMoments => bandwidths_from_moments(d),
            BandwidthSource::Explicit { h1, h2 } => Ok(Bandwidths { h1, h2 }),
        }
    }
}

/// `h1 = a + |b − c|`, `h2 = a + |b + c|` from theoretical moments.
pub fn bandwidths_from_moments(d: &Distribution) -> Result<Bandwidths> {
    let m = d.theoretical_moments()?;
    Ok(Bandwidths { h1: m.std + (m.mean - m.skewness).abs(), h2: m.std + (m.mean + m.skewness).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativenessRow {
    pub tau: f64,
    pub h1: f64,
    pub h2: f64,
    /// Corrected Pareto closed form, reported even when its support
    /// condition fails (see `modile_support_valid`).
    pub modile: Option<f64>,
    /// `τ > 1/2` and `ν − h1 ≥ 1`.
    pub modile_support_valid: bool,
    pub quantile: f64,
    pub expectile: Option<f64>,
    pub expectile_approx: f64,
    pub modile_below_quantile: bool,
    pub modile_below_expectile: Option<bool>,
    pub modile_below_expectile_approx: bool,
    pub error: Option<String>,
}

/// Compares the corrected Pareto modile against the quantile and expectile
/// across `taus`. Component failures are recorded per row.
pub fn conservativeness_report(alpha: f64, taus: &[f64], source: BandwidthSource) -> Result<Vec<ConservativenessRow>> {
    if !(alpha > 1.0) {
        return Err(Error::InfiniteMean);
    }
    let d = Distribution::pareto(alpha)?;
    let h = source.resolve(&d)?;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut errors = Vec::new();
        let spec = match ModileSpec::new(tau, h.h1, h.h2) {
            Ok(s) => s,
            Err(e) => {
                rows.push(ConservativenessRow {
                    tau,
                    h1: h.h1,
                    h2: h.h2,
                    modile: None,
                    modile_support_valid: false,
                    quantile: f64::NAN,
                    expectile: None,
                    expectile_approx: f64::NAN,
                    modile_below_quantile: false,
                    modile_below_expectile: None,
                    modile_below_expectile_approx: false,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        let nu = pareto_modile_formula(alpha, &spec, Variant::Corrected);
        let modile = nu.is_finite().then_some(nu);
        let support_valid = modile_closed_form(&d, &spec, Variant::Corrected).is_ok();
        let quantile = (1.0 - tau).powf(-1.0 / alpha);
        let expectile = match expectile_theoretical(&d, tau) {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(format!("expectile: {e}"));
                None
            }
        };
        let approx = pareto_expectile_approx(alpha, tau).unwrap_or(f64::NAN);
        let below = |other: f64| modile.is_some_and(|m| m < other);
        rows.push(ConservativenessRow {
            tau,
            h1: h.h1,
            h2: h.h2,
            modile,
            modile_support_valid: support_valid,
            quantile,
            expectile,
            expectile_approx: approx,
            modile_below_quantile: below(quantile),
            modile_below_expectile: expectile.map(below),
            modile_below_expectile_approx: below(approx),
            error: (!errors.is_empty()).then(|| errors.join("; ")),
        });
    }
    Ok(rows)
}
