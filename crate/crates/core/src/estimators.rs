//! Sample-based estimation of modiles, quantiles and expectiles.
//!
//! The empirical modile minimises
//!
//! ```text
//! τ − (τ/n)·#{Yᵢ ≤ θ + h2} + ((1−τ)/n)·#{Yᵢ ≤ θ − h1}
//! ```
//!
//! over θ. The objective is a right-continuous step function of θ whose
//! jumps sit at the breakpoints `Yᵢ − h2` (weight `−τ/n`) and `Yᵢ + h1`
//! (weight `(1−τ)/n`). [`estimate_modile`] sweeps those breakpoints in sorted
//! order, tracks the two counts and returns the midpoint of the leftmost flat
//! segment attaining the minimum.
//!
//! Objective comparisons are made exactly on the integer counts, so the
//! sweep and the brute-force oracle agree bit for bit.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_tau, Error, Result};

/// Largest sample accepted by [`estimate_modile_bruteforce`].
pub const BRUTEFORCE_MAX_N: usize = 10_000;

/// Name of the sample-quantile convention, recorded in output metadata.
pub const QUANTILE_CONVENTION: &str = "linear interpolation of order statistics, position 1 + tau*(n-1)";
pub const KURTOSIS_CONVENTION: &str = "non-excess m4/m2^2 with moment denominators n";
pub const SKEWNESS_CONVENTION: &str = "mean of ((y - mean)/sd)^3 with sd using denominator n-1";
pub const TIE_RULE: &str = "leftmost minimising segment; at equal positions +h1 breakpoints precede -h2 breakpoints";
pub const BANDWIDTH_RULE: &str = "h1 = a + |b - c|, h2 = a + |b + c| with a = sd (n-1), b = mean, c = skewness";

/// A finite, non-empty collection of observations with a cached sorted copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SampleTooSmall { required: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { values, sorted })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Applies `f` to every observation.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h1: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModileEstimate {
    pub value: f64,
    /// Minimised empirical loss.
    pub objective: f64,
    /// The flat minimising segment `[low, high]`.
    pub interval: (f64, f64),
    /// Set when the minimum sits on the last breakpoint, so the segment is
    /// unbounded above; `interval` then collapses to that breakpoint.
    pub open_ended: bool,
}

fn sample_sd(s: &Sample) -> f64 {
    let n = s.len() as f64;
    let mean = s.mean();
    (s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn sample_skewness(s: &Sample, mean: f64, sd: f64) -> f64 {
    s.values.iter().map(|v| ((v - mean) / sd).powi(3)).sum::<f64>() / s.len() as f64
}

/// Moment-based bandwidths `h1 = a + |b − c|`, `h2 = a + |b + c|`.
pub fn bandwidth_rule(s: &Sample) -> Result<Bandwidths> {
    if s.len() < 2 {
        return Err(Error::SampleTooSmall { required: 2, got: s.len() });
    }
    let a = sample_sd(s);
    if !(a > 0.0) {
        return Err(Error::DegenerateSample("standard deviation is zero".into()));
    }
    let b = s.mean();
    let c = sample_skewness(s, b, a);
    Ok(Bandwidths { h1: a + (b - c).abs(), h2: a + (b + c).abs() })
}

pub fn sample_summary(s: &Sample) -> Result<SummaryStats> {
    if s.len() < 2 {
        return Err(Error::SampleTooSmall { required: 2, got: s.len() });
    }
    let n = s.len() as f64;
    let mean = s.mean();
    let sd = sample_sd(s);
    let skewness = if sd > 0.0 { sample_skewness(s, mean, sd) } else { 0.0 };
    let m2 = s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = s.values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { f64::NAN };
    let sorted = s.sorted();
    let k = sorted.len();
    let median = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
    Ok(SummaryStats {
        n: k,
        mean,
        median,
        std: sd,
        skewness,
        kurtosis,
        min: sorted[0],
        max: sorted[k - 1],
    })
}

fn check_bandwidths(h1: f64, h2: f64) -> Result<()> {
    if h1.is_finite() && h2.is_finite() && h1 > 0.0 && h2 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bandwidths must be positive, got h1 = {h1}, h2 = {h2}")))
    }
}

/// Counts at a point of the objective: `upper = #{Yᵢ − h2 ≤ θ}`,
/// `lower = #{Yᵢ + h1 ≤ θ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Counts {
    upper: usize,
    lower: usize,
}

fn objective(tau: f64, n: usize, c: Counts) -> f64 {
    let n = n as f64;
    tau - tau * c.upper as f64 / n + (1.0 - tau) * c.lower as f64 / n
}

/// Exact comparison of `n·(objective − τ) = lower − τ·(lower + upper)`.
///
/// The difference `Δlower − τ·Δtotal` is formed with a single rounding, which
/// cannot flip its sign, so the ordering is exact for the given `τ`.
fn compare(tau: f64, a: Counts, b: Counts) -> Ordering {
    let d_lower = a.lower as f64 - b.lower as f64;
    let d_total = (a.lower + a.upper) as f64 - (b.lower + b.upper) as f64;
    let diff = (-tau).mul_add(d_total, d_lower);
    diff.partial_cmp(&0.0).expect("finite")
}

fn check_estimator_args(tau: f64, h1: f64, h2: f64) -> Result<()> {
    check_tau(tau)?;
    check_bandwidths(h1, h2)
}

/// Empirical modile by the breakpoint sweep, `O(n)` after the sample's sort.
pub fn estimate_modile(s: &Sample, tau: f64, h1: f64, h2: f64) -> Result<ModileEstimate> {
    check_estimator_args(tau, h1, h2)?;
    let y = s.sorted();
    let n = y.len();
    // Both breakpoint families inherit the sample order; merge them.
    let lower_pts = y.iter().map(|v| v + h1);
    let upper_pts = y.iter().map(|v| v - h2);
    let mut lower_pts = lower_pts.peekable();
    let mut upper_pts = upper_pts.peekable();

    let mut counts = Counts { upper: 0, lower: 0 };
    let mut best: Option<(Counts, f64)> = None;
    let mut best_next: Option<f64> = None;
    let mut awaiting_next = false;

    loop {
        let pos = match (lower_pts.peek(), upper_pts.peek()) {
            (None, None) => break,
            (Some(&l), None) => l,
            (None, Some(&u)) => u,
            (Some(&l), Some(&u)) => l.min(u),
        };
        if awaiting_next {
            best_next = Some(pos);
            awaiting_next = false;
        }
        // All breakpoints at this position are absorbed together, +h1 first.
        while lower_pts.next_if(|&l| l == pos).is_some() {
            counts.lower += 1;
        }
        while upper_pts.next_if(|&u| u == pos).is_some() {
            counts.upper += 1;
        }
        let improves = match best {
            None => true,
            Some((b, _)) => compare(tau, counts, b) == Ordering::Less,
        };
        if improves {
            best = Some((counts, pos));
            best_next = None;
            awaiting_next = true;
        }
    }

    let (counts, low) = best.expect("sample is non-empty");
    let objective = objective(tau, n, counts);
    Ok(match best_next {
        Some(high) => ModileEstimate { value: 0.5 * (low + high), objective, interval: (low, high), open_ended: false },
        None => ModileEstimate { value: low, objective, interval: (low, low), open_ended: true },
    })
}

/// Independent quadratic-cost oracle for [`estimate_modile`]: evaluates the
/// objective by direct counting at the midpoint of every segment between
/// distinct breakpoints, plus sentinels below the first and above the last.
pub fn estimate_modile_bruteforce(s: &Sample, tau: f64, h1: f64, h2: f64) -> Result<ModileEstimate> {
    check_estimator_args(tau, h1, h2)?;
    if s.len() > BRUTEFORCE_MAX_N {
        return Err(Error::SampleTooLarge { got: s.len(), max: BRUTEFORCE_MAX_N });
    }
    let y = s.values();
    let n = y.len();
    let mut positions: Vec<f64> = y.iter().map(|v| v + h1).chain(y.iter().map(|v| v - h2)).collect();
    positions.sort_by(f64::total_cmp);
    positions.dedup();

    let count_at = |theta: f64| Counts {
        upper: y.iter().filter(|&&v| v - h2 <= theta).count(),
        lower: y.iter().filter(|&&v| v + h1 <= theta).count(),
    };

    // Sentinel below every breakpoint: both counts vanish.
    let mut best_counts = count_at(f64::NEG_INFINITY);
    let mut best_segment: Option<usize> = None;
    for k in 0..positions.len() {
        let theta = match positions.get(k + 1) {
            Some(&next) => 0.5 * (positions[k] + next),
            None => f64::INFINITY,
        };
        let c = count_at(theta);
        if compare(tau, c, best_counts) == Ordering::Less {
            best_counts = c;
            best_segment = Some(k);
        }
    }
    let objective = objective(tau, n, best_counts);
    let k = best_segment.expect("the first breakpoint always lowers the objective");
    let low = positions[k];
    Ok(match positions.get(k + 1) {
        Some(&high) => ModileEstimate { value: 0.5 * (low + high), objective, interval: (low, high), open_ended: false },
        None => ModileEstimate { value: low, objective, interval: (low, low), open_ended: true },
    })
}

/// Sample quantile by linear interpolation between order statistics at
/// (1-based) position `1 + τ(n−1)`.
pub fn estimate_quantile(s: &Sample, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let y = s.sorted();
    let h = tau * (y.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    Ok(match y.get(lo + 1) {
        Some(&next) if frac > 0.0 => y[lo] + frac * (next - y[lo]),
        _ => y[lo],
    })
}

/// Sample expectile: the root of `τ·Σ(Yᵢ−ξ)₊ − (1−τ)·Σ(ξ−Yᵢ)₊`.
///
/// The balance function is continuous, strictly decreasing and linear between
/// order statistics. Bisection over the order statistics (using prefix sums)
/// locates the bracketing segment, on which the root is solved exactly.
pub fn estimate_expectile(s: &Sample, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if tau == 0.5 {
        return Ok(s.mean());
    }
    let y = s.sorted();
    let n = y.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in y {
        prefix.push(prefix.last().unwrap() + v);
    }
    let total = prefix[n];
    // Balance at xi with the k smallest observations below it.
    let balance = |k: usize, xi: f64| {
        let above = (total - prefix[k]) - (n - k) as f64 * xi;
        let below = k as f64 * xi - prefix[k];
        tau * above - (1.0 - tau) * below
    };
    if n == 1 || y[0] == y[n - 1] {
        return Ok(y[0]);
    }
    // Largest index i with balance(y[i]) >= 0; the root lies in [y[i], y[i+1]].
    let (mut lo, mut hi) = (0usize, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if balance(mid + 1, y[mid]) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // On [y[lo], y[lo+1]] exactly lo+1 observations lie at or below xi.
    let k = lo + 1;
    let slope = tau * (n - k) as f64 + (1.0 - tau) * k as f64;
    let intercept = tau * (total - prefix[k]) + (1.0 - tau) * prefix[k];
    Ok((intercept / slope).clamp(y[lo], y[hi]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sample_rejects_bad_input() {
        assert!(matches!(Sample::new(vec![]), Err(Error::SampleTooSmall { .. })));
        assert_eq!(Sample::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1)));
        assert_eq!(Sample::new(vec![f64::INFINITY]), Err(Error::NonFinite(0)));
    }

    #[test]
    fn bandwidth_examples() {
        let b = bandwidth_rule(&sample(&[-1.0, 0.0, 1.0])).unwrap();
        assert!((b.h1 - 1.0).abs() < 1e-15 && (b.h2 - 1.0).abs() < 1e-15);
        assert!(matches!(bandwidth_rule(&sample(&[2.0, 2.0])), Err(Error::DegenerateSample(_))));
        assert!(bandwidth_rule(&sample(&[2.0])).is_err());

        let big = Distribution::normal(0.0, 1.0).unwrap().sample(100_000, 5).unwrap();
        let b = bandwidth_rule(&big).unwrap();
        assert!((b.h1 - 1.0).abs() < 0.05 && (b.h2 - 1.0).abs() < 0.05, "{b:?}");
    }

    #[test]
    fn bandwidth_with_mean_equal_to_skewness() {
        // {0, 0, 3}: mean 1, sd √3, skewness (2·(−1/√3)³ + (2/√3)³)/3
        let s = sample(&[0.0, 0.0, 3.0]);
        let sd = 3f64.sqrt();
        let c = (2.0 * (-1.0 / sd).powi(3) + (2.0 / sd).powi(3)) / 3.0;
        let shifted = s.map(|v| v - 1.0 + c).unwrap();
        let b = bandwidth_rule(&shifted).unwrap();
        assert!((b.h1 - sd).abs() < 1e-12);
    }

    #[test]
    fn summary_examples() {
        let st = sample_summary(&sample(&[-1.0, 0.0, 1.0])).unwrap();
        assert_eq!((st.mean, st.median, st.min, st.max), (0.0, 0.0, -1.0, 1.0));
        assert!(sample_summary(&sample(&[0.0, 0.0, 0.0, 1.0])).unwrap().skewness > 0.0);
        assert_eq!(sample_summary(&sample(&[1.0, 4.0, 2.0, 3.0])).unwrap().median, 2.5);
        assert!(sample_summary(&sample(&[1.0])).is_err());

        let big = Distribution::normal(0.0, 1.0).unwrap().sample(100_000, 17).unwrap();
        let st = sample_summary(&big).unwrap();
        assert!((st.kurtosis - 3.0).abs() < 0.15, "{}", st.kurtosis);
    }

    #[test]
    fn modile_worked_example() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let e = estimate_modile(&s, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(e.value, 1.5);
        assert_eq!(e.interval, (1.0, 2.0));
        assert!((e.objective - 0.3).abs() < 1e-15);
        assert!(!e.open_ended);
        assert_eq!(estimate_modile_bruteforce(&s, 0.5, 1.0, 1.0).unwrap(), e);
    }

    #[test]
    fn modile_single_observation() {
        for (c, tau, h1, h2) in [(2.0, 0.3, 1.0, 0.5), (-1.0, 0.9, 0.25, 3.0)] {
            let s = sample(&[c]);
            let e = estimate_modile(&s, tau, h1, h2).unwrap();
            assert_eq!(e.value, c + (h1 - h2) / 2.0);
            assert_eq!(e.interval, (c - h2, c + h1));
            assert_eq!(e.objective, 0.0);
            assert_eq!(estimate_modile_bruteforce(&s, tau, h1, h2).unwrap(), e);
        }
    }

    #[test]
    fn modile_rejects_bad_arguments() {
        let s = sample(&[1.0, 2.0]);
        assert!(estimate_modile(&s, 0.0, 1.0, 1.0).is_err());
        assert!(estimate_modile(&s, 0.5, 0.0, 1.0).is_err());
        assert!(estimate_modile(&s, 0.5, 1.0, f64::NAN).is_err());
        let big = Sample::new(vec![0.0; BRUTEFORCE_MAX_N + 1]).unwrap();
        assert!(matches!(estimate_modile_bruteforce(&big, 0.5, 1.0, 1.0), Err(Error::SampleTooLarge { .. })));
    }

    #[test]
    fn modile_shift_by_ten() {
        let s = sample(&[0.25, 1.5, 1.75, 3.0, 4.5, 4.5, 6.0]);
        let shifted = s.map(|v| v + 10.0).unwrap();
        let a = estimate_modile(&s, 0.3, 1.0, 0.5).unwrap();
        let b = estimate_modile(&shifted, 0.3, 1.0, 0.5).unwrap();
        assert_eq!(b.value, a.value + 10.0);
    }

    #[test]
    fn duplicates_are_handled() {
        let s = sample(&[1.0, 1.0, 1.0, 2.0, 2.0, 5.0]);
        for tau in [0.1, 0.5, 0.9] {
            let e = estimate_modile(&s, tau, 0.5, 0.5).unwrap();
            assert!(e.value.is_finite());
            assert_eq!(estimate_modile_bruteforce(&s, tau, 0.5, 0.5).unwrap(), e);
            assert!(estimate_quantile(&s, tau).unwrap().is_finite());
            assert!(estimate_expectile(&s, tau).unwrap().is_finite());
        }
        let constant = sample(&[3.0, 3.0, 3.0]);
        assert_eq!(estimate_expectile(&constant, 0.8).unwrap(), 3.0);
        assert_eq!(estimate_quantile(&constant, 0.8).unwrap(), 3.0);
    }

    #[test]
    fn quantile_examples() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(estimate_quantile(&s, 0.5).unwrap(), 3.0);
        assert_eq!(estimate_quantile(&s, 0.25).unwrap(), 2.0);
        assert_eq!(estimate_quantile(&sample(&[0.0, 1.0]), 0.75).unwrap(), 0.75);
        assert_eq!(estimate_quantile(&sample(&[7.0]), 0.3).unwrap(), 7.0);
    }

    #[test]
    fn expectile_examples() {
        assert_eq!(estimate_expectile(&sample(&[0.0, 1.0]), 0.75).unwrap(), 0.75);
        let s = sample(&[0.3, -2.0, 5.5, 1.25]);
        assert_eq!(estimate_expectile(&s, 0.5).unwrap(), s.mean());
        let big = Distribution::normal(0.0, 1.0).unwrap().sample(100_000, 23).unwrap();
        let e = estimate_expectile(&big, 0.9).unwrap();
        assert!((e - 0.861).abs() < 0.02, "{e}");
    }

    #[test]
    fn expectile_balances_the_loss() {
        let s = sample(&[0.1, 0.4, 0.45, 2.0, 3.5, 3.6, 9.0]);
        for tau in [0.05, 0.2, 0.5, 0.77, 0.99] {
            let xi = estimate_expectile(&s, tau).unwrap();
            let m: f64 = s
                .values()
                .iter()
                .map(|&v| if v > xi { tau * (v - xi) } else { -(1.0 - tau) * (xi - v) })
                .sum();
            assert!(m.abs() < 1e-12, "tau {tau}: balance {m}");
        }
    }

    proptest! {
        #[test]
        fn sweep_matches_bruteforce(
            values in prop::collection::vec(-10.0f64..10.0, 1..50),
            tau in 0.01f64..0.99,
            h1 in 0.01f64..5.0,
            h2 in 0.01f64..5.0,
        ) {
            let s = Sample::new(values).unwrap();
            prop_assert_eq!(estimate_modile(&s, tau, h1, h2).unwrap(), estimate_modile_bruteforce(&s, tau, h1, h2).unwrap());
        }

        #[test]
        fn sweep_matches_bruteforce_on_lattice(
            values in prop::collection::vec(-20i32..20, 1..40),
            tau_idx in 1u32..8,
            h1 in 1i32..6,
            h2 in 1i32..6,
        ) {
            // lattice data produces coincident breakpoints and exact ties
            let s = Sample::new(values.into_iter().map(|v| v as f64 * 0.5).collect()).unwrap();
            let tau = tau_idx as f64 / 8.0;
            let (h1, h2) = (h1 as f64 * 0.5, h2 as f64 * 0.5);
            prop_assert_eq!(estimate_modile(&s, tau, h1, h2).unwrap(), estimate_modile_bruteforce(&s, tau, h1, h2).unwrap());
        }

        #[test]
        fn estimate_lies_in_its_interval(values in prop::collection::vec(-5.0f64..5.0, 1..60), tau in 0.01f64..0.99) {
            let s = Sample::new(values).unwrap();
            let e = estimate_modile(&s, tau, 0.7, 1.1).unwrap();
            prop_assert!(e.interval.0 <= e.value && e.value <= e.interval.1);
            prop_assert_eq!(e.value, 0.5 * (e.interval.0 + e.interval.1));
        }

        #[test]
        fn quantile_and_expectile_monotone_in_tau(values in prop::collection::vec(-5.0f64..5.0, 1..60)) {
            let s = Sample::new(values).unwrap();
            let taus: Vec<f64> = (1..50).map(|i| i as f64 / 50.0).collect();
            for w in taus.windows(2) {
                prop_assert!(estimate_quantile(&s, w[0]).unwrap() <= estimate_quantile(&s, w[1]).unwrap());
                prop_assert!(estimate_expectile(&s, w[0]).unwrap() <= estimate_expectile(&s, w[1]).unwrap() + 1e-12);
            }
        }
    }
}
