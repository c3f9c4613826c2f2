//! Analytic catalog of the distribution families used throughout the crate.
//!
//! A [`Distribution`] is validated on construction; evaluation methods assume
//! valid parameters. Laplace is parameterised by location and scale (`λ`, so
//! the variance is `2λ²`) and Gamma by shape and rate.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution as _, Gamma as GammaSampler, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::estimators::Sample;
use crate::numerics;
use crate::rng::{stream_rng, StreamRng};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Parameterised family. Obtain one through the validating constructors on
/// [`Distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal { mu: f64, sigma: f64 },
    Laplace { mu: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    Pareto { alpha: f64 },
    /// Density `12/(b−a)³ · (x − (a+b)/2)²` on `[a, b]`.
    BimodalQuadratic { a: f64, b: f64 },
    /// A symmetric base density rescaled by `2·tau0` left of its mode and
    /// `2·(1−tau0)` right of it.
    SplitSymmetric { tau0: f64, base: Box<Distribution> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    family: Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be finite and > 0")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be finite")))
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

impl Distribution {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(Self { family: Family::Normal { mu, sigma } })
    }

    pub fn laplace(mu: f64, scale: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("scale", scale)?;
        Ok(Self { family: Family::Laplace { mu, scale } })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        positive("shape", shape)?;
        positive("rate", rate)?;
        Ok(Self { family: Family::Gamma { shape, rate } })
    }

    pub fn pareto(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self { family: Family::Pareto { alpha } })
    }

    pub fn bimodal_quadratic(a: f64, b: f64) -> Result<Self> {
        finite("a", a)?;
        finite("b", b)?;
        if a >= b {
            return Err(Error::InvalidParameter(format!("bimodal quadratic needs a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { family: Family::BimodalQuadratic { a, b } })
    }

    pub fn split_symmetric(tau0: f64, base: Distribution) -> Result<Self> {
        if !(tau0 > 0.0 && tau0 < 1.0) {
            return Err(Error::InvalidParameter(format!("tau0 = {tau0} must lie in (0, 1)")));
        }
        match base.family {
            Family::Normal { .. } | Family::Laplace { .. } => {}
            _ => {
                return Err(Error::InvalidParameter(
                    "split-symmetric base must be normal or laplace".into(),
                ))
            }
        }
        Ok(Self { family: Family::SplitSymmetric { tau0, base: Box::new(base) } })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Short family name used in diagnostics.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Normal { .. } => "normal",
            Family::Laplace { .. } => "laplace",
            Family::Gamma { .. } => "gamma",
            Family::Pareto { .. } => "pareto",
            Family::BimodalQuadratic { .. } => "bimodal",
            Family::SplitSymmetric { .. } => "split",
        }
    }

    /// Returns a copy translated by `c`, for the location families.
    pub fn shifted(&self, c: f64) -> Option<Self> {
        match &self.family {
            Family::Normal { mu, sigma } => Self::normal(mu + c, *sigma).ok(),
            Family::Laplace { mu, scale } => Self::laplace(mu + c, *scale).ok(),
            Family::BimodalQuadratic { a, b } => Self::bimodal_quadratic(a + c, b + c).ok(),
            Family::SplitSymmetric { tau0, base } => {
                Self::split_symmetric(*tau0, base.shifted(c)?).ok()
            }
            _ => None,
        }
    }

    /// Closure of the support, `(lo, hi)`; either end may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match &self.family {
            Family::Normal { .. } | Family::Laplace { .. } | Family::SplitSymmetric { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            Family::Gamma { .. } => (0.0, f64::INFINITY),
            Family::Pareto { .. } => (1.0, f64::INFINITY),
            Family::BimodalQuadratic { a, b } => (*a, *b),
        }
    }

    /// Interior points where the density has a kink or a jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Laplace { mu, .. } => vec![*mu],
            Family::SplitSymmetric { base, .. } => {
                let mut v = base.breakpoints();
                v.push(base.mode());
                v
            }
            _ => Vec::new(),
        }
    }

    /// A characteristic length used to size numerical windows.
    pub fn scale_hint(&self) -> f64 {
        match &self.family {
            Family::Normal { sigma, .. } => *sigma,
            Family::Laplace { scale, .. } => *scale,
            Family::Gamma { shape, rate } => shape.sqrt() / rate,
            Family::Pareto { .. } => 1.0,
            Family::BimodalQuadratic { a, b } => (b - a) / 4.0,
            Family::SplitSymmetric { base, .. } => base.scale_hint(),
        }
    }

    /// Mode of a symmetric unimodal family (its centre). For the other
    /// families this is the density's global maximiser where one exists.
    pub fn mode(&self) -> f64 {
        match &self.family {
            Family::Normal { mu, .. } | Family::Laplace { mu, .. } => *mu,
            Family::Gamma { shape, rate } => ((shape - 1.0) / rate).max(0.0),
            Family::Pareto { .. } => 1.0,
            Family::BimodalQuadratic { a, .. } => *a,
            Family::SplitSymmetric { base, .. } => base.mode(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Normal { mu, sigma } => {
                let z = (x - mu) / sigma;
                FRAC_1_SQRT_2PI / sigma * (-0.5 * z * z).exp()
            }
            Family::Laplace { mu, scale } => (-(x - mu).abs() / scale).exp() / (2.0 * scale),
            Family::Gamma { shape, rate } => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => *rate,
                        _ => 0.0,
                    }
                } else {
                    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(*shape)).exp()
                }
            }
            Family::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else {
                    alpha * x.powf(-alpha - 1.0)
                }
            }
            Family::BimodalQuadratic { a, b } => {
                if x < *a || x > *b {
                    0.0
                } else {
                    let m = 0.5 * (a + b);
                    12.0 / (b - a).powi(3) * (x - m).powi(2)
                }
            }
            Family::SplitSymmetric { tau0, base } => {
                let nu = base.mode();
                if x >= nu {
                    2.0 * (1.0 - tau0) * base.pdf(x)
                } else {
                    2.0 * tau0 * base.pdf(x)
                }
            }
        }
    }

    /// Derivative of the density. Points where the density is not
    /// differentiable (kinks, jumps, support edges) are an error.
    pub fn pdf_deriv(&self, x: f64) -> Result<f64> {
        match &self.family {
            Family::Normal { mu, sigma } => Ok(-(x - mu) / (sigma * sigma) * self.pdf(x)),
            Family::Laplace { mu, scale } => {
                if x == *mu {
                    Err(Error::NotDifferentiable(x))
                } else {
                    Ok(-(x - mu).signum() / scale * self.pdf(x))
                }
            }
            Family::Gamma { shape, rate } => {
                if x < 0.0 {
                    Ok(0.0)
                } else if x == 0.0 {
                    Err(Error::NotDifferentiable(x))
                } else {
                    Ok(self.pdf(x) * ((shape - 1.0) / x - rate))
                }
            }
            Family::Pareto { alpha } => {
                if x < 1.0 {
                    Ok(0.0)
                } else if x == 1.0 {
                    Err(Error::NotDifferentiable(x))
                } else {
                    Ok(-alpha * (alpha + 1.0) * x.powf(-alpha - 2.0))
                }
            }
            Family::BimodalQuadratic { a, b } => {
                if x == *a || x == *b {
                    Err(Error::NotDifferentiable(x))
                } else if x < *a || x > *b {
                    Ok(0.0)
                } else {
                    let m = 0.5 * (a + b);
                    Ok(24.0 / (b - a).powi(3) * (x - m))
                }
            }
            Family::SplitSymmetric { tau0, base } => {
                let nu = base.mode();
                if x == nu {
                    return Err(Error::NotDifferentiable(x));
                }
                let weight = if x > nu { 2.0 * (1.0 - tau0) } else { 2.0 * tau0 };
                Ok(weight * base.pdf_deriv(x)?)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Family::Laplace { mu, scale } => {
                let z = (x - mu) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Family::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(*shape, rate * x)
                }
            }
            Family::Pareto { alpha } => {
                if x <= 1.0 {
                    0.0
                } else {
                    1.0 - x.powf(-alpha)
                }
            }
            Family::BimodalQuadratic { a, b } => {
                if x <= *a {
                    0.0
                } else if x >= *b {
                    1.0
                } else {
                    let m = 0.5 * (a + b);
                    4.0 / (b - a).powi(3) * ((x - m).powi(3) - (a - m).powi(3))
                }
            }
            Family::SplitSymmetric { tau0, base } => {
                let nu = base.mode();
                if x < nu {
                    2.0 * tau0 * base.cdf(x)
                } else {
                    1.0 - 2.0 * (1.0 - tau0) * base.sf(x)
                }
            }
        }
    }

    /// Survival function `1 − F(x)`, computed without cancellation in the
    /// upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Normal { mu, sigma } => std_normal_sf((x - mu) / sigma),
            Family::Laplace { mu, scale } => {
                let z = (x - mu) / scale;
                if z < 0.0 {
                    1.0 - 0.5 * z.exp()
                } else {
                    0.5 * (-z).exp()
                }
            }
            Family::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_ur(*shape, rate * x)
                }
            }
            Family::Pareto { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            Family::BimodalQuadratic { .. } => 1.0 - self.cdf(x),
            Family::SplitSymmetric { tau0, base } => {
                let nu = base.mode();
                if x < nu {
                    1.0 - 2.0 * tau0 * base.cdf(x)
                } else {
                    2.0 * (1.0 - tau0) * base.sf(x)
                }
            }
        }
    }

    pub fn inv_cdf(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(match &self.family {
            Family::Normal { mu, sigma } => {
                // one Newton step on the accurate cdf polishes erfc_inv
                let z = -SQRT_2 * erfc_inv(2.0 * p);
                let resid = if p < 0.5 { std_normal_cdf(z) - p } else { (1.0 - p) - std_normal_sf(z) };
                let z = z - resid / (FRAC_1_SQRT_2PI * (-0.5 * z * z).exp());
                mu + sigma * z
            }
            Family::Laplace { mu, scale } => {
                if p < 0.5 {
                    mu + scale * (2.0 * p).ln()
                } else {
                    mu - scale * (2.0 * (1.0 - p)).ln()
                }
            }
            Family::Gamma { .. } => self.invert_numerically(p),
            Family::Pareto { alpha } => (1.0 - p).powf(-1.0 / alpha),
            Family::BimodalQuadratic { a, b } => {
                let m = 0.5 * (a + b);
                let cube = p * (b - a).powi(3) / 4.0 + (a - m).powi(3);
                (m + cube.cbrt()).clamp(*a, *b)
            }
            Family::SplitSymmetric { tau0, base } => {
                if p < *tau0 {
                    base.inv_cdf(p / (2.0 * tau0))?
                } else {
                    base.inv_cdf(0.5 + (p - tau0) / (2.0 * (1.0 - tau0)))?
                }
            }
        })
    }

    fn invert_numerically(&self, p: f64) -> f64 {
        let (lo_support, _) = self.support();
        let scale = self.scale_hint();
        let mut lo = if lo_support.is_finite() { lo_support } else { -scale };
        while self.cdf(lo) > p {
            lo -= scale;
        }
        let mut hi = lo + scale;
        while self.cdf(hi) < p {
            hi += 2.0 * (hi - lo);
        }
        numerics::bisect(|x| self.cdf(x) - p, lo, hi, 1e-15 * hi.abs().max(1.0))
    }

    /// Mean, if finite.
    pub fn mean(&self) -> Result<f64> {
        match &self.family {
            Family::Pareto { alpha } if *alpha <= 1.0 => Err(Error::InfiniteMean),
            Family::Pareto { alpha } => Ok(alpha / (alpha - 1.0)),
            _ => self.raw_moments().map(|m| m.mean),
        }
    }

    /// Mean, standard deviation and skewness.
    pub fn theoretical_moments(&self) -> Result<Moments> {
        self.raw_moments()
    }

    fn raw_moments(&self) -> Result<Moments> {
        Ok(match &self.family {
            Family::Normal { mu, sigma } => Moments { mean: *mu, std: *sigma, skewness: 0.0 },
            Family::Laplace { mu, scale } => Moments { mean: *mu, std: scale * SQRT_2, skewness: 0.0 },
            Family::Gamma { shape, rate } => Moments {
                mean: shape / rate,
                std: shape.sqrt() / rate,
                skewness: 2.0 / shape.sqrt(),
            },
            Family::Pareto { alpha } => {
                let a = *alpha;
                if a <= 3.0 {
                    return Err(Error::MomentUndefined(format!(
                        "pareto skewness requires alpha > 3, got {a}"
                    )));
                }
                Moments {
                    mean: a / (a - 1.0),
                    std: (a / ((a - 1.0).powi(2) * (a - 2.0))).sqrt(),
                    skewness: 2.0 * (1.0 + a) / (a - 3.0) * ((a - 2.0) / a).sqrt(),
                }
            }
            Family::BimodalQuadratic { a, b } => Moments {
                mean: 0.5 * (a + b),
                std: (0.15 * (b - a).powi(2)).sqrt(),
                skewness: 0.0,
            },
            Family::SplitSymmetric { tau0, base } => {
                // D = Y − ν is +|Z| w.p. 1−tau0 and −|Z| w.p. tau0, where |Z|
                // is the folded base; abs moments m1, m2, m3 of |Z|.
                let (m1, m2, m3) = match base.family {
                    Family::Normal { sigma, .. } => (
                        sigma * (2.0 / PI).sqrt(),
                        sigma * sigma,
                        2.0 * sigma.powi(3) * (2.0 / PI).sqrt(),
                    ),
                    Family::Laplace { scale, .. } => (scale, 2.0 * scale * scale, 6.0 * scale.powi(3)),
                    _ => unreachable!("validated at construction"),
                };
                let s = 1.0 - 2.0 * tau0;
                let e1 = s * m1;
                let e3 = s * m3;
                let var = m2 - e1 * e1;
                let central3 = e3 - 3.0 * e1 * m2 + 2.0 * e1.powi(3);
                Moments {
                    mean: base.mode() + e1,
                    std: var.sqrt(),
                    skewness: central3 / var.powf(1.5),
                }
            }
        })
    }

    /// Draws `n` observations using stream 0 of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        self.sample_stream(n, seed, 0)
    }

    /// Draws `n` observations from the `(seed, stream)` generator.
    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<Sample> {
        if n == 0 {
            return Err(Error::SampleTooSmall { required: 1, got: 0 });
        }
        let mut rng = stream_rng(seed, stream);
        let values: Vec<f64> = (0..n).map(|_| self.draw(&mut rng)).collect();
        Sample::new(values)
    }

    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        match &self.family {
            Family::Normal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            Family::Laplace { .. } | Family::Pareto { .. } | Family::BimodalQuadratic { .. } => {
                let u: f64 = rng.sample(Open01);
                self.inv_cdf(u).expect("open unit interval")
            }
            Family::Gamma { shape, rate } => GammaSampler::new(*shape, 1.0 / rate)
                .expect("validated parameters")
                .sample(rng),
            Family::SplitSymmetric { tau0, base } => {
                let nu = base.mode();
                let left = rng.random::<f64>() < *tau0;
                let offset = (base.draw(rng) - nu).abs();
                if left {
                    nu - offset
                } else {
                    nu + offset
                }
            }
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            Family::Laplace { mu, scale } => write!(f, "laplace:{mu},{scale}"),
            Family::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            Family::Pareto { alpha } => write!(f, "pareto:{alpha}"),
            Family::BimodalQuadratic { a, b } => write!(f, "bimodal:{a},{b}"),
            Family::SplitSymmetric { tau0, base } => write!(f, "split:{tau0}:{base}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Parses `family:p1,p2`, e.g. `normal:0,1`, `pareto:2`,
    /// `split:0.3:laplace:0,1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse distribution '{s}'"));
        let (name, rest) = s.split_once(':').ok_or_else(bad)?;
        let name = name.trim().to_ascii_lowercase();
        if name == "split" {
            let (tau0, base) = rest.split_once(':').ok_or_else(bad)?;
            let tau0: f64 = tau0.trim().parse().map_err(|_| bad())?;
            return Self::split_symmetric(tau0, base.parse()?);
        }
        let params: Vec<f64> = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.as_str(), params.as_slice()) {
            ("normal", [m, s]) => Self::normal(*m, *s),
            ("laplace", [m, s]) => Self::laplace(*m, *s),
            ("gamma", [a, b]) => Self::gamma(*a, *b),
            ("pareto", [a]) => Self::pareto(*a),
            ("bimodal", [a, b]) => Self::bimodal_quadratic(*a, *b),
            _ => Err(bad()),
        }
    }
}
