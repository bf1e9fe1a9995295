//! Offspring series and the Khinchin family they generate.
//!
//! An [`OffspringSpec`] describes a power series `psi` with nonnegative
//! coefficients `b_n`, `b_0 > 0`, and a declared radius of convergence. For
//! `0 <= t < R` the law `P(Y_t = n) = b_n t^n / psi(t)` has mean
//! `m(t) = t psi'(t) / psi(t)` and variance `t m'(t)`. When `m` eventually
//! exceeds 1 the series has an apex `tau` with `m(tau) = 1`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{self, PowerSeries, DEFAULT_ORDER};

/// Absolute tolerance on `m(tau) - 1`.
pub const APEX_TOLERANCE: f64 = 1e-12;

const PROBE_STEPS_FINITE: i32 = 40;
const PROBE_STEPS_ENTIRE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffspringKind {
    /// `e^z`
    PresetExp,
    /// `1/(1 - z)`
    PresetGeometric,
    /// A polynomial; radius is `+inf`.
    Polynomial,
    /// Finitely many coefficients of a series with a user-declared radius.
    ExplicitCoeffs,
}

/// The offspring series `psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringSpec {
    kind: OffspringKind,
    name: String,
    radius: f64,
    exact: Vec<BigRational>,
    floats: Vec<f64>,
    lattice_override: Option<u64>,
    series: PowerSeries<f64>,
}

/// Statistics of `Y_t` at a fixed parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub t: f64,
    pub mass: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub tail_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classification {
    /// `lim m(t) > 1`; carries the apex.
    KStar { tau: f64, limit_mean: f64 },
    /// `lim m(t) <= 1`; no apex.
    KPlain { limit_mean: f64 },
}

impl Classification {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            Classification::KStar { tau, .. } => Some(tau),
            Classification::KPlain { .. } => None,
        }
    }

    pub fn limit_mean(&self) -> f64 {
        match *self {
            Classification::KStar { limit_mean, .. } | Classification::KPlain { limit_mean } => {
                limit_mean
            }
        }
    }

    pub fn is_k_star(&self) -> bool {
        matches!(self, Classification::KStar { .. })
    }
}

impl OffspringSpec {
    /// `psi(z) = e^z`: Poisson offspring, apex 1.
    pub fn exp() -> Self {
        OffspringSpec {
            kind: OffspringKind::PresetExp,
            name: "exp".into(),
            radius: f64::INFINITY,
            exact: Vec::new(),
            floats: Vec::new(),
            lattice_override: None,
            series: series::exp_series(DEFAULT_ORDER),
        }
    }

    /// `psi(z) = 1/(1 - z)`: geometric offspring, plane trees, apex 1/2.
    pub fn geometric() -> Self {
        OffspringSpec {
            kind: OffspringKind::PresetGeometric,
            name: "planetree".into(),
            radius: 1.0,
            exact: Vec::new(),
            floats: Vec::new(),
            lattice_override: None,
            series: series::geometric_series(DEFAULT_ORDER),
        }
    }

    /// A polynomial offspring series. Trailing zero coefficients are dropped.
    pub fn polynomial(coeffs: Vec<BigRational>) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        let name = format!("poly{}", format_coeff_list(&coeffs));
        Self::from_exact(OffspringKind::Polynomial, coeffs, f64::INFINITY, name)
    }

    /// A series known through finitely many coefficients and a declared radius.
    pub fn explicit(coeffs: Vec<BigRational>, radius: f64) -> Result<Self> {
        let name = format!("series{}", format_coeff_list(&coeffs));
        Self::from_exact(OffspringKind::ExplicitCoeffs, coeffs, radius, name)
    }

    fn from_exact(
        kind: OffspringKind,
        exact: Vec<BigRational>,
        radius: f64,
        name: String,
    ) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::InvalidSpec(format!("radius must be positive, got {radius}")));
        }
        if exact.iter().any(|c| c.is_negative()) {
            return Err(Error::InvalidSpec("coefficients must be nonnegative".into()));
        }
        if !exact.first().is_some_and(|b0| b0.is_positive()) {
            return Err(Error::InvalidSpec("b_0 must be positive".into()));
        }
        if !exact.iter().skip(1).any(|c| c.is_positive()) {
            return Err(Error::InvalidSpec("series must be non-constant".into()));
        }
        let floats: Vec<f64> = exact.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        let mut padded = floats.clone();
        padded.resize(padded.len().max(DEFAULT_ORDER + 1), 0.0);
        let series = PowerSeries::new(padded)?.with_radius(radius);
        Ok(OffspringSpec {
            kind,
            name,
            radius,
            exact,
            floats,
            lattice_override: None,
            series,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Overrides the lattice period computed from the stored coefficients.
    pub fn with_lattice_period(mut self, q: u64) -> Self {
        self.lattice_override = Some(q.max(1));
        self
    }

    pub fn kind(&self) -> OffspringKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The materialized truncation of `psi` at [`DEFAULT_ORDER`].
    pub fn series(&self) -> &PowerSeries<f64> {
        &self.series
    }

    /// Stored coefficients for polynomial and explicit specs; empty for presets.
    pub fn stored_coeffs(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn coeff_exact(&self, k: usize) -> BigRational {
        match self.kind {
            OffspringKind::PresetExp => {
                let fact: BigInt = (1..=k as u64).map(BigInt::from).product();
                BigRational::new(BigInt::one(), fact)
            }
            OffspringKind::PresetGeometric => BigRational::one(),
            _ => self.exact.get(k).cloned().unwrap_or_else(BigRational::zero),
        }
    }

    pub fn coeff(&self, k: usize) -> f64 {
        match self.kind {
            OffspringKind::PresetExp => (-ln_factorial(k)).exp(),
            OffspringKind::PresetGeometric => 1.0,
            _ => self.floats.get(k).copied().unwrap_or(0.0),
        }
    }

    /// Exact truncation of `psi` at `order`.
    pub fn exact_series(&self, order: usize) -> PowerSeries<BigRational> {
        let s = match self.kind {
            OffspringKind::PresetExp => series::exp_series_exact(order),
            OffspringKind::PresetGeometric => series::geometric_series(order),
            _ => {
                let mut c = self.exact.clone();
                c.resize(order + 1, BigRational::zero());
                PowerSeries::from_vec_unchecked(c, self.radius)
            }
        };
        s.with_radius(self.radius)
    }

    /// Floating-point truncation of `psi` at `order`.
    pub fn float_series(&self, order: usize) -> PowerSeries<f64> {
        let coeffs = (0..=order).map(|k| self.coeff(k)).collect();
        PowerSeries::from_vec_unchecked(coeffs, self.radius)
    }

    /// Degree of a polynomial spec; `None` for infinite series.
    pub fn degree(&self) -> Option<usize> {
        match self.kind {
            OffspringKind::Polynomial => Some(self.exact.len() - 1),
            _ => None,
        }
    }

    /// `Q = gcd{n >= 1 : b_n != 0}` over the stored coefficients, unless overridden.
    pub fn lattice_period(&self) -> u64 {
        if let Some(q) = self.lattice_override {
            return q;
        }
        match self.kind {
            OffspringKind::PresetExp | OffspringKind::PresetGeometric => 1,
            _ => self
                .exact
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, c)| !c.is_zero())
                .fold(0u64, |g, (n, _)| g.gcd(&(n as u64))),
        }
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t < self.radius {
            Ok(())
        } else {
            Err(Error::domain("t", t, format!("[0, {})", self.radius)))
        }
    }

    /// `(psi(t), psi'(t), psi''(t))` without domain checks.
    fn derivs(&self, t: f64) -> (f64, f64, f64) {
        match self.kind {
            OffspringKind::PresetExp => {
                let e = t.exp();
                (e, e, e)
            }
            OffspringKind::PresetGeometric => {
                let u = 1.0 / (1.0 - t);
                (u, u * u, 2.0 * u * u * u)
            }
            _ => {
                let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &c in self.floats.iter().rev() {
                    d2 = d2 * t + 2.0 * d1;
                    d1 = d1 * t + p;
                    p = p * t + c;
                }
                (p, d1, d2)
            }
        }
    }

    /// `psi(t)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.derivs(t).0)
    }

    /// `psi'(t)`.
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.derivs(t).1)
    }

    /// `ln psi(t)`, stable for large `t` on the exponential preset.
    pub fn ln_psi(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self.kind {
            OffspringKind::PresetExp => t,
            OffspringKind::PresetGeometric => -(-t).ln_1p(),
            _ => self.derivs(t).0.ln(),
        })
    }

    /// `t / psi(t)`.
    pub fn t_over_psi(&self, t: f64) -> Result<f64> {
        Ok(t / self.psi(t)?)
    }

    /// `P(Y_t = k)` for `k <= n_max`.
    pub fn masses(&self, t: f64, n_max: usize) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let mut out = vec![0.0; n_max + 1];
        if t == 0.0 {
            out[0] = 1.0;
            return Ok(out);
        }
        let ln_t = t.ln();
        match self.kind {
            OffspringKind::PresetExp => {
                let mut ln_fact = 0.0;
                for (k, p) in out.iter_mut().enumerate() {
                    if k > 0 {
                        ln_fact += (k as f64).ln();
                    }
                    *p = (k as f64 * ln_t - ln_fact - t).exp();
                }
            }
            OffspringKind::PresetGeometric => {
                let mut p = 1.0 - t;
                for slot in out.iter_mut() {
                    *slot = p;
                    p *= t;
                }
            }
            _ => {
                let ln_psi = self.derivs(t).0.ln();
                for (k, p) in out.iter_mut().enumerate() {
                    let b = self.floats.get(k).copied().unwrap_or(0.0);
                    if b > 0.0 {
                        *p = (b.ln() + k as f64 * ln_t - ln_psi).exp();
                    }
                }
            }
        }
        Ok(out)
    }

    /// The law of `Y_t` up to `n_max`, with its mean, variance and the mass
    /// left beyond `n_max`. At `t = 0` this is the point mass at 0.
    pub fn mass_function(&self, t: f64, n_max: usize) -> Result<FamilyPoint> {
        let mass = self.masses(t, n_max)?;
        let total: f64 = mass.iter().sum();
        Ok(FamilyPoint {
            t,
            mean: self.mean(t)?,
            variance: self.variance(t)?,
            tail_mass: (1.0 - total).max(0.0),
            mass,
        })
    }

    /// `m(t) = t psi'(t) / psi(t)`.
    pub fn mean(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.mean_unchecked(t))
    }

    fn mean_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            OffspringKind::PresetExp => t,
            OffspringKind::PresetGeometric => t / (1.0 - t),
            _ => {
                if t == 0.0 {
                    return 0.0;
                }
                let (p, d1, _) = self.derivs(t);
                t * d1 / p
            }
        }
    }

    /// `sigma^2(t) = t m'(t) = m(t) + t^2 psi''(t)/psi(t) - m(t)^2`.
    pub fn variance(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self.kind {
            OffspringKind::PresetExp => t,
            OffspringKind::PresetGeometric => t / ((1.0 - t) * (1.0 - t)),
            _ => {
                if t == 0.0 {
                    return Ok(0.0);
                }
                let (p, d1, d2) = self.derivs(t);
                let m = t * d1 / p;
                (m + t * t * d2 / p - m * m).max(0.0)
            }
        })
    }

    pub(crate) fn probe_points(&self) -> Vec<f64> {
        if self.radius.is_finite() {
            (1..=PROBE_STEPS_FINITE)
                .map(|k| self.radius * (1.0 - 2f64.powi(-k)))
                .collect()
        } else {
            (0..=PROBE_STEPS_ENTIRE).map(|k| 2f64.powi(k)).collect()
        }
    }

    /// Decides whether `psi` is in K* (limiting mean above 1) and, if so,
    /// locates the apex.
    pub fn classify(&self) -> Result<Classification> {
        let limit_mean = match self.kind {
            OffspringKind::PresetExp | OffspringKind::PresetGeometric => f64::INFINITY,
            OffspringKind::Polynomial => self.exact.len() as f64 - 1.0,
            OffspringKind::ExplicitCoeffs => self.probe_limit_mean()?,
        };
        if limit_mean > 1.0 {
            Ok(Classification::KStar {
                tau: self.solve_apex()?,
                limit_mean,
            })
        } else {
            Ok(Classification::KPlain { limit_mean })
        }
    }

    fn probe_limit_mean(&self) -> Result<f64> {
        let mut values = Vec::new();
        for t in self.probe_points() {
            let m = self.mean_unchecked(t);
            if !m.is_finite() {
                break;
            }
            values.push(m);
            if m > 1.0 {
                return Ok(m);
            }
        }
        match values.as_slice() {
            [] => Err(Error::LimitProbe("mean is not finite at any probe point".into())),
            [.., prev, last] if (last - prev).abs() > 1e-6 * last.abs().max(1e-300) => {
                Err(Error::LimitProbe(format!(
                    "mean still moving at the last probe ({prev} -> {last})"
                )))
            }
            [.., last] => Ok(*last),
        }
    }

    /// Solves `m(tau) = 1` to [`APEX_TOLERANCE`] by bracketing and
    /// safeguarded Newton steps.
    pub fn solve_apex(&self) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = None;
        let mut last = (0.0, 0.0);
        for t in self.probe_points() {
            let m = self.mean_unchecked(t);
            if !m.is_finite() {
                break;
            }
            last = (t, m);
            if m > 1.0 {
                hi = Some(t);
                break;
            }
            lo = t;
        }
        let mut hi = hi.ok_or(Error::NoApex {
            t: last.0,
            mean: last.1,
        })?;

        let mut t = 0.5 * (lo + hi);
        for _ in 0..500 {
            let m = self.mean_unchecked(t);
            let residual = m - 1.0;
            if residual.abs() <= APEX_TOLERANCE {
                // One more Newton step polishes the root to working precision.
                let slope = self.variance(t).unwrap_or(0.0) / t;
                let polished = t - residual / slope;
                if slope > 0.0
                    && (self.mean_unchecked(polished) - 1.0).abs() <= residual.abs()
                {
                    return Ok(polished);
                }
                return Ok(t);
            }
            if residual < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let slope = self.variance(t).unwrap_or(0.0) / t;
            let newton = t - residual / slope;
            t = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        let residual = (self.mean_unchecked(t) - 1.0).abs();
        if residual <= APEX_TOLERANCE {
            Ok(t)
        } else {
            Err(Error::ApexTolerance { t, residual })
        }
    }

    /// Serializes to the JSON schema `{kind, coeffs?, radius, name}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SpecRecord::from(self)).expect("spec record serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let record: SpecRecord =
            serde_json::from_value(value.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        record.try_into()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&value)
    }
}

impl fmt::Display for OffspringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (R = {})", self.name, self.radius)
    }
}

/// `ln k!`, exact summation for small `k`.
pub(crate) fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

fn format_coeff_list(coeffs: &[BigRational]) -> String {
    let items: Vec<String> = coeffs.iter().map(ToString::to_string).collect();
    format!("[{}]", items.join(","))
}

/// Parses `"3"`, `"1/6"`, `"0.25"` or `"2.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let err = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (text, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return Err(err());
    }
    let num: BigInt = digits.parse().map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusRepr {
    Finite(f64),
    Named(String),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffRepr {
    Number(serde_json::Number),
    Text(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRecord {
    kind: OffspringKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<CoeffRepr>>,
    radius: RadiusRepr,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice_period: Option<u64>,
}

impl From<&OffspringSpec> for SpecRecord {
    fn from(spec: &OffspringSpec) -> Self {
        let coeffs = match spec.kind {
            OffspringKind::PresetExp | OffspringKind::PresetGeometric => None,
            _ => Some(
                spec.exact
                    .iter()
                    .map(|c| CoeffRepr::Text(c.to_string()))
                    .collect(),
            ),
        };
        SpecRecord {
            kind: spec.kind,
            coeffs,
            radius: if spec.radius.is_finite() {
                RadiusRepr::Finite(spec.radius)
            } else {
                RadiusRepr::Named("inf".into())
            },
            name: spec.name.clone(),
            lattice_period: spec.lattice_override,
        }
    }
}

impl TryFrom<SpecRecord> for OffspringSpec {
    type Error = Error;

    fn try_from(record: SpecRecord) -> Result<Self> {
        let radius = match &record.radius {
            RadiusRepr::Finite(r) => *r,
            RadiusRepr::Named(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => f64::INFINITY,
                other => other
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad radius {other:?}")))?,
            },
        };
        let coeffs = record
            .coeffs
            .map(|list| {
                list.iter()
                    .map(|c| match c {
                        CoeffRepr::Number(n) => parse_rational(&n.to_string()),
                        CoeffRepr::Text(s) => parse_rational(s),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let spec = match record.kind {
            OffspringKind::PresetExp => OffspringSpec::exp(),
            OffspringKind::PresetGeometric => OffspringSpec::geometric(),
            OffspringKind::Polynomial => OffspringSpec::polynomial(
                coeffs.ok_or_else(|| Error::InvalidSpec("polynomial needs coeffs".into()))?,
            )?,
            OffspringKind::ExplicitCoeffs => OffspringSpec::explicit(
                coeffs.ok_or_else(|| Error::InvalidSpec("explicit-coeffs needs coeffs".into()))?,
                radius,
            )?,
        };
        let expected_radius = spec.radius;
        if matches!(record.kind, OffspringKind::PresetExp | OffspringKind::PresetGeometric | OffspringKind::Polynomial)
            && radius != expected_radius
        {
            return Err(Error::InvalidSpec(format!(
                "radius {radius} does not match the {:?} radius {expected_radius}",
                record.kind
            )));
        }
        let spec = spec.with_name(record.name);
        Ok(match record.lattice_period {
            Some(q) => spec.with_lattice_period(q),
            None => spec,
        })
    }
}
