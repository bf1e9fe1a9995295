//! The parametric Galton-Watson tree `T_t` with offspring law `Y_t`.
//!
//! Extinction probabilities are available three ways:
//!
//! * [`extinction_series`]: `q(t) = g(t/psi(t)) / t` from the Lagrange
//!   coefficients, with a tail majorant;
//! * [`extinction_fixed_point`]: iteration of `q <- psi(t q)/psi(t)` from 0;
//! * [`extinction_smallest_root`]: bisection for the smallest root of the
//!   convex map `psi(t q)/psi(t) - q` on `[0, 1]`.
//!
//! [`extinction`] picks a method per `t`: the series where its tail bound is
//! below [`SERIES_TOLERANCE`] and `t` is not within 5% of the apex, the
//! bracketed root otherwise. At `t = tau` the value is 1 by continuity.

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use crate::asym;
use crate::error::{Error, Result};
use crate::family::OffspringSpec;
use crate::lagrange::LagrangeSolution;
use crate::series::{Coeff, PowerSeries};
use crate::trees::{self, SubclassPredicate};

/// Largest accepted tail bound for a series-based extinction value.
pub const SERIES_TOLERANCE: f64 = 1e-10;

/// Relative distance to the apex inside which the series is not used.
pub const NEAR_CRITICAL_FRACTION: f64 = 0.05;

/// Relative distance to the apex treated as `t = tau`.
pub const APEX_SNAP: f64 = 1e-12;

pub const FIXED_POINT_STEP: f64 = 1e-14;
pub const FIXED_POINT_BUDGET: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtinctionMethod {
    /// `t = 0`: the single-node tree.
    Degenerate,
    /// `t = tau`: `q = 1` by continuity.
    ApexConvention,
    Series,
    SmallestRoot,
}

impl ExtinctionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExtinctionMethod::Degenerate => "degenerate",
            ExtinctionMethod::ApexConvention => "apex-convention",
            ExtinctionMethod::Series => "series",
            ExtinctionMethod::SmallestRoot => "smallest-root",
        }
    }
}

/// `g(t/psi(t))/t` with its truncation tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesEstimate {
    pub value: f64,
    pub tail_bound: Option<f64>,
    /// `|t - tau| < 0.05 tau`: the tail decays only like `N^{-1/2}` near the apex.
    pub slow_convergence: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extinction {
    pub t: f64,
    pub q: f64,
    pub method: ExtinctionMethod,
    pub tail_bound: Option<f64>,
}

fn is_apex(tau: Option<f64>, t: f64) -> bool {
    tau.is_some_and(|tau| (t - tau).abs() <= APEX_SNAP * tau)
}

fn require_positive(spec: &OffspringSpec, t: f64) -> Result<()> {
    spec.check_domain(t)?;
    if t == 0.0 {
        return Err(Error::domain("t", t, format!("(0, {})", spec.radius())));
    }
    Ok(())
}

/// `q(t) = sum_n A_n t^{n-1} / psi(t)^n`, truncated at the solution's order.
pub fn extinction_series(sol: &LagrangeSolution, t: f64) -> Result<SeriesEstimate> {
    let spec = sol.spec();
    require_positive(spec, t)?;
    let ln_x = t.ln() - spec.ln_psi(t)?;
    let x = ln_x.exp();
    let ln_t = t.ln();
    let value = (1..=sol.order())
        .map(|n| (sol.log_a(n) + n as f64 * ln_x - ln_t).exp())
        .sum();
    let tail_bound = match sol.tau() {
        Some(_) => Some(asym::tail_bound(&asym::profile(sol)?, x, sol.order()) / t),
        None => None,
    };
    Ok(SeriesEstimate {
        value,
        tail_bound,
        slow_convergence: sol
            .tau()
            .is_some_and(|tau| (t - tau).abs() < NEAR_CRITICAL_FRACTION * tau),
    })
}

fn psi_ratio(spec: &OffspringSpec, t: f64, ln_psi_t: f64, q: f64) -> Result<f64> {
    Ok((spec.ln_psi(t * q)? - ln_psi_t).exp())
}

/// Smallest fixed point of `psi_t(z) = psi(t z)/psi(t)` by iteration from 0.
pub fn extinction_fixed_point(spec: &OffspringSpec, t: f64) -> Result<f64> {
    require_positive(spec, t)?;
    let ln_psi_t = spec.ln_psi(t)?;
    let mut q = 0.0;
    let mut step = f64::INFINITY;
    for _ in 0..FIXED_POINT_BUDGET {
        let next = psi_ratio(spec, t, ln_psi_t, q)?.min(1.0);
        step = (next - q).abs();
        q = next;
        if step <= FIXED_POINT_STEP {
            return Ok(q);
        }
    }
    Err(Error::IterationBudget {
        iterations: FIXED_POINT_BUDGET,
        last_step: step,
    })
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    // f(lo) > 0 >= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest root of `F(q) = psi(t q)/psi(t) - q` on `[0, 1]`.
///
/// `F` is convex with `F(0) > 0` and `F(1) = 0`, so the smallest root is 1
/// exactly when `F'(1) = m(t) - 1 <= 0`. Otherwise it lies below the
/// minimiser of `F`, which is bracketed first.
pub fn extinction_smallest_root(spec: &OffspringSpec, t: f64) -> Result<f64> {
    require_positive(spec, t)?;
    if spec.mean(t)? <= 1.0 {
        return Ok(1.0);
    }
    let ln_psi_t = spec.ln_psi(t)?;
    let psi_t = spec.psi(t)?;
    let slope_minus_one = |q: f64| -> Result<f64> { Ok(1.0 - t * spec.psi_prime(t * q)? / psi_t) };
    let q_min = bisect(slope_minus_one, 0.0, 1.0)?;
    let f = |q: f64| -> Result<f64> { Ok(psi_ratio(spec, t, ln_psi_t, q)? - q) };
    if f(q_min)? >= 0.0 {
        return Ok(q_min);
    }
    bisect(f, 0.0, q_min)
}

/// Extinction probability with automatic method selection.
pub fn extinction(sol: &LagrangeSolution, t: f64) -> Result<Extinction> {
    let spec = sol.spec();
    spec.check_domain(t)?;
    let report = |q, method, tail_bound| Extinction {
        t,
        q,
        method,
        tail_bound,
    };
    if t == 0.0 {
        return Ok(report(1.0, ExtinctionMethod::Degenerate, Some(0.0)));
    }
    if is_apex(sol.tau(), t) {
        return Ok(report(1.0, ExtinctionMethod::ApexConvention, None));
    }
    let near_apex = sol
        .tau()
        .is_some_and(|tau| (t - tau).abs() < NEAR_CRITICAL_FRACTION * tau);
    if !near_apex {
        let s = extinction_series(sol, t)?;
        if let Some(bound) = s.tail_bound.filter(|b| *b <= SERIES_TOLERANCE) {
            return Ok(report(s.value.min(1.0), ExtinctionMethod::Series, Some(bound)));
        }
    }
    let q = extinction_smallest_root(spec, t)?;
    Ok(report(q, ExtinctionMethod::SmallestRoot, None))
}

/// `q'(t) = (q/t) [(1 - m(t)) / (1 - m(t q)) - 1]` for `t != tau`.
pub fn q_derivative(sol: &LagrangeSolution, t: f64) -> Result<f64> {
    let spec = sol.spec();
    require_positive(spec, t)?;
    let Some(tau) = sol.tau() else {
        return Ok(0.0);
    };
    if is_apex(Some(tau), t) {
        return Err(Error::ApexPoint { tau });
    }
    if t < tau {
        return Ok(0.0);
    }
    let q = extinction(sol, t)?.q;
    let ratio = (1.0 - spec.mean(t)?) / (1.0 - spec.mean(t * q)?);
    Ok(q / t * (ratio - 1.0))
}

/// `lim_{t -> tau+} (q(t) - 1)/(t - tau) = -2/tau`.
pub fn right_slope_at_apex(sol: &LagrangeSolution) -> Result<f64> {
    let tau = sol.tau().ok_or(Error::NotKStar)?;
    Ok(-2.0 / tau)
}

/// One-sided difference quotients `(q(tau + h) - 1)/h`.
pub fn apex_difference_quotients(sol: &LagrangeSolution, steps: &[f64]) -> Result<Vec<f64>> {
    let tau = sol.tau().ok_or(Error::NotKStar)?;
    steps
        .iter()
        .map(|&h| Ok((extinction(sol, tau + h)?.q - 1.0) / h))
        .collect()
}

/// Richardson extrapolation to `h -> 0` of difference quotients taken at
/// geometrically decreasing steps `h_0 > h_1 > ...` with a common ratio.
pub fn richardson(steps: &[f64], values: &[f64]) -> f64 {
    assert!(steps.len() == values.len() && !steps.is_empty());
    if steps.len() == 1 {
        return values[0];
    }
    let ratio = steps[0] / steps[1];
    let mut table = values.to_vec();
    for level in 1..table.len() {
        let factor = ratio.powi(level as i32);
        for i in 0..table.len() - level {
            table[i] = (factor * table[i + 1] - table[i]) / (factor - 1.0);
        }
    }
    table[0]
}

/// Ratio `q(t) psi(t) / psi(0)`, which tends to 1 as `t -> R`.
pub fn far_field_ratio(spec: &OffspringSpec, q: f64, t: f64) -> Result<f64> {
    Ok(q * (spec.ln_psi(t)? - spec.ln_psi(0.0)?).exp())
}

/// Law of the total progeny `|T_t|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProgenyLaw {
    pub t: f64,
    /// `probs[n] = P(|T_t| = n)`; `probs[0] = 0`.
    pub probs: Vec<f64>,
    pub survival_mass: f64,
    pub q: f64,
    /// Finite-size mass beyond the last index.
    pub tail_finite: f64,
}

/// Either a finite total progeny or survival.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progeny {
    Finite(usize),
    Infinite,
}

/// Inverse-CDF sampler over a [`ProgenyLaw`].
#[derive(Clone, Debug)]
pub struct ProgenySampler {
    cdf: Vec<f64>,
    q: f64,
}

/// Largest finite tail accepted by the progeny sampler.
pub const PROGENY_TAIL_LIMIT: f64 = 1e-9;

impl ProgenyLaw {
    /// Sampler drawing `n` with probability `probs[n]` and survival with
    /// probability `1 - q`. The finite tail is folded into the last index.
    pub fn sampler(&self) -> Result<ProgenySampler> {
        if self.tail_finite >= PROGENY_TAIL_LIMIT {
            return Err(Error::TailTooLarge {
                tail: self.tail_finite,
                limit: PROGENY_TAIL_LIMIT,
            });
        }
        let mut acc = 0.0;
        let cdf = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(ProgenySampler { cdf, q: self.q })
    }
}

impl ProgenySampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Progeny {
        let u: f64 = rng.random();
        if u >= self.q {
            return Progeny::Infinite;
        }
        let i = self.cdf.partition_point(|&c| c <= u);
        Progeny::Finite(i.min(self.cdf.len() - 1).max(1))
    }
}

/// One draw of `|T_t|`; builds the sampler on every call.
pub fn sample_progeny_exact<R: Rng + ?Sized>(law: &ProgenyLaw, rng: &mut R) -> Result<Progeny> {
    Ok(law.sampler()?.sample(rng))
}

/// `P(|T_t| = n) = A_n t^{n-1}/psi(t)^n` for `n <= n_max`. `q(t)` is 1 when
/// `m(t) <= 1` and otherwise comes from the fixed-point iteration (the
/// bracketed root when iteration stalls near the apex).
pub fn progeny_law(sol: &LagrangeSolution, t: f64, n_max: usize) -> Result<ProgenyLaw> {
    let spec = sol.spec();
    spec.check_domain(t)?;
    if n_max > sol.order() {
        return Err(Error::InsufficientOrder {
            requested: n_max,
            available: sol.order(),
        });
    }
    let mut probs = vec![0.0; n_max + 1];
    if t == 0.0 {
        if n_max >= 1 {
            probs[1] = 1.0;
        }
        return Ok(ProgenyLaw {
            t,
            probs,
            survival_mass: 0.0,
            q: 1.0,
            tail_finite: 0.0,
        });
    }
    let (ln_t, ln_psi) = (t.ln(), spec.ln_psi(t)?);
    for (n, p) in probs.iter_mut().enumerate().skip(1) {
        *p = (sol.log_a(n) + (n as f64 - 1.0) * ln_t - n as f64 * ln_psi).exp();
    }
    let q = if is_apex(sol.tau(), t) || spec.mean(t)? <= 1.0 {
        1.0
    } else {
        match extinction_fixed_point(spec, t) {
            Ok(q) => q,
            Err(Error::IterationBudget { .. }) => extinction_smallest_root(spec, t)?,
            Err(e) => return Err(e),
        }
    };
    let total: f64 = probs.iter().sum();
    Ok(ProgenyLaw {
        t,
        probs,
        survival_mass: (1.0 - q).max(0.0),
        q,
        tail_finite: (q - total).max(0.0),
    })
}

/// Analytic bound on `P(extinct, |T_t| > budget)`.
pub fn censoring_bound(sol: &LagrangeSolution, t: f64, budget: usize) -> Result<f64> {
    let law = progeny_law(sol, t, budget.min(sol.order()))?;
    Ok(law.tail_finite)
}

/// Radius of `g_t(z) = g(t z/psi(t))/t`: `rho / (t/psi(t)) >= 1`.
pub fn gt_radius(sol: &LagrangeSolution, t: f64) -> Result<f64> {
    let spec = sol.spec();
    require_positive(spec, t)?;
    Ok(sol.rho() / spec.t_over_psi(t)?)
}

/// Coefficients of `g_t`, the generating function of `P(|T_t| = n)`.
pub fn gt_coeffs(sol: &LagrangeSolution, t: f64, n_max: usize) -> Result<PowerSeries<f64>> {
    if t == 0.0 {
        sol.spec().check_domain(t)?;
        return Ok(PowerSeries::identity(n_max.max(1)));
    }
    let law = progeny_law(sol, t, n_max)?;
    Ok(PowerSeries::new(law.probs)?.with_radius(gt_radius(sol, t)?))
}

/// `P(T_t in R | |T_t| = n) = R_n / A_n`, independent of `t`.
pub fn conditional_size_prob(
    pred: &SubclassPredicate,
    spec: &OffspringSpec,
    n: usize,
) -> Result<BigRational> {
    let total = trees::sum_weights(n, spec, &SubclassPredicate::all())?;
    if total.is_zero() {
        return Err(Error::ZeroDenominator { n });
    }
    Ok(trees::sum_weights(n, spec, pred)? / total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalExtinction {
    pub value: f64,
    pub tail_bound: f64,
    /// The tail bound exceeds the requested precision.
    pub tail_dominates: bool,
    pub q: f64,
}

/// `P(T_t in R | extinction) = (1/q(t)) sum_n R_n t^{n-1}/psi(t)^n`, summed
/// for `n <= min(n_max, 12)`.
pub fn conditional_extinction_prob(
    pred: &SubclassPredicate,
    sol: &LagrangeSolution,
    t: f64,
    n_max: usize,
    precision: f64,
) -> Result<ConditionalExtinction> {
    let spec = sol.spec();
    let top = n_max.min(trees::MAX_ENUMERATION_SIZE).min(sol.order());
    let law = progeny_law(sol, t, top)?;
    let mut partial = 0.0;
    for n in 1..=top {
        if law.probs[n] == 0.0 {
            continue;
        }
        let total = trees::sum_weights(n, spec, &SubclassPredicate::all())?;
        let r = trees::sum_weights(n, spec, pred)?;
        partial += law.probs[n] * (r / total).to_f64();
    }
    let tail_bound = law.tail_finite / law.q;
    Ok(ConditionalExtinction {
        value: partial / law.q,
        tail_bound,
        tail_dominates: tail_bound > precision,
        q: law.q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrange::recompose;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn ints(c: &[i64]) -> Vec<BigRational> {
        c.iter().map(|&x| BigRational::from_integer(x.into())).collect()
    }

    fn exp_sol() -> &'static LagrangeSolution {
        static SOL: OnceLock<LagrangeSolution> = OnceLock::new();
        SOL.get_or_init(|| LagrangeSolution::solve(&OffspringSpec::exp(), 256).unwrap())
    }

    fn geo_sol() -> &'static LagrangeSolution {
        static SOL: OnceLock<LagrangeSolution> = OnceLock::new();
        SOL.get_or_init(|| LagrangeSolution::solve(&OffspringSpec::geometric(), 256).unwrap())
    }

    /// Root of `q = e^{t(q-1)}` by plain iteration, independent of the library.
    fn poisson_oracle(t: f64) -> f64 {
        let mut q = 0.0f64;
        for _ in 0..100_000 {
            q = (t * (q - 1.0)).exp();
        }
        q
    }

    #[test]
    fn series_examples() {
        let s = extinction_series(exp_sol(), 0.5).unwrap();
        assert!((s.value - 1.0).abs() <= s.tail_bound.unwrap() + 1e-14);
        let s = extinction_series(exp_sol(), 2.0).unwrap();
        assert!((s.value - poisson_oracle(2.0)).abs() < 1e-12);
        assert!((s.value - 0.203188).abs() < 1e-6);
        assert!(!s.slow_convergence);
        let s = extinction_series(geo_sol(), 0.75).unwrap();
        assert!((s.value - 1.0 / 3.0).abs() < 1e-12);
        assert!(extinction_series(exp_sol(), 1.01).unwrap().slow_convergence);
        assert!(extinction_series(exp_sol(), 0.0).is_err());
        assert!(extinction_series(geo_sol(), 1.0).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let exp = OffspringSpec::exp();
        assert!((extinction_fixed_point(&exp, 2.0).unwrap() - poisson_oracle(2.0)).abs() < 1e-12);
        for t in [0.1, 0.5, 0.8] {
            assert!((extinction_fixed_point(&exp, t).unwrap() - 1.0).abs() < 1e-10);
        }
        // p0 + p2 z^2 with p2 > p0: q = p0/p2. psi = 1 + 3z^2 at t = 1 gives 1/4 + 3/4 z^2.
        let bin = OffspringSpec::polynomial(ints(&[1, 0, 3])).unwrap();
        assert!((extinction_fixed_point(&bin, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            extinction_fixed_point(&exp, 1.0),
            Err(Error::IterationBudget { .. })
        ));
    }

    #[test]
    fn smallest_root_examples() {
        let exp = OffspringSpec::exp();
        assert_eq!(extinction_smallest_root(&exp, 0.9).unwrap(), 1.0);
        assert_eq!(extinction_smallest_root(&exp, 1.0).unwrap(), 1.0);
        for t in [1.2, 2.0, 5.0] {
            assert!((extinction_smallest_root(&exp, t).unwrap() - poisson_oracle(t)).abs() < 1e-12);
        }
        let geo = OffspringSpec::geometric();
        assert!((extinction_smallest_root(&geo, 0.75).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn router_methods() {
        let sol = exp_sol();
        assert_eq!(extinction(sol, 0.0).unwrap().method, ExtinctionMethod::Degenerate);
        assert_eq!(extinction(sol, 1.0).unwrap().method, ExtinctionMethod::ApexConvention);
        assert_eq!(extinction(sol, 1.02).unwrap().method, ExtinctionMethod::SmallestRoot);
        let far = extinction(sol, 3.0).unwrap();
        assert_eq!(far.method, ExtinctionMethod::Series);
        assert!(far.tail_bound.unwrap() <= SERIES_TOLERANCE);
        assert!(extinction(sol, -1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let sol = exp_sol();
        assert_eq!(q_derivative(sol, 0.5).unwrap(), 0.0);
        assert!(matches!(q_derivative(sol, 1.0), Err(Error::ApexPoint { .. })));
        assert_eq!(right_slope_at_apex(sol).unwrap(), -2.0);
        let h = 1e-5;
        let fd = (extinction_fixed_point(sol.spec(), 2.0 + h).unwrap()
            - extinction_fixed_point(sol.spec(), 2.0 - h).unwrap())
            / (2.0 * h);
        let d = q_derivative(sol, 2.0).unwrap();
        assert!(d < 0.0);
        assert!((d - fd).abs() < 1e-6, "{d} vs {fd}");
    }

    #[test]
    fn richardson_on_polynomial() {
        // D(h) = -2 + 3h - h^2 is reproduced exactly from three steps.
        let steps = [1e-1, 1e-2, 1e-3];
        let values: Vec<f64> = steps.iter().map(|h| -2.0 + 3.0 * h - h * h).collect();
        assert!((richardson(&steps, &values) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn apex_jump() {
        for sol in [exp_sol(), geo_sol()] {
            let tau = sol.tau().unwrap();
            let steps: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|h| h * tau).collect();
            let d = apex_difference_quotients(sol, &steps).unwrap();
            let slope = richardson(&steps, &d);
            let target = right_slope_at_apex(sol).unwrap();
            assert!((slope - target).abs() <= 0.05 * target.abs(), "{slope} vs {target}");
            for h in &steps {
                let left = (extinction(sol, tau - h).unwrap().q - 1.0) / (-h);
                assert!(left.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn progeny_examples() {
        let e = std::f64::consts::E;
        let law = progeny_law(exp_sol(), 1.0, 10).unwrap();
        assert!((law.probs[1] - 1.0 / e).abs() < 1e-15);
        assert!((law.probs[2] - e.powi(-2)).abs() < 1e-15);
        assert_eq!(law.q, 1.0);

        let law = progeny_law(geo_sol(), 0.5, 256).unwrap();
        for n in 1..=12usize {
            let c = trees::catalan(n - 1);
            let expected = num_traits::ToPrimitive::to_f64(&c).unwrap()
                * 0.5f64.powi(n as i32 - 1)
                / 2f64.powi(n as i32);
            assert!((law.probs[n] - expected).abs() < 1e-14);
        }
        // Critical geometric law: sum converges like N^{-1/2}.
        assert!(law.probs.iter().sum::<f64>() < 1.0);
        assert!(law.tail_finite > 0.0);

        let law = progeny_law(exp_sol(), 0.0, 5).unwrap();
        assert_eq!(law.probs[1], 1.0);
        assert!(progeny_law(exp_sol(), 2.0, 1000).is_err());
    }

    #[test]
    fn progeny_sampling() {
        let law = progeny_law(exp_sol(), 2.0, 200).unwrap();
        let sampler = law.sampler().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let (mut infinite, mut ones) = (0usize, 0usize);
        for _ in 0..n {
            match sampler.sample(&mut rng) {
                Progeny::Infinite => infinite += 1,
                Progeny::Finite(1) => ones += 1,
                Progeny::Finite(_) => {}
            }
        }
        let check = |count: usize, p: f64| {
            let est = count as f64 / n as f64;
            (est - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
        };
        assert!(check(infinite, law.survival_mass));
        assert!(check(ones, law.probs[1]));

        let sub = progeny_law(exp_sol(), 0.5, 256).unwrap();
        assert!(sub.survival_mass < 1e-12);
        let s = sub.sampler().unwrap();
        assert!((0..10_000).all(|_| s.sample(&mut rng) != Progeny::Infinite));

        let crit = progeny_law(exp_sol(), 1.0, 256).unwrap();
        assert!(matches!(sample_progeny_exact(&crit, &mut rng), Err(Error::TailTooLarge { .. })));
    }

    #[test]
    fn gt_examples() {
        let sol = exp_sol();
        let g0 = gt_coeffs(sol, 0.0, 5).unwrap();
        assert_eq!(g0.coeffs(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

        let g = gt_coeffs(sol, 2.0, 256).unwrap();
        let q = extinction_fixed_point(sol.spec(), 2.0).unwrap();
        assert!((g.coeffs().iter().sum::<f64>() - q).abs() < 1e-12);
        assert!((g.coeff(1) - sol.spec().masses(2.0, 0).unwrap()[0]).abs() < 1e-15);
        assert!(g.radius() >= 1.0);

        // g_t = z psi_t(g_t).
        let psi_t = PowerSeries::new(sol.spec().masses(2.0, 256).unwrap()).unwrap();
        let back = recompose(&psi_t, g.coeffs());
        for (a, b) in g.coeffs().iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn conditional_examples() {
        let geo = OffspringSpec::geometric();
        let all = SubclassPredicate::all();
        let root1 = SubclassPredicate::root_outdegree(1);
        assert_eq!(conditional_size_prob(&all, &geo, 5).unwrap(), BigRational::from_integer(1.into()));
        assert_eq!(
            conditional_size_prob(&root1, &geo, 3).unwrap(),
            BigRational::new(1.into(), 2.into())
        );
        let sq = OffspringSpec::polynomial(ints(&[1, 0, 1])).unwrap();
        assert!(matches!(
            conditional_size_prob(&all, &sq, 4),
            Err(Error::ZeroDenominator { n: 4 })
        ));

        let c = conditional_extinction_prob(&all, exp_sol(), 3.0, 12, 1e-3).unwrap();
        assert!((c.value - 1.0).abs() <= c.tail_bound + 1e-12);
        let c = conditional_extinction_prob(&root1, geo_sol(), 0.2, 12, 1e-3).unwrap();
        assert_eq!(c.q, 1.0);
        assert!(!c.tail_dominates);
    }

    fn k_star_specs() -> Vec<&'static LagrangeSolution> {
        vec![exp_sol(), geo_sol()]
    }

    #[test]
    fn far_field_ratio_tends_to_one() {
        let sol = exp_sol();
        let mut prev = f64::INFINITY;
        for t in [4.0, 8.0, 12.0, 16.0] {
            let q = extinction(sol, t).unwrap().q;
            let r = far_field_ratio(sol.spec(), q, t).unwrap();
            assert!((r - 1.0).abs() <= prev);
            prev = (r - 1.0).abs();
        }
        assert!(prev < 1e-4);
    }

    proptest! {
        #[test]
        fn three_way_agreement(idx in 0usize..2, u in 0.02f64..0.98) {
            let sol = k_star_specs()[idx];
            let tau = sol.tau().unwrap();
            let t = u * sol.spec().radius().min(6.0 * tau);
            prop_assume!((t - tau).abs() >= 0.05);
            let series = extinction_series(sol, t).unwrap();
            let fixed = extinction_fixed_point(sol.spec(), t).unwrap();
            let root = extinction_smallest_root(sol.spec(), t).unwrap();
            prop_assert!((series.value - fixed).abs() <= series.tail_bound.unwrap() + 1e-9,
                "t={} series={} fixed={} bound={:?}", t, series.value, fixed, series.tail_bound);
            prop_assert!((root - fixed).abs() <= 1e-9);
        }

        #[test]
        fn threshold_law_and_bounds(idx in 0usize..2, u in 0.001f64..0.999) {
            let sol = k_star_specs()[idx];
            let spec = sol.spec();
            let tau = sol.tau().unwrap();
            let t = u * spec.radius().min(8.0 * tau);
            let q = extinction(sol, t).unwrap().q;
            if spec.mean(t).unwrap() <= 1.0 {
                prop_assert!((q - 1.0).abs() <= 1e-8);
            } else {
                prop_assert!(q < 1.0);
            }
            prop_assert!(q <= tau / t + 1e-12);
        }

        #[test]
        fn q_decreasing_above_apex(idx in 0usize..2, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let sol = k_star_specs()[idx];
            let tau = sol.tau().unwrap();
            let top = sol.spec().radius().min(8.0 * tau);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-3);
            let t1 = tau + lo * (top - tau) * 0.99 + 1e-3;
            let t2 = tau + hi * (top - tau) * 0.99 + 1e-3;
            prop_assert!(extinction(sol, t2).unwrap().q < extinction(sol, t1).unwrap().q);
        }

        #[test]
        fn fixed_point_is_minimal(u in 0.05f64..0.95) {
            // Every root of psi_t(q) = q on [0,1] found on a fine grid is >= the iterate.
            let spec = OffspringSpec::polynomial(ints(&[1, 1, 0, 1])).unwrap();
            let t = 4.0 * u;
            let q = extinction_fixed_point(&spec, t).unwrap();
            let psi_t = spec.psi(t).unwrap();
            let f = |x: f64| spec.psi(t * x).unwrap() / psi_t - x;
            let grid: Vec<f64> = (0..=2000).map(|k| k as f64 / 2000.0).collect();
            for w in grid.windows(2) {
                if f(w[0]) * f(w[1]) < 0.0 {
                    prop_assert!(w[1] >= q - 1e-9);
                }
            }
            prop_assert!(f(q).abs() < 1e-9);
        }
    }
}
