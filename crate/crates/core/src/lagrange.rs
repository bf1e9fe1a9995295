//! Solution of Lagrange's equation `g(z) = z psi(g(z))`.
//!
//! Coefficients come from the inversion formula
//! `A_n = coeff_{n-1}[psi(z)^n] / n`, with the powers of `psi` built
//! incrementally. A Newton iteration on the functional equation is kept as
//! an independent cross-check.
//!
//! In floating point the `A_n` grow like `rho^{-n}`, so the solver works with
//! the rescaled data `psi_s(z) = psi(s z) / psi(s)`, a probability generating
//! function. Its Lagrange solution has coefficients
//! `A_n (s/psi(s))^n / s`, all in `[0, 1]`, and `ln A_n` is recovered from
//! them. For `psi` in K* the scale is the apex, which makes the stored
//! coefficients equal to `A_n rho^n / tau`.

use std::io::Write;

use num_rational::BigRational;

use crate::asym;
use crate::error::{Error, Result};
use crate::family::{Classification, OffspringSpec};
use crate::series::{Coeff, PowerSeries};

/// Relative tolerance of the float self-check on `g - z psi(g)`.
const SELF_CHECK_TOLERANCE: f64 = 1e-9;

/// Largest scale used for series outside K*.
const MAX_PLAIN_SCALE: f64 = 1e8;

/// `A_1, ..., A_{n_max}` (with `A_0 = 0`) from the inversion formula.
pub fn lagrange_coefficients<C: Coeff>(psi: &PowerSeries<C>, n_max: usize) -> Vec<C> {
    let mut a = vec![C::zero(); n_max + 1];
    if n_max == 0 {
        return a;
    }
    let psi = psi.truncate(n_max - 1);
    let mut power = psi.clone();
    for (n, slot) in a.iter_mut().enumerate().skip(1) {
        if n > 1 {
            power = power.mul(&psi);
        }
        *slot = power.coeff(n - 1) / C::from_u64(n as u64);
    }
    a
}

fn convolve<C: Coeff>(a: &[C], b: &[C], len: usize) -> Vec<C> {
    let mut out = vec![C::zero(); len];
    for (i, x) in a.iter().take(len).enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().take(len - i).enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

/// `f(g(z))` mod `z^len` for `g(0) = 0`.
fn compose_raw<C: Coeff>(f: &[C], g: &[C], len: usize) -> Vec<C> {
    let top = f.len().min(len);
    let mut acc = vec![C::zero(); len];
    for k in (0..top).rev() {
        acc = convolve(&acc, g, len);
        acc[0] = acc[0].clone() + f[k].clone();
    }
    acc
}

/// `1/d` mod `z^len` for `d(0) != 0`.
fn inverse_raw<C: Coeff>(d: &[C], len: usize) -> Vec<C> {
    let mut inv = vec![C::zero(); len];
    inv[0] = C::one() / d[0].clone();
    for k in 1..len {
        let mut s = C::zero();
        for j in 1..=k.min(d.len() - 1) {
            s = s + d[j].clone() * inv[k - j].clone();
        }
        inv[k] = C::zero() - s / d[0].clone();
    }
    inv
}

/// Cross-check path: Newton iteration `g <- g - (g - z psi(g)) / (1 - z psi'(g))`,
/// doubling the number of correct coefficients per step.
pub fn newton_coefficients<C: Coeff>(psi: &PowerSeries<C>, n_max: usize) -> Vec<C> {
    let len = n_max + 1;
    let psi_c = psi.truncate(n_max).into_coeffs();
    let dpsi: Vec<C> = psi_c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| C::from_u64(k as u64) * c.clone())
        .collect();
    let mut g = vec![C::zero()];
    let mut prec = 1;
    while prec < len {
        prec = (2 * prec).min(len);
        g.resize(prec, C::zero());
        let psi_g = compose_raw(&psi_c, &g, prec);
        let dpsi_g = compose_raw(&dpsi, &g, prec);
        let mut residual = g.clone();
        let mut denom = vec![C::zero(); prec];
        denom[0] = C::one();
        for k in 1..prec {
            residual[k] = residual[k].clone() - psi_g[k - 1].clone();
            denom[k] = C::zero() - dpsi_g[k - 1].clone();
        }
        let step = convolve(&residual, &inverse_raw(&denom, prec), prec);
        for (gk, sk) in g.iter_mut().zip(step) {
            *gk = gk.clone() - sk;
        }
    }
    g
}

/// Coefficients of `z psi(g(z))` mod `z^{len(g)}`.
pub fn recompose<C: Coeff>(psi: &PowerSeries<C>, g: &[C]) -> Vec<C> {
    let len = g.len();
    let inner = compose_raw(psi.coeffs(), g, len);
    let mut out = vec![C::zero(); len];
    out[1..].clone_from_slice(&inner[..len - 1]);
    out
}

/// `coeff_n[H(g(z))] = coeff_{n-1}[H'(z) psi(z)^n] / n`.
pub fn h_form_coeff<C: Coeff>(psi: &PowerSeries<C>, h: &PowerSeries<C>, n: usize) -> Result<C> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let dh = h.derivative().truncate(n - 1);
    let power = psi.truncate(n - 1).pow(n as u64);
    Ok(dh.mul(&power).coeff(n - 1) / C::from_u64(n as u64))
}

/// Exact inversion-formula coefficients with the defining equation verified.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub a: Vec<BigRational>,
    pub lattice: u64,
}

pub fn solve_exact(spec: &OffspringSpec, n_max: usize) -> Result<ExactSolution> {
    if n_max == 0 {
        return Err(Error::domain("N", 0.0, "N >= 1"));
    }
    let psi = spec.exact_series(n_max);
    let a = lagrange_coefficients(&psi, n_max);
    let back = recompose(&psi, &a);
    if let Some(n) = (0..=n_max).find(|&n| back[n] != a[n]) {
        return Err(Error::SelfCheck {
            n,
            residual: (back[n].clone() - a[n].clone()).to_f64(),
        });
    }
    Ok(ExactSolution {
        a,
        lattice: spec.lattice_period(),
    })
}

/// Floating-point solution of Lagrange's equation for a spec.
#[derive(Clone, Debug)]
pub struct LagrangeSolution {
    spec: OffspringSpec,
    scale: f64,
    scaled: Vec<f64>,
    log_a: Vec<f64>,
    rho: f64,
    tau: Option<f64>,
    lattice: u64,
}

/// `g(x)` with the tail majorant of the truncated sum, when one is available.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValue {
    pub value: f64,
    pub tail_bound: Option<f64>,
}

/// Radius of convergence of `g`: `tau/psi(tau)` in K*, otherwise the
/// supremum of `t/psi(t)` approached along `t -> R`.
pub fn radius(spec: &OffspringSpec) -> Result<f64> {
    match spec.classify()? {
        Classification::KStar { tau, .. } => spec.t_over_psi(tau),
        Classification::KPlain { .. } => Ok(plain_sup(spec)?.1),
    }
}

/// `(argmax probe, sup)` of `t/psi(t)` on the probe grid.
fn plain_sup(spec: &OffspringSpec) -> Result<(f64, f64)> {
    let mut values: Vec<(f64, f64)> = Vec::new();
    for t in spec.probe_points() {
        let v = t / spec.psi(t)?;
        if !v.is_finite() {
            break;
        }
        values.push((t, v));
    }
    match values.as_slice() {
        [] => Err(Error::RadiusProbe { last: f64::NAN }),
        [.., (_, prev), (t, last)] => {
            if (last - prev).abs() <= 1e-9 * last {
                Ok((*t, *last))
            } else {
                Err(Error::RadiusProbe { last: *last })
            }
        }
        [(t, v)] => Ok((*t, *v)),
    }
}

impl LagrangeSolution {
    /// Solves for `A_1, ..., A_N` and the radius `rho`.
    pub fn solve(spec: &OffspringSpec, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::domain("N", 0.0, "N >= 1"));
        }
        let class = spec.classify()?;
        let (scale, rho, tau) = match class {
            Classification::KStar { tau, .. } => (tau, spec.t_over_psi(tau)?, Some(tau)),
            Classification::KPlain { .. } => {
                let (t, sup) = plain_sup(spec)?;
                (t.min(MAX_PLAIN_SCALE), sup, None)
            }
        };

        let masses = spec.masses(scale, n_max)?;
        let psi_s = PowerSeries::new(masses)?;
        let scaled = lagrange_coefficients(&psi_s, n_max);

        let back = recompose(&psi_s, &scaled);
        for n in 1..=n_max {
            let (x, y) = (scaled[n], back[n]);
            if (x - y).abs() > SELF_CHECK_TOLERANCE * x.abs().max(y.abs()) {
                return Err(Error::SelfCheck {
                    n,
                    residual: x - y,
                });
            }
        }

        let ln_s = scale.ln();
        let ln_x = ln_s - spec.ln_psi(scale)?;
        let log_a = scaled
            .iter()
            .enumerate()
            .map(|(n, g)| {
                if n == 0 || *g == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    g.ln() + ln_s - n as f64 * ln_x
                }
            })
            .collect();

        Ok(LagrangeSolution {
            spec: spec.clone(),
            scale,
            scaled,
            log_a,
            rho,
            tau,
            lattice: spec.lattice_period(),
        })
    }

    pub fn spec(&self) -> &OffspringSpec {
        &self.spec
    }

    /// Highest coefficient index available.
    pub fn order(&self) -> usize {
        self.log_a.len() - 1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn lattice_period(&self) -> u64 {
        self.lattice
    }

    /// Parameter `s` of the rescaled data used internally.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Coefficients of `g(s z / psi(s)) / s`.
    pub fn scaled_coeffs(&self) -> &[f64] {
        &self.scaled
    }

    /// `A_n`; may overflow to `+inf` for large `n`.
    pub fn a(&self, n: usize) -> f64 {
        self.log_a(n).exp()
    }

    /// `ln A_n`, `-inf` when `A_n = 0`.
    pub fn log_a(&self, n: usize) -> f64 {
        self.log_a.get(n).copied().unwrap_or(f64::NAN)
    }

    /// `A_n rho^n`.
    pub fn a_rho_n(&self, n: usize) -> f64 {
        match self.tau {
            Some(tau) => tau * self.scaled.get(n).copied().unwrap_or(f64::NAN),
            None => (self.log_a(n) + n as f64 * self.rho.ln()).exp(),
        }
    }

    /// `sum_{n <= N} A_n x^n` for `0 <= x <= rho`, with the tail majorant
    /// when `psi` is in K*.
    pub fn g_eval(&self, x: f64) -> Result<GValue> {
        if x.is_nan() || x < 0.0 || x > self.rho * (1.0 + 1e-12) {
            return Err(Error::domain("x", x, format!("[0, {}]", self.rho)));
        }
        if x == 0.0 {
            return Ok(GValue {
                value: 0.0,
                tail_bound: Some(0.0),
            });
        }
        let ln_x = x.ln();
        let value = self
            .log_a
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, la)| (la + n as f64 * ln_x).exp())
            .sum();
        let tail_bound = match self.tau {
            Some(_) => Some(asym::tail_bound(&asym::profile(self)?, x, self.order())),
            None => None,
        };
        Ok(GValue { value, tail_bound })
    }

    /// CSV export: `n, a_n, log_a_n, a_n_rho_n` for `1 <= n <= N`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["n", "a_n", "log_a_n", "a_n_rho_n"]).map_err(io)?;
        for n in 1..=self.order() {
            w.write_record([
                n.to_string(),
                self.a(n).to_string(),
                self.log_a(n).to_string(),
                self.a_rho_n(n).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}
