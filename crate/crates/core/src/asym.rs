//! Coefficient asymptotics `A_n rho^n ~ C n^{-3/2}` on the lattice
//! `n = 1 mod Q`, and the tail majorant used when truncating `g`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrange::LagrangeSolution;

/// Safety factor applied to the asymptotic constant in [`tail_bound`].
/// Validated against exact partial sums, not proven; the bound is an
/// empirical majorant.
pub const TAIL_CALIBRATION: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticProfile {
    /// `Q tau / (sqrt(2 pi) sigma(tau))`.
    pub c: f64,
    pub tau: f64,
    pub rho: f64,
    pub sigma_tau: f64,
    pub lattice: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub n: usize,
    /// `A_n rho^n n^{3/2}`
    pub scaled: f64,
    /// `scaled / C`, tends to 1.
    pub ratio: f64,
}

pub fn profile(sol: &LagrangeSolution) -> Result<AsymptoticProfile> {
    let tau = sol.tau().ok_or(Error::NotKStar)?;
    let sigma_tau = sol.spec().variance(tau)?.sqrt();
    let lattice = sol.lattice_period();
    let c = lattice as f64 * tau / ((2.0 * std::f64::consts::PI).sqrt() * sigma_tau);
    Ok(AsymptoticProfile {
        c,
        tau,
        rho: sol.rho(),
        sigma_tau,
        lattice,
    })
}

/// Ratios `A_n rho^n n^{3/2} / C` for lattice indices `n <= n_max`.
pub fn an_ratio_check(
    sol: &LagrangeSolution,
    prof: &AsymptoticProfile,
    n_max: usize,
) -> Result<Vec<RatioRow>> {
    if n_max > sol.order() {
        return Err(Error::InsufficientOrder {
            requested: n_max,
            available: sol.order(),
        });
    }
    let q = prof.lattice as usize;
    Ok((1..=n_max)
        .filter(|n| (n - 1) % q == 0)
        .map(|n| {
            let scaled = sol.a_rho_n(n) * (n as f64).powf(1.5);
            RatioRow {
                n,
                scaled,
                ratio: scaled / prof.c,
            }
        })
        .collect())
}

/// Majorant of `sum_{n > N} A_n x^n` for `0 <= x <= rho`, assuming
/// `A_n rho^n <= K n^{-3/2}` with `K = TAIL_CALIBRATION * C`.
pub fn tail_bound(prof: &AsymptoticProfile, x: f64, n: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = TAIL_CALIBRATION * prof.c;
    let nf = (n.max(1)) as f64;
    // sum_{n > N} n^{-3/2} <= 2 N^{-1/2}
    let at_radius = 2.0 * k / nf.sqrt();
    let r = (x / prof.rho).min(1.0);
    if r >= 1.0 {
        return at_radius;
    }
    let geometric = k * r.powf(nf + 1.0) / (1.0 - r) * nf.powf(-1.5);
    geometric.min(at_radius)
}

/// CSV export of the ratio table: `n, a_n_rho_n_n32, ratio`.
pub fn write_ratio_csv<W: Write>(rows: &[RatioRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["n", "a_n_rho_n_n32", "ratio"]).map_err(err)?;
    for row in rows {
        w.write_record([row.n.to_string(), row.scaled.to_string(), row.ratio.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::OffspringSpec;
    use num_rational::BigRational;

    fn ints(c: &[i64]) -> Vec<BigRational> {
        c.iter().map(|&x| BigRational::from_integer(x.into())).collect()
    }

    /// `A_n rho^n` for `e^z` straight from `n^{n-1}/n! e^{-n}`.
    fn cayley_scaled(n: usize) -> f64 {
        let n_f = n as f64;
        ((n_f - 1.0) * n_f.ln() - crate::family::ln_factorial(n) - n_f).exp()
    }

    #[test]
    fn profile_examples() {
        let sol = LagrangeSolution::solve(&OffspringSpec::exp(), 8).unwrap();
        let p = profile(&sol).unwrap();
        assert!((p.c - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((p.c - 0.39894).abs() < 1e-5);

        let sol = LagrangeSolution::solve(&OffspringSpec::geometric(), 8).unwrap();
        let p = profile(&sol).unwrap();
        assert!((p.sigma_tau - 2f64.sqrt()).abs() < 1e-12);
        assert!((p.c - 1.0 / (4.0 * std::f64::consts::PI.sqrt())).abs() < 1e-12);

        let spec = OffspringSpec::polynomial(ints(&[1, 0, 1])).unwrap();
        let sol = LagrangeSolution::solve(&spec, 9).unwrap();
        assert_eq!(profile(&sol).unwrap().lattice, 2);
    }

    #[test]
    fn not_k_star() {
        let lin = OffspringSpec::polynomial(ints(&[1, 1])).unwrap();
        let sol = LagrangeSolution::solve(&lin, 8).unwrap();
        assert_eq!(profile(&sol), Err(Error::NotKStar));
    }

    #[test]
    fn cayley_ratio_converges() {
        let sol = LagrangeSolution::solve(&OffspringSpec::exp(), 400).unwrap();
        let p = profile(&sol).unwrap();
        let rows = an_ratio_check(&sol, &p, 400).unwrap();
        assert!((rows[0].ratio - 1.0).abs() > 0.05);
        for row in rows.iter().filter(|r| r.n >= 200) {
            assert!((row.ratio - 1.0).abs() <= 0.01);
            // Stirling oracle.
            let stirling = cayley_scaled(row.n) * (row.n as f64).powf(1.5) / p.c;
            assert!((row.ratio - stirling).abs() <= 1e-9);
        }
        let errs: Vec<f64> = rows.iter().skip(10).map(|r| (r.ratio - 1.0).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lattice_ratio_skips_off_lattice() {
        // 1 + z^2: Q = 2, A_n nonzero only for odd n.
        let spec = OffspringSpec::polynomial(ints(&[1, 0, 1])).unwrap();
        let sol = LagrangeSolution::solve(&spec, 301).unwrap();
        let p = profile(&sol).unwrap();
        let rows = an_ratio_check(&sol, &p, 301).unwrap();
        assert!(rows.iter().all(|r| r.n % 2 == 1));
        let last = rows.last().unwrap();
        assert!((last.ratio - 1.0).abs() < 0.01, "{last:?}");
    }

    #[test]
    fn tail_bound_examples() {
        let sol = LagrangeSolution::solve(&OffspringSpec::exp(), 64).unwrap();
        let p = profile(&sol).unwrap();
        assert_eq!(tail_bound(&p, 0.0, 64), 0.0);
        assert!(tail_bound(&p, p.rho / 2.0, 64) < 1e-12);

        // At the radius: g(rho) = tau = 1, so the remainder is 1 - partial sum.
        let n = 10_000;
        let partial: f64 = (1..=n).map(cayley_scaled).sum();
        assert!(1.0 - partial <= tail_bound(&p, p.rho, n));
        assert!(1.0 - partial > 0.0);
    }

    #[test]
    fn tail_bound_sound_at_desk_scale() {
        let specs = [
            OffspringSpec::exp(),
            OffspringSpec::geometric(),
            OffspringSpec::polynomial(ints(&[1, 2, 1])).unwrap(),
            OffspringSpec::polynomial(ints(&[1, 1, 0, 1])).unwrap(),
            OffspringSpec::polynomial(ints(&[1, 0, 1])).unwrap(),
        ];
        for spec in specs {
            let sol = LagrangeSolution::solve(&spec, 512).unwrap();
            let p = profile(&sol).unwrap();
            for n in [16usize, 32, 64, 128] {
                for frac in [0.5, 0.9, 0.99, 1.0] {
                    let x = frac * p.rho;
                    let r = x / p.rho;
                    let remainder: f64 = (n + 1..=4 * n)
                        .map(|k| sol.a_rho_n(k) * r.powi(k as i32))
                        .sum();
                    let bound = tail_bound(&p, x, n);
                    assert!(
                        remainder <= bound,
                        "{} N={n} x/rho={frac}: {remainder} > {bound}",
                        spec.name()
                    );
                }
            }
        }
    }

    #[test]
    fn ratio_csv() {
        let rows = vec![RatioRow { n: 1, scaled: 0.5, ratio: 2.0 }];
        let mut buf = Vec::new();
        write_ratio_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,a_n_rho_n_n32,ratio\n1,0.5,2\n");
    }
}
