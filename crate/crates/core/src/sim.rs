//! Seeded simulation of `T_t`.
//!
//! Run `i` of a Monte Carlo batch with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`. Streams are
//! independent and depend only on `(s, i)`, so batch results do not depend on
//! how runs are split across worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::OffspringSpec;
use crate::trees::{PlaneTree, SubclassPredicate};

/// Offspring mass left out of the sampling table.
pub const TABLE_TAIL: f64 = 1e-12;
const MAX_TABLE: usize = 1 << 20;

pub const DEFAULT_RUNS: u64 = 100_000;
pub const DEFAULT_BUDGET: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Inverse-CDF sampler for `Y_t`.
#[derive(Clone, Debug)]
pub struct OffspringSampler {
    cdf: Vec<f64>,
}

impl OffspringSampler {
    /// Table of `P(Y_t <= k)`, cut where the remaining mass drops below
    /// [`TABLE_TAIL`]; that remainder goes to the last bucket.
    pub fn new(spec: &OffspringSpec, t: f64) -> Result<Self> {
        spec.check_domain(t)?;
        if t == 0.0 {
            return Ok(OffspringSampler { cdf: vec![1.0] });
        }
        let finite = spec.degree();
        let mut len = finite.map_or(64, |d| d + 1);
        let masses = loop {
            let m = spec.masses(t, len - 1)?;
            let total: f64 = m.iter().sum();
            if finite.is_some() || 1.0 - total < TABLE_TAIL || len >= MAX_TABLE {
                break m;
            }
            len *= 2;
        };
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(masses.len());
        for p in masses {
            acc += p;
            cdf.push(acc);
            if acc >= 1.0 - TABLE_TAIL {
                break;
            }
        }
        *cdf.last_mut().expect("non-empty table") = 1.0;
        Ok(OffspringSampler { cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u)
    }

    pub fn table_len(&self) -> usize {
        self.cdf.len()
    }
}

/// One offspring draw; builds the table on every call.
pub fn sample_offspring<R: Rng + ?Sized>(spec: &OffspringSpec, t: f64, rng: &mut R) -> Result<usize> {
    Ok(OffspringSampler::new(spec, t)?.sample(rng))
}

/// Generator for run `stream` of a batch seeded with `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimStatus {
    Extinct,
    /// The node budget was exceeded.
    Censored,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimOutcome {
    pub status: SimStatus,
    /// Exact size when extinct; nodes generated so far when censored.
    pub size: u64,
    pub generations: u64,
    pub seed: u64,
    pub stream: u64,
}

/// Generation-by-generation expansion, one draw per node in breadth-first
/// order. Censored as soon as more than `budget` nodes exist.
pub fn simulate_tree<R: Rng + ?Sized>(
    sampler: &OffspringSampler,
    budget: u64,
    rng: &mut R,
) -> (SimStatus, u64, u64) {
    let (mut total, mut frontier, mut generations) = (1u64, 1u64, 1u64);
    loop {
        let mut next = 0u64;
        for _ in 0..frontier {
            let k = sampler.sample(rng) as u64;
            next += k;
            total += k;
            if total > budget {
                return (SimStatus::Censored, total, generations);
            }
        }
        if next == 0 {
            return (SimStatus::Extinct, total, generations);
        }
        frontier = next;
        generations += 1;
    }
}

/// [`simulate_tree`] on the generator of run `stream`.
pub fn simulate_run(sampler: &OffspringSampler, budget: u64, seed: u64, stream: u64) -> SimOutcome {
    let (status, size, generations) = simulate_tree(sampler, budget, &mut run_rng(seed, stream));
    SimOutcome {
        status,
        size,
        generations,
        seed,
        stream,
    }
}

/// The realised plane tree, or `None` when censored. Consumes the generator
/// exactly like [`simulate_tree`], so both see the same realisation.
pub fn simulate_plane_tree<R: Rng + ?Sized>(
    sampler: &OffspringSampler,
    budget: u64,
    rng: &mut R,
) -> Option<PlaneTree> {
    let mut degrees = Vec::new();
    let mut total = 1u64;
    while (degrees.len() as u64) < total {
        let k = sampler.sample(rng);
        degrees.push(k);
        total += k as u64;
        if total > budget {
            return None;
        }
    }
    PlaneTree::from_bfs_outdegrees(&degrees).ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub runs: u64,
    pub budget: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            runs: DEFAULT_RUNS,
            budget: DEFAULT_BUDGET,
            seed: DEFAULT_SEED,
            workers: 1,
        }
    }
}

/// Binomial proportion with its 3-sigma interval clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(hits: u64, trials: u64) -> Self {
        let (estimate, std_error) = if trials == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = hits as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        };
        Proportion {
            hits,
            trials,
            estimate,
            std_error,
            ci_low: (estimate - 3.0 * std_error).max(0.0),
            ci_high: (estimate + 3.0 * std_error).min(1.0),
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McExtinction {
    pub t: f64,
    pub extinct: Proportion,
    pub censored: u64,
    pub mean_extinct_size: f64,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))
}

/// Fraction of `runs` simulated trees that die out within the budget.
pub fn mc_extinction(spec: &OffspringSpec, t: f64, cfg: &McConfig) -> Result<McExtinction> {
    if cfg.budget == 0 {
        return Err(Error::domain("budget", 0.0, "[1, inf)"));
    }
    let sampler = OffspringSampler::new(spec, t)?;
    let (extinct, size_sum) = pool(cfg.workers)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| {
                let (status, size, _) = simulate_tree(&sampler, cfg.budget, &mut run_rng(cfg.seed, i));
                match status {
                    SimStatus::Extinct => (1u64, size),
                    SimStatus::Censored => (0, 0),
                }
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    });
    Ok(McExtinction {
        t,
        extinct: Proportion::new(extinct, cfg.runs),
        censored: cfg.runs - extinct,
        mean_extinct_size: if extinct == 0 {
            f64::NAN
        } else {
            size_sum as f64 / extinct as f64
        },
    })
}

/// Frequency of `pred` among simulated trees selected by a size filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McConditional {
    pub t: f64,
    pub runs: u64,
    /// Among the selected trees, the fraction satisfying the predicate.
    pub frequency: Proportion,
}

fn mc_conditional_with<F>(
    spec: &OffspringSpec,
    t: f64,
    pred: &SubclassPredicate,
    budget: u64,
    cfg: &McConfig,
    select: F,
) -> Result<McConditional>
where
    F: Fn(&PlaneTree) -> bool + Sync,
{
    let sampler = OffspringSampler::new(spec, t)?;
    let (selected, accepted) = pool(cfg.workers)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| match simulate_plane_tree(&sampler, budget, &mut run_rng(cfg.seed, i)) {
                Some(tree) if select(&tree) => (1u64, pred.accepts(&tree) as u64),
                _ => (0, 0),
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    });
    Ok(McConditional {
        t,
        runs: cfg.runs,
        frequency: Proportion::new(accepted, selected),
    })
}

/// Frequency of `pred` among simulated trees of exactly `n` nodes.
pub fn mc_conditional_size(
    spec: &OffspringSpec,
    t: f64,
    pred: &SubclassPredicate,
    n: usize,
    cfg: &McConfig,
) -> Result<McConditional> {
    mc_conditional_with(spec, t, pred, n as u64, cfg, |tree| tree.size() == n)
}

/// Frequency of `pred` among simulated trees that die out within the budget.
pub fn mc_conditional_extinction(
    spec: &OffspringSpec,
    t: f64,
    pred: &SubclassPredicate,
    cfg: &McConfig,
) -> Result<McConditional> {
    mc_conditional_with(spec, t, pred, cfg.budget, cfg, |_| true)
}
