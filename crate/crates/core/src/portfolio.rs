//! Path simulators for pooled Pareto losses: weighted sums, block
//! averages, catastrophe triggers, collective risk books and reinsurance
//! caps.
//!
//! Every simulator is a pure function of its [`RngStream`]. Path `i` always
//! reads the counters of path `i`, so results do not depend on the size of
//! the worker pool. Independent ingredients of a model read disjoint lanes.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, DiscreteCDF, Normal, Poisson};

use crate::distributions::{Distribution, ParetoDist};
use crate::error::{check_positive, Error, Result};
use crate::rng::{PathRng, RngStream};

/// Default ceiling on the claim count of a single path.
pub const DEFAULT_CLAIM_CAP: u64 = 1_000_000;

/// Non-negative exposure weights `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    theta: Vec<f64>,
}

impl WeightVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Empty("weight vector".into()));
        }
        if theta.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Invalid(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self { theta })
    }

    /// Weights on the simplex, `Σθ = 1` within 1e-12.
    pub fn simplex(theta: Vec<f64>) -> Result<Self> {
        let w = Self::new(theta)?;
        if !w.is_simplex() {
            return Err(Error::Invalid(format!(
                "weights sum to {}, not 1",
                w.total()
            )));
        }
        Ok(w)
    }

    /// `(1/n, ..., 1/n)`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.theta.iter().sum()
    }

    pub fn is_simplex(&self) -> bool {
        (self.total() - 1.0).abs() <= 1e-12
    }

    pub fn positive_count(&self) -> usize {
        self.theta.iter().filter(|t| **t > 0.0).count()
    }
}

#[inline]
fn pareto_from_uniform(alpha: f64, u: f64) -> f64 {
    (1.0 - u).powf(-1.0 / alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    check_positive("alpha", alpha)
}

fn par_paths<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

fn try_par_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Paths of `Σ wᵢ Yᵢ` with independent `Yᵢ ~ laws[i]`.
///
/// Coordinate `i` of path `k` is draw `i` of path `k` on the stream's lane.
pub fn simulate_linear_combination(
    laws: &[Distribution],
    weights: &[f64],
    rng: &RngStream,
    n_paths: usize,
) -> Result<Vec<f64>> {
    if laws.is_empty() || laws.len() != weights.len() {
        return Err(Error::Invalid(format!(
            "{} laws and {} weights",
            laws.len(),
            weights.len()
        )));
    }
    Ok(par_paths(n_paths, |path| {
        let mut r = rng.path(path);
        laws.iter()
            .zip(weights)
            .map(|(law, w)| w * law.quantile_unchecked(r.next_uniform()))
            .sum()
    }))
}

fn weighted_pareto_path(alpha: f64, theta: &[f64], r: &mut PathRng) -> f64 {
    theta
        .iter()
        .map(|w| w * pareto_from_uniform(alpha, r.next_uniform()))
        .sum()
}

/// Paths of `Σ θᵢ Xᵢ` with iid `Xᵢ ~ Pareto(alpha)` and `θ` on the simplex.
pub fn simulate_weighted_sum(
    alpha: f64,
    theta: &WeightVector,
    rng: &RngStream,
    n_paths: usize,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !theta.is_simplex() {
        return Err(Error::Invalid(format!(
            "weights sum to {}, not 1",
            theta.total()
        )));
    }
    let theta = theta.as_slice();
    Ok(par_paths(n_paths, |path| {
        weighted_pareto_path(alpha, theta, &mut rng.path(path))
    }))
}

/// Paths of the mean of `small` and the mean of `large` iid Pareto losses,
/// drawn from lanes 0 and 1 of `rng`.
pub fn simulate_mean_pair(
    alpha: f64,
    small: usize,
    large: usize,
    rng: &RngStream,
    n_paths: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_alpha(alpha)?;
    if small == 0 || large == 0 {
        return Err(Error::Invalid("block sizes must be at least 1".into()));
    }
    let mean = |lane: u16, size: usize| {
        let s = rng.lane(lane);
        let w = vec![1.0 / size as f64; size];
        par_paths(n_paths, move |path| {
            weighted_pareto_path(alpha, &w, &mut s.path(path))
        })
    };
    Ok((mean(0, small), mean(1, large)))
}

/// Paths of the mean of `m` and the mean of `m * n` iid Pareto losses.
pub fn simulate_block_average(
    alpha: f64,
    m: usize,
    n: usize,
    rng: &RngStream,
    n_paths: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "block averages are ordered only for alpha in (0, 1]",
        });
    }
    simulate_mean_pair(alpha, m, m.saturating_mul(n), rng, n_paths)
}

/// Joint law of the trigger events `A₁, ..., Aₙ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dependence {
    Independent,
    /// `Aᵢ = {U < P(Aᵢ)}` for one shared uniform `U`.
    Common,
    /// Common with probability `w`, independent otherwise.
    Mixture(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerModel {
    probs: Vec<f64>,
    dependence: Dependence,
}

impl TriggerModel {
    pub fn new(probs: Vec<f64>, dependence: Dependence) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Invalid("trigger probabilities must lie in [0, 1]".into()));
        }
        if let Dependence::Mixture(w) = dependence {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidParameter {
                    name: "mixture weight",
                    value: w,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        Ok(Self { probs, dependence })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dependence(&self) -> Dependence {
        self.dependence
    }

    fn draw(&self, r: &mut PathRng, out: &mut [bool]) {
        let switch = r.next_uniform();
        let common = match self.dependence {
            Dependence::Independent => false,
            Dependence::Common => true,
            Dependence::Mixture(w) => switch < w,
        };
        let shared = r.next_uniform();
        for (slot, &p) in out.iter_mut().zip(&self.probs) {
            // Each event owns a draw even under common dependence, keeping
            // the counter layout independent of the branch taken.
            let own = r.next_uniform();
            *slot = if common { shared < p } else { own < p };
        }
    }
}

/// Model-B paths and their single-loss benchmark.
#[derive(Debug, Clone)]
pub struct ModelBPaths {
    /// `Σ θᵢ Xᵢ 1_{Aᵢ}`
    pub portfolio: Vec<f64>,
    /// `λ X 1_A` with `P(A) = Σ θᵢ P(Aᵢ) / λ`
    pub benchmark: Vec<f64>,
    pub lambda: f64,
    pub benchmark_prob: f64,
}

/// Simulates triggered Pareto losses.
///
/// Lanes: 0 severities, 1 triggers, 2 benchmark severity and event.
/// `lambda` defaults to `Σθ`.
pub fn simulate_model_b(
    alpha: f64,
    theta: &WeightVector,
    triggers: &TriggerModel,
    lambda: Option<f64>,
    rng: &RngStream,
    n_paths: usize,
) -> Result<ModelBPaths> {
    check_alpha(alpha)?;
    if theta.len() != triggers.probs.len() {
        return Err(Error::Invalid(format!(
            "{} weights but {} trigger probabilities",
            theta.len(),
            triggers.probs.len()
        )));
    }
    let total = theta.total();
    let lambda = lambda.unwrap_or(total);
    if !(lambda.is_finite() && lambda >= total * (1.0 - 1e-12)) || lambda <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be positive and at least the total weight",
        });
    }
    let benchmark_prob = theta
        .as_slice()
        .iter()
        .zip(&triggers.probs)
        .map(|(t, p)| t * p)
        .sum::<f64>()
        / lambda;
    if benchmark_prob > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter {
            name: "P(A)",
            value: benchmark_prob,
            reason: "benchmark trigger probability exceeds 1",
        });
    }
    let benchmark_prob = benchmark_prob.min(1.0);
    let theta = theta.as_slice();
    let n = theta.len();
    let sev = rng.lane(0);
    let trig = rng.lane(1);
    let bench = rng.lane(2);

    let portfolio = par_paths(n_paths, |path| {
        let mut hits = vec![false; n];
        triggers.draw(&mut trig.path(path), &mut hits);
        let mut r = sev.path(path);
        theta
            .iter()
            .zip(&hits)
            .map(|(w, &hit)| {
                let x = pareto_from_uniform(alpha, r.next_uniform());
                if hit {
                    w * x
                } else {
                    0.0
                }
            })
            .sum()
    });
    let benchmark = par_paths(n_paths, |path| {
        let mut r = bench.path(path);
        let x = pareto_from_uniform(alpha, r.next_uniform());
        if r.next_uniform() < benchmark_prob {
            lambda * x
        } else {
            0.0
        }
    });
    Ok(ModelBPaths {
        portfolio,
        benchmark,
        lambda,
        benchmark_prob,
    })
}

/// The two sides of `X 1_A` versus `Σ cᵢ X 1_{Bᵢ}` for disjoint `Bᵢ` and
/// `P(A) = Σ cᵢ P(Bᵢ)`.
#[derive(Debug, Clone)]
pub struct TradeoffPair {
    alpha: f64,
    c: Vec<f64>,
    probs_b: Vec<f64>,
    prob_a: f64,
}

/// Closed-form survival functions for the scale/probability trade-off.
pub fn scale_probability_tradeoff(alpha: f64, c: &[f64], probs_b: &[f64]) -> Result<TradeoffPair> {
    check_alpha(alpha)?;
    if c.is_empty() || c.len() != probs_b.len() {
        return Err(Error::Invalid(format!(
            "{} scale factors and {} event probabilities",
            c.len(),
            probs_b.len()
        )));
    }
    if c.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Invalid("scale factors must lie in [0, 1]".into()));
    }
    if probs_b.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Invalid("event probabilities must lie in [0, 1]".into()));
    }
    let total_b: f64 = probs_b.iter().sum();
    if total_b > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter {
            name: "ΣP(B)",
            value: total_b,
            reason: "disjoint events cannot carry more than unit mass",
        });
    }
    let prob_a = c.iter().zip(probs_b).map(|(c, p)| c * p).sum();
    Ok(TradeoffPair {
        alpha,
        c: c.to_vec(),
        probs_b: probs_b.to_vec(),
        prob_a,
    })
}

impl TradeoffPair {
    pub fn prob_a(&self) -> f64 {
        self.prob_a
    }

    /// `P(X 1_A > t)`.
    pub fn lhs_survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            1.0
        } else {
            self.prob_a * t.powf(-self.alpha).min(1.0)
        }
    }

    /// `P(Σ cᵢ X 1_{Bᵢ} > t)`.
    pub fn rhs_survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        self.c
            .iter()
            .zip(&self.probs_b)
            .filter(|(c, _)| **c > 0.0)
            .map(|(c, p)| p * (c / t).powf(self.alpha).min(1.0))
            .sum()
    }

    /// `X 1_A` as a law.
    pub fn lhs_law(&self) -> Result<Distribution> {
        let x = Distribution::Pareto(ParetoDist::standard(self.alpha)?);
        Distribution::mixture(vec![
            (1.0 - self.prob_a, Distribution::point_mass(0.0)?),
            (self.prob_a, x),
        ])
    }

    /// `Σ cᵢ X 1_{Bᵢ}` as a law.
    pub fn rhs_law(&self) -> Result<Distribution> {
        let mut parts = Vec::with_capacity(self.c.len() + 1);
        let mut zero_mass = 1.0 - self.probs_b.iter().sum::<f64>();
        for (&c, &p) in self.c.iter().zip(&self.probs_b) {
            if c > 0.0 {
                let x = Distribution::Pareto(ParetoDist::new(self.alpha, c)?);
                parts.push((p, x));
            } else {
                zero_mass += p;
            }
        }
        parts.push((zero_mass.max(0.0), Distribution::point_mass(0.0)?));
        Distribution::mixture(parts)
    }

    /// Monte Carlo paths of both sides; lanes 0-1 for the right side,
    /// 2-3 for the left side.
    pub fn simulate(&self, rng: &RngStream, n_paths: usize) -> (Vec<f64>, Vec<f64>) {
        let alpha = self.alpha;
        let lhs = par_paths(n_paths, |path| {
            let x = pareto_from_uniform(alpha, rng.lane(2).uniform_at(path, 0));
            if rng.lane(3).uniform_at(path, 0) < self.prob_a {
                x
            } else {
                0.0
            }
        });
        let rhs = par_paths(n_paths, |path| {
            let x = pareto_from_uniform(alpha, rng.lane(0).uniform_at(path, 0));
            let u = rng.lane(1).uniform_at(path, 0);
            let mut acc = 0.0;
            for (c, p) in self.c.iter().zip(&self.probs_b) {
                acc += p;
                if u < acc {
                    return c * x;
                }
            }
            0.0
        });
        (lhs, rhs)
    }
}

/// Law of the claim count `N`.
#[derive(Debug, Clone, PartialEq)]
pub enum ClaimCount {
    Poisson(f64),
    Fixed(u64),
    /// Finite law on the given counts.
    Empirical { counts: Vec<u64>, probs: Vec<f64> },
}

impl ClaimCount {
    fn validate(&self) -> Result<()> {
        match self {
            ClaimCount::Poisson(l) => check_positive("poisson rate", *l),
            ClaimCount::Fixed(_) => Ok(()),
            ClaimCount::Empirical { counts, probs } => {
                if counts.is_empty() || counts.len() != probs.len() {
                    return Err(Error::Invalid("claim-count law needs matching counts and probabilities".into()));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::Invalid("claim-count probabilities must be non-negative".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!("claim-count probabilities sum to {total}")));
                }
                Ok(())
            }
        }
    }

    fn draw(&self, u: f64) -> u64 {
        match self {
            ClaimCount::Fixed(n) => *n,
            ClaimCount::Poisson(lambda) if *lambda <= 30.0 => {
                let mut k = 0u64;
                let mut pmf = (-lambda).exp();
                let mut cdf = pmf;
                while u > cdf && pmf > 0.0 {
                    k += 1;
                    pmf *= lambda / k as f64;
                    cdf += pmf;
                }
                k
            }
            ClaimCount::Poisson(lambda) => Poisson::new(*lambda)
                .map(|p| p.inverse_cdf(u))
                .unwrap_or(0),
            ClaimCount::Empirical { counts, probs } => {
                let mut acc = 0.0;
                for (c, p) in counts.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *c;
                    }
                }
                *counts.last().unwrap()
            }
        }
    }
}

/// Law of the positive claim weights `Wᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightLaw {
    PointMass(f64),
    /// `exp(mu + sigma Z)` with `Z` standard normal.
    LogNormal { mu: f64, sigma: f64 },
}

impl WeightLaw {
    fn validate(&self) -> Result<()> {
        match self {
            WeightLaw::PointMass(w) => check_positive("weight", *w),
            WeightLaw::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "mu",
                        value: *mu,
                        reason: "must be finite",
                    });
                }
                check_positive("sigma", *sigma)
            }
        }
    }
}

/// `Σᵢ^N Wᵢ Xᵢ` with independent `N`, `Wᵢ` and `Xᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveModel {
    pub claim_count: ClaimCount,
    pub weights: WeightLaw,
    pub severity: ParetoDist,
    pub claim_cap: u64,
}

impl CollectiveModel {
    pub fn new(claim_count: ClaimCount, weights: WeightLaw, severity: ParetoDist) -> Result<Self> {
        claim_count.validate()?;
        weights.validate()?;
        Ok(Self {
            claim_count,
            weights,
            severity,
            claim_cap: DEFAULT_CLAIM_CAP,
        })
    }

    pub fn with_claim_cap(mut self, cap: u64) -> Self {
        self.claim_cap = cap;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CollectivePaths {
    pub counts: Vec<u64>,
    /// `Σ Wᵢ Xᵢ`
    pub totals: Vec<f64>,
    /// `Σ Wᵢ Xᵢ / Σ Wᵢ`, zero when `N = 0`
    pub averages: Vec<f64>,
    /// `X 1_{N ≥ 1}` with a fresh `X`
    pub benchmark: Vec<f64>,
}

/// Simulates a collective risk book.
///
/// Lanes: 0 claim count, 1 weights, 2 severities, 3 benchmark severity.
pub fn simulate_collective(
    model: &CollectiveModel,
    rng: &RngStream,
    n_paths: usize,
) -> Result<CollectivePaths> {
    model.claim_count.validate()?;
    model.weights.validate()?;
    let alpha = model.severity.alpha();
    let scale = model.severity.scale();
    let normal = Normal::standard();
    let rows = try_par_paths(n_paths, |path| {
        let n = model.claim_count.draw(rng.lane(0).uniform_at(path, 0));
        if n > model.claim_cap {
            return Err(Error::ClaimCountCap {
                path,
                count: n,
                cap: model.claim_cap,
            });
        }
        let mut wr = rng.lane(1).path(path);
        let mut xr = rng.lane(2).path(path);
        let mut total = 0.0;
        let mut weight = 0.0;
        for _ in 0..n {
            let w = match model.weights {
                WeightLaw::PointMass(w) => w,
                WeightLaw::LogNormal { mu, sigma } => {
                    (mu + sigma * normal.inverse_cdf(wr.next_uniform())).exp()
                }
            };
            let x = scale * pareto_from_uniform(alpha, xr.next_uniform());
            total += w * x;
            weight += w;
        }
        let average = if n == 0 { 0.0 } else { total / weight };
        let bench = if n == 0 {
            0.0
        } else {
            scale * pareto_from_uniform(alpha, rng.lane(3).uniform_at(path, 0))
        };
        Ok((n, total, average, bench))
    })?;
    let mut out = CollectivePaths {
        counts: Vec::with_capacity(n_paths),
        totals: Vec::with_capacity(n_paths),
        averages: Vec::with_capacity(n_paths),
        benchmark: Vec::with_capacity(n_paths),
    };
    for (n, t, a, b) in rows {
        out.counts.push(n);
        out.totals.push(t);
        out.averages.push(a);
        out.benchmark.push(b);
    }
    Ok(out)
}

/// Excess-of-loss limits.
#[derive(Debug, Clone, PartialEq)]
pub enum Caps {
    /// `Σ θᵢ (Xᵢ ∧ cᵢ)`
    PerLoss(Vec<f64>),
    /// `(Σ θᵢ Xᵢ) ∧ c`; an infinite `c` is allowed.
    Aggregate(f64),
}

#[derive(Debug, Clone)]
pub struct ReinsurancePaths {
    /// The capped portfolio.
    pub capped: Vec<f64>,
    /// Per-loss: the uncapped portfolio on the same draws.
    /// Aggregate: a standalone `X ∧ c` from an independent lane.
    pub reference: Vec<f64>,
}

/// Simulates capped portfolios. Lane 0 drives the portfolio, lane 1 the
/// standalone reference.
pub fn reinsurance_variants(
    alpha: f64,
    theta: &WeightVector,
    caps: &Caps,
    rng: &RngStream,
    n_paths: usize,
) -> Result<ReinsurancePaths> {
    check_alpha(alpha)?;
    let check_cap = |c: f64| {
        if c.is_nan() || c <= 1.0 {
            Err(Error::InvalidParameter {
                name: "cap",
                value: c,
                reason: "caps must exceed 1",
            })
        } else {
            Ok(())
        }
    };
    let theta_s = theta.as_slice();
    let sev = rng.lane(0);
    match caps {
        Caps::PerLoss(c) => {
            if c.len() != theta.len() {
                return Err(Error::Invalid(format!(
                    "{} caps for {} weights",
                    c.len(),
                    theta.len()
                )));
            }
            c.iter().copied().try_for_each(check_cap)?;
            let pairs = par_paths(n_paths, |path| {
                let mut r = sev.path(path);
                let mut capped = 0.0;
                let mut free = 0.0;
                for (w, cap) in theta_s.iter().zip(c) {
                    let x = pareto_from_uniform(alpha, r.next_uniform());
                    capped += w * x.min(*cap);
                    free += w * x;
                }
                (capped, free)
            });
            let (capped, reference) = pairs.into_iter().unzip();
            Ok(ReinsurancePaths { capped, reference })
        }
        Caps::Aggregate(c) => {
            check_cap(*c)?;
            let c = *c;
            let capped = par_paths(n_paths, |path| {
                weighted_pareto_path(alpha, theta_s, &mut sev.path(path)).min(c)
            });
            let reference = par_paths(n_paths, |path| {
                pareto_from_uniform(alpha, rng.lane(1).uniform_at(path, 0)).min(c)
            });
            Ok(ReinsurancePaths { capped, reference })
        }
    }
}

/// Fraction of `samples` strictly above `t`.
pub fn survival_fraction(samples: &[f64], t: f64) -> f64 {
    samples.iter().filter(|&&x| x > t).count() as f64 / samples.len() as f64
}
