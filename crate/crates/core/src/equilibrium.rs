//! Risk-exchange equilibria between agents holding iid Pareto-type losses.
//!
//! Agents are summarised by the scalar `ρᵢ(X)` of one unit of the generic
//! loss, a convex cost of deviating from their initial exposure, and that
//! exposure. For positively homogeneous, translation-invariant risk
//! measures this scalar is all the market sees.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{check_positive, check_probability, Error, Result};
use crate::risk_measures::var_of_sorted;
use crate::rng::RngStream;

/// Convex cost `c(x)` of moving exposure by `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFn {
    Zero,
    /// `λ|x|`
    Linear(f64),
    /// `λx²`
    Quadratic(f64),
    /// `λx₊`
    Excess(f64),
    /// `κ|x| + λx²`, strictly convex with a kink at zero.
    LinearQuadratic { kappa: f64, lambda: f64 },
}

impl CostFn {
    pub fn validate(&self) -> Result<()> {
        let ok = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "cost coefficients must be finite and non-negative",
                })
            }
        };
        match *self {
            CostFn::Zero => Ok(()),
            CostFn::Linear(l) | CostFn::Quadratic(l) | CostFn::Excess(l) => ok("lambda", l),
            CostFn::LinearQuadratic { kappa, lambda } => {
                ok("kappa", kappa)?;
                ok("lambda", lambda)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            CostFn::Zero => 0.0,
            CostFn::Linear(l) => l * x.abs(),
            CostFn::Quadratic(l) => l * x * x,
            CostFn::Excess(l) => l * x.max(0.0),
            CostFn::LinearQuadratic { kappa, lambda } => kappa * x.abs() + lambda * x * x,
        }
    }

    /// Left derivative `c'₋(x)`.
    pub fn derivative_left(&self, x: f64) -> f64 {
        match *self {
            CostFn::Zero => 0.0,
            CostFn::Linear(l) => {
                if x > 0.0 {
                    l
                } else {
                    -l
                }
            }
            CostFn::Quadratic(l) => 2.0 * l * x,
            CostFn::Excess(l) => {
                if x > 0.0 {
                    l
                } else {
                    0.0
                }
            }
            CostFn::LinearQuadratic { kappa, lambda } => {
                2.0 * lambda * x + if x > 0.0 { kappa } else { -kappa }
            }
        }
    }

    /// Right derivative `c'₊(x)`.
    pub fn derivative_right(&self, x: f64) -> f64 {
        match *self {
            CostFn::Zero => 0.0,
            CostFn::Linear(l) => {
                if x >= 0.0 {
                    l
                } else {
                    -l
                }
            }
            CostFn::Quadratic(l) => 2.0 * l * x,
            CostFn::Excess(l) => {
                if x >= 0.0 {
                    l
                } else {
                    0.0
                }
            }
            CostFn::LinearQuadratic { kappa, lambda } => {
                2.0 * lambda * x + if x >= 0.0 { kappa } else { -kappa }
            }
        }
    }

    pub fn is_strictly_convex(&self) -> bool {
        match *self {
            CostFn::Quadratic(l) => l > 0.0,
            CostFn::LinearQuadratic { lambda, .. } => lambda > 0.0,
            _ => false,
        }
    }
}

impl fmt::Display for CostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFn::Zero => write!(f, "zero"),
            CostFn::Linear(l) => write!(f, "linear:{l}"),
            CostFn::Quadratic(l) => write!(f, "quadratic:{l}"),
            CostFn::Excess(l) => write!(f, "excess:{l}"),
            CostFn::LinearQuadratic { kappa, lambda } => write!(f, "linquad:{kappa},{lambda}"),
        }
    }
}

/// Parses `zero`, `linear:λ`, `quadratic:λ`, `excess:λ` or `linquad:κ,λ`.
impl FromStr for CostFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("bad cost coefficient `{a}` in `{s}`")))
                })
                .collect::<Result<_>>()?
        };
        let cost = match (kind.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("zero", []) => CostFn::Zero,
            ("linear", [l]) => CostFn::Linear(*l),
            ("quadratic", [l]) => CostFn::Quadratic(*l),
            ("excess", [l]) => CostFn::Excess(*l),
            ("linquad", [k, l]) => CostFn::LinearQuadratic {
                kappa: *k,
                lambda: *l,
            },
            _ => return Err(Error::Invalid(format!("unknown cost function `{s}`"))),
        };
        cost.validate()?;
        Ok(cost)
    }
}

/// One agent: risk of a unit loss, cost of trading, initial exposure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSpec {
    pub rho: f64,
    pub cost: CostFn,
    pub exposure: f64,
}

impl AgentSpec {
    pub fn new(rho: f64, cost: CostFn, exposure: f64) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho,
                reason: "risk value must be finite",
            });
        }
        cost.validate()?;
        if !(exposure.is_finite() && exposure >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "exposure",
                value: exposure,
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self {
            rho,
            cost,
            exposure,
        })
    }

    /// `b ↦ c'(b) + ρ(X)` from the left.
    pub fn marginal_left(&self, b: f64) -> f64 {
        self.cost.derivative_left(b) + self.rho
    }

    /// `b ↦ c'(b) + ρ(X)` from the right.
    pub fn marginal_right(&self, b: f64) -> f64 {
        self.cost.derivative_right(b) + self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    NoEquilibrium,
    /// Agents only swap whole exposures among themselves.
    ExchangeOnly,
    ExternalTransfer,
    NoParticipation,
}

impl EquilibriumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquilibriumKind::NoEquilibrium => "no_equilibrium",
            EquilibriumKind::ExchangeOnly => "exchange_only",
            EquilibriumKind::ExternalTransfer => "external_transfer",
            EquilibriumKind::NoParticipation => "no_participation",
        }
    }
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    /// Common per-unit price of every loss; `NaN` when none exists.
    pub price: f64,
    /// Set when every price in an interval supports the allocation.
    pub price_interval: Option<(f64, f64)>,
    /// Exposure vectors of the internal agents.
    pub internal_allocations: Vec<Vec<f64>>,
    /// Exposure vectors of the external agents.
    pub external_allocations: Vec<Vec<f64>>,
    /// External exposure per agent, `u*`.
    pub external_exposure: f64,
    /// Internal exposure per agent after trading, `w`.
    pub internal_exposure: f64,
    /// Whether the allocation is unique up to relabelling (`u* < a/(2k)`).
    pub unique_allocation: bool,
}

impl EquilibriumResult {
    /// Largest componentwise deviation from `Σ post-trade = Σ initial`.
    pub fn clearance_error(&self, initial: &[Vec<f64>]) -> f64 {
        let n = initial.first().map_or(0, Vec::len);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let before: f64 = initial.iter().map(|v| v[i]).sum();
            let after: f64 = self
                .internal_allocations
                .iter()
                .chain(&self.external_allocations)
                .map(|v| v[i])
                .sum();
            worst = worst.max((after - before).abs());
        }
        worst
    }
}

fn unit_vector(n: usize, i: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = scale;
    v
}

/// Per-agent price interval `[ρᵢ + c'ᵢ₋(0), ρᵢ + c'ᵢ₊(0)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceCertificate {
    pub low: f64,
    pub high: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalCheck {
    pub is_equilibrium_price: bool,
    pub certificates: Vec<PriceCertificate>,
}

fn price_tolerance(p: f64) -> f64 {
    1e-12 * p.abs().max(1.0)
}

fn check_agents(agents: &[AgentSpec]) -> Result<()> {
    if agents.len() < 2 {
        return Err(Error::Invalid(format!(
            "an internal market needs at least 2 agents, got {}",
            agents.len()
        )));
    }
    for a in agents {
        AgentSpec::new(a.rho, a.cost, a.exposure)?;
    }
    Ok(())
}

/// Sufficient condition: `c'ᵢ₊(0) ≥ p - ρᵢ ≥ c'ᵢ₋(0)` for every agent.
pub fn internal_equilibrium_check(agents: &[AgentSpec], p: f64) -> Result<InternalCheck> {
    check_agents(agents)?;
    let tol = price_tolerance(p);
    let certificates: Vec<PriceCertificate> = agents
        .iter()
        .map(|a| {
            let low = a.marginal_left(0.0);
            let high = a.marginal_right(0.0);
            PriceCertificate {
                low,
                high,
                holds: low - tol <= p && p <= high + tol,
            }
        })
        .collect();
    Ok(InternalCheck {
        is_equilibrium_price: certificates.iter().all(|c| c.holds),
        certificates,
    })
}

/// Necessary condition:
/// `max_j c'ᵢ₊(aⱼ - aᵢ) ≥ p - ρᵢ ≥ min_j c'ᵢ₋(aⱼ - aᵢ)` for every agent.
pub fn internal_necessary_check(agents: &[AgentSpec], p: f64) -> Result<bool> {
    check_agents(agents)?;
    let tol = price_tolerance(p);
    Ok(agents.iter().all(|ai| {
        let hi = agents
            .iter()
            .map(|aj| ai.cost.derivative_right(aj.exposure - ai.exposure))
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = agents
            .iter()
            .map(|aj| ai.cost.derivative_left(aj.exposure - ai.exposure))
            .fold(f64::INFINITY, f64::min);
        let x = p - ai.rho;
        lo - tol <= x && x <= hi + tol
    }))
}

/// Whether agents may short or over-hold losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExposureRange {
    #[default]
    Unbounded,
    /// `0 ≤ wⁱⱼ ≤ aⱼ`: only the sufficient condition is checked.
    Bounded,
}

/// Internal market equilibrium at price `p`.
///
/// Allocations use the identity permutation: agent `i` keeps `aᵢ eᵢ`.
/// Returns `Ok(None)` if `p` fails the sufficient condition.
pub fn internal_equilibrium(
    agents: &[AgentSpec],
    p: f64,
    range: ExposureRange,
) -> Result<Option<EquilibriumResult>> {
    let check = internal_equilibrium_check(agents, p)?;
    if !check.is_equilibrium_price {
        return Ok(None);
    }
    let n = agents.len();
    let low = check.certificates.iter().map(|c| c.low).fold(f64::NEG_INFINITY, f64::max);
    let high = check.certificates.iter().map(|c| c.high).fold(f64::INFINITY, f64::min);
    Ok(Some(EquilibriumResult {
        kind: EquilibriumKind::ExchangeOnly,
        price: p,
        price_interval: Some((low, high)),
        internal_allocations: (0..n).map(|i| unit_vector(n, i, agents[i].exposure)).collect(),
        external_allocations: vec![],
        external_exposure: 0.0,
        internal_exposure: f64::NAN,
        unique_allocation: range == ExposureRange::Unbounded
            && agents.windows(2).all(|w| w[0].exposure == w[1].exposure),
    }))
}

/// Every permutation of the initial exposure vectors, for `n ≤ 6`.
pub fn allocation_permutations(agents: &[AgentSpec]) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = agents.len();
    if n > 6 {
        return Err(Error::Invalid(format!(
            "permutation enumeration is limited to 6 agents, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        out.push(
            p.iter()
                .map(|&i| unit_vector(n, i, agents[i].exposure))
                .collect(),
        );
    });
    Ok(out)
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// `n` internal agents each holding `a` units of their own loss, and
/// `m = k n` external agents holding nothing, with the external side
/// assessing one unit at `external_rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalMarket {
    pub internal: AgentSpec,
    pub external_rho: f64,
    pub external_cost: CostFn,
    pub n: usize,
    pub k: usize,
}

impl ExternalMarket {
    fn l_e(&self, u: f64) -> f64 {
        self.external_cost.derivative_right(u) + self.external_rho
    }

    fn l_i(&self, b: f64) -> f64 {
        self.internal.marginal_left(b)
    }

    /// `L_E(0)`, `L_I⁻(0)`, `L_I⁺(0)`.
    pub fn marginals_at_zero(&self) -> (f64, f64, f64) {
        (
            self.l_e(0.0),
            self.internal.marginal_left(0.0),
            self.internal.marginal_right(0.0),
        )
    }

    pub fn initial_allocations(&self) -> Vec<Vec<f64>> {
        let a = self.internal.exposure;
        (0..self.n)
            .map(|i| unit_vector(self.n, i, a))
            .chain((0..self.n * self.k).map(|_| vec![0.0; self.n]))
            .collect()
    }
}

/// Solves the external-transfer market.
pub fn solve_external(market: &ExternalMarket) -> Result<EquilibriumResult> {
    let ExternalMarket {
        internal,
        external_rho,
        external_cost,
        n,
        k,
    } = *market;
    AgentSpec::new(internal.rho, internal.cost, internal.exposure)?;
    AgentSpec::new(external_rho, external_cost, 0.0)?;
    check_positive("a", internal.exposure)?;
    if n == 0 || k == 0 {
        return Err(Error::Invalid("n and k must be at least 1".into()));
    }
    if !internal.cost.is_strictly_convex() || !external_cost.is_strictly_convex() {
        return Err(Error::Invalid(
            "external-market solver needs strictly convex internal and external costs".into(),
        ));
    }
    let a = internal.exposure;
    let kf = k as f64;
    let (le0, li_minus, li_plus) = market.marginals_at_zero();

    let keep = |kind, price, interval| EquilibriumResult {
        kind,
        price,
        price_interval: interval,
        internal_allocations: (0..n).map(|i| unit_vector(n, i, a)).collect(),
        external_allocations: vec![vec![0.0; n]; n * k],
        external_exposure: 0.0,
        internal_exposure: a,
        unique_allocation: true,
    };

    if le0 >= li_minus {
        let high = le0.min(li_plus);
        return Ok(keep(
            EquilibriumKind::NoParticipation,
            li_minus,
            Some((li_minus, high)),
        ));
    }
    let gap = |u: f64| market.l_e(u) - market.l_i(-kf * u);
    let u_max = a / kf;
    let gap_hi = gap(u_max);
    if gap_hi < 0.0 {
        let mut r = keep(EquilibriumKind::NoEquilibrium, f64::NAN, None);
        r.internal_allocations.clear();
        r.external_allocations.clear();
        r.unique_allocation = false;
        return Ok(r);
    }
    let gap_lo = le0 - li_minus;
    if !(gap_lo < 0.0 && gap_hi >= 0.0) {
        return Err(Error::NoBracket {
            lo: 0.0,
            hi: u_max,
            gap_lo,
            gap_hi,
        });
    }
    let (mut lo, mut hi) = (0.0, u_max);
    while hi - lo > 1e-15 * u_max.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let w = a - kf * u;
    Ok(EquilibriumResult {
        kind: EquilibriumKind::ExternalTransfer,
        price: market.l_e(u),
        price_interval: None,
        internal_allocations: (0..n).map(|i| unit_vector(n, i, w)).collect(),
        external_allocations: (0..n * k).map(|j| unit_vector(n, j / k, u)).collect(),
        external_exposure: u,
        internal_exposure: w,
        unique_allocation: u < a / (2.0 * kf),
    })
}

/// Closed-form external equilibrium for quadratic costs `λ_I x²`, `λ_E x²`:
/// `(p, u, w)`.
pub fn quadratic_closed_form(
    lambda_i: f64,
    lambda_e: f64,
    rho_i: f64,
    rho_e: f64,
    k: usize,
    a: f64,
) -> Result<(f64, f64, f64)> {
    check_positive("lambda_I", lambda_i)?;
    check_positive("lambda_E", lambda_e)?;
    check_positive("a", a)?;
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if !(rho_i > rho_e) {
        return Err(Error::Invalid(format!(
            "an interior transfer needs rho_I > rho_E, got {rho_i} and {rho_e}"
        )));
    }
    let kf = k as f64;
    let denom = kf * lambda_i + lambda_e;
    let p = (kf * lambda_i * rho_e + lambda_e * rho_i) / denom;
    let u = (rho_i - rho_e) / (2.0 * denom);
    if u > a / kf {
        return Err(Error::Invalid(format!(
            "transfer u={u} exceeds a/k={}; the market has no equilibrium",
            a / kf
        )));
    }
    Ok((p, u, a - kf * u))
}

/// Expected-shortfall agents sharing `Σ aᵢ Xᵢ`.
#[derive(Debug, Clone)]
pub struct EsEquilibrium {
    pub exposures: Vec<f64>,
    pub q: f64,
    /// `E[Xᵢ | A]` with `A = {Σ aⱼ Xⱼ ≥ VaR_q}`.
    pub prices: Vec<f64>,
    pub price_stderr: Vec<f64>,
    /// `wⁱ = (aᵢ / Σaⱼ) a`.
    pub allocations: Vec<Vec<f64>>,
    pub var_total: f64,
    /// `VaR_q + mean((T - VaR_q)₊) / (1 - q)` for `T = Σ aᵢ Xᵢ`.
    pub es_total: f64,
    pub es_stderr: f64,
    n_paths: usize,
    top: usize,
    paths: Vec<f64>,
}

impl EsEquilibrium {
    /// `Σ aᵢ pᵢ`.
    pub fn euler_sum(&self) -> f64 {
        self.exposures.iter().zip(&self.prices).map(|(a, p)| a * p).sum()
    }

    fn top_mean(&self, w: &[f64]) -> f64 {
        let n = self.exposures.len();
        let mut y: Vec<f64> = self
            .paths
            .par_chunks(n)
            .map(|x| x.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        let cut = self.n_paths - self.top;
        y.select_nth_unstable_by(cut, f64::total_cmp);
        y[cut..].iter().sum::<f64>() / self.top as f64
    }

    /// `ES_q(w·X) - (w - aⁱ)·p` for agent `agent`, with ES estimated by the
    /// average of the same number of top paths used for the prices.
    pub fn objective(&self, agent: usize, w: &[f64]) -> Result<f64> {
        let n = self.exposures.len();
        if agent >= n || w.len() != n {
            return Err(Error::Invalid("agent index or allocation length out of range".into()));
        }
        let es = self.top_mean(w);
        let transfer: f64 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| {
                let initial = if j == agent { self.exposures[j] } else { 0.0 };
                (wj - initial) * self.prices[j]
            })
            .sum();
        Ok(es - transfer)
    }
}

/// Proportional equilibrium of ES agents with exposures `a` to iid
/// Pareto(alpha) losses, estimated from `n_paths` simulated paths.
pub fn es_proportional_equilibrium(
    exposures: &[f64],
    alpha: f64,
    q: f64,
    rng: &RngStream,
    n_paths: usize,
) -> Result<EsEquilibrium> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "expected shortfall is infinite for alpha <= 1",
        });
    }
    check_probability(q)?;
    if exposures.is_empty() || exposures.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::Invalid("exposures must be positive".into()));
    }
    if n_paths < 100_000 {
        return Err(Error::Invalid(format!(
            "ES pricing needs at least 100000 paths, got {n_paths}"
        )));
    }
    let n = exposures.len();
    let paths: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .flat_map_iter(|path| {
            let mut r = rng.path(path);
            (0..n)
                .map(|_| (1.0 - r.next_uniform()).powf(-1.0 / alpha))
                .collect::<Vec<_>>()
        })
        .collect();
    let totals: Vec<f64> = paths
        .par_chunks(n)
        .map(|x| x.iter().zip(exposures).map(|(x, a)| x * a).sum())
        .collect();
    let mut sorted = totals.clone();
    sorted.par_sort_unstable_by(f64::total_cmp);
    let var_total = var_of_sorted(&sorted, q)?;
    let rank = ((q * n_paths as f64).ceil() as usize).clamp(1, n_paths);
    let top = n_paths - rank + 1;

    // The top set by rank, so its size is exact even with ties.
    let mut order: Vec<usize> = (0..n_paths).collect();
    order.par_sort_unstable_by(|&i, &j| totals[i].total_cmp(&totals[j]).then(i.cmp(&j)));
    let chosen = &order[n_paths - top..];

    let mut prices = Vec::with_capacity(n);
    let mut price_stderr = Vec::with_capacity(n);
    for i in 0..n {
        let xs: Vec<f64> = chosen.iter().map(|&p| paths[p * n + i]).collect();
        let (m, se) = mean_and_stderr(&xs);
        prices.push(m);
        price_stderr.push(se);
    }
    let excess: f64 = totals.iter().map(|t| (t - var_total).max(0.0)).sum::<f64>() / n_paths as f64;
    let es_total = var_total + excess / (1.0 - q);
    let top_totals: Vec<f64> = chosen.iter().map(|&p| totals[p]).collect();
    let (_, es_stderr) = mean_and_stderr(&top_totals);

    let sum_a: f64 = exposures.iter().sum();
    let allocations = exposures
        .iter()
        .map(|ai| exposures.iter().map(|aj| ai / sum_a * aj).collect())
        .collect();
    Ok(EsEquilibrium {
        exposures: exposures.to_vec(),
        q,
        prices,
        price_stderr,
        allocations,
        var_total,
        es_total,
        es_stderr,
        n_paths,
        top,
        paths,
    })
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
