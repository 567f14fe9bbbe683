//! Experiment runners behind the `paretopool` binary.
//!
//! Each runner returns plain tables so the same code drives the CLI, the
//! examples and the tests. [`run`] wires a [`Command`] to files on disk.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::distributions::{Distribution, EmpiricalDist, ParetoDist, TailParetoDist};
use crate::dominance::{
    barrett_donald, comonotonic_sum, fosd_mc, fosd_mc_on_grid, independent_sum, log_grid,
    BDTestResult, DominanceReport, Verdict,
};
use crate::equilibrium::{
    es_proportional_equilibrium, internal_equilibrium, internal_equilibrium_check, solve_external,
    AgentSpec, CostFn, EquilibriumResult, ExposureRange, ExternalMarket,
};
use crate::error::{check_probability, Error, Result};
use crate::estimation::{hill_plot, hill_top_five_percent, load_losses, Column, HillEstimate};
use crate::portfolio::{
    simulate_collective, simulate_linear_combination, simulate_model_b, simulate_weighted_sum,
    ClaimCount, CollectiveModel, Dependence, TriggerModel, WeightLaw, WeightVector,
};
use crate::risk_measures::var_of_sorted;
use crate::rng::RngStream;

/// Shape and scale of the six business lines used by `figure4`.
pub const DEFAULT_GPD_XI: [f64; 6] = [1.19, 1.17, 1.01, 1.39, 1.23, 1.22];
pub const DEFAULT_GPD_BETA: [f64; 6] = [774.0, 254.0, 233.0, 412.0, 107.0, 243.0];

pub const THREADS_ENV: &str = "PARETOPOOL_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: usize,
    pub delta: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20240101,
            paths: 1_000_000,
            delta: 0.01,
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 1000 {
            return Err(Error::Invalid(format!(
                "key `paths`: need at least 1000 paths, got {}",
                self.paths
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Invalid(format!(
                "key `delta`: must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Overrides fields from `seed`, `paths`, `delta` and `out` keys.
    pub fn apply(&mut self, params: &Params) -> Result<()> {
        if let Some(v) = params.get("seed") {
            self.seed = parse_key("seed", v)?;
        }
        if let Some(v) = params.get("paths") {
            self.paths = parse_key("paths", v)?;
        }
        if let Some(v) = params.get("delta") {
            self.delta = parse_key("delta", v)?;
        }
        if let Some(v) = params.get("out") {
            self.output_dir = PathBuf::from(v);
        }
        Ok(())
    }

    pub fn stream(&self, stream: u32) -> RngStream {
        RngStream::new(self.seed, stream)
    }
}

/// Pool size: the explicit value, else `PARETOPOOL_THREADS`, else `None`
/// for the hardware default.
pub fn resolve_threads(explicit: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    let n = match (explicit, env) {
        (Some(n), _) => n,
        (None, Some(s)) => s.trim().parse::<usize>().map_err(|_| {
            Error::Invalid(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))
        })?,
        (None, None) => return Ok(None),
    };
    if n == 0 {
        return Err(Error::Invalid("thread count must be at least 1".into()));
    }
    Ok(Some(n))
}

fn parse_key<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("key `{key}`: cannot parse `{v}`")))
}

/// Flat `key = value` parameters. Later insertions win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            out.insert(k, v.trim());
        }
        Ok(out)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses one `key=value` override.
    pub fn insert_assignment(&mut self, s: &str) -> Result<()> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("expected key=value, got `{s}`")))?;
        self.insert(k.trim(), v.trim());
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: impl Display) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn merge(&mut self, other: &Params) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Invalid(format!("missing key `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| parse_key(key, v))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_key(key, self.require(key)?)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |v| parse_key(key, v))
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|x| parse_key(key, x)).collect(),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push<D: Display>(&mut self, row: &[D]) {
        self.rows.push(row.iter().map(|d| d.to_string()).collect());
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(vec![]);
        let err = |e: csv::Error| Error::Invalid(format!("CSV encoding failed: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Invalid(format!("CSV encoding failed: {e}")))
    }
}

/// Writes `name` and a `name.meta` sidecar with a timestamp and the
/// parameters used.
pub fn write_table(dir: &Path, name: &str, table: &Table, echo: &Params) -> Result<PathBuf> {
    let io = |path: &Path, e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, table.to_csv()?).map_err(|e| io(&path, e))?;
    let meta_path = dir.join(format!("{name}.meta"));
    let mut meta = fs::File::create(&meta_path).map_err(|e| io(&meta_path, e))?;
    let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut text = format!("timestamp={stamp}\nfile={name}\n");
    for (k, v) in echo.iter() {
        text.push_str(&format!("{k}={v}\n"));
    }
    meta.write_all(text.as_bytes()).map_err(|e| io(&meta_path, e))?;
    Ok(path)
}

/// Order-statistic VaR and a standard error from the binomial spread of
/// the order statistics around rank `⌈pN⌉`.
pub fn var_with_stderr(sorted: &[f64], p: f64) -> Result<(f64, f64)> {
    let v = var_of_sorted(sorted, p)?;
    let n = sorted.len() as f64;
    let d = (n * p * (1.0 - p)).sqrt();
    let at = |r: f64| sorted[(r.ceil() as usize).clamp(1, sorted.len()) - 1];
    Ok((v, 0.5 * (at(n * p + d) - at(n * p - d))))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.par_sort_unstable_by(f64::total_cmp);
    v
}

pub fn default_p_grid() -> Vec<f64> {
    (0..=6).map(|i| (90 + i) as f64 / 100.0).collect()
}

pub fn figure4_p_grid() -> Vec<f64> {
    (0..=4).map(|i| (95 + i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure1Row {
    pub p: f64,
    pub n: usize,
    pub var_estimate: f64,
    pub stderr: f64,
}

/// VaR of the average of `n` iid Pareto(alpha) losses for `n = 1..=n_max`.
/// Block size `n` uses stream `n`.
pub fn figure1(alpha: f64, n_max: usize, p_grid: &[f64], cfg: &RunConfig) -> Result<Vec<Figure1Row>> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Invalid(format!("key `alpha`: must lie in (0, 1], got {alpha}")));
    }
    if n_max == 0 || n_max > 16 {
        return Err(Error::Invalid(format!("key `n_max`: must lie in 1..=16, got {n_max}")));
    }
    for &p in p_grid {
        check_probability(p)?;
    }
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let paths = simulate_weighted_sum(alpha, &WeightVector::uniform(n)?, &cfg.stream(n as u32), cfg.paths)?;
        let s = sorted(paths);
        for &p in p_grid {
            let (v, se) = var_with_stderr(&s, p)?;
            rows.push(Figure1Row {
                p,
                n,
                var_estimate: v,
                stderr: se,
            });
        }
    }
    rows.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.n.cmp(&b.n)));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure4Row {
    pub p: f64,
    pub var_of_sum: f64,
    pub sum_of_vars: f64,
    pub gap: f64,
    /// Standard error of `var_of_sum`, hence of `gap`.
    pub stderr: f64,
}

/// `VaR_p(Σ Yᵢ)` by Monte Carlo against `Σ VaR_p(Yᵢ)` in closed form for
/// independent GPD(ξᵢ, βᵢ) losses.
pub fn figure4(xi: &[f64], beta: &[f64], p_grid: &[f64], cfg: &RunConfig) -> Result<Vec<Figure4Row>> {
    cfg.validate()?;
    if xi.is_empty() || xi.len() != beta.len() {
        return Err(Error::Invalid(format!(
            "keys `xi`/`beta`: need equal non-empty lists, got {} and {}",
            xi.len(),
            beta.len()
        )));
    }
    let laws: Vec<Distribution> = xi
        .iter()
        .zip(beta)
        .map(|(&x, &b)| Distribution::gpd(x, b, 0.0))
        .collect::<Result<_>>()?;
    let ones = vec![1.0; laws.len()];
    let s = sorted(simulate_linear_combination(&laws, &ones, &cfg.stream(0), cfg.paths)?);
    p_grid
        .iter()
        .map(|&p| {
            let (v, se) = var_with_stderr(&s, p)?;
            let sum_of_vars = laws.iter().map(|l| l.quantile(p)).sum::<Result<f64>>()?;
            Ok(Figure4Row {
                p,
                var_of_sum: v,
                sum_of_vars,
                gap: v - sum_of_vars,
                stderr: se,
            })
        })
        .collect()
}

/// Whether every `ξᵢ ≥ 1` (every line has an infinite mean).
pub fn all_infinite_mean(xi: &[f64]) -> bool {
    xi.iter().all(|&x| x >= 1.0)
}

/// Models compared by the `dominance` command. Each compares a single
/// benchmark loss (left) against a pooled position (right).
#[derive(Debug, Clone)]
pub enum DominanceModel {
    /// `X` against `Σ θᵢ Xᵢ`.
    Weighted { alpha: f64, theta: WeightVector },
    /// `λ X 1_A` against `Σ θᵢ Xᵢ 1_{Aᵢ}`.
    Triggered {
        alpha: f64,
        theta: WeightVector,
        triggers: TriggerModel,
        lambda: Option<f64>,
    },
    /// `X 1_{N ≥ 1}` against the weighted claim average.
    Collective(CollectiveModel),
    /// `Y` against `Σ θᵢ Yᵢ` for tail-Pareto `Y`, compared above the threshold.
    Tail {
        law: TailParetoDist,
        theta: WeightVector,
    },
}

fn parse_dependence(s: &str) -> Result<Dependence> {
    let s = s.trim();
    match s.split_once(':') {
        None if s == "independent" => Ok(Dependence::Independent),
        None if s == "common" => Ok(Dependence::Common),
        Some(("mixture", w)) => Ok(Dependence::Mixture(parse_key("dependence", w)?)),
        _ => Err(Error::Invalid(format!(
            "key `dependence`: expected independent, common or mixture:w, got `{s}`"
        ))),
    }
}

fn parse_claim_count(s: &str) -> Result<ClaimCount> {
    match s.trim().split_once(':') {
        Some(("poisson", l)) => Ok(ClaimCount::Poisson(parse_key("count", l)?)),
        Some(("fixed", n)) => Ok(ClaimCount::Fixed(parse_key("count", n)?)),
        _ => Err(Error::Invalid(format!(
            "key `count`: expected poisson:lambda or fixed:n, got `{s}`"
        ))),
    }
}

fn parse_weight_law(s: &str) -> Result<WeightLaw> {
    match s.trim().split_once(':') {
        Some(("point", w)) => Ok(WeightLaw::PointMass(parse_key("weights", w)?)),
        Some(("lognormal", args)) => {
            let (mu, sigma) = args.split_once(',').ok_or_else(|| {
                Error::Invalid(format!("key `weights`: expected lognormal:mu,sigma, got `{s}`"))
            })?;
            Ok(WeightLaw::LogNormal {
                mu: parse_key("weights", mu)?,
                sigma: parse_key("weights", sigma)?,
            })
        }
        _ => Err(Error::Invalid(format!(
            "key `weights`: expected point:w or lognormal:mu,sigma, got `{s}`"
        ))),
    }
}

impl DominanceModel {
    /// Reads `model` (`A`, `B`, `collective` or `tail`) and its keys.
    pub fn from_params(p: &Params) -> Result<Self> {
        let alpha = p.f64_or("alpha", 1.0)?;
        let theta = || p.list_or("theta", &[0.5, 0.5]);
        match p.str_or("model", "A") {
            "A" | "a" => Ok(DominanceModel::Weighted {
                alpha,
                theta: WeightVector::simplex(theta()?)?,
            }),
            "B" | "b" => {
                let theta = WeightVector::new(theta()?)?;
                let probs = p.list_or("probs", &vec![0.5; theta.len()])?;
                let dep = parse_dependence(p.str_or("dependence", "independent"))?;
                Ok(DominanceModel::Triggered {
                    alpha,
                    theta,
                    triggers: TriggerModel::new(probs, dep)?,
                    lambda: p.get("lambda").map(|v| parse_key("lambda", v)).transpose()?,
                })
            }
            "collective" => {
                let count = parse_claim_count(p.str_or("count", "poisson:2"))?;
                let weights = parse_weight_law(p.str_or("weights", "point:1"))?;
                let mut m = CollectiveModel::new(count, weights, ParetoDist::standard(alpha)?)?;
                if let Some(c) = p.get("claim_cap") {
                    m = m.with_claim_cap(parse_key("claim_cap", c)?);
                }
                Ok(DominanceModel::Collective(m))
            }
            "tail" => {
                let threshold = p.f64_or("threshold", 2.0)?;
                let body_alpha = p.f64_or("body_alpha", alpha)?;
                let body = Distribution::pareto(body_alpha, 1.0)?;
                Ok(DominanceModel::Tail {
                    law: TailParetoDist::new(alpha, threshold, body)?,
                    theta: WeightVector::simplex(theta()?)?,
                })
            }
            other => Err(Error::Invalid(format!(
                "key `model`: expected A, B, collective or tail, got `{other}`"
            ))),
        }
    }

    /// Simulates both sides and compares them with DKW bands at `cfg.delta`.
    pub fn run(&self, cfg: &RunConfig) -> Result<DominanceReport> {
        cfg.validate()?;
        let n = cfg.paths;
        match self {
            DominanceModel::Weighted { alpha, theta } => {
                let single = Distribution::pareto(*alpha, 1.0)?.sample(&cfg.stream(1), n);
                let pooled = simulate_weighted_sum(*alpha, theta, &cfg.stream(0), n)?;
                fosd_mc(&single, &pooled, cfg.delta)
            }
            DominanceModel::Triggered {
                alpha,
                theta,
                triggers,
                lambda,
            } => {
                let b = simulate_model_b(*alpha, theta, triggers, *lambda, &cfg.stream(0), n)?;
                fosd_mc(&b.benchmark, &b.portfolio, cfg.delta)
            }
            DominanceModel::Collective(m) => {
                let c = simulate_collective(m, &cfg.stream(0), n)?;
                fosd_mc(&c.benchmark, &c.averages, cfg.delta)
            }
            DominanceModel::Tail { law, theta } => {
                let d = Distribution::from(law.clone());
                let single = d.sample(&cfg.stream(1), n);
                let laws = vec![d; theta.len()];
                let pooled = simulate_linear_combination(&laws, theta.as_slice(), &cfg.stream(0), n)?;
                let hi = var_of_sorted(&sorted(single.clone()), 0.999)?.max(law.threshold() * 1.01);
                let grid = log_grid(law.threshold(), hi, 1000);
                fosd_mc_on_grid(&single, &pooled, cfg.delta, &grid)
            }
        }
    }
}

/// Exit status for a dominance verdict: 0 dominates, 2 crossing or
/// dominated, 3 inconclusive.
pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Dominates => 0,
        Verdict::Crossing | Verdict::Dominated => 2,
        Verdict::Inconclusive => 3,
    }
}

pub fn dominance_tables(report: &DominanceReport) -> (Table, Table) {
    let mut grid = Table::new(&["t", "lhs_survival", "rhs_survival", "band_lhs", "band_rhs"]);
    for ((t, l), r) in report.grid.iter().zip(&report.lhs_survival).zip(&report.rhs_survival) {
        grid.push(&[*t, *l, *r, report.band_halfwidth.0, report.band_halfwidth.1]);
    }
    let mut summary = Table::new(&["key", "value"]);
    summary.push(&["verdict".to_string(), report.verdict.to_string()]);
    summary.push(&["min_margin".to_string(), report.min_margin.to_string()]);
    if let Some((t, m)) = report.worst_point() {
        summary.push(&["worst_t".to_string(), t.to_string()]);
        summary.push(&["worst_margin".to_string(), m.to_string()]);
    }
    (grid, summary)
}

/// Outcome of an equilibrium spec.
#[derive(Debug, Clone)]
pub enum EquilibriumOutcome {
    Internal {
        agents: Vec<AgentSpec>,
        price: f64,
        result: Option<EquilibriumResult>,
        certificates: Vec<(f64, f64, bool)>,
    },
    External {
        market: ExternalMarket,
        result: EquilibriumResult,
    },
    ExpectedShortfall {
        prices: Vec<f64>,
        price_stderr: Vec<f64>,
        allocations: Vec<Vec<f64>>,
        euler_sum: f64,
        es_total: f64,
        es_stderr: f64,
    },
}

fn parse_costs(p: &Params, key: &str, n: usize) -> Result<Vec<CostFn>> {
    let raw = p.str_or(key, "zero");
    let costs: Vec<CostFn> = raw
        .split(';')
        .map(|s| s.parse().map_err(|e| Error::Invalid(format!("key `{key}`: {e}"))))
        .collect::<Result<_>>()?;
    match costs.len() {
        1 => Ok(vec![costs[0]; n]),
        m if m == n => Ok(costs),
        m => Err(Error::Invalid(format!("key `{key}`: {m} costs for {n} agents"))),
    }
}

/// Solves the market described by `spec`.
///
/// `mode = internal` keys: `rho` (list) or `risk = var` with `alpha`, `q`
/// and `agents`; `cost` (one, or `;`-separated per agent); `exposures`;
/// optional `price` and `range = unbounded|bounded`.
///
/// `mode = external` keys: `rho_i`, `rho_e`, `cost_i`, `cost_e`, `a`, `n`, `k`.
///
/// `mode = es` keys: `alpha`, `q`, `exposures`; uses `cfg.paths`.
pub fn solve_spec(spec: &Params, cfg: &RunConfig) -> Result<EquilibriumOutcome> {
    match spec.str_or("mode", "internal") {
        "internal" => {
            let rho = match spec.get("risk") {
                Some("var") => {
                    let alpha = spec.f64("alpha")?;
                    let q = spec.f64("q")?;
                    let d = ParetoDist::standard(alpha)?;
                    let r = d.quantile(q)?;
                    vec![r; spec.usize_or("agents", 2)?]
                }
                Some(other) => {
                    return Err(Error::Invalid(format!("key `risk`: only `var` is supported, got `{other}`")))
                }
                None => spec.list_or("rho", &[])?,
            };
            let n = rho.len();
            let costs = parse_costs(spec, "cost", n)?;
            let exposures = spec.list_or("exposures", &vec![1.0; n])?;
            if exposures.len() != n {
                return Err(Error::Invalid(format!(
                    "key `exposures`: {} values for {n} agents",
                    exposures.len()
                )));
            }
            let agents: Vec<AgentSpec> = (0..n)
                .map(|i| AgentSpec::new(rho[i], costs[i], exposures[i]))
                .collect::<Result<_>>()?;
            let price = match spec.get("price") {
                Some(v) => parse_key("price", v)?,
                None => agents
                    .iter()
                    .map(|a| a.marginal_left(0.0))
                    .fold(f64::NEG_INFINITY, f64::max),
            };
            let range = match spec.str_or("range", "unbounded") {
                "unbounded" => ExposureRange::Unbounded,
                "bounded" => ExposureRange::Bounded,
                other => {
                    return Err(Error::Invalid(format!(
                        "key `range`: expected unbounded or bounded, got `{other}`"
                    )))
                }
            };
            let check = internal_equilibrium_check(&agents, price)?;
            let result = internal_equilibrium(&agents, price, range)?;
            Ok(EquilibriumOutcome::Internal {
                agents,
                price,
                result,
                certificates: check.certificates.iter().map(|c| (c.low, c.high, c.holds)).collect(),
            })
        }
        "external" => {
            let cost = |key: &str| -> Result<CostFn> {
                spec.require(key)?
                    .parse()
                    .map_err(|e| Error::Invalid(format!("key `{key}`: {e}")))
            };
            let market = ExternalMarket {
                internal: AgentSpec::new(spec.f64("rho_i")?, cost("cost_i")?, spec.f64("a")?)?,
                external_rho: spec.f64("rho_e")?,
                external_cost: cost("cost_e")?,
                n: spec.usize_or("n", 1)?,
                k: spec.usize_or("k", 1)?,
            };
            let result = solve_external(&market)?;
            Ok(EquilibriumOutcome::External { market, result })
        }
        "es" => {
            let eq = es_proportional_equilibrium(
                &spec.list_or("exposures", &[1.0, 1.0])?,
                spec.f64("alpha")?,
                spec.f64("q")?,
                &cfg.stream(0),
                cfg.paths,
            )?;
            Ok(EquilibriumOutcome::ExpectedShortfall {
                euler_sum: eq.euler_sum(),
                prices: eq.prices,
                price_stderr: eq.price_stderr,
                allocations: eq.allocations,
                es_total: eq.es_total,
                es_stderr: eq.es_stderr,
            })
        }
        other => Err(Error::Invalid(format!(
            "key `mode`: expected internal, external or es, got `{other}`"
        ))),
    }
}

impl EquilibriumOutcome {
    /// Long-format table `(field, agent, component, value)`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["field", "agent", "component", "value"]);
        let mut row = |f: &str, a: String, c: String, v: String| t.rows.push(vec![f.into(), a, c, v]);
        let none = String::new;
        let allocations = |row: &mut dyn FnMut(&str, String, String, String), name: &str, a: &[Vec<f64>]| {
            for (i, w) in a.iter().enumerate() {
                for (j, x) in w.iter().enumerate() {
                    row(name, i.to_string(), j.to_string(), x.to_string());
                }
            }
        };
        match self {
            EquilibriumOutcome::Internal {
                price,
                result,
                certificates,
                ..
            } => {
                let regime = result.as_ref().map_or("not_an_equilibrium", |r| r.kind.as_str());
                row("regime", none(), none(), regime.into());
                row("price", none(), none(), price.to_string());
                for (i, (lo, hi, ok)) in certificates.iter().enumerate() {
                    row("certificate_low", i.to_string(), none(), lo.to_string());
                    row("certificate_high", i.to_string(), none(), hi.to_string());
                    row("certificate_holds", i.to_string(), none(), ok.to_string());
                }
                if let Some(r) = result {
                    allocations(&mut row, "allocation", &r.internal_allocations);
                }
            }
            EquilibriumOutcome::External { result, .. } => {
                row("regime", none(), none(), result.kind.as_str().into());
                row("price", none(), none(), result.price.to_string());
                if let Some((lo, hi)) = result.price_interval {
                    row("price_low", none(), none(), lo.to_string());
                    row("price_high", none(), none(), hi.to_string());
                }
                row("external_exposure", none(), none(), result.external_exposure.to_string());
                row("internal_exposure", none(), none(), result.internal_exposure.to_string());
                row("unique_allocation", none(), none(), result.unique_allocation.to_string());
                allocations(&mut row, "internal_allocation", &result.internal_allocations);
                allocations(&mut row, "external_allocation", &result.external_allocations);
            }
            EquilibriumOutcome::ExpectedShortfall {
                prices,
                price_stderr,
                allocations: alloc,
                euler_sum,
                es_total,
                es_stderr,
            } => {
                row("regime", none(), none(), "proportional".into());
                for (i, (p, se)) in prices.iter().zip(price_stderr).enumerate() {
                    row("price", i.to_string(), none(), p.to_string());
                    row("price_stderr", i.to_string(), none(), se.to_string());
                }
                row("euler_sum", none(), none(), euler_sum.to_string());
                row("es_total", none(), none(), es_total.to_string());
                row("es_stderr", none(), none(), es_stderr.to_string());
                allocations(&mut row, "allocation", alloc);
            }
        }
        t
    }
}

/// Results of comparing the comonotonic and independent sums of two
/// loss samples.
#[derive(Debug, Clone)]
pub struct EmpiricsOutput {
    /// `(x, F_⊕(x) - F_∗(x))`
    pub ecdf_diff: Vec<(f64, f64)>,
    /// `(p, VaR_p(∗), VaR_p(⊕))`; the last equals `Q₁(p) + Q₂(p)`.
    pub quantiles: Vec<(f64, f64, f64)>,
    pub bd: BDTestResult,
    pub hill1: HillEstimate,
    pub hill2: HillEstimate,
}

/// `n` draws of the comonotonic sum (lane 0) and of the independent sum
/// (lanes 1 and 2) of the two empirical laws.
pub fn sum_draws(e1: &EmpiricalDist, e2: &EmpiricalDist, rng: &RngStream, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (d1, d2) = (Distribution::Empirical(e1.clone()), Distribution::Empirical(e2.clone()));
    let (c0, l1, l2) = (rng.lane(0), rng.lane(1), rng.lane(2));
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let u = c0.uniform_at(i, 0);
            let co = d1.quantile_unchecked(u) + d2.quantile_unchecked(u);
            let ind = d1.quantile_unchecked(l1.uniform_at(i, 0)) + d2.quantile_unchecked(l2.uniform_at(i, 0));
            (co, ind)
        })
        .unzip()
}

/// The comparison behind the `empirics` command. The Barrett-Donald test
/// uses `bd_draws` draws per side with the comonotonic sum as the
/// hypothesised smaller law.
pub fn empirics(x1: &[f64], x2: &[f64], bd_draws: usize, cfg: &RunConfig) -> Result<EmpiricsOutput> {
    cfg.validate()?;
    let e1 = EmpiricalDist::new(x1)?;
    let e2 = EmpiricalDist::new(x2)?;
    let plus = comonotonic_sum(&e1, &e2);
    let star = independent_sum(&e1, &e2, &cfg.stream(1), cfg.paths)?;
    let (dp, ds) = (Distribution::Empirical(plus.clone()), Distribution::Empirical(star.clone()));

    let lo = plus.values()[0].min(star.values()[0]);
    let hi = dp.quantile(0.999)?.max(lo * 1.01);
    let ecdf_diff = if lo > 0.0 {
        log_grid(lo, hi, 500)
    } else {
        (0..500).map(|i| lo + (hi - lo) * i as f64 / 499.0).collect()
    }
    .into_iter()
    .map(|x| (x, plus.cdf(x) - star.cdf(x)))
    .collect();

    let quantiles = (1..1000)
        .map(|i| {
            let p = i as f64 / 1000.0;
            Ok((p, ds.quantile(p)?, dp.quantile(p)?))
        })
        .collect::<Result<_>>()?;

    let (co, ind) = sum_draws(&e1, &e2, &cfg.stream(0), bd_draws);
    Ok(EmpiricsOutput {
        ecdf_diff,
        quantiles,
        bd: barrett_donald(&co, &ind)?,
        hill1: hill_top_five_percent(x1)?,
        hill2: hill_top_five_percent(x2)?,
    })
}

impl EmpiricsOutput {
    pub fn tables(&self) -> (Table, Table, Table) {
        let mut ecdf = Table::new(&["x", "ecdf_diff"]);
        for (x, d) in &self.ecdf_diff {
            ecdf.push(&[x, d]);
        }
        let mut q = Table::new(&["p", "q_sum", "sum_q"]);
        for (p, a, b) in &self.quantiles {
            q.push(&[p, a, b]);
        }
        let mut s = Table::new(&["key", "value"]);
        let mut kv = |k: &str, v: String| s.rows.push(vec![k.into(), v]);
        kv("bd_statistic", self.bd.statistic.to_string());
        kv("bd_p_value", self.bd.p_value.to_string());
        kv("bd_n", self.bd.n1.to_string());
        for (name, h) in [("hill1", &self.hill1), ("hill2", &self.hill2)] {
            kv(&format!("{name}_k"), h.k.to_string());
            kv(&format!("{name}_alpha"), h.alpha_hat.to_string());
            kv(&format!("{name}_ci_low"), h.ci_low.to_string());
            kv(&format!("{name}_ci_high"), h.ci_high.to_string());
        }
        (ecdf, q, s)
    }
}

pub fn hill_table(rows: &[HillEstimate]) -> Table {
    let mut t = Table::new(&["k", "alpha_hat", "ci_low", "ci_high", "threshold"]);
    for h in rows {
        t.rows.push(vec![
            h.k.to_string(),
            h.alpha_hat.to_string(),
            h.ci_low.to_string(),
            h.ci_high.to_string(),
            h.threshold.to_string(),
        ]);
    }
    t
}

/// A subcommand with its positional inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Figure1,
    Figure4,
    Dominance,
    Equilibrium { spec: PathBuf },
    Empirics { file1: PathBuf, file2: PathBuf },
    Hill { file: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Figure1 => "figure1",
            Command::Figure4 => "figure4",
            Command::Dominance => "dominance",
            Command::Equilibrium { .. } => "equilibrium",
            Command::Empirics { .. } => "empirics",
            Command::Hill { .. } => "hill",
        }
    }
}

fn echo(cmd: &Command, cfg: &RunConfig, params: &Params) -> Params {
    let mut e = params.clone();
    e.insert("command", cmd.name());
    e.insert("seed", cfg.seed);
    e.insert("paths", cfg.paths);
    e.insert("delta", cfg.delta);
    e.insert("out", cfg.output_dir.display());
    e
}

fn column(params: &Params, key: &str) -> Result<Column> {
    params.str_or(key, "0").parse()
}

/// Runs `cmd`, writes its CSV files into `cfg.output_dir`, prints a short
/// summary to `out` and returns the process exit status.
pub fn run(cmd: &Command, cfg: &RunConfig, params: &Params, out: &mut dyn Write) -> Result<i32> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    let e = echo(cmd, cfg, params);
    let say = |out: &mut dyn Write, s: String| {
        writeln!(out, "{s}").map_err(|e| Error::Io {
            path: "<stdout>".into(),
            message: e.to_string(),
        })
    };
    match cmd {
        Command::Figure1 => {
            let alpha = params.f64_or("alpha", 1.0)?;
            let rows = figure1(alpha, params.usize_or("n_max", 6)?, &params.list_or("p_grid", &default_p_grid())?, cfg)?;
            let mut t = Table::new(&["p", "n", "var_estimate", "stderr"]);
            for r in &rows {
                t.rows.push(vec![r.p.to_string(), r.n.to_string(), r.var_estimate.to_string(), r.stderr.to_string()]);
            }
            let path = write_table(dir, "figure1.csv", &t, &e)?;
            say(out, format!("figure1: {} rows -> {}", rows.len(), path.display()))?;
            Ok(0)
        }
        Command::Figure4 => {
            let xi = params.list_or("xi", &DEFAULT_GPD_XI)?;
            let beta = params.list_or("beta", &DEFAULT_GPD_BETA)?;
            if !all_infinite_mean(&xi) {
                say(out, "figure4: warning: some xi < 1, those lines have a finite mean".into())?;
            }
            let rows = figure4(&xi, &beta, &params.list_or("p_grid", &figure4_p_grid())?, cfg)?;
            let mut t = Table::new(&["p", "var_of_sum", "sum_of_vars", "gap", "stderr"]);
            for r in &rows {
                t.push(&[r.p, r.var_of_sum, r.sum_of_vars, r.gap, r.stderr]);
            }
            let path = write_table(dir, "figure4.csv", &t, &e)?;
            say(out, format!("figure4: {} rows -> {}", rows.len(), path.display()))?;
            Ok(0)
        }
        Command::Dominance => {
            let report = DominanceModel::from_params(params)?.run(cfg)?;
            let (grid, summary) = dominance_tables(&report);
            write_table(dir, "dominance.csv", &grid, &e)?;
            write_table(dir, "dominance_summary.csv", &summary, &e)?;
            say(out, format!("verdict: {} (min margin {:.6})", report.verdict, report.min_margin))?;
            Ok(verdict_exit_code(report.verdict))
        }
        Command::Equilibrium { spec } => {
            let mut p = Params::from_file(spec)?;
            p.merge(params);
            let outcome = solve_spec(&p, cfg)?;
            let t = outcome.table();
            for r in t.rows.iter().filter(|r| !r[0].contains("allocation")) {
                let who = if r[1].is_empty() { String::new() } else { format!("[{}]", r[1]) };
                say(out, format!("{}{who}: {}", r[0], r[3]))?;
            }
            let mut echo_all = e.clone();
            echo_all.merge(&p);
            write_table(dir, "equilibrium.csv", &t, &echo_all)?;
            Ok(0)
        }
        Command::Empirics { file1, file2 } => {
            let x1 = load_losses(file1, &column(params, "column1")?, params.f64_or("scale1", 1.0)?)?;
            let x2 = load_losses(file2, &column(params, "column2")?, params.f64_or("scale2", 1.0)?)?;
            let res = empirics(&x1, &x2, params.usize_or("bd_draws", x1.len().min(x2.len()))?, cfg)?;
            let (ecdf, q, s) = res.tables();
            write_table(dir, "empirics_ecdf.csv", &ecdf, &e)?;
            write_table(dir, "empirics_quantiles.csv", &q, &e)?;
            write_table(dir, "empirics_summary.csv", &s, &e)?;
            say(out, format!("Barrett-Donald statistic {:.4}, p-value {:.4}", res.bd.statistic, res.bd.p_value))?;
            for (name, h) in [("file1", res.hill1), ("file2", res.hill2)] {
                say(out, format!("{name}: Hill alpha {:.3} (k={}, 95% CI {:.3}..{:.3})", h.alpha_hat, h.k, h.ci_low, h.ci_high))?;
            }
            Ok(0)
        }
        Command::Hill { file } => {
            let x = load_losses(file, &column(params, "column")?, params.f64_or("scale", 1.0)?)?;
            let n = x.len();
            let k_min = params.usize_or("k_min", (n / 50).max(2))?;
            let k_max = params.usize_or("k_max", (n / 5).max(k_min + 1).min(n.saturating_sub(1)))?;
            let rows = hill_plot(&x, k_min, k_max)?;
            let path = write_table(dir, "hill.csv", &hill_table(&rows), &e)?;
            let h = hill_top_five_percent(&x)?;
            say(out, format!("Hill alpha at top 5%: {:.3} (k={}, 95% CI {:.3}..{:.3}) -> {}", h.alpha_hat, h.k, h.ci_low, h.ci_high, path.display()))?;
            Ok(0)
        }
    }
}
