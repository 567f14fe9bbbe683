//! Loss laws: Pareto, generalized Pareto, tail-Pareto, empirical, and the
//! monotone transforms applied to them (caps, floors, excess layers,
//! affine maps, mixtures).
//!
//! Every law exposes `cdf`, `survival`, a left-continuous `quantile`, and an
//! inverse-transform sampler driven by [`RngStream`].

use rayon::prelude::*;

use crate::error::{check_positive, check_probability, Error, Result};
use crate::rng::RngStream;

/// Pareto law `P(X <= x) = 1 - (scale / x)^alpha` for `x >= scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoDist {
    alpha: f64,
    scale: f64,
}

impl ParetoDist {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("scale", scale)?;
        Ok(Self { alpha, scale })
    }

    /// `Pareto(alpha)` with unit scale.
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Infinite mean (`alpha <= 1`).
    pub fn is_ultra_heavy(&self) -> bool {
        self.alpha <= 1.0
    }

    pub fn has_finite_mean(&self) -> bool {
        self.alpha > 1.0
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x < self.scale {
            1.0
        } else {
            (self.scale / x).powf(self.alpha)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    #[inline]
    fn quantile_unchecked(&self, p: f64) -> f64 {
        self.scale * (1.0 - p).powf(-1.0 / self.alpha)
    }
}

/// Generalized Pareto law with shape `xi >= 0`, scale `beta` and location `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdDist {
    xi: f64,
    beta: f64,
    mu: f64,
}

impl GpdDist {
    pub fn new(xi: f64, beta: f64, mu: f64) -> Result<Self> {
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "xi",
                value: xi,
                reason: "shape must be finite and non-negative",
            });
        }
        check_positive("beta", beta)?;
        if !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
                reason: "location must be finite",
            });
        }
        Ok(Self { xi, beta, mu })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn has_finite_mean(&self) -> bool {
        self.xi < 1.0
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.mu {
            return 1.0;
        }
        let z = (x - self.mu) / self.beta;
        if self.xi == 0.0 {
            (-z).exp()
        } else {
            (-(self.xi * z).ln_1p() / self.xi).exp()
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    #[inline]
    fn quantile_unchecked(&self, p: f64) -> f64 {
        let log_tail = (-p).ln_1p();
        if self.xi == 0.0 {
            self.mu - self.beta * log_tail
        } else {
            self.mu + self.beta / self.xi * (-self.xi * log_tail).exp_m1()
        }
    }
}

/// `y = scale * x + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub scale: f64,
    pub shift: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }
}

/// Writes a GPD with `xi > 0` as an affine image of `Pareto(1 / xi)`.
///
/// If `X ~ Pareto(1/xi)` then `map.apply(X)` has the law of `g`.
pub fn gpd_as_pareto(g: &GpdDist) -> Result<(ParetoDist, AffineMap)> {
    if g.xi == 0.0 {
        return Err(Error::InvalidParameter {
            name: "xi",
            value: 0.0,
            reason: "the exponential case has no Pareto image",
        });
    }
    let pareto = ParetoDist::standard(1.0 / g.xi)?;
    let scale = g.beta / g.xi;
    Ok((
        pareto,
        AffineMap {
            scale,
            shift: g.mu - scale,
        },
    ))
}

/// A law with `P(Y > t) = t^-alpha` for `t >= threshold` and a body on
/// `[1, threshold]` taken from another law conditioned below the threshold.
#[derive(Debug, Clone)]
pub struct TailParetoDist {
    alpha: f64,
    threshold: f64,
    body: Box<Distribution>,
    body_mass: f64,
}

impl TailParetoDist {
    /// Tail-Pareto law whose body is `Pareto(alpha)` itself, so the whole
    /// law coincides with `Pareto(alpha)`.
    pub fn with_pareto_body(alpha: f64, threshold: f64) -> Result<Self> {
        let body = Distribution::Pareto(ParetoDist::standard(alpha)?);
        Self::new(alpha, threshold, body)
    }

    pub fn new(alpha: f64, threshold: f64, body: Distribution) -> Result<Self> {
        check_positive("alpha", alpha)?;
        if !(threshold.is_finite() && threshold >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                value: threshold,
                reason: "must be finite and at least 1",
            });
        }
        if body.essinf() < 1.0 {
            return Err(Error::InvalidParameter {
                name: "body",
                value: body.essinf(),
                reason: "body must be supported on [1, threshold]",
            });
        }
        let body_mass = body.cdf(threshold);
        if body_mass <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "body",
                value: body_mass,
                reason: "body puts no mass below the threshold",
            });
        }
        Ok(Self {
            alpha,
            threshold,
            body: Box::new(body),
            body_mass,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn body(&self) -> &Distribution {
        &self.body
    }

    fn tail_mass(&self) -> f64 {
        self.threshold.powf(-self.alpha)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x >= self.threshold {
            1.0 - x.powf(-self.alpha)
        } else {
            (1.0 - self.tail_mass()) * self.body.cdf(x) / self.body_mass
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x >= self.threshold {
            x.powf(-self.alpha)
        } else {
            1.0 - self.cdf(x)
        }
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        let body_prob = 1.0 - self.tail_mass();
        if p > body_prob {
            (1.0 - p).powf(-1.0 / self.alpha)
        } else {
            let scaled = (p / body_prob * self.body_mass).min(self.body_mass);
            let q = if scaled >= 1.0 {
                self.body.quantile_unchecked(1.0 - f64::EPSILON)
            } else {
                self.body.quantile_unchecked(scaled)
            };
            q.min(self.threshold)
        }
    }

    /// `Y >=_st Pareto(alpha)`, i.e. `P(Y > t) >= t^-alpha` on `[1, threshold]`,
    /// checked on a 1000-point log grid.
    pub fn dominates_pareto(&self) -> bool {
        let n = 1000;
        let log_hi = self.threshold.ln();
        (0..n).all(|i| {
            let t = (log_hi * i as f64 / (n - 1) as f64).exp();
            self.survival(t) >= t.powf(-self.alpha) - 1e-12
        })
    }
}

/// Empirical law of a sample, optionally weighted.
///
/// `cdf` is the right-continuous step function and `quantile` its
/// left-continuous generalized inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("empirical law needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: *bad,
                reason: "samples must be finite",
            });
        }
        let mut values = samples.to_vec();
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let cum = (1..=n).map(|i| i as f64 / n as f64).collect();
        Ok(Self { values, cum })
    }

    /// Weighted empirical law; weights are normalised to sum to one.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::Invalid(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
            .collect();
        if pairs.is_empty() {
            return Err(Error::Empty("no positive weights".into()));
        }
        if pairs.iter().any(|(v, w)| !v.is_finite() || !w.is_finite()) {
            return Err(Error::Invalid("values and weights must be finite".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|(_, w)| w).sum();
        let mut running = 0.0;
        let mut cum = Vec::with_capacity(pairs.len());
        for (_, w) in &pairs {
            running += w;
            cum.push(running / total);
        }
        *cum.last_mut().unwrap() = 1.0;
        Ok(Self {
            values: pairs.into_iter().map(|(v, _)| v).collect(),
            cum,
        })
    }

    /// Builds directly from sorted values and their cumulative probabilities.
    pub(crate) fn from_sorted_cumulative(values: Vec<f64>, cum: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), cum.len());
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Self { values, cum }
    }

    /// Sorted support points (with repetitions).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cumulative probability up to and including each support point.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Probability mass of each support point.
    pub fn weights(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cum
            .iter()
            .map(|&c| {
                let w = c - prev;
                prev = c;
                w
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        let idx = self.cum.partition_point(|&c| c < p);
        self.values[idx.min(self.values.len() - 1)]
    }

    /// `int_p^q quantile(u) du`, exact for the step quantile.
    pub fn quantile_integral(&self, p: f64, q: f64) -> f64 {
        let mut total = 0.0;
        let mut lower = 0.0_f64;
        for (v, &c) in self.values.iter().zip(&self.cum) {
            let a = lower.max(p);
            let b = c.min(q);
            if b > a {
                total += v * (b - a);
            }
            lower = c;
            if lower >= q {
                break;
            }
        }
        total
    }
}

/// Finite mixture of laws.
#[derive(Debug, Clone)]
pub struct MixtureDist {
    components: Vec<(f64, Distribution)>,
}

impl MixtureDist {
    pub fn new(components: Vec<(f64, Distribution)>) -> Result<Self> {
        if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Invalid(
                "mixture weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::Empty("mixture has no positive weight".into()));
        }
        let components = components
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, d)| (w / total, d))
            .collect();
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, Distribution)] {
        &self.components
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, d)| w * d.cdf(x))
            .sum::<f64>()
            .min(1.0)
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        // The mixture quantile lies between the extreme component quantiles.
        let (mut lo, mut hi) = self
            .components
            .iter()
            .map(|(_, d)| d.quantile_unchecked(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
                (lo.min(q), hi.max(q))
            });
        if self.cdf(lo) >= p {
            return lo;
        }
        for _ in 0..2000 {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Shape of the upper tail, used for analytic divergence detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBehavior {
    /// Bounded support.
    Bounded,
    /// All moments finite (exponential-type tail).
    Light,
    /// `P(X > x)` decays like `x^-alpha`.
    Power(f64),
}

impl TailBehavior {
    pub fn has_finite_mean(&self) -> bool {
        match self {
            TailBehavior::Power(alpha) => *alpha > 1.0,
            _ => true,
        }
    }

    fn heavier(self, other: TailBehavior) -> TailBehavior {
        use TailBehavior::*;
        match (self, other) {
            (Power(a), Power(b)) => Power(a.min(b)),
            (Power(a), _) | (_, Power(a)) => Power(a),
            (Light, _) | (_, Light) => Light,
            _ => Bounded,
        }
    }
}

/// Closed algebra of loss laws.
#[derive(Debug, Clone)]
pub enum Distribution {
    Pareto(ParetoDist),
    Gpd(GpdDist),
    TailPareto(TailParetoDist),
    Empirical(EmpiricalDist),
    /// `X ∧ cap`
    Capped { base: Box<Distribution>, cap: f64 },
    /// `X ∨ floor`
    Floored { base: Box<Distribution>, floor: f64 },
    /// `(X - retention)_+`
    ExcessOf {
        base: Box<Distribution>,
        retention: f64,
    },
    /// `scale * X + shift` with `scale > 0`
    AffineScaled {
        base: Box<Distribution>,
        scale: f64,
        shift: f64,
    },
    Mixture(MixtureDist),
}

impl From<ParetoDist> for Distribution {
    fn from(d: ParetoDist) -> Self {
        Distribution::Pareto(d)
    }
}

impl From<GpdDist> for Distribution {
    fn from(d: GpdDist) -> Self {
        Distribution::Gpd(d)
    }
}

impl From<TailParetoDist> for Distribution {
    fn from(d: TailParetoDist) -> Self {
        Distribution::TailPareto(d)
    }
}

impl From<EmpiricalDist> for Distribution {
    fn from(d: EmpiricalDist) -> Self {
        Distribution::Empirical(d)
    }
}

impl From<MixtureDist> for Distribution {
    fn from(d: MixtureDist) -> Self {
        Distribution::Mixture(d)
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

impl Distribution {
    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        Ok(ParetoDist::new(alpha, scale)?.into())
    }

    pub fn gpd(xi: f64, beta: f64, mu: f64) -> Result<Self> {
        Ok(GpdDist::new(xi, beta, mu)?.into())
    }

    pub fn empirical(samples: &[f64]) -> Result<Self> {
        Ok(EmpiricalDist::new(samples)?.into())
    }

    /// Point mass at `x`.
    pub fn point_mass(x: f64) -> Result<Self> {
        Self::empirical(&[x])
    }

    pub fn mixture(components: Vec<(f64, Distribution)>) -> Result<Self> {
        Ok(MixtureDist::new(components)?.into())
    }

    /// `X ∧ cap`. An infinite cap is allowed and leaves the law unchanged.
    pub fn capped(self, cap: f64) -> Result<Self> {
        if cap.is_nan() {
            return Err(Error::InvalidParameter {
                name: "cap",
                value: cap,
                reason: "must not be NaN",
            });
        }
        if cap == f64::INFINITY {
            return Ok(self);
        }
        Ok(Distribution::Capped {
            base: Box::new(self),
            cap,
        })
    }

    /// `X ∨ floor`.
    pub fn floored(self, floor: f64) -> Result<Self> {
        check_finite("floor", floor)?;
        Ok(Distribution::Floored {
            base: Box::new(self),
            floor,
        })
    }

    /// `(X - retention)_+`.
    pub fn excess_of(self, retention: f64) -> Result<Self> {
        check_finite("retention", retention)?;
        Ok(Distribution::ExcessOf {
            base: Box::new(self),
            retention,
        })
    }

    /// `scale * X + shift`.
    pub fn affine(self, scale: f64, shift: f64) -> Result<Self> {
        check_positive("scale", scale)?;
        check_finite("shift", shift)?;
        Ok(Distribution::AffineScaled {
            base: Box::new(self),
            scale,
            shift,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            Distribution::Pareto(d) => d.cdf(x),
            Distribution::Gpd(d) => d.cdf(x),
            Distribution::TailPareto(d) => d.cdf(x),
            Distribution::Empirical(d) => d.cdf(x),
            Distribution::Capped { base, cap } => {
                if x >= *cap {
                    1.0
                } else {
                    base.cdf(x)
                }
            }
            Distribution::Floored { base, floor } => {
                if x < *floor {
                    0.0
                } else {
                    base.cdf(x)
                }
            }
            Distribution::ExcessOf { base, retention } => {
                if x < 0.0 {
                    0.0
                } else {
                    base.cdf(x + retention)
                }
            }
            Distribution::AffineScaled { base, scale, shift } => base.cdf((x - shift) / scale),
            Distribution::Mixture(d) => d.cdf(x),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Distribution::Pareto(d) => d.survival(x),
            Distribution::Gpd(d) => d.survival(x),
            Distribution::TailPareto(d) => d.survival(x),
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Left-continuous quantile `inf { t : cdf(t) >= p }`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        match self {
            Distribution::Pareto(d) => d.quantile_unchecked(p),
            Distribution::Gpd(d) => d.quantile_unchecked(p),
            Distribution::TailPareto(d) => d.quantile_unchecked(p),
            Distribution::Empirical(d) => d.quantile_unchecked(p),
            Distribution::Capped { base, cap } => base.quantile_unchecked(p).min(*cap),
            Distribution::Floored { base, floor } => base.quantile_unchecked(p).max(*floor),
            Distribution::ExcessOf { base, retention } => {
                (base.quantile_unchecked(p) - retention).max(0.0)
            }
            Distribution::AffineScaled { base, scale, shift } => {
                scale * base.quantile_unchecked(p) + shift
            }
            Distribution::Mixture(d) => d.quantile_unchecked(p),
        }
    }

    /// Essential infimum of the support.
    pub fn essinf(&self) -> f64 {
        match self {
            Distribution::Pareto(d) => d.scale,
            Distribution::Gpd(d) => d.mu,
            Distribution::TailPareto(d) => d.body.essinf(),
            Distribution::Empirical(d) => d.values[0],
            Distribution::Capped { base, cap } => base.essinf().min(*cap),
            Distribution::Floored { base, floor } => base.essinf().max(*floor),
            Distribution::ExcessOf { base, retention } => (base.essinf() - retention).max(0.0),
            Distribution::AffineScaled { base, scale, shift } => scale * base.essinf() + shift,
            Distribution::Mixture(d) => d
                .components
                .iter()
                .map(|(_, c)| c.essinf())
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn tail(&self) -> TailBehavior {
        match self {
            Distribution::Pareto(d) => TailBehavior::Power(d.alpha),
            Distribution::Gpd(d) if d.xi > 0.0 => TailBehavior::Power(1.0 / d.xi),
            Distribution::Gpd(_) => TailBehavior::Light,
            Distribution::TailPareto(d) => TailBehavior::Power(d.alpha),
            Distribution::Empirical(_) | Distribution::Capped { .. } => TailBehavior::Bounded,
            Distribution::Floored { base, .. }
            | Distribution::ExcessOf { base, .. }
            | Distribution::AffineScaled { base, .. } => base.tail(),
            Distribution::Mixture(d) => d
                .components
                .iter()
                .map(|(_, c)| c.tail())
                .fold(TailBehavior::Bounded, TailBehavior::heavier),
        }
    }

    pub fn has_finite_mean(&self) -> bool {
        self.tail().has_finite_mean()
    }

    /// Points where the cdf jumps or has a kink; used to split quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            Distribution::Pareto(d) => vec![d.scale],
            Distribution::Gpd(d) => vec![d.mu],
            Distribution::TailPareto(d) => {
                let mut v = d.body.breakpoints();
                v.retain(|&x| x <= d.threshold);
                v.push(d.threshold);
                v
            }
            Distribution::Empirical(d) => {
                if d.values.len() <= 256 {
                    d.values.clone()
                } else {
                    vec![d.values[0], d.values[d.values.len() - 1]]
                }
            }
            Distribution::Capped { base, cap } => {
                let mut v = base.breakpoints();
                v.retain(|&x| x < *cap);
                v.push(*cap);
                v
            }
            Distribution::Floored { base, floor } => {
                let mut v = base.breakpoints();
                v.retain(|&x| x > *floor);
                v.push(*floor);
                v
            }
            Distribution::ExcessOf { base, retention } => {
                let mut v: Vec<f64> = base
                    .breakpoints()
                    .into_iter()
                    .map(|x| x - retention)
                    .filter(|&x| x > 0.0)
                    .collect();
                v.push(0.0);
                v
            }
            Distribution::AffineScaled { base, scale, shift } => base
                .breakpoints()
                .into_iter()
                .map(|x| scale * x + shift)
                .collect(),
            Distribution::Mixture(d) => d
                .components
                .iter()
                .flat_map(|(_, c)| c.breakpoints())
                .collect(),
        };
        out.retain(|x| x.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `n` inverse-transform draws; draw `i` uses path `i` of `stream`.
    pub fn sample(&self, stream: &RngStream, n: usize) -> Vec<f64> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.quantile_unchecked(stream.uniform_at(i, 0)))
            .collect()
    }
}
