//! First-order stochastic dominance: exact comparison of analytic laws,
//! Monte Carlo comparison with DKW bands, and the one-sided
//! Barrett-Donald test.
//!
//! Reports always read as "is the left law ≤_st the right law", so a
//! `Dominates` verdict means the right side has the larger survival
//! function.

use std::fmt;

use rayon::prelude::*;

use crate::distributions::{Distribution, EmpiricalDist};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest `n1 * n2` for which the independent sum is built by full
/// convolution rather than resampling.
pub const FULL_CONVOLUTION_LIMIT: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Left ≤_st right.
    Dominates,
    /// Right ≤_st left.
    Dominated,
    /// Strict violations in both directions.
    Crossing,
    /// No strict violation either way.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Dominates => "dominates",
            Verdict::Dominated => "dominated",
            Verdict::Crossing => "crossing",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub grid: Vec<f64>,
    pub lhs_survival: Vec<f64>,
    pub rhs_survival: Vec<f64>,
    /// DKW half-width of the left and right survival estimates.
    pub band_halfwidth: (f64, f64),
    pub verdict: Verdict,
    /// `min (rhs - lhs)` over the grid.
    pub min_margin: f64,
}

impl DominanceReport {
    fn build(
        grid: Vec<f64>,
        lhs_survival: Vec<f64>,
        rhs_survival: Vec<f64>,
        band_halfwidth: (f64, f64),
        tolerance: f64,
        exact: bool,
    ) -> Self {
        let band = band_halfwidth.0 + band_halfwidth.1 + tolerance;
        let mut min_margin = f64::INFINITY;
        let mut violation = false;
        let mut gap = false;
        for (l, r) in lhs_survival.iter().zip(&rhs_survival) {
            let m = r - l;
            min_margin = min_margin.min(m);
            violation |= m < -band;
            gap |= m > band;
        }
        let verdict = match (violation, gap) {
            (false, true) => Verdict::Dominates,
            // With zero bands, equality everywhere is dominance.
            (false, false) if exact => Verdict::Dominates,
            (false, false) => Verdict::Inconclusive,
            (true, false) => Verdict::Dominated,
            (true, true) => Verdict::Crossing,
        };
        Self {
            grid,
            lhs_survival,
            rhs_survival,
            band_halfwidth,
            verdict,
            min_margin,
        }
    }

    /// Grid point and margin where `rhs - lhs` is smallest.
    pub fn worst_point(&self) -> Option<(f64, f64)> {
        self.grid
            .iter()
            .zip(self.lhs_survival.iter().zip(&self.rhs_survival))
            .map(|(&t, (l, r))| (t, r - l))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// How `fosd_exact` chooses its evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `points` log-spaced values from the smaller `lower_p` quantile to
    /// the larger `upper_p` quantile of the two laws.
    Auto {
        points: usize,
        lower_p: f64,
        upper_p: f64,
    },
    Explicit(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            points: 2000,
            lower_p: 1e-4,
            upper_p: 1.0 - 1e-6,
        }
    }
}

/// `n` log-spaced points from `lo` to `hi`, both positive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn auto_grid(d1: &Distribution, d2: &Distribution, points: usize, lower_p: f64, upper_p: f64) -> Vec<f64> {
    let lo = d1.quantile_unchecked(lower_p).min(d2.quantile_unchecked(lower_p));
    let hi = d1.quantile_unchecked(upper_p).max(d2.quantile_unchecked(upper_p));
    if lo > 0.0 {
        return log_grid(lo, hi, points);
    }
    // Below zero the grid is linear; above it starts at the smallest
    // positive quantile either law reaches.
    let floor = [lower_p, 1e-3, 1e-2, 0.1, 0.5, 0.9, 0.99, upper_p]
        .iter()
        .flat_map(|&p| [d1.quantile_unchecked(p), d2.quantile_unchecked(p)])
        .filter(|q| *q > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut grid = Vec::with_capacity(points + 2);
    if lo < 0.0 {
        let n_neg = points / 10;
        grid.extend((0..n_neg).map(|i| lo * (1.0 - i as f64 / n_neg as f64)));
    }
    grid.push(0.0);
    if floor.is_finite() && hi > 0.0 {
        grid.extend(log_grid(0.5 * floor.min(hi), hi, points));
    }
    grid
}

/// Exact comparison `d1 ≤_st d2` on a grid, with zero bands.
pub fn fosd_exact(d1: &Distribution, d2: &Distribution, grid: &GridSpec) -> DominanceReport {
    let grid = match grid {
        GridSpec::Auto {
            points,
            lower_p,
            upper_p,
        } => auto_grid(d1, d2, *points, *lower_p, *upper_p),
        GridSpec::Explicit(g) => g.clone(),
    };
    let lhs = grid.iter().map(|&t| d1.survival(t)).collect();
    let rhs = grid.iter().map(|&t| d2.survival(t)).collect();
    DominanceReport::build(grid, lhs, rhs, (0.0, 0.0), 1e-12, true)
}

/// DKW half-width `sqrt(ln(2/δ) / (2N))`.
pub fn dkw_halfwidth(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "confidence level must lie in (0, 1)",
        })
    }
}

fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.par_sort_unstable_by(f64::total_cmp);
    s
}

fn survival_sorted(sorted: &[f64], t: f64) -> f64 {
    1.0 - sorted.partition_point(|&x| x <= t) as f64 / sorted.len() as f64
}

/// Monte Carlo comparison `paths1 ≤_st paths2` on a grid of pooled sample
/// quantiles.
pub fn fosd_mc(paths1: &[f64], paths2: &[f64], delta: f64) -> Result<DominanceReport> {
    if paths1.is_empty() || paths2.is_empty() {
        return Err(Error::Empty("dominance comparison needs two non-empty samples".into()));
    }
    check_delta(delta)?;
    let s1 = sorted_copy(paths1);
    let s2 = sorted_copy(paths2);
    let n_grid = 1000;
    let mut grid: Vec<f64> = (1..=n_grid)
        .flat_map(|i| {
            let p = i as f64 / (n_grid + 1) as f64;
            let pick = |s: &[f64]| s[((p * s.len() as f64) as usize).min(s.len() - 1)];
            [pick(&s1), pick(&s2)]
        })
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(compare_sorted(&s1, &s2, delta, grid))
}

/// As [`fosd_mc`] on caller-chosen grid points.
pub fn fosd_mc_on_grid(paths1: &[f64], paths2: &[f64], delta: f64, grid: &[f64]) -> Result<DominanceReport> {
    if paths1.is_empty() || paths2.is_empty() {
        return Err(Error::Empty("dominance comparison needs two non-empty samples".into()));
    }
    if grid.is_empty() {
        return Err(Error::Empty("dominance grid".into()));
    }
    check_delta(delta)?;
    Ok(compare_sorted(&sorted_copy(paths1), &sorted_copy(paths2), delta, grid.to_vec()))
}

fn compare_sorted(s1: &[f64], s2: &[f64], delta: f64, grid: Vec<f64>) -> DominanceReport {
    let lhs = grid.iter().map(|&t| survival_sorted(s1, t)).collect();
    let rhs = grid.iter().map(|&t| survival_sorted(s2, t)).collect();
    let bands = (dkw_halfwidth(s1.len(), delta), dkw_halfwidth(s2.len(), delta));
    DominanceReport::build(grid, lhs, rhs, bands, 0.0, false)
}

/// One-sided Barrett-Donald statistic and its exponential p-value bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BDTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Tests the null `smaller ≤_st larger`, i.e. `F_larger ≤ F_smaller`.
///
/// The statistic is `sqrt(n1 n2 / (n1 + n2)) sup_x (F̂_larger - F̂_smaller)_+`
/// over the pooled sample and the p-value is `exp(-2 s²)`.
pub fn barrett_donald(smaller: &[f64], larger: &[f64]) -> Result<BDTestResult> {
    let (n1, n2) = (smaller.len(), larger.len());
    if n1 < 30 || n2 < 30 {
        return Err(Error::Invalid(format!(
            "Barrett-Donald test needs at least 30 observations per sample, got {n1} and {n2}"
        )));
    }
    let s1 = sorted_copy(smaller);
    let s2 = sorted_copy(larger);
    // Merge walk: after consuming every point <= x, compare the two ECDFs.
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < n1 || j < n2 {
        let x = match (s1.get(i), s2.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < n1 && s1[i] <= x {
            i += 1;
        }
        while j < n2 && s2[j] <= x {
            j += 1;
        }
        sup = sup.max(j as f64 / n2 as f64 - i as f64 / n1 as f64);
    }
    let statistic = ((n1 * n2) as f64 / (n1 + n2) as f64).sqrt() * sup;
    Ok(BDTestResult {
        statistic,
        p_value: (-2.0 * statistic * statistic).exp().min(1.0),
        n1,
        n2,
    })
}

/// Comonotonic sum `e1 ⊕ e2` and independent sum `e1 ∗ e2`.
///
/// `⊕` is exact: on the merged grid of cumulative probabilities its
/// quantile is the sum of the two quantiles. `∗` is the full convolution
/// when `n1 n2 <= FULL_CONVOLUTION_LIMIT` and `n_paths` resampled pairs
/// otherwise (lanes 0 and 1 of `rng`).
pub fn comonotonic_and_independent_sums(
    e1: &EmpiricalDist,
    e2: &EmpiricalDist,
    rng: &RngStream,
    n_paths: usize,
) -> Result<(EmpiricalDist, EmpiricalDist)> {
    Ok((comonotonic_sum(e1, e2), independent_sum(e1, e2, rng, n_paths)?))
}

pub fn comonotonic_sum(e1: &EmpiricalDist, e2: &EmpiricalDist) -> EmpiricalDist {
    let (c1, c2) = (e1.cumulative(), e2.cumulative());
    let (v1, v2) = (e1.values(), e2.values());
    let mut values = Vec::with_capacity(c1.len() + c2.len());
    let mut cum = Vec::with_capacity(c1.len() + c2.len());
    let (mut i, mut j) = (0, 0);
    while i < c1.len() && j < c2.len() {
        let p = c1[i].min(c2[j]);
        values.push(v1[i] + v2[j]);
        cum.push(p);
        if c1[i] == p {
            i += 1;
        }
        if c2[j] == p {
            j += 1;
        }
    }
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    EmpiricalDist::from_sorted_cumulative(values, cum)
}

pub fn independent_sum(
    e1: &EmpiricalDist,
    e2: &EmpiricalDist,
    rng: &RngStream,
    n_paths: usize,
) -> Result<EmpiricalDist> {
    let (n1, n2) = (e1.len(), e2.len());
    if n1.saturating_mul(n2) <= FULL_CONVOLUTION_LIMIT {
        let (w1, w2) = (e1.weights(), e2.weights());
        let mut values = Vec::with_capacity(n1 * n2);
        let mut weights = Vec::with_capacity(n1 * n2);
        for (a, wa) in e1.values().iter().zip(&w1) {
            for (b, wb) in e2.values().iter().zip(&w2) {
                values.push(a + b);
                weights.push(wa * wb);
            }
        }
        return EmpiricalDist::from_weighted(&values, &weights);
    }
    if n_paths == 0 {
        return Err(Error::Invalid("resampled independent sum needs n_paths >= 1".into()));
    }
    let (d1, d2) = (Distribution::Empirical(e1.clone()), Distribution::Empirical(e2.clone()));
    let (a, b) = (d1.sample(&rng.lane(0), n_paths), d2.sample(&rng.lane(1), n_paths));
    let sums: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    EmpiricalDist::new(&sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{scale_probability_tradeoff, simulate_weighted_sum, WeightVector};
    use proptest::prelude::*;

    fn pareto(alpha: f64) -> Distribution {
        Distribution::pareto(alpha, 1.0).unwrap()
    }

    #[test]
    fn exact_examples() {
        let r = fosd_exact(&pareto(1.0), &pareto(1.0), &GridSpec::default());
        assert_eq!(r.verdict, Verdict::Dominates);
        assert_eq!(r.min_margin, 0.0);
        assert_eq!(r.grid.len(), 2000);

        let shifted = pareto(1.0).affine(1.0, 1.0).unwrap();
        let r = fosd_exact(&pareto(1.0), &shifted, &GridSpec::default());
        assert_eq!(r.verdict, Verdict::Dominates);
        let r = fosd_exact(&shifted, &pareto(1.0), &GridSpec::default());
        assert_eq!(r.verdict, Verdict::Dominated);
    }

    #[test]
    fn exact_tradeoff_pair() {
        let t = scale_probability_tradeoff(0.5, &[0.5], &[0.4]).unwrap();
        let r = fosd_exact(&t.lhs_law().unwrap(), &t.rhs_law().unwrap(), &GridSpec::default());
        assert_eq!(r.verdict, Verdict::Dominates);
        assert!(r.grid.contains(&0.0));
        // The plain Pareto law is not below the right side.
        let r = fosd_exact(&pareto(0.5), &t.rhs_law().unwrap(), &GridSpec::default());
        assert_eq!(r.verdict, Verdict::Dominated);
    }

    #[test]
    fn crossing_laws() {
        // Same median, different spread.
        let a = Distribution::empirical(&[1.0, 2.0, 3.0]).unwrap();
        let b = Distribution::empirical(&[0.0, 2.0, 4.0]).unwrap();
        let r = fosd_exact(&a, &b, &GridSpec::Explicit(vec![0.5, 1.5, 2.5, 3.5]));
        assert_eq!(r.verdict, Verdict::Crossing);
    }

    #[test]
    fn mc_examples() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let r = fosd_mc(&x, &x, 0.01).unwrap();
        assert_eq!(r.min_margin, 0.0);
        assert_eq!(r.verdict, Verdict::Inconclusive);

        let n = 400_000;
        let single = WeightVector::simplex(vec![1.0]).unwrap();
        let pair = WeightVector::simplex(vec![0.5, 0.5]).unwrap();
        let a = simulate_weighted_sum(1.0, &single, &RngStream::new(1, 0), n).unwrap();
        let b = simulate_weighted_sum(1.0, &pair, &RngStream::new(1, 1), n).unwrap();
        let r = fosd_mc_on_grid(&a, &b, 0.01, &[2.0]).unwrap();
        assert_eq!(r.verdict, Verdict::Dominates);
        assert!((r.min_margin - 0.1373).abs() < 0.006);
        assert!(r.band_halfwidth.0 < 0.003);
        assert_eq!(fosd_mc(&a, &b, 0.01).unwrap().verdict, Verdict::Dominates);

        let a2 = simulate_weighted_sum(2.0, &single, &RngStream::new(2, 0), n).unwrap();
        let b2 = simulate_weighted_sum(2.0, &pair, &RngStream::new(2, 1), n).unwrap();
        assert_ne!(fosd_mc(&a2, &b2, 0.01).unwrap().verdict, Verdict::Dominates);
        assert!(fosd_mc(&a, &b, 1.0).is_err());
        assert!(fosd_mc(&[], &b, 0.1).is_err());
    }

    #[test]
    fn bd_examples() {
        let s1: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let shifted_up: Vec<f64> = s1.iter().map(|x| x + 1.0).collect();
        let r = barrett_donald(&s1, &shifted_up).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        let n = 10_000;
        let base = pareto(0.9).sample(&RngStream::new(3, 0), n);
        let up: Vec<f64> = base.iter().map(|x| x + 1.0).collect();
        let r = barrett_donald(&up, &base).unwrap();
        // Oracle: the largest ECDF gap created by the shift.
        let sorted = sorted_copy(&base);
        let gap = (0..n)
            .map(|i| {
                let x = sorted[i];
                let f_base = sorted.partition_point(|&v| v <= x) as f64 / n as f64;
                let f_up = sorted.partition_point(|&v| v <= x - 1.0) as f64 / n as f64;
                f_base - f_up
            })
            .fold(0.0, f64::max);
        assert!((r.statistic - (n as f64 / 2.0).sqrt() * gap).abs() < 1e-9);
        assert!(r.p_value < 1e-6);
        assert!(barrett_donald(&s1[..10], &s1).is_err());
    }

    #[test]
    fn bd_p_value_falls_with_shift() {
        let a = pareto(1.0).sample(&RngStream::new(4, 0), 2000);
        let b = pareto(1.0).sample(&RngStream::new(4, 1), 2000);
        let mut prev = f64::INFINITY;
        for shift in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let moved: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let p = barrett_donald(&moved, &b).unwrap().p_value;
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn sum_constructions() {
        let five = EmpiricalDist::new(&[5.0]).unwrap();
        let (co, ind) = comonotonic_and_independent_sums(&five, &five, &RngStream::new(0, 0), 10).unwrap();
        assert_eq!(co.values(), &[10.0]);
        assert_eq!(ind.values(), &[10.0]);

        let e1 = EmpiricalDist::new(&[1.0, 3.0]).unwrap();
        let e2 = EmpiricalDist::new(&[2.0, 4.0]).unwrap();
        let (co, ind) = comonotonic_and_independent_sums(&e1, &e2, &RngStream::new(0, 0), 10).unwrap();
        assert_eq!(co.values(), &[3.0, 7.0]);
        assert_eq!(co.cumulative(), &[0.5, 1.0]);
        assert_eq!(ind.values(), &[3.0, 5.0, 5.0, 7.0]);
        assert_eq!(ind.weights(), vec![0.25; 4]);
    }

    #[test]
    fn independent_sum_resamples_when_large() {
        let a = EmpiricalDist::new(&pareto(0.9).sample(&RngStream::new(5, 0), 5000)).unwrap();
        let b = EmpiricalDist::new(&pareto(0.9).sample(&RngStream::new(5, 1), 5000)).unwrap();
        let s = independent_sum(&a, &b, &RngStream::new(5, 2), 20_000).unwrap();
        assert_eq!(s.len(), 20_000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn comonotonic_quantiles_add(
            a in proptest::collection::vec(-50.0f64..50.0, 1..40),
            b in proptest::collection::vec(-50.0f64..50.0, 1..40),
            p in 0.001f64..0.999,
        ) {
            let (e1, e2) = (EmpiricalDist::new(&a).unwrap(), EmpiricalDist::new(&b).unwrap());
            let co = Distribution::Empirical(comonotonic_sum(&e1, &e2));
            let q1 = Distribution::Empirical(e1.clone()).quantile(p).unwrap();
            let q2 = Distribution::Empirical(e2.clone()).quantile(p).unwrap();
            prop_assert_eq!(co.quantile(p).unwrap(), q1 + q2);
            for &g in comonotonic_sum(&e1, &e2).cumulative() {
                if g < 1.0 {
                    let q1 = Distribution::Empirical(e1.clone()).quantile(g).unwrap();
                    let q2 = Distribution::Empirical(e2.clone()).quantile(g).unwrap();
                    prop_assert_eq!(co.quantile(g).unwrap(), q1 + q2);
                }
            }
        }

        #[test]
        fn exact_order_is_transitive(t1 in 1.0f64..3.0, d2 in 0.0f64..2.0, d3 in 0.0f64..2.0, alpha in 0.3f64..2.0) {
            let a = Distribution::pareto(alpha, t1).unwrap();
            let b = Distribution::pareto(alpha, t1 + d2).unwrap();
            let c = Distribution::pareto(alpha, t1 + d2 + d3).unwrap();
            let g = GridSpec::default();
            prop_assert_eq!(fosd_exact(&a, &b, &g).verdict, Verdict::Dominates);
            prop_assert_eq!(fosd_exact(&b, &c, &g).verdict, Verdict::Dominates);
            prop_assert_eq!(fosd_exact(&a, &c, &g).verdict, Verdict::Dominates);
        }
    }
}
