use paretopool::dominance::dkw_halfwidth;
use paretopool::portfolio::survival_fraction;
use paretopool::{
    fosd_mc, gpd_as_pareto, hill, simulate_collective, simulate_weighted_sum, ClaimCount, CollectiveModel,
    Distribution, GpdDist, ParetoDist, RngStream, TailParetoDist, WeightLaw, WeightVector,
};
use proptest::prelude::*;

fn variants() -> Vec<(&'static str, Distribution)> {
    let pareto = Distribution::pareto(0.8, 2.0).unwrap();
    let body = Distribution::pareto(3.0, 1.0).unwrap();
    vec![
        ("pareto", pareto.clone()),
        ("gpd", Distribution::gpd(1.2, 300.0, 5.0).unwrap()),
        ("exponential gpd", Distribution::gpd(0.0, 2.0, 0.0).unwrap()),
        ("tail pareto", TailParetoDist::new(0.7, 3.0, body).unwrap().into()),
        ("empirical", Distribution::empirical(&[3.0, 1.0, 2.0, 2.0, 7.5]).unwrap()),
        ("capped", pareto.clone().capped(10.0).unwrap()),
        ("floored", pareto.clone().floored(5.0).unwrap()),
        ("excess", pareto.clone().excess_of(4.0).unwrap()),
        ("affine", pareto.clone().affine(3.0, -1.0).unwrap()),
        (
            "mixture",
            Distribution::mixture(vec![
                (0.3, Distribution::point_mass(0.0).unwrap()),
                (0.7, Distribution::pareto(0.5, 1.0).unwrap()),
            ])
            .unwrap(),
        ),
    ]
}

#[test]
fn quantile_and_cdf_are_an_inverse_pair() {
    for (name, d) in variants() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let q = d.quantile(p).unwrap();
            let eps = 1e-9 * q.abs().max(1.0);
            // closed forms round by a few ulps
            assert!(d.cdf(q) >= p - 4.0 * f64::EPSILON, "{name}: F(Q({p})) = {} < p", d.cdf(q));
            assert!(d.cdf(q - eps) < p, "{name}: F(Q({p}) - eps) = {} >= p", d.cdf(q - eps));
        }
    }
}

#[test]
fn transformed_quantiles() {
    let base = Distribution::pareto(0.6, 1.0).unwrap();
    let capped = base.clone().capped(25.0).unwrap();
    let excess = base.clone().excess_of(3.0).unwrap();
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        let q = base.quantile(p).unwrap();
        assert_eq!(capped.quantile(p).unwrap(), q.min(25.0));
        let e = excess.quantile(p).unwrap();
        assert!((e - (q - 3.0).max(0.0)).abs() <= 1e-12 * q.max(1.0), "p={p}");
    }
}

#[test]
fn gpd_round_trip_survival() {
    for (xi, beta, mu) in [(1.19, 774.0, 0.0), (0.5, 2.0, 1.0), (2.0, 0.3, -4.0)] {
        let g = GpdDist::new(xi, beta, mu).unwrap();
        let (p, map) = gpd_as_pareto(&g).unwrap();
        for i in 0..400 {
            let x = mu + beta * 10f64.powf(-3.0 + 9.0 * i as f64 / 399.0);
            assert!((g.survival(x) - p.survival(map.invert(x))).abs() < 1e-12, "x={x}");
        }
    }
}

#[test]
fn sampling_does_not_depend_on_thread_count() {
    let d = Distribution::gpd(1.1, 10.0, 0.0).unwrap();
    let rng = RngStream::new(99, 4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let s = d.sample(&rng, 50_000);
                let w = simulate_weighted_sum(0.7, &WeightVector::uniform(3).unwrap(), &rng, 50_000).unwrap();
                (s, w)
            })
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(5));
}

#[test]
fn weighted_sums_exceed_the_single_loss() {
    let mut r = RngStream::new(5, 77).path(0);
    let n = 200_000;
    let band = dkw_halfwidth(n, 0.01);
    let grid: Vec<f64> = (1..=60).map(|i| 1.0 + 0.25 * i as f64).collect();
    for (case, alpha) in [0.3, 0.5, 0.8, 1.0].into_iter().cycle().take(12).enumerate() {
        let k = 2 + case % 5;
        let raw: Vec<f64> = (0..k).map(|_| r.next_uniform()).collect();
        let s: f64 = raw.iter().sum();
        let theta = WeightVector::simplex(raw.iter().map(|x| x / s).collect()).unwrap();
        let paths = simulate_weighted_sum(alpha, &theta, &RngStream::new(40, case as u32), n).unwrap();
        for &t in &grid {
            let lower = t.powf(-alpha) - band;
            assert!(survival_fraction(&paths, t) >= lower, "alpha={alpha} k={k} t={t}");
        }
    }
}

#[test]
fn strict_gap_at_two_with_random_weights() {
    let n = 1_000_000;
    let mut r = RngStream::new(6, 0).path(0);
    for (i, alpha) in [0.5, 1.0].into_iter().enumerate() {
        let a = 0.1 + 0.8 * r.next_uniform();
        let theta = WeightVector::simplex(vec![a, 1.0 - a]).unwrap();
        let paths = simulate_weighted_sum(alpha, &theta, &RngStream::new(61, i as u32), n).unwrap();
        let s = survival_fraction(&paths, 2.0);
        let se = (s * (1.0 - s) / n as f64).sqrt();
        assert!(s - 2f64.powf(-alpha) > 3.0 * se, "alpha={alpha} theta={a}");
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn collective_average_given_n_matches_the_simplex_sum() {
    let model = CollectiveModel::new(ClaimCount::Poisson(2.0), WeightLaw::PointMass(1.0), ParetoDist::standard(0.8).unwrap())
        .unwrap();
    let c = simulate_collective(&model, &RngStream::new(12, 0), 200_000).unwrap();
    for k in [1u64, 2, 3] {
        let cond: Vec<f64> = c
            .counts
            .iter()
            .zip(&c.averages)
            .filter(|(n, _)| **n == k)
            .map(|(_, a)| *a)
            .collect();
        let reference = simulate_weighted_sum(0.8, &WeightVector::uniform(k as usize).unwrap(), &RngStream::new(13, k as u32), 50_000)
            .unwrap();
        let (n1, n2) = (cond.len() as f64, reference.len() as f64);
        // 5% family level over the three k
        let critical = (-0.5 * (0.05f64 / 6.0).ln()).sqrt() * ((n1 + n2) / (n1 * n2)).sqrt();
        let d = ks(&cond, &reference);
        assert!(d < critical, "k={k}: D={d} critical={critical}");
    }
}

#[test]
fn mc_margin_is_stable_across_seeds() {
    let n = 20_000;
    let single = |seed| Distribution::pareto(0.8, 1.0).unwrap().sample(&RngStream::new(seed, 1), n);
    let pooled = |seed| simulate_weighted_sum(0.8, &WeightVector::uniform(2).unwrap(), &RngStream::new(seed, 0), n).unwrap();
    let base = fosd_mc(&single(0), &pooled(0), 0.01).unwrap();
    let band = base.band_halfwidth.0 + base.band_halfwidth.1;
    let stable = (1..=100)
        .filter(|&s| (fosd_mc(&single(s), &pooled(s), 0.01).unwrap().min_margin - base.min_margin).abs() < 2.0 * band)
        .count();
    assert!(stable >= 95, "{stable}/100");
}

#[test]
fn hill_coverage_at_alpha_07() {
    let d = Distribution::pareto(0.7, 1.0).unwrap();
    let covered = (0..500u32)
        .filter(|&rep| hill(&d.sample(&RngStream::new(70, rep), 5000), 250).unwrap().covers(0.7))
        .count();
    assert!(covered >= 450, "{covered}/500");
}

#[test]
fn hill_tracks_alpha_across_k() {
    let n = 20_000;
    let xs = Distribution::pareto(1.2, 1.0).unwrap().sample(&RngStream::new(71, 0), n);
    for h in paretopool::hill_plot(&xs, n / 50, n / 10).unwrap() {
        assert!((h.alpha_hat - 1.2).abs() < 0.1 * 1.2 / 0.8f64.max(1.0) + 0.1, "k={} {}", h.k, h.alpha_hat);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sample_is_a_pointwise_function_of_the_stream(seed in any::<u64>(), stream in 0u32..1000, n in 1usize..300) {
        let d = Distribution::pareto(0.9, 1.0).unwrap();
        let full = d.sample(&RngStream::new(seed, stream), n);
        let prefix = d.sample(&RngStream::new(seed, stream), n / 2);
        prop_assert_eq!(&full[..n / 2], &prefix[..]);
    }
}
