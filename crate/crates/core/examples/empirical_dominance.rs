//! Comonotonic against independent sums of two loss samples.

use paretopool::experiments::{empirics, RunConfig};
use paretopool::{Distribution, RngStream};

fn main() -> paretopool::Result<()> {
    let x1 = Distribution::pareto(0.9, 1.0)?.sample(&RngStream::new(1, 0), 5_000);
    let x2 = Distribution::pareto(0.9, 1.0)?.sample(&RngStream::new(2, 0), 5_000);
    let cfg = RunConfig {
        paths: 200_000,
        ..RunConfig::default()
    };
    let out = empirics(&x1, &x2, 10_000, &cfg)?;
    println!("Barrett-Donald: statistic {:.4}, p-value {:.4}", out.bd.statistic, out.bd.p_value);
    for &(p, q_sum, sum_q) in out.quantiles.iter().filter(|r| [0.5, 0.9, 0.99, 0.999].contains(&r.0)) {
        println!("p={p:<6} independent {q_sum:>12.2}  comonotonic {sum_q:>12.2}");
    }
    println!("Hill: {:.3} and {:.3}", out.hill1.alpha_hat, out.hill2.alpha_hat);
    Ok(())
}
