//! Pooling infinite-mean Pareto losses makes the position riskier.
//!
//! ```text
//! cargo run --release --example diversification_penalty
//! ```

use paretopool::portfolio::survival_fraction;
use paretopool::{simulate_weighted_sum, Distribution, RngStream, WeightVector};

const PATHS: usize = 400_000;

fn main() -> paretopool::Result<()> {
    let rng = RngStream::new(11, 0);
    let x = Distribution::pareto(0.8, 1.0)?;

    println!("alpha = 0.8, survival of the average of n losses");
    println!("{:>6} {:>10} {:>10} {:>10}", "t", "n=1", "n=2", "n=8");
    let avg2 = simulate_weighted_sum(0.8, &WeightVector::uniform(2)?, &rng, PATHS)?;
    let avg8 = simulate_weighted_sum(0.8, &WeightVector::uniform(8)?, &rng.with_stream(1), PATHS)?;
    for t in [1.5, 2.0, 5.0, 20.0, 100.0] {
        println!(
            "{t:>6} {:>10.5} {:>10.5} {:>10.5}",
            x.survival(t),
            survival_fraction(&avg2, t),
            survival_fraction(&avg8, t)
        );
    }

    // Unequal weights behave the same way.
    let skew = WeightVector::simplex(vec![0.7, 0.2, 0.1])?;
    let s = simulate_weighted_sum(0.8, &skew, &rng.with_stream(2), PATHS)?;
    println!("\ntheta = (0.7, 0.2, 0.1): P(sum > 10) = {:.5} vs P(X > 10) = {:.5}", survival_fraction(&s, 10.0), x.survival(10.0));
    Ok(())
}
