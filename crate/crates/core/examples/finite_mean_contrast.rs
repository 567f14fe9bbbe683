//! With a finite mean the ordering flips in the tail.

use paretopool::portfolio::survival_fraction;
use paretopool::{simulate_weighted_sum, RngStream, WeightVector};

fn main() -> paretopool::Result<()> {
    let n = 1_000_000;
    let theta = WeightVector::uniform(2)?;
    for alpha in [1.0, 2.0] {
        let avg = simulate_weighted_sum(alpha, &theta, &RngStream::new(5, 0), n)?;
        println!("alpha = {alpha}");
        for t in [1.5, 2.0, 4.0, 8.0] {
            let s = survival_fraction(&avg, t);
            let se = (s * (1.0 - s) / n as f64).sqrt();
            let single = t.powf(-alpha);
            println!("  t={t:<4} avg {s:.5}  single {single:.5}  diff/se {:+.1}", (s - single) / se);
        }
    }
    Ok(())
}
