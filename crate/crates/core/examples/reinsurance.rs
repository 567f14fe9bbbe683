//! Capped losses: per-loss and aggregate excess-of-loss limits.

use paretopool::portfolio::survival_fraction;
use paretopool::{reinsurance_variants, Caps, RngStream, WeightVector};

fn main() -> paretopool::Result<()> {
    let theta = WeightVector::uniform(2)?;
    let rng = RngStream::new(2, 0);
    let per_loss = reinsurance_variants(0.8, &theta, &Caps::PerLoss(vec![50.0, 50.0]), &rng, 300_000)?;
    let aggregate = reinsurance_variants(0.8, &theta, &Caps::Aggregate(50.0), &rng, 300_000)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "t", "per-loss", "uncapped", "aggregate", "X cap");
    for t in [2.0, 5.0, 20.0, 49.0] {
        println!(
            "{t:>6} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            survival_fraction(&per_loss.capped, t),
            survival_fraction(&per_loss.reference, t),
            survival_fraction(&aggregate.capped, t),
            survival_fraction(&aggregate.reference, t)
        );
    }
    Ok(())
}
