//! Hill estimates of the tail index over a range of thresholds.

use paretopool::estimation::hill_top_five_percent;
use paretopool::{hill_plot, Distribution, RngStream};

fn main() -> paretopool::Result<()> {
    let xs = Distribution::pareto(0.8, 1.0)?.sample(&RngStream::new(10, 0), 10_000);
    for h in hill_plot(&xs, 100, 1000)?.iter().step_by(150) {
        println!("k={:<5} alpha {:.3}  [{:.3}, {:.3}]  threshold {:.2}", h.k, h.alpha_hat, h.ci_low, h.ci_high, h.threshold);
    }
    let h = hill_top_five_percent(&xs)?;
    println!("top 5%: k={} alpha {:.3}", h.k, h.alpha_hat);
    Ok(())
}
