//! Averages over larger blocks are stochastically larger when alpha <= 1.

use paretopool::risk_measures::var_of_sorted;
use paretopool::{simulate_block_average, RngStream};

fn main() -> paretopool::Result<()> {
    let (small, large) = simulate_block_average(0.6, 2, 3, &RngStream::new(3, 0), 300_000)?;
    let sort = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v
    };
    let (small, large) = (sort(small), sort(large));
    println!("{:>6} {:>12} {:>12}", "p", "mean of 2", "mean of 6");
    for p in [0.5, 0.9, 0.95, 0.99] {
        println!("{p:>6} {:>12.3} {:>12.3}", var_of_sorted(&small, p)?, var_of_sorted(&large, p)?);
    }
    Ok(())
}
