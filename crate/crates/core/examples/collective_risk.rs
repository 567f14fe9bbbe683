//! Weighted average claim of a compound book against a single claim.

use paretopool::{fosd_mc, simulate_collective, ClaimCount, CollectiveModel, ParetoDist, RngStream, WeightLaw};

fn main() -> paretopool::Result<()> {
    let model = CollectiveModel::new(
        ClaimCount::Poisson(3.0),
        WeightLaw::LogNormal { mu: 0.0, sigma: 0.5 },
        ParetoDist::standard(0.9)?,
    )?;
    let paths = simulate_collective(&model, &RngStream::new(21, 0), 300_000)?;
    let mean_n = paths.counts.iter().sum::<u64>() as f64 / paths.counts.len() as f64;
    println!("mean claim count {mean_n:.3}");
    let r = fosd_mc(&paths.benchmark, &paths.averages, 0.01)?;
    println!("single claim vs weighted average: {} (min margin {:.5})", r.verdict, r.min_margin);
    Ok(())
}
