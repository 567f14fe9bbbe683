//! Losses that are Pareto only above a threshold.

use paretopool::experiments::{DominanceModel, Params, RunConfig};
use paretopool::{Distribution, TailParetoDist};

fn main() -> paretopool::Result<()> {
    // Light body below 3, Pareto(0.7) tail above.
    let body = Distribution::pareto(3.0, 1.0)?;
    let y = TailParetoDist::new(0.7, 3.0, body)?;
    println!("body lies above the Pareto(0.7) survival: {}", y.dominates_pareto());
    for t in [1.0, 2.0, 3.0, 10.0] {
        println!("  S({t}) = {:.5}", y.survival(t));
    }

    let params = Params::parse("model=tail\nalpha=0.7\nthreshold=3\nbody_alpha=3")?;
    let cfg = RunConfig {
        paths: 200_000,
        ..RunConfig::default()
    };
    let report = DominanceModel::from_params(&params)?.run(&cfg)?;
    println!("Y vs the average of two copies above t = 3: {}", report.verdict);
    Ok(())
}
