//! VaR of a sum of GPD business lines against the sum of their VaRs.

use paretopool::experiments::{figure4, figure4_p_grid, RunConfig, DEFAULT_GPD_BETA, DEFAULT_GPD_XI};
use paretopool::{gpd_as_pareto, GpdDist};

fn main() -> paretopool::Result<()> {
    let (pareto, map) = gpd_as_pareto(&GpdDist::new(DEFAULT_GPD_XI[0], DEFAULT_GPD_BETA[0], 0.0)?)?;
    println!("line 0 is {:.3} * Pareto({:.3}) {:+.1}", map.scale, pareto.alpha(), map.shift);

    let cfg = RunConfig {
        paths: 500_000,
        ..RunConfig::default()
    };
    println!("{:>6} {:>14} {:>14} {:>14}", "p", "VaR of sum", "sum of VaRs", "gap");
    for r in figure4(&DEFAULT_GPD_XI, &DEFAULT_GPD_BETA, &figure4_p_grid(), &cfg)? {
        println!("{:>6} {:>14.0} {:>14.0} {:>14.0}", r.p, r.var_of_sum, r.sum_of_vars, r.gap);
    }
    Ok(())
}
