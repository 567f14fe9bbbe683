//! Price certificates in a market of agents holding iid losses.

use paretopool::equilibrium::{internal_equilibrium, ExposureRange};
use paretopool::{internal_equilibrium_check, internal_necessary_check, AgentSpec, CostFn, ParetoDist};

fn main() -> paretopool::Result<()> {
    // VaR agents without trading costs.
    let (alpha, q) = (0.8, 0.96);
    let rho = ParetoDist::standard(alpha)?.quantile(q)?;
    let agents = vec![AgentSpec::new(rho, CostFn::Zero, 1.0)?; 3];
    for p in [rho - 1e-6, rho, rho + 1e-6] {
        println!("p = {p:.8}: equilibrium {}", internal_equilibrium_check(&agents, p)?.is_equilibrium_price);
    }

    // A kinked cost opens an interval of prices.
    let kinked = vec![AgentSpec::new(10.0, CostFn::Excess(1.0), 1.0)?; 2];
    let r = internal_equilibrium(&kinked, 10.5, ExposureRange::Unbounded)?.expect("10.5 is inside the interval");
    println!("excess cost: prices in {:?}, allocations {:?}", r.price_interval.unwrap(), r.internal_allocations);

    // Spread exposures: the necessary condition is weaker than the sufficient one.
    let spread = vec![
        AgentSpec::new(10.0, CostFn::Quadratic(1.0), 1.0)?,
        AgentSpec::new(14.0, CostFn::Quadratic(1.0), 3.0)?,
    ];
    println!(
        "p = 14: necessary {}, sufficient {}",
        internal_necessary_check(&spread, 14.0)?,
        internal_equilibrium_check(&spread, 14.0)?.is_equilibrium_price
    );
    Ok(())
}
