//! Internal agents passing risk to a larger pool of external agents.

use paretopool::{quadratic_closed_form, solve_external, AgentSpec, CostFn, ExternalMarket};

fn main() -> paretopool::Result<()> {
    println!("{:>4} {:>10} {:>10} {:>10} {:>8}", "k", "price", "u*", "w", "unique");
    for k in [1, 2, 5, 10, 100] {
        let market = ExternalMarket {
            internal: AgentSpec::new(20.0, CostFn::Quadratic(1.0), 10.0)?,
            external_rho: 10.0,
            external_cost: CostFn::Quadratic(1.0),
            n: 4,
            k,
        };
        let r = solve_external(&market)?;
        let (p, _, _) = quadratic_closed_form(1.0, 1.0, 20.0, 10.0, k, 10.0)?;
        assert!((r.price - p).abs() < 1e-8);
        println!(
            "{k:>4} {:>10.5} {:>10.5} {:>10.5} {:>8}",
            r.price, r.external_exposure, r.internal_exposure, r.unique_allocation
        );
    }

    let same = ExternalMarket {
        internal: AgentSpec::new(10.0, CostFn::Quadratic(1.0), 10.0)?,
        external_rho: 10.0,
        external_cost: CostFn::Quadratic(1.0),
        n: 4,
        k: 1,
    };
    println!("equal risk assessments: {}", solve_external(&same)?.kind);
    Ok(())
}
