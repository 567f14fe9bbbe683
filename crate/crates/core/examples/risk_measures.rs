//! VaR, ES, RVaR and distortion risk measures on heavy-tailed laws.

use paretopool::{distortion_rho, es, rvar, var, Distribution, DistortionFn, RiskValue};

fn show(label: &str, v: &RiskValue) {
    match v {
        RiskValue::Finite(x) => println!("  {label}: {x:.4}"),
        RiskValue::Infinite(cert) => println!("  {label}: infinite ({cert})"),
    }
}

fn main() -> paretopool::Result<()> {
    for alpha in [0.8, 2.5] {
        let x = Distribution::pareto(alpha, 1.0)?;
        println!("Pareto({alpha})");
        println!("  VaR_0.99: {:.4}", var(&x, 0.99)?);
        show("ES_0.99", &es(&x, 0.99)?);
        println!("  RVaR_0.9,0.99: {:.4}", rvar(&x, 0.9, 0.99)?);
        show("power distortion 0.5", &distortion_rho(&x, &DistortionFn::power(0.5)?)?);
    }

    // Capping a loss always restores finiteness.
    let capped = Distribution::pareto(0.8, 1.0)?.capped(1e4)?;
    show("ES_0.99 of Pareto(0.8) capped at 1e4", &es(&capped, 0.99)?);

    let gpd = Distribution::gpd(1.19, 774.0, 0.0)?;
    println!("GPD(1.19, 774): VaR_0.99 = {:.1}", var(&gpd, 0.99)?);
    Ok(())
}
