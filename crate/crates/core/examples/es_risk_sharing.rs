//! Expected-shortfall agents share the pooled loss proportionally.

use paretopool::{es_proportional_equilibrium, RngStream};

fn main() -> paretopool::Result<()> {
    let eq = es_proportional_equilibrium(&[1.0, 2.0, 3.0], 2.0, 0.9, &RngStream::new(4, 0), 500_000)?;
    for (i, (p, se)) in eq.prices.iter().zip(&eq.price_stderr).enumerate() {
        println!("loss {i}: price {p:.4} ± {se:.4}");
    }
    println!("sum a_i p_i = {:.4}, ES of the pool = {:.4} ± {:.4}", eq.euler_sum(), eq.es_total, eq.es_stderr);

    let w = eq.allocations[0].clone();
    let base = eq.objective(0, &w)?;
    for eps in [-0.05, 0.05] {
        let mut v = w.clone();
        v[0] += eps;
        println!("agent 0, shift {eps:+}: objective {:.5} (at equilibrium {base:.5})", eq.objective(0, &v)?);
    }
    Ok(())
}
