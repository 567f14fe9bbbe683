//! Losses that occur only when a trigger event happens.

use paretopool::{
    fosd_exact, fosd_mc, scale_probability_tradeoff, simulate_model_b, Dependence, GridSpec, RngStream, TriggerModel,
    WeightVector,
};

fn main() -> paretopool::Result<()> {
    let theta = WeightVector::simplex(vec![0.4, 0.3, 0.3])?;
    for dep in [Dependence::Independent, Dependence::Common, Dependence::Mixture(0.5)] {
        let triggers = TriggerModel::new(vec![0.2, 0.1, 0.3], dep)?;
        let b = simulate_model_b(0.7, &theta, &triggers, None, &RngStream::new(8, 0), 400_000)?;
        let r = fosd_mc(&b.benchmark, &b.portfolio, 0.01)?;
        println!("{dep:?}: P(A) = {:.3}, verdict {}", b.benchmark_prob, r.verdict);
    }

    // Scaling a loss down while making it more likely.
    let pair = scale_probability_tradeoff(0.7, &[0.5, 0.8], &[0.1, 0.2])?;
    let r = fosd_exact(&pair.lhs_law()?, &pair.rhs_law()?, &GridSpec::default());
    println!("trade-off pair, exact comparison: {} (P(A) = {:.4})", r.verdict, pair.prob_a());
    Ok(())
}
