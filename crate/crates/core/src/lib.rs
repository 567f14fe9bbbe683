//! Stochastic dominance, distortion risk measures and risk-exchange
//! equilibria for portfolios of infinite-mean Pareto-type losses.

pub mod distributions;
pub mod dominance;
pub mod equilibrium;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod portfolio;
pub mod risk_measures;
pub mod rng;

pub use distributions::{
    gpd_as_pareto, AffineMap, Distribution, EmpiricalDist, GpdDist, MixtureDist, ParetoDist,
    TailBehavior, TailParetoDist,
};
pub use dominance::{
    barrett_donald, comonotonic_and_independent_sums, fosd_exact, fosd_mc, BDTestResult,
    DominanceReport, GridSpec, Verdict,
};
pub use equilibrium::{
    es_proportional_equilibrium, internal_equilibrium_check, internal_necessary_check,
    quadratic_closed_form, solve_external, AgentSpec, CostFn, EquilibriumKind, EquilibriumResult,
    ExternalMarket,
};
pub use error::{Error, Result};
pub use estimation::{hill, hill_plot, load_losses, Column, HillEstimate};
pub use portfolio::{
    reinsurance_variants, scale_probability_tradeoff, simulate_block_average, simulate_collective,
    simulate_model_b, simulate_weighted_sum, Caps, ClaimCount, CollectiveModel, Dependence,
    TriggerModel, WeightLaw, WeightVector,
};
pub use rng::{PathRng, RngStream};
pub use risk_measures::{
    distortion_rho, es, is_mildly_monotone, rvar, var, DistortionFn, DivergenceCertificate,
    RiskValue,
};
