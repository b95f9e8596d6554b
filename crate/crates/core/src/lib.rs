//! Numerical engine for continuous-time Markov multi-state life-insurance
//! contracts: Thiele solvers under arbitrary technical bases, classification
//! of bases by boundary conditions, equivalence-principle pricing, surplus
//! decomposition into initial, loading, systematic and martingale
//! components, and counting-process simulation for stochastic verification.

pub mod basis;
pub mod casebook;
pub mod config;
pub mod contract;
pub mod error;
pub mod grid;
pub mod intensity;
pub mod markov;
mod ode;
pub mod report;
pub mod sim;
pub mod surplus;
pub mod thiele;
pub mod timefn;

pub use basis::{
    classify, contractual_premium, hoem_retrospective, pure_premium, wolthuis_retrospective,
    AugmentedValuationBasis, BasisClass, Designations, PurePremium, TechnicalBasis,
};
pub use contract::{Contract, PremiumPattern, PremiumRates};
pub use error::{EngineError, Result};
pub use grid::{StatewiseFunction, TimeGrid};
pub use intensity::{total_exit_intensity, IntensityFamily, IntensityFunction};
pub use markov::{no_exit_probability, occupancy_matrix, SquareMatrix};
pub use sim::{
    martingale_residual, monte_carlo, path_gamma_l, path_gamma_la, pathwise_key_identity,
    pathwise_prop2_check, simulate_path, McEstimate, SamplePath, SeedPolicy,
};
pub use surplus::{
    corollary3_report, expected_gamma_l, expected_gamma_la, initial_surplus, loading_epv,
    premium_decomposition, surplus_epv_report, systematic_surplus_epv, Cor3Report,
    InitialSurplus, PremiumDecomposition, SurplusEpvReport,
};
pub use thiele::{solve_backward, solve_forward, sums_at_risk, surplus_rates, SumsAtRisk};
pub use timefn::TimeFunction;
