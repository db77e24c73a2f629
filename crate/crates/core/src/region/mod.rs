//! Policies, single-letter evaluation and the forward-rate search.

mod evaluate;
mod objective;
mod optimize;
mod policy;

pub use evaluate::{assemble_joint, bayes_decoder, evaluate_point, Decoder, OperatingPoint};
pub use optimize::{minimize_r1, sweep_gamma, OptimizerConfig, Optimum, SweepPoint, Targets, FEASIBILITY_TOL};
pub use policy::{cardinality_bounds, default_cardinalities, Policy, DEFAULT_MAX_V};
