//! Rate-distortion-cost machinery for two-way source coding with a
//! side-information "vending machine".
//!
//! Node 1 observes a (possibly noisy) source `Z` of `X` and sends a message to
//! Node 2, which picks actions `A` that control the side information `Y` it
//! acquires, reconstructs a function of the source, and answers Node 1 on a
//! backward link. An optional Node 3 receives the forward message but never
//! acquires side information.
//!
//! The crate is split along the path from statistics to numbers:
//!
//! - [`prob`]: finite-alphabet pmfs, kernels, joint tables and the exact
//!   information functionals over them.
//! - [`model`]: problem instances ([`ProblemSpec`]) and the binary erasure
//!   example.
//! - [`region`]: policies, single-letter rate evaluation, Bayes decoders and a
//!   penalty-method search for the minimum forward rate.
//! - [`closed_form`]: closed-form rate-cost curves and known-optimal policies
//!   for the erasure example.
//! - [`sim`]: Monte Carlo block simulation of the operational erasure schemes
//!   with enumerative bit accounting.
//!
//! The crate is `no_std` (with `alloc`) when built without default features.
//! The `parallel` feature runs optimizer restarts and simulation trials on a
//! rayon pool; results do not depend on scheduling.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod closed_form;
mod error;
mod math;
pub mod model;
pub mod prob;
pub mod region;
pub mod sim;

pub use error::{Error, Result};
pub use model::{DistortionTable, ErasureParams, Mode, ProblemSpec, SpecParts};
pub use prob::{Alphabet, JointPmf, Kernel, MarkovCheck, Pmf};
pub use region::{OperatingPoint, OptimizerConfig, Optimum, Policy, Targets};
pub use sim::{Scheme, SimConfig, SimResult};

/// Variable names used in assembled joints.
pub mod var {
    pub const X: &str = "X";
    pub const Z: &str = "Z";
    pub const A: &str = "A";
    pub const U: &str = "U";
    pub const XHAT3: &str = "X3";
    pub const Y: &str = "Y";
    pub const V: &str = "V";
}
