//! Exact finite-alphabet probability machinery.
//!
//! Tables are dense and row-major: the last variable of a [`JointPmf`] and the
//! last output of a [`Kernel`] vary fastest. All logarithms are base 2.

mod alphabet;
mod info;
mod joint;
mod kernel;

pub use alphabet::Alphabet;
pub use info::{
    binary_entropy, check_markov, conditional_mutual_information, entropy, mutual_information,
    MarkovCheck, MARKOV_NULL_EVENT,
};
pub use joint::JointPmf;
pub use kernel::{Kernel, Pmf};
pub(crate) use info::clamp_rounding;
pub(crate) use kernel::advance as kernel_advance;

/// Tolerance on the total mass of pmfs and kernel rows at construction.
pub const NORMALIZATION_TOL: f64 = 1e-12;

pub(crate) fn product(dims: &[usize]) -> usize {
    dims.iter().product()
}
