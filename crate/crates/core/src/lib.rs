//! Equilibrium allocation of workers across productivity sectors.
//!
//! The discrete side finds the most probable occupation vector under fixed
//! worker count and aggregate demand, enumerates and samples the integer
//! states, and generalizes the solution with a statistics parameter `c`. The
//! continuous side is a shifted exponential productivity law with checks of
//! the information principles that produce it, binned comparisons against the
//! discrete ladder, and least-squares fitting of cumulative tail data.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature tables and oracle values keep their tabulated digits.
#![allow(clippy::excessive_precision)]

pub mod discretize;
pub mod epi;
pub mod equilibrium;
pub mod error;
pub mod fit;
pub mod format;
pub mod model;
pub mod quadrature;
pub mod sampler;
pub mod verify;

pub use epi::{Displacement, EpiDistribution};
pub use equilibrium::{solve_boltzmann, solve_generalized, EquilibriumSolution, Multipliers};
pub use error::{Error, Result};
pub use model::{EconomyParams, LadderRatio, OccupationVector};
