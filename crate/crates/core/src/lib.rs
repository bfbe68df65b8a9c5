//! Minimum probability of lifetime ruin for an investor who can buy deferred
//! life annuities.
//!
//! The pipeline: [`fbp`] solves the dual optimal stopping problem with
//! projected SOR, [`dual`] maps it back to wealth space by a Legendre
//! transform and checks the result, and [`simulate`] re-estimates the ruin
//! probability by Monte Carlo under the computed strategy. [`model`] holds the
//! closed forms everything is tested against.

pub mod cli;
pub mod dual;
pub mod error;
pub mod fbp;
pub mod model;
pub mod par;
pub mod simulate;

pub use error::{Result, RuinError};
pub use model::{AnnuityState, ModelParams};
