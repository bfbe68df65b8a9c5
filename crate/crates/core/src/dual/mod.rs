//! From the dual stopping problem back to wealth space.
//!
//! `Ψ(w, A, t) = max_{y >= 0} [ψ̂(y, A, t) - w y]` is the minimum probability
//! of lifetime ruin, provided the annuitization inequality
//! `ψ̂_A + y ᾱ(t) >= 0` holds; [`validate_ineq`] measures it on an A-sweep
//! instead of assuming it.

mod legendre;
mod surface;
mod sweep;
mod verify;

pub use legendre::{legendre_transform, ConjugateSlice, CONCAVITY_TOL};
pub use surface::{strategy_field, RuinSurface, DEFAULT_N_W};
pub use sweep::{
    ruin_probability, solve_sweep, uniform_a_nodes, validate_ineq, SweepResult, DEFAULT_A_NODES,
    TOL_INEQ,
};
pub use verify::{
    check_verification_conditions, VerificationReport, TOL_BOUNDARY, TOL_HJB, TOL_TERMINAL,
};
