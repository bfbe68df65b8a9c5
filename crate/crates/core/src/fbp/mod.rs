//! Dual optimal stopping problem for a fixed annuity level `A`.
//!
//! The value `ψ̂(y, t)` solves the variational inequality
//! `max(lambda_s ψ̂ - ψ̂_t - (lambda_s - r) y ψ̂_y - m y² ψ̂_yy - c y, ψ̂ - u) = 0`
//! with obstacle `u = min(1, w̄(A,t) y)`. It is stepped backward from `T`
//! on a log-uniform y-grid, one projected SOR solve per step.

mod grid;
mod operator;
mod psor;
mod solve;

pub use grid::{DualGrid, GridSpec};
pub use operator::{assemble_operator, StepOperator, Tridiagonal};
pub use psor::{complementarity_residual, psor_step, PsorOutcome, PsorSettings};
pub use solve::{
    extract_boundaries, solve_obstacle, terminal_boundaries, worst_concavity_defect, Boundaries,
    ContactSet, InvariantReport, ObstacleSolution,
};
