//! Projected SOR for the upper-obstacle linear complementarity problem
//!
//! ```text
//! x <= u,   M x <= q,   (M x - q)_i (x - u)_i = 0,
//! ```
//!
//! i.e. `max(M x - q, x - u) = 0` componentwise.

use super::operator::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorSettings {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PsorSettings {
    fn default() -> Self {
        PsorSettings {
            omega: 1.5,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

impl PsorSettings {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.omega > 1.0 && self.omega < 2.0) {
            out.push(format!("psor.omega = {} must lie in (1, 2)", self.omega));
        }
        if !(self.tol > 0.0) {
            out.push(format!("psor.tol = {} must be > 0", self.tol));
        }
        if self.max_iter == 0 {
            out.push("psor.max_iter must be >= 1".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorOutcome {
    pub iterations: usize,
    /// Final value of [`complementarity_residual`].
    pub residual: f64,
    pub converged: bool,
}

/// `max_i |max((M x - q)_i / M_ii, x_i - u_i)|`: zero exactly at an LCP solution,
/// measured in units of `x`.
pub fn complementarity_residual(m: &Tridiagonal, q: &[f64], obstacle: &[f64], x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let pde = (m.row_dot(i, x) - q[i]) / m.diag[i];
        let slack = x[i] - obstacle[i];
        worst = worst.max(pde.max(slack).abs());
    }
    worst
}

/// Solve the LCP in place, starting from `x`. The caller keeps the best
/// iterate if `converged` is false.
pub fn psor_step(
    m: &Tridiagonal,
    q: &[f64],
    obstacle: &[f64],
    x: &mut [f64],
    settings: &PsorSettings,
) -> PsorOutcome {
    let n = x.len();
    assert!(n >= 2 && q.len() == n && obstacle.len() == n && m.len() == n);
    for (xi, ui) in x.iter_mut().zip(obstacle) {
        *xi = xi.min(*ui);
    }
    let omega = settings.omega;
    let mut residual = complementarity_residual(m, q, obstacle, x);
    let mut iterations = 0;
    while residual >= settings.tol && iterations < settings.max_iter {
        iterations += 1;
        // first and last rows separately so the interior loop has no branches
        let gs = (q[0] - m.upper[0] * x[1]) / m.diag[0];
        x[0] = (x[0] + omega * (gs - x[0])).min(obstacle[0]);
        for i in 1..n - 1 {
            let gs = (q[i] - m.lower[i] * x[i - 1] - m.upper[i] * x[i + 1]) / m.diag[i];
            x[i] = (x[i] + omega * (gs - x[i])).min(obstacle[i]);
        }
        let gs = (q[n - 1] - m.lower[n - 1] * x[n - 2]) / m.diag[n - 1];
        x[n - 1] = (x[n - 1] + omega * (gs - x[n - 1])).min(obstacle[n - 1]);
        residual = complementarity_residual(m, q, obstacle, x);
    }
    PsorOutcome {
        iterations,
        residual,
        converged: residual < settings.tol,
    }
}
