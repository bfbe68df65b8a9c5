//! Implicit finite-difference operator for
//! `lambda_s ψ = ψ_t + (lambda_s - r) y ψ_y + m y² ψ_yy + c y`.
//!
//! In `x = ln y` the equation has constant coefficients,
//! `lambda_s ψ - ψ_t - m ψ_xx - (lambda_s - r - m) ψ_x - c e^x = 0`,
//! discretized with central differences in `x` and backward Euler in `t`.
//! The first and last rows are Dirichlet rows.

use crate::error::{Result, RuinError};
use crate::model::ModelParams;

use super::grid::DualGrid;

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Row `i` of `M x`.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = self.diag[i] * x[i];
        if i > 0 {
            s += self.lower[i] * x[i - 1];
        }
        if i + 1 < x.len() {
            s += self.upper[i] * x[i + 1];
        }
        s
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| self.row_dot(i, x)).collect()
    }
}

/// One backward Euler step `M ψ^k = ψ^{k+1} / dt + c y` on the interior rows.
#[derive(Debug, Clone)]
pub struct StepOperator {
    pub matrix: Tridiagonal,
    dt: f64,
    /// Running penalty `c y_i`.
    source: Vec<f64>,
    /// Spatial coefficients shared by every interior row.
    coef_lower: f64,
    coef_center: f64,
    coef_upper: f64,
    lambda_s: f64,
}

impl StepOperator {
    /// Right-hand side for the step that starts from `next` (values at `t_{k+1}`).
    /// Boundary entries are overwritten with the Dirichlet data.
    pub fn rhs(&self, next: &[f64], left: f64, right: f64) -> Vec<f64> {
        let n = next.len();
        let mut q: Vec<f64> = next
            .iter()
            .zip(&self.source)
            .map(|(v, s)| v / self.dt + s)
            .collect();
        q[0] = left;
        q[n - 1] = right;
        q
    }

    /// Stationary residual `lambda_s ψ - L ψ - c y` on interior nodes (zero at the ends).
    pub fn stationary_residual(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let gen = self.coef_lower * values[i - 1]
                + self.coef_center * values[i]
                + self.coef_upper * values[i + 1];
            out[i] = self.lambda_s * values[i] - gen - self.source[i];
        }
        out
    }

    /// Spatial part `(lambda_s - r) y ψ_y + m y² ψ_yy` on interior nodes.
    pub fn spatial_part(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            out[i] = self.coef_lower * values[i - 1]
                + self.coef_center * values[i]
                + self.coef_upper * values[i + 1];
        }
        out
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

pub fn assemble_operator(grid: &DualGrid, p: &ModelParams) -> Result<StepOperator> {
    let n = grid.n_y();
    let h = grid.dx();
    let dt = grid.dt();
    let m = p.m();
    let drift = p.lambda_s - p.r - m;
    let diff = m / (h * h);
    let conv = drift / (2.0 * h);
    let coef_lower = diff - conv;
    let coef_upper = diff + conv;
    let coef_center = -2.0 * diff;

    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        lower[i] = -coef_lower;
        upper[i] = -coef_upper;
        diag[i] = 1.0 / dt + p.lambda_s - coef_center;
        if lower[i] > 0.0 || upper[i] > 0.0 {
            return Err(RuinError::NotDominant {
                row: i,
                diag: diag[i],
                lower: lower[i],
                upper: upper[i],
            });
        }
    }
    let source = grid.y_nodes().iter().map(|y| p.c * y).collect();
    Ok(StepOperator {
        matrix: Tridiagonal { lower, diag, upper },
        dt,
        source,
        coef_lower,
        coef_center,
        coef_upper,
        lambda_s: p.lambda_s,
    })
}
