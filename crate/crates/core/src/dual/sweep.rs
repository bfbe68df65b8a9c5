use std::sync::Arc;

use crate::error::{Result, RuinError};
use crate::fbp::{solve_obstacle, DualGrid, GridSpec, ObstacleSolution, PsorSettings};
use crate::model::{phi, safe_level_unchecked, AnnuityState, ModelParams};
use crate::par::{map_indexed, Execution};

use super::surface::RuinSurface;

/// Absolute tolerance on the annuitization inequality margin.
pub const TOL_INEQ: f64 = 1e-6;
/// Default number of annuity levels in a sweep over `[0, c]`.
pub const DEFAULT_A_NODES: usize = 11;

pub fn uniform_a_nodes(n: usize, p: &ModelParams) -> Vec<AnnuityState> {
    assert!(n >= 2);
    (0..n)
        .map(|j| {
            let a = if j == n - 1 {
                p.c
            } else {
                p.c * j as f64 / (n - 1) as f64
            };
            AnnuityState::new(a, p).expect("node inside [0, c]")
        })
        .collect()
}

/// Solve the stopping problem for every level on one shared grid.
pub fn solve_sweep(
    a_nodes: &[AnnuityState],
    p: &ModelParams,
    spec: &GridSpec,
    psor: &PsorSettings,
    exec: Execution,
) -> Result<Vec<ObstacleSolution>> {
    let grid = DualGrid::for_sweep(a_nodes, p, spec)?;
    map_indexed(a_nodes.len(), exec, |j| {
        solve_obstacle(a_nodes[j], &grid, p, psor)
    })
    .into_iter()
    .collect()
}

/// A-sweep of ruin surfaces together with the annuitization inequality check.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub params: ModelParams,
    pub a_nodes: Vec<f64>,
    /// Surfaces for every level with a positive shortfall `c - A`.
    pub surfaces: Vec<RuinSurface>,
    /// `min (ψ̂_A + y ᾱ(t))` over every level, y-node and `t < T`.
    pub ineq_margin: f64,
    /// `(level, time index, y-node)` of the minimum.
    pub ineq_at: (usize, usize, usize),
    /// `margin[k][i]`: minimum over levels at `(t_k, y_i)`, `k < n_t`.
    pub margin: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn ineq_passed(&self) -> bool {
        self.ineq_margin >= -TOL_INEQ
    }

    pub fn grid(&self) -> &DualGrid {
        &self.surfaces[0].source.grid
    }
}

/// Difference the sweep in `A` and check `ψ̂_A + y ᾱ(t) >= -tol` before `T`.
///
/// Central differences inside, one-sided at the two end levels. The terminal
/// slice is left out: compared with the obstacle the penalty at `T` has an
/// `O(1)` jump, and `g_A + y/ρ` is negative at small `y`, so the inequality
/// is only meaningful where annuity purchases are possible.
pub fn validate_ineq(
    solutions: Vec<ObstacleSolution>,
    p: &ModelParams,
    n_w: usize,
    exec: Execution,
) -> Result<SweepResult> {
    let n_a = solutions.len();
    if n_a < 3 {
        return Err(RuinError::GridMismatch(format!(
            "an A-sweep needs at least 3 levels, got {n_a}"
        )));
    }
    let grid = &solutions[0].grid;
    for (j, s) in solutions.iter().enumerate().skip(1) {
        if s.grid != *grid {
            return Err(RuinError::GridMismatch(format!(
                "level {j} (A = {}) was solved on a different grid",
                s.a.income()
            )));
        }
    }
    let a_nodes: Vec<f64> = solutions.iter().map(|s| s.a.income()).collect();
    if a_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RuinError::GridMismatch(
            "annuity levels must be strictly increasing".into(),
        ));
    }

    let n_t = grid.n_t();
    let n_y = grid.n_y();
    let y = grid.y_nodes();
    let t = grid.t_nodes();
    let rho = p.rho();
    let mut margin = vec![vec![f64::INFINITY; n_y]; n_t];
    let mut ineq_margin = f64::INFINITY;
    let mut ineq_at = (0, 0, 0);
    for k in 0..n_t {
        let alpha = (-rho * (p.big_t - t[k])).exp() / rho;
        for j in 0..n_a {
            let (lo, hi) = (j.saturating_sub(1), (j + 1).min(n_a - 1));
            let da = a_nodes[hi] - a_nodes[lo];
            let (v_lo, v_hi) = (&solutions[lo].values[k], &solutions[hi].values[k]);
            for i in 0..n_y {
                let m = (v_hi[i] - v_lo[i]) / da + y[i] * alpha;
                if m < margin[k][i] {
                    margin[k][i] = m;
                }
                if m < ineq_margin {
                    ineq_margin = m;
                    ineq_at = (j, k, i);
                }
            }
        }
    }

    let shared: Vec<Arc<ObstacleSolution>> = solutions
        .into_iter()
        .filter(|s| s.a.shortfall(p) > 0.0)
        .map(Arc::new)
        .collect();
    let surfaces = map_indexed(shared.len(), exec, |j| {
        RuinSurface::build(Arc::clone(&shared[j]), n_w)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        params: *p,
        a_nodes,
        surfaces,
        ineq_margin,
        ineq_at,
        margin,
    })
}

/// Minimum probability of lifetime ruin `ψ(w, A, t)` from a validated sweep.
///
/// Linear in `A` between the bracketing surfaces; on each, exact in `w` and
/// linear in `t`. Zero at and above `w̄(A, t)`; `φ(w; c - A)` at `T`.
pub fn ruin_probability(w: f64, a: f64, t: f64, sweep: &SweepResult) -> Result<f64> {
    let p = &sweep.params;
    if !(w >= 0.0) {
        return Err(RuinError::Domain {
            what: "w",
            value: w,
            domain: "[0, inf)".into(),
        });
    }
    p.check_time(t)?;
    let state = AnnuityState::new(a, p)?;
    if t >= p.big_t {
        return phi(w, state.shortfall(p), p);
    }
    if w >= safe_level_unchecked(a, t, p) {
        return Ok(0.0);
    }
    if w == 0.0 {
        return Ok(1.0);
    }
    let levels: Vec<f64> = sweep.surfaces.iter().map(|s| s.a.income()).collect();
    let (first, last) = (levels[0], levels[levels.len() - 1]);
    if a < first || a > last {
        return Err(RuinError::OutOfCoverage(format!(
            "A = {a} outside the surfaced levels [{first}, {last}]"
        )));
    }
    if levels.len() == 1 {
        return sweep.surfaces[0].value_at(w, t);
    }
    let j = levels.partition_point(|l| *l <= a).clamp(1, levels.len() - 1);
    let (a0, a1) = (levels[j - 1], levels[j]);
    let theta = ((a - a0) / (a1 - a0)).clamp(0.0, 1.0);
    let v0 = sweep.surfaces[j - 1].value_at(w, t)?;
    let v1 = sweep.surfaces[j].value_at(w, t)?;
    Ok(((1.0 - theta) * v0 + theta * v1).clamp(0.0, 1.0))
}
