use crate::error::{Result, RuinError};
use crate::model::{safe_level_unchecked, terminal_g_unchecked, terminal_peak, AnnuityState, ModelParams};

use super::grid::DualGrid;
use super::operator::assemble_operator;
use super::psor::{psor_step, PsorSettings};

/// Distance below the obstacle still counted as contact. Projection sets
/// contact nodes to the obstacle exactly, so this only absorbs rounding.
const CONTACT_EPS: f64 = 1e-13;

/// Edges of the stopping region at one time node, as node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactSet {
    /// Last node of the lower contact block `ψ̂ = w̄ y`.
    pub last_lower: usize,
    /// First node of the upper contact block `ψ̂ = 1`.
    pub first_upper: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundaries {
    /// `ȳ(t_k)`.
    pub lower: Vec<f64>,
    /// `y₀(t_k)`.
    pub upper: Vec<f64>,
    /// Node-level contact edges for `k < n_t`; the terminal slice has none.
    pub contact: Vec<ContactSet>,
}

/// Value surface `ψ̂(y_i, t_k)` of the dual stopping problem for one `A`.
#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    pub grid: DualGrid,
    pub a: AnnuityState,
    pub params: ModelParams,
    /// `values[k][i] = ψ̂(y_i, t_k)`.
    pub values: Vec<Vec<f64>>,
    pub lower_boundary: Vec<f64>,
    pub upper_boundary: Vec<f64>,
    pub contact: Vec<ContactSet>,
    /// Complementarity residual of each backward step (`k < n_t`), zero at `T`.
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl ObstacleSolution {
    pub fn safe_level(&self, k: usize) -> f64 {
        safe_level_unchecked(self.a.income(), self.grid.t_nodes()[k], &self.params)
    }

    /// Obstacle `u(·, t_k)` on the grid.
    pub fn obstacle(&self, k: usize) -> Vec<f64> {
        obstacle_row(&self.grid, self.safe_level(k))
    }

    pub fn terminal(&self) -> &[f64] {
        &self.values[self.grid.n_t()]
    }

    pub fn check_invariants(&self) -> InvariantReport {
        let n_t = self.grid.n_t();
        let mut rep = InvariantReport {
            max_obstacle_excess: f64::NEG_INFINITY,
            max_concavity_defect: f64::NEG_INFINITY,
            min_value: f64::INFINITY,
            max_value: f64::NEG_INFINITY,
            max_residual: self.residuals.iter().copied().fold(0.0, f64::max),
        };
        for (k, row) in self.values.iter().enumerate() {
            if k < n_t {
                let u = self.obstacle(k);
                for (v, u) in row.iter().zip(&u) {
                    rep.max_obstacle_excess = rep.max_obstacle_excess.max(v - u);
                }
            }
            for v in row {
                rep.min_value = rep.min_value.min(*v);
                rep.max_value = rep.max_value.max(*v);
            }
            let (_, defect) = worst_concavity_defect(self.grid.y_nodes(), row);
            rep.max_concavity_defect = rep.max_concavity_defect.max(defect);
        }
        rep
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    /// `max (ψ̂ - u)` over `t < T`; must be `<= 0`.
    pub max_obstacle_excess: f64,
    /// Largest amount any node sits below the chord of its neighbours.
    pub max_concavity_defect: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub max_residual: f64,
}

/// `(node, chord(y_i) - ψ_i)` for the worst interior node; positive means a
/// convex kink.
pub fn worst_concavity_defect(y: &[f64], v: &[f64]) -> (usize, f64) {
    let mut worst = (0, f64::NEG_INFINITY);
    for i in 1..v.len() - 1 {
        let w = (y[i] - y[i - 1]) / (y[i + 1] - y[i - 1]);
        let chord = v[i - 1] + w * (v[i + 1] - v[i - 1]);
        let defect = chord - v[i];
        if defect > worst.1 {
            worst = (i, defect);
        }
    }
    worst
}

fn obstacle_row(grid: &DualGrid, wbar: f64) -> Vec<f64> {
    grid.y_nodes().iter().map(|y| (wbar * y).min(1.0)).collect()
}

/// `ĝ(y)`: the terminal penalty `g` up to its peak and 1 beyond.
pub(crate) fn terminal_row(grid: &DualGrid, a: AnnuityState, p: &ModelParams) -> Vec<f64> {
    let short = a.shortfall(p);
    let d = p.d();
    let peak = terminal_peak(a, p);
    grid.y_nodes()
        .iter()
        .map(|&y| match peak {
            Some(peak) if y >= peak => 1.0,
            _ => terminal_g_unchecked(y, short, p.r, d),
        })
        .collect()
}

/// Backward induction from `ψ̂(·, T) = ĝ` with one LCP per time step.
pub fn solve_obstacle(
    a: AnnuityState,
    grid: &DualGrid,
    p: &ModelParams,
    settings: &PsorSettings,
) -> Result<ObstacleSolution> {
    p.validate()?;
    if let Some(msg) = settings.violations().into_iter().next() {
        return Err(RuinError::Config(vec![msg]));
    }
    let op = assemble_operator(grid, p)?;
    let n_t = grid.n_t();
    let n = grid.n_y();
    let t = grid.t_nodes();

    let mut values = vec![Vec::new(); n_t + 1];
    values[n_t] = terminal_row(grid, a, p);
    let mut residuals = vec![0.0; n_t + 1];
    let mut iterations = vec![0; n_t + 1];

    for k in (0..n_t).rev() {
        let wbar = safe_level_unchecked(a.income(), t[k], p);
        let u = obstacle_row(grid, wbar);
        let next = &values[k + 1];
        let q = op.rhs(next, u[0], u[n - 1]);
        let mut x: Vec<f64> = next.clone();
        let out = psor_step(&op.matrix, &q, &u, &mut x, settings);
        if !out.converged {
            return Err(RuinError::NotConverged {
                t_index: k,
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        residuals[k] = out.residual;
        iterations[k] = out.iterations;
        values[k] = x;
    }

    let mut sol = ObstacleSolution {
        grid: grid.clone(),
        a,
        params: *p,
        values,
        lower_boundary: Vec::new(),
        upper_boundary: Vec::new(),
        contact: Vec::new(),
        residuals,
        iterations,
    };
    let b = extract_boundaries(&sol)?;
    sol.lower_boundary = b.lower;
    sol.upper_boundary = b.upper;
    sol.contact = b.contact;
    Ok(sol)
}

/// Locate `ȳ(t)` and `y₀(t)` from the contact sets.
///
/// Under smooth fit the gap `u - ψ̂` grows quadratically away from a free
/// boundary, so `sqrt(u - ψ̂)` is extrapolated linearly from the first two
/// continuation nodes to place the boundary inside its grid cell.
pub fn extract_boundaries(sol: &ObstacleSolution) -> Result<Boundaries> {
    let grid = &sol.grid;
    let y = grid.y_nodes();
    let n = grid.n_y();
    let n_t = grid.n_t();
    let mut lower = Vec::with_capacity(n_t + 1);
    let mut upper = Vec::with_capacity(n_t + 1);
    let mut contact = Vec::with_capacity(n_t);

    for k in 0..n_t {
        let v = &sol.values[k];
        let u = sol.obstacle(k);
        let on = |i: usize| v[i] >= u[i] - CONTACT_EPS;
        let flat = |i: usize| u[i] >= 1.0;

        let mut last_lower = 0;
        while last_lower + 1 < n && on(last_lower + 1) && !flat(last_lower + 1) {
            last_lower += 1;
        }
        let mut first_upper = n - 1;
        while first_upper > last_lower + 1 && on(first_upper - 1) && flat(first_upper - 1) {
            first_upper -= 1;
        }
        if first_upper <= last_lower + 1 {
            return Err(RuinError::NotTwoSided {
                t_index: k,
                detail: "continuation region is empty".into(),
            });
        }
        if let Some(i) = (last_lower + 1..first_upper).find(|&i| on(i)) {
            return Err(RuinError::NotTwoSided {
                t_index: k,
                detail: format!("interior contact at node {i} (y = {:e})", y[i]),
            });
        }

        let gap = |i: usize| (u[i] - v[i]).max(0.0).sqrt();
        let lo = {
            let (i1, i2) = (last_lower + 1, last_lower + 2);
            let (s1, s2) = (gap(i1), gap(i2.min(first_upper - 1)));
            if i2 < first_upper && s2 > s1 && !flat(i2) {
                (y[i1] - s1 * (y[i2] - y[i1]) / (s2 - s1)).clamp(y[last_lower], y[i1])
            } else {
                y[last_lower]
            }
        };
        let hi = {
            let (i1, i2) = (first_upper - 1, first_upper.saturating_sub(2));
            let (s1, s2) = (gap(i1), gap(i2));
            if i2 > last_lower && s2 > s1 && flat(i2) {
                (y[i1] + s1 * (y[i1] - y[i2]) / (s2 - s1)).clamp(y[i1], y[first_upper])
            } else {
                y[first_upper]
            }
        };
        lower.push(lo);
        upper.push(hi);
        contact.push(ContactSet {
            last_lower,
            first_upper,
        });
    }

    let (lo_t, hi_t) = terminal_boundaries(sol.a, &sol.params, grid.y_max());
    lower.push(lo_t);
    upper.push(hi_t);
    Ok(Boundaries {
        lower,
        upper,
        contact,
    })
}

/// Limits of the free boundaries as `t -> T`: the lower one solves
/// `g(y) = w̄(A,T) y`, the upper one is the peak of `g`.
pub fn terminal_boundaries(a: AnnuityState, p: &ModelParams, y_cap: f64) -> (f64, f64) {
    match terminal_peak(a, p) {
        None => (0.0, y_cap),
        Some(peak) => {
            let d = p.d();
            let ratio = p.r * d / p.rho();
            let lo = if ratio > 1.0 {
                peak * ((d - ratio) / (d - 1.0)).powf(d - 1.0)
            } else {
                peak
            };
            (lo, peak)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbp::grid::GridSpec;
    use crate::model::terminal_dual_g;

    fn coarse(p: &ModelParams, a: AnnuityState, n_y: usize, n_t: usize) -> ObstacleSolution {
        let spec = GridSpec {
            n_y,
            n_t,
            ..GridSpec::default()
        };
        let grid = DualGrid::for_annuity(a, p, &spec).unwrap();
        solve_obstacle(a, &grid, p, &PsorSettings::default()).unwrap()
    }

    #[test]
    fn terminal_slice_is_capped_g() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        let sol = coarse(&p, a, 300, 50);
        let peak = terminal_peak(a, &p).unwrap();
        for (y, v) in sol.grid.y_nodes().iter().zip(sol.terminal()) {
            let expect = if *y >= peak {
                1.0
            } else {
                terminal_dual_g(*y, a, &p).unwrap()
            };
            assert_eq!(*v, expect);
        }
    }

    #[test]
    fn boundaries_bracket_kink_for_example() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        let sol = coarse(&p, a, 600, 100);
        for k in 0..=sol.grid.n_t() {
            let kink = 1.0 / sol.safe_level(k);
            let (lo, hi) = (sol.lower_boundary[k], sol.upper_boundary[k]);
            assert!(lo.is_finite() && hi.is_finite());
            assert!(lo < kink && kink < hi, "k={k}: {lo} {kink} {hi}");
        }
        let rep = sol.check_invariants();
        assert!(rep.max_obstacle_excess <= 0.0);
        assert!(rep.min_value >= 0.0 && rep.max_value <= 1.0);
        assert!(rep.max_residual < 1e-9);
    }

    #[test]
    fn truncation_nodes_stay_in_stopping_region() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        let sol = coarse(&p, a, 400, 50);
        let n = sol.grid.n_y();
        for c in &sol.contact {
            assert!(c.last_lower >= 2, "{c:?}");
            assert!(c.first_upper <= n - 3, "{c:?}");
        }
    }

    #[test]
    fn fully_annuitized_state_still_solves() {
        let p = ModelParams::example();
        let a = AnnuityState::full(&p);
        let spec = GridSpec {
            n_y: 300,
            n_t: 50,
            ..GridSpec::default()
        };
        let grid = DualGrid::for_annuity(a, &p, &spec).unwrap();
        // terminal penalty vanishes identically
        let sol = match solve_obstacle(a, &grid, &p, &PsorSettings::default()) {
            Ok(s) => s,
            Err(e) => panic!("A = c solve failed: {e}"),
        };
        assert!(sol.terminal().iter().all(|v| *v == 0.0));
        let rep = sol.check_invariants();
        assert!(rep.max_obstacle_excess <= 0.0);
        assert!(rep.min_value >= 0.0 && rep.max_value <= 1.0);
        // ψ̂ vanishes only where y = 0 would be; at y_min it is ~ w̄ y_min
        assert!(sol.values[0][0] < 1e-2);
    }

    #[test]
    fn terminal_lower_limit_solves_crossing() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        let (lo, hi) = terminal_boundaries(a, &p, 10.0);
        let wbar_t = safe_level_unchecked(1.0, p.big_t, &p);
        let g = terminal_dual_g(lo, a, &p).unwrap();
        assert!((g - wbar_t * lo).abs() < 1e-12);
        assert_eq!(hi, terminal_peak(a, &p).unwrap());
    }
}
