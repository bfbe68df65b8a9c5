use std::sync::Arc;

use crate::error::{Result, RuinError};
use crate::fbp::ObstacleSolution;
use crate::model::{phi, safe_level_unchecked, terminal_peak, AnnuityState, ModelParams};

use super::legendre::{legendre_transform, ConjugateSlice};

/// Default number of wealth nodes per time slice.
pub const DEFAULT_N_W: usize = 401;

/// Minimum ruin probability `Ψ(w, A, t)` for one annuity level, on a wealth
/// grid per time node, with the optimal risky holding `π*`.
#[derive(Debug, Clone)]
pub struct RuinSurface {
    pub a: AnnuityState,
    pub params: ModelParams,
    pub t_nodes: Vec<f64>,
    /// Right end of each slice's wealth grid: `w̄(A, t_k)` before `T`,
    /// `(c - A) / r` at `T`.
    pub w_top: Vec<f64>,
    pub w_nodes: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub strategy: Vec<Vec<f64>>,
    pub source: Arc<ObstacleSolution>,
    conjugates: Vec<ConjugateSlice>,
}

impl RuinSurface {
    pub fn build(source: Arc<ObstacleSolution>, n_w: usize) -> Result<Self> {
        if n_w < 2 {
            return Err(RuinError::Config(vec![format!(
                "n_w = {n_w} must be >= 2"
            )]));
        }
        let sol = &*source;
        let p = sol.params;
        let a = sol.a;
        let n_t = sol.grid.n_t();
        if a.shortfall(&p) <= 0.0 {
            return Err(RuinError::OutOfCoverage(
                "A = c has no shortfall to insure; its upper free boundary leaves every \
                 bounded y-grid as t -> T"
                    .into(),
            ));
        }
        let t_nodes = sol.grid.t_nodes().to_vec();
        let mut conjugates = Vec::with_capacity(n_t + 1);
        for k in 0..=n_t {
            conjugates.push(legendre_transform(sol, k)?);
        }
        let w_top: Vec<f64> = (0..=n_t)
            .map(|k| {
                if k == n_t {
                    a.shortfall(&p) / p.r
                } else {
                    safe_level_unchecked(a.income(), t_nodes[k], &p)
                }
            })
            .collect();
        let w_nodes: Vec<Vec<f64>> = w_top
            .iter()
            .map(|top| {
                let mut w: Vec<f64> = (0..n_w)
                    .map(|j| top * j as f64 / (n_w - 1) as f64)
                    .collect();
                w[n_w - 1] = *top;
                w
            })
            .collect();
        let values = w_nodes
            .iter()
            .zip(&conjugates)
            .map(|(w, cj)| w.iter().map(|w| cj.value(*w)).collect())
            .collect();

        let mut surface = RuinSurface {
            a,
            params: p,
            t_nodes,
            w_top,
            w_nodes,
            values,
            strategy: Vec::new(),
            source,
            conjugates,
        };
        surface.strategy = strategy_field(&surface)?;
        Ok(surface)
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len() - 1
    }

    pub fn n_w(&self) -> usize {
        self.w_nodes[0].len()
    }

    pub fn conjugate(&self, k: usize) -> &ConjugateSlice {
        &self.conjugates[k]
    }

    /// `Ψ(w, t_k)` from the exact transform of the slice, clamped to `[0, 1]`.
    pub fn value(&self, w: f64, k: usize) -> f64 {
        if w >= self.w_top[k] {
            return 0.0;
        }
        self.conjugates[k].value(w.max(0.0)).clamp(0.0, 1.0)
    }

    /// `Ψ(w, t)`: exact in `w` on the bracketing slices, linear in `t`.
    /// At `t = T` this is the closed form `φ(w; c - A)`.
    pub fn value_at(&self, w: f64, t: f64) -> Result<f64> {
        self.params.check_time(t)?;
        if t >= self.params.big_t {
            return phi(w.max(0.0), self.a.shortfall(&self.params), &self.params);
        }
        let (k, theta) = self.locate(t);
        let v0 = self.value(w, k);
        let v1 = self.value(w, k + 1);
        Ok(((1.0 - theta) * v0 + theta * v1).clamp(0.0, 1.0))
    }

    /// `π*(w, t)` by linear interpolation on the wealth grid of the slice
    /// nearest `t`; zero strictly above that slice's grid.
    pub fn strategy_at(&self, w: f64, t: f64) -> f64 {
        let n_t = self.n_t();
        let dt = self.t_nodes[1] - self.t_nodes[0];
        let k = ((t / dt).round() as usize).min(n_t);
        self.strategy_on_slice(w, k)
    }

    pub fn strategy_on_slice(&self, w: f64, k: usize) -> f64 {
        let top = self.w_top[k];
        if w > top {
            return 0.0;
        }
        let n = self.n_w();
        let s = (w.max(0.0) / top) * (n - 1) as f64;
        let j = (s.floor() as usize).min(n - 2);
        let f = s - j as f64;
        let row = &self.strategy[k];
        row[j] + f * (row[j + 1] - row[j])
    }

    /// Slice index `k` and weight `theta` with `t = (1-theta) t_k + theta t_{k+1}`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n_t = self.n_t();
        let dt = self.t_nodes[1] - self.t_nodes[0];
        let k = ((t / dt).floor() as usize).min(n_t - 1);
        let theta = ((t - self.t_nodes[k]) / dt).clamp(0.0, 1.0);
        (k, theta)
    }
}

/// Interior node range of slice `k` whose three-point stencils avoid the
/// contact blocks (and, at `T`, the cap of the terminal penalty).
pub(crate) fn smooth_range(sol: &ObstacleSolution, k: usize) -> Option<(usize, usize)> {
    let n = sol.grid.n_y();
    let (lo, hi) = if k < sol.grid.n_t() {
        let c = sol.contact[k];
        (c.last_lower + 2, c.first_upper.checked_sub(2)?)
    } else {
        let y = sol.grid.y_nodes();
        let first_cap = match terminal_peak(sol.a, &sol.params) {
            Some(peak) => y.partition_point(|y| *y < peak),
            None => return None,
        };
        (1, first_cap.min(n - 1).checked_sub(2)?)
    };
    (lo <= hi).then_some((lo, hi))
}

/// `(w_i, π_i)` at the smooth continuation nodes of slice `k`, ascending in `w`.
///
/// With `x = ln y`, `y ψ̂_yy = (ψ̂_xx - ψ̂_x) / y` and `w = ψ̂_x / y`; the
/// holding is `π* = -((μ - r)/σ²) y ψ̂_yy` at `y = I(w)`.
fn strategy_table(sol: &ObstacleSolution, k: usize) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = smooth_range(sol, k).ok_or_else(|| {
        RuinError::OutOfCoverage(format!(
            "continuation region at time index {k} spans too few nodes for a strategy; refine n_y"
        ))
    })?;
    let y = sol.grid.y_nodes();
    let v = &sol.values[k];
    let h = sol.grid.dx();
    let ratio = sol.params.merton_ratio();
    let mut table = Vec::with_capacity(hi - lo + 1);
    for i in lo..=hi {
        let vx = (v[i + 1] - v[i - 1]) / (2.0 * h);
        let vxx = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let y_psi_yy = (vxx - vx) / y[i];
        if y_psi_yy >= 0.0 {
            return Err(RuinError::NotConvex {
                t_index: k,
                node: i,
            });
        }
        table.push((vx / y[i], -ratio * y_psi_yy));
    }
    table.reverse();
    Ok(table)
}

/// `π*` on each slice's wealth grid.
///
/// Between the outermost smooth nodes the table is interpolated linearly;
/// beyond them it is held constant up to `w = 0` and up to `w̄(A,t)`, where
/// the holding jumps to zero.
pub fn strategy_field(surface: &RuinSurface) -> Result<Vec<Vec<f64>>> {
    let sol = &*surface.source;
    (0..=surface.n_t())
        .map(|k| {
            let table = strategy_table(sol, k)?;
            Ok(surface.w_nodes[k]
                .iter()
                .map(|&w| interp_clamped(&table, w))
                .collect())
        })
        .collect()
}

fn interp_clamped(table: &[(f64, f64)], w: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if w <= first.0 {
        return first.1;
    }
    if w >= last.0 {
        return last.1;
    }
    let j = table.partition_point(|(x, _)| *x <= w);
    let (x0, p0) = table[j - 1];
    let (x1, p1) = table[j];
    p0 + (w - x0) / (x1 - x0) * (p1 - p0)
}
