use crate::error::{Result, RuinError};
use crate::model::{exponent_d, safe_level_unchecked, AnnuityState, ModelParams};

/// Resolution and truncation controls for [`DualGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of y nodes, truncation nodes included.
    pub n_y: usize,
    /// Number of backward time steps on `[0, T]`.
    pub n_t: usize,
    /// `y_min = y_min_factor / w̄(A, 0)`.
    pub y_min_factor: f64,
    /// `y_max = y_max_factor * max(r d, rho) / (c - A)`.
    pub y_max_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_y: 2000,
            n_t: 500,
            y_min_factor: 1e-3,
            y_max_factor: 10.0,
        }
    }
}

impl GridSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_y < 8 {
            out.push(format!("grid.n_y = {} must be >= 8", self.n_y));
        }
        if self.n_t < 1 {
            out.push(format!("grid.n_t = {} must be >= 1", self.n_t));
        }
        if !(self.y_min_factor > 0.0 && self.y_min_factor < 1.0) {
            out.push(format!(
                "grid.y_min_factor = {} must lie in (0, 1)",
                self.y_min_factor
            ));
        }
        if !(self.y_max_factor > 1.0 && self.y_max_factor.is_finite()) {
            out.push(format!(
                "grid.y_max_factor = {} must be a finite number > 1",
                self.y_max_factor
            ));
        }
        out
    }
}

/// Log-uniform y nodes and uniform time nodes for the dual stopping problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGrid {
    y: Vec<f64>,
    t: Vec<f64>,
    dx: f64,
}

impl DualGrid {
    pub fn new(y_min: f64, y_max: f64, n_y: usize, big_t: f64, n_t: usize) -> Result<Self> {
        if !(y_min > 0.0 && y_max > y_min && y_max.is_finite()) {
            return Err(RuinError::Domain {
                what: "y_min",
                value: y_min,
                domain: format!("(0, y_max = {y_max})"),
            });
        }
        if n_y < 3 || n_t < 1 {
            return Err(RuinError::Domain {
                what: "n_y",
                value: n_y as f64,
                domain: ">= 3 with n_t >= 1".into(),
            });
        }
        let (x0, x1) = (y_min.ln(), y_max.ln());
        let dx = (x1 - x0) / (n_y - 1) as f64;
        let mut y: Vec<f64> = (0..n_y).map(|i| (x0 + i as f64 * dx).exp()).collect();
        // pin the end points exactly
        y[0] = y_min;
        y[n_y - 1] = y_max;
        let dt = big_t / n_t as f64;
        let mut t: Vec<f64> = (0..=n_t).map(|k| k as f64 * dt).collect();
        t[n_t] = big_t;
        Ok(DualGrid { y, t, dx })
    }

    pub fn for_annuity(a: AnnuityState, p: &ModelParams, spec: &GridSpec) -> Result<Self> {
        Self::for_sweep(&[a], p, spec)
    }

    /// One grid that covers every annuity level in `a_nodes`, so solutions can
    /// be differenced in `A`.
    pub fn for_sweep(a_nodes: &[AnnuityState], p: &ModelParams, spec: &GridSpec) -> Result<Self> {
        if let Some(msg) = spec.violations().into_iter().next() {
            return Err(RuinError::Config(vec![msg]));
        }
        if a_nodes.is_empty() {
            return Err(RuinError::GridMismatch("no annuity levels given".into()));
        }
        let top = (p.r * exponent_d(p)).max(p.rho());
        let mut y_min = f64::INFINITY;
        let mut y_max: f64 = 0.0;
        for a in a_nodes {
            let a = a.income();
            let wbar0 = safe_level_unchecked(a, 0.0, p);
            y_min = y_min.min(spec.y_min_factor / wbar0);
            let y_top = if p.c - a > 0.0 {
                top / (p.c - a)
            } else {
                // A = c: nothing left to insure; the kink 1/w̄ moves to infinity at T.
                1.0 / wbar0
            };
            y_max = y_max.max(spec.y_max_factor * y_top);
        }
        Self::new(y_min, y_max, spec.n_y, p.big_t, spec.n_t)
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn n_y(&self) -> usize {
        self.y.len()
    }

    /// Number of time steps; there are `n_t() + 1` time nodes.
    pub fn n_t(&self) -> usize {
        self.t.len() - 1
    }

    pub fn y_min(&self) -> f64 {
        self.y[0]
    }

    pub fn y_max(&self) -> f64 {
        self.y[self.y.len() - 1]
    }

    /// Uniform spacing in `ln y`.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn big_t(&self) -> f64 {
        self.t[self.t.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_log_uniform_and_pinned() {
        let g = DualGrid::new(1e-3, 10.0, 101, 5.0, 50).unwrap();
        assert_eq!(g.y_min(), 1e-3);
        assert_eq!(g.y_max(), 10.0);
        assert_eq!(g.t_nodes()[0], 0.0);
        assert_eq!(g.t_nodes()[50], 5.0);
        let y = g.y_nodes();
        assert!(y.windows(2).all(|w| w[1] > w[0]));
        let r0 = y[1] / y[0];
        assert!((y[71] / y[70] - r0).abs() < 1e-12);
    }

    #[test]
    fn annuity_grid_brackets_kink() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        let g = DualGrid::for_annuity(a, &p, &GridSpec::default()).unwrap();
        for &t in g.t_nodes() {
            let kink = 1.0 / safe_level_unchecked(1.0, t, &p);
            assert!(g.y_min() < kink && kink < g.y_max());
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        let spec = GridSpec {
            n_y: 2,
            ..GridSpec::default()
        };
        assert!(DualGrid::for_annuity(a, &p, &spec).is_err());
        assert!(DualGrid::new(1.0, 0.5, 10, 1.0, 10).is_err());
    }
}
