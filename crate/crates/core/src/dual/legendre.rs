//! Convex conjugate of a sampled concave function.
//!
//! The transform is taken of the piecewise-linear interpolant, for which it
//! is exact: the maximiser of `v(y) - w y` is the node whose left and right
//! chord slopes bracket `w`.

use crate::error::{Result, RuinError};
use crate::fbp::{worst_concavity_defect, ObstacleSolution};

/// Concavity defect tolerated before a slice is refused.
pub const CONCAVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateSlice {
    /// Hull nodes, `y[0] = 0`.
    y: Vec<f64>,
    v: Vec<f64>,
    /// Chord slopes between consecutive hull nodes, strictly decreasing.
    slopes: Vec<f64>,
}

impl ConjugateSlice {
    /// Build from samples `(y_i, v_i)` with increasing `y`. Sub-tolerance
    /// convex kinks are removed by taking the upper hull; larger ones are
    /// reported as `(node, defect)`.
    pub fn from_concave(y: &[f64], v: &[f64], tol: f64) -> std::result::Result<Self, (usize, f64)> {
        assert_eq!(y.len(), v.len());
        assert!(y.len() >= 2);
        if y.len() >= 3 {
            let (node, defect) = worst_concavity_defect(y, v);
            if defect > tol {
                return Err((node, defect));
            }
        }
        let mut hy: Vec<f64> = Vec::with_capacity(y.len());
        let mut hv: Vec<f64> = Vec::with_capacity(y.len());
        for (&yi, &vi) in y.iter().zip(v) {
            while hy.len() >= 2 {
                let n = hy.len();
                let cross = (hy[n - 1] - hy[n - 2]) * (vi - hv[n - 2])
                    - (hv[n - 1] - hv[n - 2]) * (yi - hy[n - 2]);
                if cross >= 0.0 {
                    hy.pop();
                    hv.pop();
                } else {
                    break;
                }
            }
            hy.push(yi);
            hv.push(vi);
        }
        let slopes = hy
            .windows(2)
            .zip(hv.windows(2))
            .map(|(y, v)| (v[1] - v[0]) / (y[1] - y[0]))
            .collect();
        Ok(ConjugateSlice {
            y: hy,
            v: hv,
            slopes,
        })
    }

    /// Hull node maximizing `v - w y`.
    pub fn argmax(&self, w: f64) -> usize {
        self.slopes.partition_point(|s| *s > w)
    }

    /// `max_y [v(y) - w y]`.
    pub fn value(&self, w: f64) -> f64 {
        let i = self.argmax(w);
        self.v[i] - w * self.y[i]
    }

    /// Maximiser `y*(w) = -Ψ_w(w)`.
    pub fn maximizer(&self, w: f64) -> f64 {
        self.y[self.argmax(w)]
    }

    pub fn hull_len(&self) -> usize {
        self.y.len()
    }

    /// Slopes of the interpolant: each is a breakpoint of the conjugate.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Concave conjugate back, `min_w [Ψ(w) + w y]` over the breakpoints and `w = 0`.
    pub fn biconjugate(&self, y: f64) -> f64 {
        let mut best = self.value(0.0);
        for &s in self.slopes.iter().filter(|s| **s >= 0.0) {
            best = best.min(self.value(s) + s * y);
        }
        best
    }
}

/// Legendre transform `Ψ(·, t_k) = max_{y >= 0} [ψ̂(y, t_k) - w y]` of one slice.
pub fn legendre_transform(sol: &ObstacleSolution, t_index: usize) -> Result<ConjugateSlice> {
    let row = &sol.values[t_index];
    let mut y = Vec::with_capacity(row.len() + 1);
    let mut v = Vec::with_capacity(row.len() + 1);
    // ψ̂(0, t) = 0 on every slice: u(0, t) = 0 and g(0) = 0
    y.push(0.0);
    v.push(0.0);
    y.extend_from_slice(sol.grid.y_nodes());
    v.extend_from_slice(row);
    ConjugateSlice::from_concave(&y, &v, CONCAVITY_TOL).map_err(|(node, defect)| {
        RuinError::NotConcave {
            t_index,
            node: node.saturating_sub(1),
            defect,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_conjugate_matches_closed_form() {
        // v(y) = y - y²/2 on [0, 1] has conjugate (1 - w)²/2 for w in [0, 1]
        let n = 2001;
        let y: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let v: Vec<f64> = y.iter().map(|y| y - 0.5 * y * y).collect();
        let s = ConjugateSlice::from_concave(&y, &v, 1e-12).unwrap();
        for j in 0..=20 {
            let w = j as f64 / 20.0;
            let brute = y
                .iter()
                .zip(&v)
                .map(|(y, v)| v - w * y)
                .fold(f64::MIN, f64::max);
            assert!((s.value(w) - brute).abs() < 1e-14);
            assert!((s.value(w) - 0.5 * (1.0 - w).powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn refuses_convex_input() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let v = [0.0, 0.1, 1.0, 1.1];
        let err = ConjugateSlice::from_concave(&y, &v, 1e-8).unwrap_err();
        assert_eq!(err.0, 1);
        assert!(err.1 > 0.3);
    }

    #[test]
    fn tiny_kinks_are_hulled() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let v = [0.0, 1.0, 2.0 - 1e-12, 2.5];
        let s = ConjugateSlice::from_concave(&y, &v, 1e-8).unwrap();
        assert!(s.slopes().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn biconjugate_recovers_concave_samples() {
        let y: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = y.iter().map(|y| (1.0 + y).ln()).collect();
        let s = ConjugateSlice::from_concave(&y, &v, 1e-12).unwrap();
        for (yi, vi) in y.iter().zip(&v).take(49) {
            assert!((s.biconjugate(*yi) - vi).abs() < 1e-12);
        }
    }
}
