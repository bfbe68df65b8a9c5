use crate::model::phi;

use super::surface::{smooth_range, RuinSurface};
use super::sweep::TOL_INEQ;

/// Relative tolerance on the HJB residual in the continuation region.
pub const TOL_HJB: f64 = 1e-3;
/// Sup-norm tolerance of the terminal slice against `φ(·; c - A)`.
pub const TOL_TERMINAL: f64 = 1e-4;
/// Tolerance for `Ψ(0, t) = 1` and `Ψ(w̄, t) = 0`.
pub const TOL_BOUNDARY: f64 = 1e-12;

/// Worst-case margins of the verification conditions for one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// Largest relative HJB residual and the `(k, i)` y-node where it occurs.
    pub hjb_relative: f64,
    pub hjb_at: (usize, usize),
    /// `min (ψ̂_A + y ᾱ)` from an A-sweep, if one was supplied.
    pub ineq_margin: Option<f64>,
    /// `max_t |Ψ(0, t) - 1|`.
    pub zero_wealth_gap: f64,
    /// `max_{t<T} |Ψ(w̄(A,t), t)|`.
    pub safe_level_gap: f64,
    /// `sup_w |Ψ(w, T) - φ(w; c - A)|`.
    pub terminal_gap: f64,
    /// Largest increase of `Ψ` between neighbouring wealth nodes.
    pub monotone_defect: f64,
    /// Largest amount any wealth node sits above the chord of its neighbours.
    pub convexity_defect: f64,
}

impl VerificationReport {
    /// Names of the conditions that fail, with their margins.
    pub fn failures(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if !(self.hjb_relative < TOL_HJB) {
            out.push(("hjb_relative", self.hjb_relative));
        }
        if let Some(m) = self.ineq_margin {
            if !(m >= -TOL_INEQ) {
                out.push(("ineq_margin", m));
            }
        }
        if !(self.zero_wealth_gap <= TOL_BOUNDARY) {
            out.push(("zero_wealth_gap", self.zero_wealth_gap));
        }
        if !(self.safe_level_gap <= TOL_BOUNDARY) {
            out.push(("safe_level_gap", self.safe_level_gap));
        }
        if !(self.terminal_gap < TOL_TERMINAL) {
            out.push(("terminal_gap", self.terminal_gap));
        }
        if !(self.monotone_defect <= TOL_BOUNDARY) {
            out.push(("monotone_defect", self.monotone_defect));
        }
        if !(self.convexity_defect <= TOL_BOUNDARY) {
            out.push(("convexity_defect", self.convexity_defect));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Evaluate the verification conditions on a solved surface.
///
/// The HJB residual `λΨ - Ψ_t - (rw - c)Ψ_w + mΨ_w²/Ψ_ww` is computed from
/// dual data at each smooth continuation node `y_i`: `w = ψ̂_y`,
/// `Ψ = ψ̂ - w y`, `Ψ_w = -y`, `Ψ_ww = -1/ψ̂_yy`, `Ψ_t = ψ̂_t`, with
/// three-point y-space differences and a backward time difference. It is
/// scaled by the sum of the magnitudes of its four terms.
pub fn check_verification_conditions(
    surface: &RuinSurface,
    ineq_margin: Option<f64>,
) -> VerificationReport {
    let sol = &*surface.source;
    let p = surface.params;
    let y = sol.grid.y_nodes();
    let dt = sol.grid.dt();
    let n_t = surface.n_t();
    let m = p.m();

    let mut hjb_relative: f64 = 0.0;
    let mut hjb_at = (0, 0);
    for k in 0..n_t {
        let Some((lo, hi)) = smooth_range(sol, k) else {
            continue;
        };
        let v = &sol.values[k];
        let next = &sol.values[k + 1];
        for i in lo..=hi {
            let (hm, hp) = (y[i] - y[i - 1], y[i + 1] - y[i]);
            let dp = (v[i + 1] - v[i]) / hp;
            let dm = (v[i] - v[i - 1]) / hm;
            let psi_y = (hm * dp + hp * dm) / (hm + hp);
            let psi_yy = 2.0 * (dp - dm) / (hm + hp);
            let psi_t = (next[i] - v[i]) / dt;

            let w = psi_y;
            let big = v[i] - w * y[i];
            let dw = -y[i];
            let dww = -1.0 / psi_yy;
            let terms = [
                p.lambda_s * big,
                -psi_t,
                -(p.r * w - p.c) * dw,
                m * dw * dw / dww,
            ];
            let res: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            let rel = res.abs() / scale;
            if rel > hjb_relative {
                hjb_relative = rel;
                hjb_at = (k, i);
            }
        }
    }

    let zero_wealth_gap = surface
        .values
        .iter()
        .map(|row| (row[0] - 1.0).abs())
        .fold(0.0, f64::max);
    let safe_level_gap = surface.values[..n_t]
        .iter()
        .map(|row| row[row.len() - 1].abs())
        .fold(0.0, f64::max);
    let short = surface.a.shortfall(&p);
    let terminal_gap = surface.w_nodes[n_t]
        .iter()
        .zip(&surface.values[n_t])
        .map(|(w, v)| (v - phi(*w, short, &p).unwrap_or(f64::NAN)).abs())
        .fold(0.0, f64::max);

    let mut monotone_defect: f64 = f64::NEG_INFINITY;
    let mut convexity_defect: f64 = f64::NEG_INFINITY;
    for row in &surface.values {
        for pair in row.windows(2) {
            monotone_defect = monotone_defect.max(pair[1] - pair[0]);
        }
        // uniform wealth grid: chord midpoint is the neighbour average
        for tri in row.windows(3) {
            convexity_defect = convexity_defect.max(tri[1] - 0.5 * (tri[0] + tri[2]));
        }
    }

    VerificationReport {
        hjb_relative,
        hjb_at,
        ineq_margin,
        zero_wealth_gap,
        safe_level_gap,
        terminal_gap,
        monotone_defect: monotone_defect.max(0.0),
        convexity_defect: convexity_defect.max(0.0),
    }
}
