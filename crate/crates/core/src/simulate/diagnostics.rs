use crate::dual::RuinSurface;
use crate::error::{Result, RuinError};
use crate::model::{deferred_price, ModelParams};

use super::path::{Mode, Outcome, Shocks};
use super::{annuity_path, path_rng, Feedback, SimConfig, StrategySource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Step,
    Ruin,
    Annuitize,
    /// State right after the purchase: shortfall paid, `A = c`.
    Purchased,
    Horizon,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Step => "step",
            EventKind::Ruin => "ruin",
            EventKind::Annuitize => "annuitize",
            EventKind::Purchased => "purchased",
            EventKind::Horizon => "horizon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub path: usize,
    pub t: f64,
    pub w: f64,
    pub pi: f64,
    pub a: f64,
    pub kind: EventKind,
}

/// Wealth at `T` after gliding on the riskless asset from `(w, t)` while
/// consuming `c`.
pub fn glide_to_horizon(w: f64, t: f64, p: &ModelParams) -> f64 {
    let tau = (p.big_t - t).max(0.0);
    let growth = (p.r * tau).exp();
    w * growth - p.c * (growth - 1.0) / p.r
}

/// Replay the first `max_paths` paths of `simulate_ruin` (plain, not
/// antithetic) and log every step and event.
pub fn path_diagnostics(
    cfg: &SimConfig,
    surface: &RuinSurface,
    p: &ModelParams,
    max_paths: usize,
) -> Result<Vec<PathEvent>> {
    let v = cfg.violations(p);
    if !v.is_empty() {
        return Err(RuinError::Config(v));
    }
    let feedback = match cfg.strategy {
        StrategySource::Solver => Feedback::Surface(surface),
        StrategySource::ClosedFormAtT => Feedback::closed_form(cfg.a0.shortfall(p), p),
    };
    let a = cfg.a0.income();
    let mut log = Vec::new();
    let mut tape = Vec::new();
    for path in 0..cfg.n_paths.min(max_paths) {
        let mut rng = path_rng(cfg.seed, path as u64);
        let mut shocks = Shocks::new(&mut rng, &mut tape, Mode::Plain);
        let start = log.len();
        let res = annuity_path(cfg, p, feedback, &mut shocks, |t, w, pi| {
            log.push(PathEvent {
                path,
                t,
                w,
                pi,
                a,
                kind: EventKind::Step,
            })
        });
        if log.len() == start {
            // decided at the start: ruined, safe or past the horizon
            log.push(PathEvent {
                path,
                t: cfg.t0,
                w: cfg.w0,
                pi: 0.0,
                a,
                kind: EventKind::Step,
            });
        }
        let last = log.last_mut().expect("at least one row");
        match res.outcome {
            Outcome::Ruin(_) => last.kind = EventKind::Ruin,
            Outcome::Horizon(_) | Outcome::Death(_) | Outcome::Safe(_) => {
                last.kind = EventKind::Horizon
            }
            Outcome::Annuitize(t) => {
                last.kind = EventKind::Annuitize;
                let price = deferred_price(t, p)?;
                let w_post = last.w - cfg.a0.shortfall(p) * price;
                log.push(PathEvent {
                    path,
                    t,
                    w: w_post,
                    pi: 0.0,
                    a: p.c,
                    kind: EventKind::Purchased,
                });
                log.push(PathEvent {
                    path,
                    t: p.big_t,
                    w: glide_to_horizon(w_post, t, p),
                    pi: 0.0,
                    a: p.c,
                    kind: EventKind::Horizon,
                });
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{safe_level, AnnuityState};

    #[test]
    fn purchase_at_barrier_glides_to_zero() {
        let p = ModelParams::example();
        let a = AnnuityState::new(1.0, &p).unwrap();
        for t in [0.0, 1.0, 4.5] {
            let wbar = safe_level(a, t, &p).unwrap();
            let post = wbar - a.shortfall(&p) * deferred_price(t, &p).unwrap();
            assert!(glide_to_horizon(post, t, &p).abs() < 1e-12);
        }
    }
}
