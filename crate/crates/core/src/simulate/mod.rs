//! Monte Carlo re-estimate of the ruin probability.
//!
//! Each path is an Euler–Maruyama discretization of
//! `dW = [rW + (μ - r)π - c] dt + σπ dB` under a frozen feedback strategy. A
//! path stops on ruin, on reaching the safe level (where the remaining
//! shortfall is annuitized and ruin is impossible), or at `T`, where the
//! closed form `φ(W_T; c - A)` supplies the rest of the lifetime. Ruin is
//! discounted by the subjective survival probability `e^{-λ(τ₀ - t₀)}`.
//!
//! Crossings between grid times are accounted for by Brownian-bridge killing
//! weights at both barriers. Every path draws from its own ChaCha stream
//! `(seed, path index)`, and chunk statistics are reduced in index order, so
//! a report depends only on the configuration.

mod diagnostics;
mod path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dual::RuinSurface;
use crate::error::{Result, RuinError};
use crate::model::{phi, safe_level_unchecked, AnnuityState, ModelParams};
use crate::par::{map_indexed, Execution};

pub use diagnostics::{glide_to_horizon, path_diagnostics, EventKind, PathEvent};
pub use path::{Outcome, PathResult};

use path::{bridge_hit, Mode, Shocks};

/// Paths per work unit; fixed so results do not depend on the thread count.
const CHUNK: usize = 2048;
/// The no-annuity estimator stops at `t_max` with `e^{-λ t_max}` below this.
pub const NO_ANNUITY_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrategySource {
    /// Holdings interpolated from the solved [`RuinSurface`].
    #[default]
    Solver,
    /// The no-annuity feedback `π*(w; c - A)` applied at every `t`.
    ClosedFormAtT,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub w0: f64,
    pub a0: AnnuityState,
    pub t0: f64,
    pub strategy: StrategySource,
    /// Pair each path with its mirror image; `n_paths` must then be even.
    pub antithetic: bool,
    /// Brownian-bridge crossing weights between grid times.
    pub bridge: bool,
    pub exec: Execution,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64, w0: f64, a0: AnnuityState) -> Self {
        SimConfig {
            n_paths,
            dt,
            seed,
            w0,
            a0,
            t0: 0.0,
            strategy: StrategySource::Solver,
            antithetic: false,
            bridge: true,
            exec: Execution::Parallel,
        }
    }

    pub fn violations(&self, p: &ModelParams) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_paths < 1 {
            out.push("sim.n_paths must be >= 1".to_string());
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            out.push(format!(
                "sim.n_paths = {} must be even with antithetic pairs",
                self.n_paths
            ));
        }
        if !(self.dt > 0.0 && self.dt <= p.big_t / 100.0) {
            out.push(format!(
                "sim.dt = {} must lie in (0, T/100 = {}]",
                self.dt,
                p.big_t / 100.0
            ));
        }
        if !(self.w0 >= 0.0 && self.w0.is_finite()) {
            out.push(format!("sim.w0 = {} must be finite and >= 0", self.w0));
        }
        if !(self.t0 >= 0.0 && self.t0 <= p.big_t) {
            out.push(format!("sim.t0 = {} must lie in [0, T]", self.t0));
        }
        out
    }

    fn validate(&self, p: &ModelParams) -> Result<()> {
        let v = self.violations(p);
        if v.is_empty() {
            Ok(())
        } else {
            Err(RuinError::Config(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub ruin_estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Paths whose Euler state hit zero (bridge-weighted crossings not counted).
    pub n_ruined_before_t: usize,
    pub n_annuitized: usize,
    /// `None` when no path annuitized.
    pub mean_annuitization_time: Option<f64>,
    /// Upper bound on the ignored tail, no-annuity estimator only.
    pub tail_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    /// Sum and sum of squares of the per-sample contribution (a path, or the
    /// mean of an antithetic pair).
    sum: f64,
    sum_sq: f64,
    samples: usize,
    ruined: usize,
    annuitized: usize,
    annuity_time: f64,
}

impl Tally {
    fn add_outcome(&mut self, o: Outcome) {
        match o {
            Outcome::Ruin(_) => self.ruined += 1,
            Outcome::Annuitize(t) => {
                self.annuitized += 1;
                self.annuity_time += t;
            }
            _ => {}
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.samples += o.samples;
        self.ruined += o.ruined;
        self.annuitized += o.annuitized;
        self.annuity_time += o.annuity_time;
    }

    fn report(&self, n_paths: usize, tail_bound: Option<f64>) -> SimReport {
        let n = self.samples as f64;
        let mean = self.sum / n;
        let var = if self.samples > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        SimReport {
            ruin_estimate: mean.clamp(0.0, 1.0),
            std_error: (var / n).sqrt(),
            n_paths,
            n_ruined_before_t: self.ruined,
            n_annuitized: self.annuitized,
            mean_annuitization_time: (self.annuitized > 0)
                .then(|| self.annuity_time / self.annuitized as f64),
            tail_bound,
        }
    }
}

pub(crate) fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run `n_paths` paths (or pairs) in fixed chunks and reduce in order.
fn run_paths<F>(cfg: &SimConfig, path: F) -> Tally
where
    F: Fn(&mut Shocks<'_>) -> PathResult + Sync + Send,
{
    let samples = if cfg.antithetic {
        cfg.n_paths / 2
    } else {
        cfg.n_paths
    };
    let n_chunks = samples.div_ceil(CHUNK);
    let chunks = map_indexed(n_chunks, cfg.exec, |c| {
        let mut tally = Tally::default();
        let mut tape = Vec::new();
        for q in c * CHUNK..((c + 1) * CHUNK).min(samples) {
            let mut rng = path_rng(cfg.seed, q as u64);
            let x = if cfg.antithetic {
                // both members share the stream; the mirror replays the tape
                let first = path(&mut Shocks::new(&mut rng, &mut tape, Mode::Record));
                let second = path(&mut Shocks::new(&mut rng, &mut tape, Mode::Mirror));
                tally.add_outcome(first.outcome);
                tally.add_outcome(second.outcome);
                0.5 * (first.contribution + second.contribution)
            } else {
                let r = path(&mut Shocks::new(&mut rng, &mut tape, Mode::Plain));
                tally.add_outcome(r.outcome);
                r.contribution
            };
            tally.sum += x;
            tally.sum_sq += x * x;
            tally.samples += 1;
        }
        tally
    });
    let mut total = Tally::default();
    for t in &chunks {
        total.merge(t);
    }
    total
}

/// Feedback strategy frozen for a whole simulation.
#[derive(Clone, Copy)]
pub(crate) enum Feedback<'s> {
    Surface(&'s RuinSurface),
    /// `coef * max(c_net - r w, 0)`.
    Linear { coef: f64, c_net: f64, r: f64 },
}

impl Feedback<'_> {
    pub(crate) fn closed_form(c_net: f64, p: &ModelParams) -> Self {
        Feedback::Linear {
            coef: p.merton_ratio() / ((p.d() - 1.0) * p.r),
            c_net,
            r: p.r,
        }
    }

    #[inline]
    pub(crate) fn holding(&self, w: f64, t: f64) -> f64 {
        match self {
            Feedback::Surface(s) => s.strategy_at(w, t),
            Feedback::Linear { coef, c_net, r } => coef * (c_net - r * w).max(0.0),
        }
    }
}

/// One deferred-annuity path from `(w0, a0, t0)` under the barrier strategy.
pub(crate) fn annuity_path(
    cfg: &SimConfig,
    p: &ModelParams,
    feedback: Feedback<'_>,
    shocks: &mut Shocks<'_>,
    mut record: impl FnMut(f64, f64, f64),
) -> PathResult {
    let a = cfg.a0.income();
    let short = cfg.a0.shortfall(p);
    let big_t = p.big_t;
    let t0 = cfg.t0;
    let lam = p.lambda_s;
    if cfg.w0 <= 0.0 {
        return PathResult {
            contribution: 1.0,
            outcome: Outcome::Ruin(t0),
        };
    }
    if t0 >= big_t {
        return PathResult {
            contribution: phi(cfg.w0, short, p).expect("w0 >= 0"),
            outcome: Outcome::Horizon(cfg.w0),
        };
    }
    if cfg.w0 >= safe_level_unchecked(a, t0, p) {
        return PathResult {
            contribution: 0.0,
            outcome: Outcome::Annuitize(t0),
        };
    }

    let n_steps = ((big_t - t0) / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let h = (big_t - t0) / n_steps as f64;
    let sqrt_h = h.sqrt();
    let excess = p.mu - p.r;
    let mut w = cfg.w0;
    let mut surv = 1.0;
    let mut acc = 0.0;
    for j in 0..n_steps {
        let s = t0 + j as f64 * h;
        let last = j + 1 == n_steps;
        let s1 = if last { big_t } else { s + h };
        let pi = feedback.holding(w, s);
        record(s, w, pi);
        let vol = p.sigma * pi;
        let w1 = w + (p.r * w + excess * pi - p.c) * h + vol * sqrt_h * shocks.normal();
        let disc = || (-lam * (s1 - t0)).exp();
        if w1 <= 0.0 {
            record(s1, w1, 0.0);
            return PathResult {
                contribution: acc + surv * disc(),
                outcome: Outcome::Ruin(s1),
            };
        }
        // no purchases at T itself: the penalty there is the closed form
        let barrier = if last {
            f64::INFINITY
        } else {
            safe_level_unchecked(a, s1, p)
        };
        if w1 >= barrier {
            record(s1, w1, 0.0);
            return PathResult {
                contribution: acc,
                outcome: Outcome::Annuitize(s1),
            };
        }
        if cfg.bridge && vol > 0.0 {
            let var = vol * vol;
            let p_low = bridge_hit(w, w1, var, h);
            let p_up = if last {
                0.0
            } else {
                bridge_hit(barrier - w, barrier - w1, var, h)
            };
            if p_low > 0.0 {
                acc += surv * p_low * disc();
            }
            surv *= (1.0 - p_low - p_up).max(0.0);
        }
        w = w1;
    }
    record(big_t, w, 0.0);
    PathResult {
        contribution: acc
            + surv * (-lam * (big_t - t0)).exp() * phi(w, short, p).expect("w > 0"),
        outcome: Outcome::Horizon(w),
    }
}

/// One no-annuity path with net consumption `c_net` and an explicit death time.
fn no_annuity_path(
    cfg: &SimConfig,
    p: &ModelParams,
    c_net: f64,
    feedback: Feedback<'_>,
    t_max: f64,
    death: f64,
    shocks: &mut Shocks<'_>,
) -> PathResult {
    if cfg.w0 <= 0.0 {
        return PathResult {
            contribution: 1.0,
            outcome: Outcome::Ruin(0.0),
        };
    }
    let safe = c_net / p.r;
    if cfg.w0 >= safe {
        return PathResult {
            contribution: 0.0,
            outcome: Outcome::Safe(0.0),
        };
    }
    let end = death.min(t_max);
    let h = cfg.dt;
    let sqrt_h = h.sqrt();
    let excess = p.mu - p.r;
    let mut w = cfg.w0;
    let mut surv = 1.0;
    let mut acc = 0.0;
    let mut s = 0.0;
    while s < end {
        let (step, sq) = if s + h > end {
            let hh = end - s;
            (hh, hh.sqrt())
        } else {
            (h, sqrt_h)
        };
        let pi = feedback.holding(w, s);
        let vol = p.sigma * pi;
        let w1 = w + (p.r * w + excess * pi - c_net) * step + vol * sq * shocks.normal();
        s += step;
        if w1 <= 0.0 {
            return PathResult {
                contribution: acc + surv,
                outcome: Outcome::Ruin(s),
            };
        }
        if w1 >= safe {
            // riskless from here on: ruin is impossible
            return PathResult {
                contribution: acc,
                outcome: Outcome::Safe(s),
            };
        }
        if cfg.bridge && vol > 0.0 {
            let p_low = bridge_hit(w, w1, vol * vol, step);
            acc += surv * p_low;
            surv *= 1.0 - p_low;
        }
        w = w1;
    }
    PathResult {
        contribution: acc,
        outcome: if death <= t_max {
            Outcome::Death(death)
        } else {
            Outcome::Horizon(w)
        },
    }
}

/// Ruin probability from `(w0, a0, t0)` under the deferred-annuity barrier
/// strategy, investing per `cfg.strategy`.
pub fn simulate_ruin(cfg: &SimConfig, surface: &RuinSurface, p: &ModelParams) -> Result<SimReport> {
    cfg.validate(p)?;
    let feedback = match cfg.strategy {
        StrategySource::Solver => {
            if (surface.a.income() - cfg.a0.income()).abs() > 1e-12 {
                return Err(RuinError::GridMismatch(format!(
                    "surface solved for A = {}, simulation starts at A = {}",
                    surface.a.income(),
                    cfg.a0.income()
                )));
            }
            if surface.params != *p {
                return Err(RuinError::GridMismatch(
                    "surface solved for different model parameters".into(),
                ));
            }
            Feedback::Surface(surface)
        }
        StrategySource::ClosedFormAtT => Feedback::closed_form(cfg.a0.shortfall(p), p),
    };
    let tally = run_paths(cfg, |shocks| annuity_path(cfg, p, feedback, shocks, |_, _, _| {}));
    Ok(tally.report(cfg.n_paths, None))
}

/// Lifetime ruin probability without annuities under the optimal feedback
/// for net consumption `c_net`; the target is `φ(w0; c_net)`.
///
/// The death time is drawn explicitly from each path's stream, which has the
/// same expectation as discounting ruin by `e^{-λτ₀}` but lets paths stop at
/// death. Paths still alive at `t_max` are dropped, an error of at most
/// `e^{-λ t_max}` reported as `tail_bound`.
pub fn simulate_no_annuity(cfg: &SimConfig, p: &ModelParams, c_net: f64) -> Result<SimReport> {
    cfg.validate(p)?;
    if !(c_net > 0.0) {
        return Err(RuinError::Domain {
            what: "c_net",
            value: c_net,
            domain: "(0, inf)".into(),
        });
    }
    let lam = p.lambda_s;
    let t_max = -NO_ANNUITY_TAIL.ln() / lam * (1.0 + 1e-9);
    let feedback = Feedback::closed_form(c_net, p);
    let tally = run_paths(cfg, |shocks| {
        let death = -shocks.uniform().ln() / lam;
        no_annuity_path(cfg, p, c_net, feedback, t_max, death, shocks)
    });
    Ok(tally.report(cfg.n_paths, Some((-lam * t_max).exp())))
}
