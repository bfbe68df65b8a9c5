//! Single-path kernels shared by the estimators and the diagnostics replay.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Skip the bridge exponential when its argument exceeds this: `e^-40` is
/// far below any reported precision.
const BRIDGE_CUTOFF: f64 = 40.0;

/// Probability that a Brownian bridge with variance rate `var` between `a`
/// and `b` (both on the same side of a barrier at distances `da`, `db`)
/// touches the barrier within one step of length `h`.
pub(crate) fn bridge_hit(da: f64, db: f64, var: f64, h: f64) -> f64 {
    if var <= 0.0 || da <= 0.0 || db <= 0.0 {
        return if da <= 0.0 || db <= 0.0 { 1.0 } else { 0.0 };
    }
    let arg = 2.0 * da * db / (var * h);
    if arg > BRIDGE_CUTOFF {
        0.0
    } else {
        (-arg).exp()
    }
}

/// Random draws for one path or antithetic pair.
///
/// The first member of a pair draws and records; the second replays the
/// record mirrored (`z -> -z`, `u -> 1 - u`) and draws fresh once it
/// outlives it.
pub(crate) struct Shocks<'a> {
    rng: &'a mut ChaCha8Rng,
    tape: &'a mut Vec<f64>,
    mode: Mode,
    pos: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Plain,
    Record,
    Mirror,
}

impl<'a> Shocks<'a> {
    pub(crate) fn new(rng: &'a mut ChaCha8Rng, tape: &'a mut Vec<f64>, mode: Mode) -> Self {
        if mode == Mode::Record {
            tape.clear();
        }
        Shocks {
            rng,
            tape,
            mode,
            pos: 0,
        }
    }

    #[inline]
    fn draw(&mut self, fresh: impl FnOnce(&mut ChaCha8Rng) -> f64, mirror: impl FnOnce(f64) -> f64) -> f64 {
        match self.mode {
            Mode::Plain => fresh(self.rng),
            Mode::Record => {
                let x = fresh(self.rng);
                self.tape.push(x);
                x
            }
            Mode::Mirror => {
                let x = match self.tape.get(self.pos) {
                    Some(x) => mirror(*x),
                    None => fresh(self.rng),
                };
                self.pos += 1;
                x
            }
        }
    }

    #[inline]
    pub(crate) fn normal(&mut self) -> f64 {
        self.draw(|r| r.sample(StandardNormal), |z| -z)
    }

    /// Uniform on `(0, 1]`.
    pub(crate) fn uniform(&mut self) -> f64 {
        self.draw(|r| 1.0 - r.gen::<f64>(), |u| 1.0 - u)
    }
}

/// How a path ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Wealth reached zero at this time.
    Ruin(f64),
    /// Wealth reached the safe level at this time and the shortfall was annuitized.
    Annuitize(f64),
    /// Survived to the horizon with this wealth.
    Horizon(f64),
    /// Died before ruin (no-annuity estimator only).
    Death(f64),
    /// Reached `c_net / r`, from where the riskless asset alone avoids ruin
    /// (no-annuity estimator only).
    Safe(f64),
}

/// Result of one path under the killing-weight estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathResult {
    pub contribution: f64,
    pub outcome: Outcome,
}
