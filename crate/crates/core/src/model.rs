//! Market, mortality and annuity model together with every closed-form
//! quantity the numerical modules are tested against.
//!
//! Wealth is measured in units of consumption, time in years. The individual
//! consumes at net rate `c`, trades a riskless asset earning `r` and a risky
//! asset with drift `mu` and volatility `sigma`, dies at an exponential time
//! with subjective hazard `lambda_s`, and buys deferred life annuities priced
//! with objective hazard `lambda_o`. Income bought before `big_t` starts to
//! pay at `big_t`.

use crate::error::{Result, RuinError};

/// Slack allowed when checking `t ∈ [0, T]` so that grid times computed as
/// `k * dt` are not rejected at the right end.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Riskless rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Subjective hazard rate (used for ruin).
    pub lambda_s: f64,
    /// Objective hazard rate (used for annuity pricing).
    pub lambda_o: f64,
    /// Net consumption rate.
    pub c: f64,
    /// Date at which deferred annuity income starts.
    pub big_t: f64,
}

impl ModelParams {
    /// Validated constructor.
    pub fn new(
        r: f64,
        mu: f64,
        sigma: f64,
        lambda_s: f64,
        lambda_o: f64,
        c: f64,
        big_t: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            r,
            mu,
            sigma,
            lambda_s,
            lambda_o,
            c,
            big_t,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters of the worked example: `r = 2%`, `mu = 6%`, `sigma = 20%`,
    /// both hazard rates 2%, consumption 1.5 per year, income starting in 5 years.
    pub fn example() -> Self {
        ModelParams {
            r: 0.02,
            mu: 0.06,
            sigma: 0.20,
            lambda_s: 0.02,
            lambda_o: 0.02,
            c: 1.5,
            big_t: 5.0,
        }
    }

    /// Every violated invariant, as `(field, value, constraint)`.
    pub fn violations(&self) -> Vec<(&'static str, f64, String)> {
        let mut out = Vec::new();
        let fields = [
            ("r", self.r),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("lambda_s", self.lambda_s),
            ("lambda_o", self.lambda_o),
            ("c", self.c),
            ("big_t", self.big_t),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                out.push((name, v, "must be finite".to_string()));
            }
        }
        if !out.is_empty() {
            return out;
        }
        // r = 0 is rejected: the no-annuity ruin probability and the safe
        // level c/r are singular there.
        if self.r <= 0.0 {
            out.push(("r", self.r, "must be > 0".to_string()));
        }
        if self.mu <= self.r {
            out.push(("mu", self.mu, format!("must exceed r = {}", self.r)));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("lambda_s", self.lambda_s),
            ("lambda_o", self.lambda_o),
            ("c", self.c),
            ("big_t", self.big_t),
        ] {
            if v <= 0.0 {
                out.push((name, v, "must be > 0".to_string()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((name, value, constraint)) => Err(RuinError::InvalidParameter {
                name,
                value,
                constraint,
            }),
        }
    }

    /// Annuity discount rate `r + lambda_o`; a life annuity paying 1 per year costs `1/rho`.
    pub fn rho(&self) -> f64 {
        self.r + self.lambda_o
    }

    /// Half the squared Sharpe ratio.
    pub fn m(&self) -> f64 {
        let sharpe = (self.mu - self.r) / self.sigma;
        0.5 * sharpe * sharpe
    }

    pub fn d(&self) -> f64 {
        exponent_d(self)
    }

    /// `(mu - r) / sigma^2`, the Merton ratio that scales every feedback strategy.
    pub fn merton_ratio(&self) -> f64 {
        (self.mu - self.r) / (self.sigma * self.sigma)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(-TIME_SLACK..=self.big_t + TIME_SLACK).contains(&t) || t.is_nan() {
            return Err(RuinError::Domain {
                what: "t",
                value: t,
                domain: format!("[0, {}]", self.big_t),
            });
        }
        Ok(())
    }
}

/// Deferred annuity income already bought, as a rate paid from `T` on.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AnnuityState(f64);

impl AnnuityState {
    pub fn new(a: f64, p: &ModelParams) -> Result<Self> {
        if !(0.0..=p.c).contains(&a) {
            return Err(RuinError::Domain {
                what: "A",
                value: a,
                domain: format!("[0, c = {}]", p.c),
            });
        }
        Ok(AnnuityState(a))
    }

    /// Fully annuitized state `A = c`.
    pub fn full(p: &ModelParams) -> Self {
        AnnuityState(p.c)
    }

    pub fn income(self) -> f64 {
        self.0
    }

    /// Consumption not yet covered, `c - A`.
    pub fn shortfall(self, p: &ModelParams) -> f64 {
        (p.c - self.0).max(0.0)
    }
}

/// `base^d` evaluated as `exp(d ln base)` with the base clamped at zero.
fn clamped_pow(base: f64, d: f64) -> f64 {
    if base <= 0.0 {
        0.0
    } else {
        (d * base.ln()).exp()
    }
}

/// Exponent `d > 1` of the no-annuity ruin probability.
pub fn exponent_d(p: &ModelParams) -> f64 {
    let m = p.m();
    let b = p.r + p.lambda_s + m;
    let disc = b * b - 4.0 * p.r * p.lambda_s;
    assert!(disc >= 0.0, "discriminant {disc} negative for {p:?}");
    (b + disc.sqrt()) / (2.0 * p.r)
}

/// Minimum probability of lifetime ruin without annuities, `(1 - r w / c_net)^d`.
///
/// Zero above the safe level `c_net / r` and, by convention, when `c_net = 0`.
pub fn phi(w: f64, c_net: f64, p: &ModelParams) -> Result<f64> {
    if w < 0.0 || w.is_nan() {
        return Err(RuinError::Domain {
            what: "w",
            value: w,
            domain: "[0, inf)".into(),
        });
    }
    if c_net <= 0.0 {
        return Ok(0.0);
    }
    Ok(clamped_pow(1.0 - p.r * w / c_net, p.d()))
}

/// Optimal amount held in the risky asset without annuities.
pub fn pi_star_no_annuity(w: f64, c_net: f64, p: &ModelParams) -> Result<f64> {
    let top = c_net / p.r;
    if !(0.0..=top).contains(&w) {
        return Err(RuinError::Domain {
            what: "w",
            value: w,
            domain: format!("[0, c/r = {top}]"),
        });
    }
    Ok(p.merton_ratio() * (c_net - p.r * w) / ((p.d() - 1.0) * p.r))
}

/// Price at time `t` of a deferred life annuity paying 1 per year from `T` on.
pub fn deferred_price(t: f64, p: &ModelParams) -> Result<f64> {
    p.check_time(t)?;
    let rho = p.rho();
    Ok((-rho * (p.big_t - t)).exp() / rho)
}

/// Wealth at which the individual can annuitize the remaining shortfall and
/// ride the riskless asset to `T` without ruin.
pub fn safe_level(a: AnnuityState, t: f64, p: &ModelParams) -> Result<f64> {
    p.check_time(t)?;
    Ok(safe_level_unchecked(a.income(), t, p))
}

pub(crate) fn safe_level_unchecked(a: f64, t: f64, p: &ModelParams) -> f64 {
    let tau = (p.big_t - t).max(0.0);
    let rho = p.rho();
    p.c * (-(-p.r * tau).exp_m1()) / p.r + (p.c - a) * (-rho * tau).exp() / rho
}

/// Safe level when immediate annuities can also be bought.
pub fn safe_level_immediate(a: AnnuityState, t: f64, p: &ModelParams) -> Result<f64> {
    p.check_time(t)?;
    let tau = (p.big_t - t).max(0.0);
    let rho = p.rho();
    let a = a.income();
    let bridge = a * (-(-p.r * tau).exp_m1()) / p.r + (p.c - a) / rho;
    Ok(bridge.min(p.c / rho))
}

/// Ruin probability after spending `delta_c / rho` on an immediate annuity
/// that reduces net consumption to `c - delta_c`.
pub fn one_shot_annuity_ruin(w: f64, delta_c: f64, p: &ModelParams) -> Result<f64> {
    let rho = p.rho();
    if w < 0.0 || w >= p.c / rho {
        return Err(RuinError::Domain {
            what: "w",
            value: w,
            domain: format!("[0, c/rho = {})", p.c / rho),
        });
    }
    if delta_c < 0.0 || delta_c / rho > w {
        return Err(RuinError::Domain {
            what: "delta_c",
            value: delta_c,
            domain: format!("[0, w rho = {}]", w * rho),
        });
    }
    phi((w - delta_c / rho).max(0.0), p.c - delta_c, p)
}

/// Maximiser `r d / (c - A)` of the terminal dual penalty; `None` when `A = c`.
pub fn terminal_peak(a: AnnuityState, p: &ModelParams) -> Option<f64> {
    let short = a.shortfall(p);
    (short > 0.0).then(|| p.r * p.d() / short)
}

/// Terminal penalty `g(y) = (c-A) y / r - (d-1) ((c-A) y / (r d))^(d/(d-1))`.
///
/// This is the unconstrained convex conjugate of `(1 - r w/(c-A))^d`; it
/// peaks at 1 at [`terminal_peak`] and turns negative further out.
pub fn terminal_dual_g(y: f64, a: AnnuityState, p: &ModelParams) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return Err(RuinError::Domain {
            what: "y",
            value: y,
            domain: "[0, inf)".into(),
        });
    }
    Ok(terminal_g_unchecked(y, a.shortfall(p), p.r, p.d()))
}

pub(crate) fn terminal_g_unchecked(y: f64, short: f64, r: f64, d: f64) -> f64 {
    if short <= 0.0 {
        return 0.0;
    }
    let k = short / (r * d);
    d * k * y - (d - 1.0) * clamped_pow(k * y, d / (d - 1.0))
}

/// Terminal dual value on the domain `w >= 0`: `g` up to its peak, 1 beyond.
///
/// Both have the same conjugate for `w >= 0`; the capped form keeps the dual
/// value inside `[0, 1]` so the upper stopping region exists.
pub fn terminal_dual_capped(y: f64, a: AnnuityState, p: &ModelParams) -> Result<f64> {
    let g = terminal_dual_g(y, a, p)?;
    Ok(match terminal_peak(a, p) {
        Some(peak) if y >= peak => 1.0,
        _ => g,
    })
}

/// Penalty paid on stopping before `T`, `min(1, w̄(A,t) y)`.
pub fn obstacle_u(y: f64, a: AnnuityState, t: f64, p: &ModelParams) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return Err(RuinError::Domain {
            what: "y",
            value: y,
            domain: "[0, inf)".into(),
        });
    }
    Ok((safe_level(a, t, p)? * y).min(1.0))
}
