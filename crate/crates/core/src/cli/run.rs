use std::fmt::Write as _;
use std::sync::Arc;

use crate::dual::{
    check_verification_conditions, solve_sweep, validate_ineq, RuinSurface, VerificationReport,
    TOL_BOUNDARY, TOL_HJB, TOL_INEQ, TOL_TERMINAL,
};
use crate::error::RuinError;
use crate::fbp::{solve_obstacle, DualGrid, ObstacleSolution};
use crate::model::{phi, AnnuityState, ModelParams};
use crate::simulate::{path_diagnostics, simulate_ruin, SimReport};

use super::config::{Command, RunConfig};
use super::output::{Bundle, Cell};

/// Seed of `paper-example` when the configuration gives none.
pub const PAPER_SEED: u64 = 20_240_501;
/// Starting wealths of the Monte Carlo cross-check in `paper-example`.
pub const PAPER_MC_WEALTH: [f64; 3] = [5.0, 10.0, 15.0];
/// Wealth levels at which `Ψ` is checked to decrease across the plotted
/// slices. Since `Ψ(·, T) = φ`, the check is only meaningful below the wealth
/// where each earlier slice crosses `φ` (about 11 at `t = T/2`, 15.6 at 0).
pub const PAPER_T_SAMPLE_WEALTH: [f64; 5] = [1.0, 3.0, 5.0, 8.0, 10.0];
/// Annuity income level of the worked example.
pub const PAPER_A: f64 = 1.0;
/// Monte Carlo agreement: estimate within this many standard errors.
pub const MC_SIGMAS: f64 = 3.0;

/// Pipeline stage, in execution order. A failing stage sets the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Config,
    Solve,
    Verify,
    Ineq,
    MonteCarlo,
    Io,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Solve => 3,
            Stage::Verify => 4,
            Stage::Ineq => 5,
            Stage::MonteCarlo => 6,
            Stage::Io => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Solve => "solve",
            Stage::Verify => "verify",
            Stage::Ineq => "ineq",
            Stage::MonteCarlo => "monte-carlo",
            Stage::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: RuinError,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} stage failed: {}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {}

fn at(stage: Stage) -> impl Fn(RuinError) -> StageError {
    move |error| StageError { stage, error }
}

/// Artifacts of a completed run plus every validation margin that failed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub bundle: Bundle,
    pub failures: Vec<(Stage, String)>,
}

impl RunOutcome {
    /// 0 iff nothing failed, otherwise the code of the earliest failing stage.
    pub fn exit_code(&self) -> i32 {
        self.failures
            .iter()
            .map(|(s, _)| *s)
            .min()
            .map_or(0, Stage::exit_code)
    }
}

/// Run `cmd`; every output is rendered into the returned bundle.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<RunOutcome, StageError> {
    let mut cfg = cfg.clone();
    cfg.command = Some(cmd);
    if cmd == Command::PaperExample {
        cfg = paper_config(cfg);
    }
    cfg.check_for(cmd).map_err(at(Stage::Config))?;

    let mut out = RunOutcome {
        bundle: Bundle::default(),
        failures: Vec::new(),
    };
    out.bundle.text("config.toml", cfg.to_toml());
    match cmd {
        Command::Solve => {
            let s = solve_surface(&cfg, cfg.annuity_states()[0])?;
            emit_surface(&mut out.bundle, &s);
            emit_boundaries(&mut out.bundle, &s.source);
            emit_solve_report(&mut out.bundle, &s.source);
        }
        Command::Verify => {
            let s = solve_surface(&cfg, cfg.annuity_states()[0])?;
            emit_boundaries(&mut out.bundle, &s.source);
            emit_solve_report(&mut out.bundle, &s.source);
            let rep = check_verification_conditions(&s, None);
            emit_verification(&mut out.bundle, &rep, &[]);
            out.failures.extend(verification_failures(&rep));
        }
        Command::Sweep => run_sweep(&cfg, &mut out)?,
        Command::Simulate => {
            let s = solve_surface(&cfg, cfg.annuity_states()[0])?;
            let seed = cfg.seed.expect("checked");
            let w0 = cfg.sim.w0.clone();
            run_monte_carlo(&cfg, &s, &w0, seed, &mut out)?;
        }
        Command::PaperExample => run_paper(&cfg, &mut out)?,
    }
    Ok(out)
}

/// The worked example pins the market, mortality and annuity level; grid,
/// solver and simulation controls still come from the configuration.
fn paper_config(mut cfg: RunConfig) -> RunConfig {
    cfg.params = ModelParams::example();
    cfg.levels = Some(super::config::Levels::Single(PAPER_A));
    cfg.seed = Some(cfg.seed.unwrap_or(PAPER_SEED));
    cfg.sim.w0 = PAPER_MC_WEALTH.to_vec();
    cfg
}

/// Defaults for `paper-example` run without a configuration file.
pub fn paper_defaults() -> RunConfig {
    RunConfig {
        command: Some(Command::PaperExample),
        params: ModelParams::example(),
        levels: Some(super::config::Levels::Single(PAPER_A)),
        grid: Default::default(),
        n_w: crate::dual::DEFAULT_N_W,
        psor: Default::default(),
        sim: Default::default(),
        seed: None,
        out: "out".into(),
    }
}

pub fn solve_surface(cfg: &RunConfig, a: AnnuityState) -> Result<RuinSurface, StageError> {
    let grid = DualGrid::for_annuity(a, &cfg.params, &cfg.grid).map_err(at(Stage::Config))?;
    let sol = solve_obstacle(a, &grid, &cfg.params, &cfg.psor).map_err(at(Stage::Solve))?;
    RuinSurface::build(Arc::new(sol), cfg.n_w).map_err(at(Stage::Solve))
}

fn verification_failures(rep: &VerificationReport) -> Vec<(Stage, String)> {
    rep.failures()
        .into_iter()
        .map(|(name, v)| {
            let stage = if name == "ineq_margin" {
                Stage::Ineq
            } else {
                Stage::Verify
            };
            (stage, format!("{name} = {v:e}"))
        })
        .collect()
}

fn emit_surface(b: &mut Bundle, s: &RuinSurface) {
    let rows = (0..=s.n_t()).flat_map(|k| {
        (0..s.n_w()).map(move |j| {
            [
                Cell::F(s.t_nodes[k]),
                Cell::F(s.w_nodes[k][j]),
                Cell::F(s.values[k][j]),
                Cell::F(s.strategy[k][j]),
            ]
        })
    });
    b.csv("surface.csv", &["t", "w", "psi", "pi"], rows);
}

fn emit_boundaries(b: &mut Bundle, sol: &ObstacleSolution) {
    let n_t = sol.grid.n_t();
    let p = &sol.params;
    let t = sol.grid.t_nodes();
    let rows = (0..=n_t).map(|k| {
        let w_top = if k == n_t {
            sol.a.shortfall(p) / p.r
        } else {
            sol.safe_level(k)
        };
        [
            Cell::F(t[k]),
            Cell::F(sol.lower_boundary[k]),
            Cell::F(sol.upper_boundary[k]),
            Cell::F(w_top),
        ]
    });
    b.csv("boundaries.csv", &["t", "y_lower", "y_upper", "w_top"], rows);
}

fn kv(s: &mut String, key: &str, v: f64) {
    let _ = writeln!(s, "{key} = {}", toml_float(v));
}

fn toml_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn emit_solve_report(b: &mut Bundle, sol: &ObstacleSolution) {
    let inv = sol.check_invariants();
    let g = &sol.grid;
    let mut s = String::new();
    kv(&mut s, "a", sol.a.income());
    let _ = writeln!(s, "n_y = {}\nn_t = {}", g.n_y(), g.n_t());
    kv(&mut s, "y_min", g.y_min());
    kv(&mut s, "y_max", g.y_max());
    kv(&mut s, "max_residual", inv.max_residual);
    let _ = writeln!(
        s,
        "max_iterations = {}\ntotal_iterations = {}",
        sol.iterations.iter().max().unwrap_or(&0),
        sol.iterations.iter().sum::<usize>()
    );
    kv(&mut s, "max_obstacle_excess", inv.max_obstacle_excess);
    kv(&mut s, "max_concavity_defect", inv.max_concavity_defect);
    kv(&mut s, "min_value", inv.min_value);
    kv(&mut s, "max_value", inv.max_value);
    b.text("solve_report.toml", s);
}

/// Verification margins plus any extra `(name, passed, value)` checks.
fn emit_verification(b: &mut Bundle, rep: &VerificationReport, extra: &[(&str, bool, f64)]) {
    let mut s = String::new();
    let _ = writeln!(s, "passed = {}", rep.passed() && extra.iter().all(|e| e.1));
    kv(&mut s, "hjb_relative", rep.hjb_relative);
    let _ = writeln!(s, "hjb_at = [{}, {}]", rep.hjb_at.0, rep.hjb_at.1);
    kv(&mut s, "tol_hjb", TOL_HJB);
    if let Some(m) = rep.ineq_margin {
        kv(&mut s, "ineq_margin", m);
        kv(&mut s, "tol_ineq", TOL_INEQ);
    }
    kv(&mut s, "zero_wealth_gap", rep.zero_wealth_gap);
    kv(&mut s, "safe_level_gap", rep.safe_level_gap);
    kv(&mut s, "tol_boundary", TOL_BOUNDARY);
    kv(&mut s, "terminal_gap", rep.terminal_gap);
    kv(&mut s, "tol_terminal", TOL_TERMINAL);
    kv(&mut s, "monotone_defect", rep.monotone_defect);
    kv(&mut s, "convexity_defect", rep.convexity_defect);
    for (name, ok, v) in extra {
        let _ = writeln!(s, "{name}_passed = {ok}");
        kv(&mut s, name, *v);
    }
    b.text("verification.toml", s);
}

fn run_sweep(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), StageError> {
    let p = &cfg.params;
    let states = cfg.annuity_states();
    let sols = solve_sweep(&states, p, &cfg.grid, &cfg.psor, Default::default())
        .map_err(at(Stage::Solve))?;
    let sweep = validate_ineq(sols, p, cfg.n_w, Default::default()).map_err(at(Stage::Solve))?;

    let reports: Vec<VerificationReport> = sweep
        .surfaces
        .iter()
        .map(|s| check_verification_conditions(s, None))
        .collect();
    let rows = states.iter().map(|a| {
        let idx = sweep.surfaces.iter().position(|s| s.a == *a);
        let (hjb, ok) = match idx {
            Some(i) => (Cell::F(reports[i].hjb_relative), Cell::S(bool_str(reports[i].passed()))),
            None => (Cell::S(""), Cell::S("")),
        };
        let wbar = crate::model::safe_level_unchecked(a.income(), 0.0, p);
        [Cell::F(a.income()), Cell::F(a.shortfall(p)), Cell::F(wbar), hjb, ok]
    });
    out.bundle.csv(
        "sweep_levels.csv",
        &["a", "shortfall", "w_bar_t0", "hjb_relative", "verified"],
        rows,
    );

    let grid = sweep.grid();
    let y = grid.y_nodes();
    let t = grid.t_nodes();
    let rows = sweep.margin.iter().enumerate().map(|(k, row)| {
        let (i, m) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, m)| if m < best.1 { (i, m) } else { best });
        [Cell::F(t[k]), Cell::F(m), Cell::F(y[i])]
    });
    out.bundle
        .csv("ineq_margin.csv", &["t", "min_margin", "y_at_min"], rows);

    let (j, k, i) = sweep.ineq_at;
    let mut s = String::new();
    let _ = writeln!(s, "passed = {}", sweep.ineq_passed());
    kv(&mut s, "ineq_margin", sweep.ineq_margin);
    kv(&mut s, "tol_ineq", TOL_INEQ);
    kv(&mut s, "a_at_min", sweep.a_nodes[j]);
    kv(&mut s, "t_at_min", t[k]);
    kv(&mut s, "y_at_min", y[i]);
    let _ = writeln!(s, "levels = {}", sweep.a_nodes.len());
    let _ = writeln!(s, "surfaces = {}", sweep.surfaces.len());
    out.bundle.text("sweep_report.toml", s);

    if !sweep.ineq_passed() {
        out.failures.push((
            Stage::Ineq,
            format!(
                "ineq margin {:e} < -{TOL_INEQ:e} at A = {}, t = {}",
                sweep.ineq_margin, sweep.a_nodes[j], t[k]
            ),
        ));
    }
    for (s, rep) in sweep.surfaces.iter().zip(&reports) {
        for (stage, msg) in verification_failures(rep) {
            out.failures.push((stage, format!("A = {}: {msg}", s.a.income())));
        }
    }
    Ok(())
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Whether a Monte Carlo estimate agrees with the surface value.
pub fn mc_agrees(rep: &SimReport, target: f64) -> (bool, f64) {
    let diff = rep.ruin_estimate - target;
    if rep.std_error > 0.0 {
        let z = diff / rep.std_error;
        (z.abs() <= MC_SIGMAS, z)
    } else {
        (diff.abs() <= 1e-12, 0.0)
    }
}

fn run_monte_carlo(
    cfg: &RunConfig,
    s: &RuinSurface,
    w0: &[f64],
    seed: u64,
    out: &mut RunOutcome,
) -> Result<(), StageError> {
    let p = &cfg.params;
    let mut rows = Vec::with_capacity(w0.len());
    let mut events = Vec::new();
    for (idx, &w) in w0.iter().enumerate() {
        let sim = cfg.sim.sim_config(w, s.a, seed);
        let rep = simulate_ruin(&sim, s, p).map_err(at(Stage::MonteCarlo))?;
        let target = s.value_at(w, sim.t0).map_err(at(Stage::MonteCarlo))?;
        let (ok, z) = mc_agrees(&rep, target);
        if !ok {
            out.failures.push((
                Stage::MonteCarlo,
                format!(
                    "w0 = {w}: estimate {} vs surface {target}, z = {z:.2}",
                    rep.ruin_estimate
                ),
            ));
        }
        rows.push([
            Cell::F(w),
            Cell::F(sim.t0),
            Cell::F(rep.ruin_estimate),
            Cell::F(rep.std_error),
            Cell::F(target),
            Cell::F(z),
            Cell::U(rep.n_paths),
            Cell::U(rep.n_ruined_before_t),
            Cell::U(rep.n_annuitized),
            rep.mean_annuitization_time.map_or(Cell::S(""), Cell::F),
        ]);
        let log = path_diagnostics(&sim, s, p, cfg.sim.diagnostic_paths)
            .map_err(at(Stage::MonteCarlo))?;
        events.extend(log.into_iter().map(|e| {
            [
                Cell::U(idx),
                Cell::U(e.path),
                Cell::F(e.t),
                Cell::F(e.w),
                Cell::F(e.pi),
                Cell::F(e.a),
                Cell::S(e.kind.label()),
            ]
        }));
    }
    out.bundle.csv(
        "simulation.csv",
        &[
            "w0",
            "t0",
            "estimate",
            "std_error",
            "psi_surface",
            "z",
            "n_paths",
            "n_ruined_before_t",
            "n_annuitized",
            "mean_annuitization_time",
        ],
        rows,
    );
    out.bundle.csv(
        "path_events.csv",
        &["w0_index", "path", "t", "w", "pi", "a", "event"],
        events,
    );
    Ok(())
}

fn run_paper(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), StageError> {
    let p = cfg.params;
    let a = cfg.annuity_states()[0];
    let s = solve_surface(cfg, a)?;
    let short = a.shortfall(&p);
    let n_t = s.n_t();
    let dt = s.t_nodes[1] - s.t_nodes[0];
    let w_max = short / p.r;
    let n_w = cfg.n_w;
    let w: Vec<f64> = (0..n_w)
        .map(|j| w_max * j as f64 / (n_w - 1) as f64)
        .collect();

    // (i) three slices of the surface: t = 0, T/2 and T (nearest time nodes)
    let ks: Vec<usize> = [0.0, 0.5 * p.big_t, p.big_t]
        .iter()
        .map(|t| ((t / dt).round() as usize).min(n_t))
        .collect();
    let rows = ks.iter().flat_map(|&k| {
        let s = &s;
        w.iter().map(move |&w| {
            [
                Cell::F(s.t_nodes[k]),
                Cell::F(w),
                Cell::F(s.value(w, k)),
                Cell::F(s.strategy_on_slice(w, k)),
            ]
        })
    });
    out.bundle
        .csv("paper_surface.csv", &["t", "w", "psi", "pi"], rows);

    // (ii) overlay against the no-annuity probability with the same shortfall
    let phi_at = |w: f64| phi(w, short, &p).expect("w >= 0");
    let rows = w.iter().map(|&w| {
        let ps = s.value(w, 0);
        let ph = phi_at(w);
        [Cell::F(w), Cell::F(ph), Cell::F(ps), Cell::F(ph - ps)]
    });
    out.bundle.csv(
        "phi_overlay.csv",
        &["w", "phi_no_annuity", "psi_t0", "phi_minus_psi"],
        rows,
    );

    // (iii) free boundaries
    emit_boundaries(&mut out.bundle, &s.source);

    // (iv) verification, with the qualitative shape checks of the example
    let rep = check_verification_conditions(&s, None);
    let terminal_vs_closed_form = w
        .iter()
        .map(|&w| (s.value(w, n_t) - phi_at(w)).abs())
        .fold(0.0, f64::max);
    // across the plotted slices; on the full time grid Ψ rises again in a
    // layer just before T, where reaching w̄ in time becomes unlikely and Ψ
    // tends to φ
    let mut t_increase: f64 = f64::NEG_INFINITY;
    for &wq in &PAPER_T_SAMPLE_WEALTH {
        for pair in ks.windows(2) {
            t_increase = t_increase.max(s.value(wq, pair[1]) - s.value(wq, pair[0]));
        }
    }
    let diffs: Vec<f64> = w[1..].iter().map(|&w| phi_at(w) - s.value(w, 0)).collect();
    let below_first = diffs.first().is_some_and(|d| *d < 0.0);
    let crosses = diffs.iter().any(|d| *d > 0.0);
    let crossover = below_first && crosses;
    let crossing_w = w[1..]
        .iter()
        .zip(&diffs)
        .find(|(_, d)| **d > 0.0)
        .map_or(f64::NAN, |(w, _)| *w);
    let w_bar0 = s.w_top[0];
    let left = s.strategy_on_slice(w_bar0, 0);
    let right = s.strategy_on_slice(w_bar0 * (1.0 + 1e-9), 0);
    let extra = [
        ("terminal_vs_closed_form", terminal_vs_closed_form < TOL_TERMINAL, terminal_vs_closed_form),
        ("decreasing_in_t_max_increase", t_increase <= TOL_BOUNDARY, t_increase),
        ("crossover_wealth", crossover, crossing_w),
        ("safe_level_t0", true, w_bar0),
        ("strategy_left_of_safe_level", left > 0.0 && right == 0.0, left),
    ];
    emit_verification(&mut out.bundle, &rep, &extra);
    out.failures.extend(verification_failures(&rep));
    for (name, ok, v) in extra {
        if !ok {
            out.failures.push((Stage::Verify, format!("{name} = {v}")));
        }
    }

    // (v) Monte Carlo at three wealth levels
    let seed = cfg.seed.expect("set by paper_config");
    run_monte_carlo(cfg, &s, &PAPER_MC_WEALTH, seed, out)
}
