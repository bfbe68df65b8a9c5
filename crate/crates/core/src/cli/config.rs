use std::fmt::Write as _;
use std::path::PathBuf;

use toml::{Table, Value};

use crate::dual::{DEFAULT_A_NODES, DEFAULT_N_W};
use crate::error::{Result, RuinError};
use crate::fbp::{GridSpec, PsorSettings};
use crate::model::{AnnuityState, ModelParams};
use crate::simulate::{SimConfig, StrategySource};

/// Keys of `[params]`, in the order they are reported when missing.
const PARAM_KEYS: [&str; 7] = ["r", "mu", "sigma", "lambda_s", "lambda_o", "c", "T"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Sweep,
    Simulate,
    PaperExample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
            Command::PaperExample => "paper-example",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Command::Solve,
            Command::Verify,
            Command::Sweep,
            Command::Simulate,
            Command::PaperExample,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

/// Annuity income level(s) to solve for.
#[derive(Debug, Clone, PartialEq)]
pub enum Levels {
    /// `annuity.a`
    Single(f64),
    /// `annuity.a_grid`, strictly increasing.
    Grid(Vec<f64>),
    /// `annuity.a_nodes`: that many uniform levels on `[0, c]`.
    Uniform(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub n_paths: usize,
    pub dt: f64,
    /// One estimate per starting wealth.
    pub w0: Vec<f64>,
    pub t0: f64,
    pub strategy: StrategySource,
    pub antithetic: bool,
    pub bridge: bool,
    /// Paths replayed into the event log.
    pub diagnostic_paths: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            n_paths: 100_000,
            dt: 1.0 / 500.0,
            w0: vec![10.0],
            t0: 0.0,
            strategy: StrategySource::Solver,
            antithetic: true,
            bridge: true,
            diagnostic_paths: 10,
        }
    }
}

impl SimSettings {
    pub fn sim_config(&self, w0: f64, a0: AnnuityState, seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(self.n_paths, self.dt, seed, w0, a0);
        cfg.t0 = self.t0;
        cfg.strategy = self.strategy;
        cfg.antithetic = self.antithetic;
        cfg.bridge = self.bridge;
        cfg
    }
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub params: ModelParams,
    pub levels: Option<Levels>,
    pub grid: GridSpec,
    pub n_w: usize,
    pub psor: PsorSettings,
    pub sim: SimSettings,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl RunConfig {
    /// Checks that depend on the command: which level form it needs, and the
    /// seed for anything that draws random numbers.
    pub fn check_for(&self, cmd: Command) -> Result<()> {
        let mut errs = Vec::new();
        let single = matches!(self.levels, Some(Levels::Single(_)));
        match cmd {
            Command::Solve | Command::Verify | Command::Simulate if !single => errs.push(format!(
                "`{}` needs a single level: set annuity.a",
                cmd.name()
            )),
            Command::Sweep if single => {
                errs.push("`sweep` needs annuity.a_grid or annuity.a_nodes, not annuity.a".into())
            }
            _ => {}
        }
        if cmd == Command::Simulate && self.seed.is_none() {
            errs.push("`simulate` needs an explicit seed (top-level `seed` or --seed)".into());
        }
        if cmd == Command::Simulate {
            if let Some(Levels::Single(a)) = self.levels {
                if a >= self.params.c {
                    errs.push(format!(
                        "annuity.a = {a} leaves no shortfall to simulate; need a < c = {}",
                        self.params.c
                    ));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(RuinError::Config(errs))
        }
    }

    /// Annuity states of the configured levels.
    pub fn annuity_states(&self) -> Vec<AnnuityState> {
        let p = &self.params;
        match &self.levels {
            Some(Levels::Single(a)) => vec![AnnuityState::new(*a, p).expect("validated")],
            Some(Levels::Grid(g)) => g
                .iter()
                .map(|a| AnnuityState::new(*a, p).expect("validated"))
                .collect(),
            Some(Levels::Uniform(n)) => crate::dual::uniform_a_nodes(*n, p),
            None => crate::dual::uniform_a_nodes(DEFAULT_A_NODES, p),
        }
    }

    /// Canonical text form; `parse_config(cfg.to_toml())` returns `cfg`.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        if let Some(c) = self.command {
            let _ = writeln!(s, "command = \"{}\"", c.name());
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "out = {}", Value::String(self.out.display().to_string()));
        let p = &self.params;
        let _ = writeln!(s, "\n[params]");
        for (k, v) in [
            ("r", p.r),
            ("mu", p.mu),
            ("sigma", p.sigma),
            ("lambda_s", p.lambda_s),
            ("lambda_o", p.lambda_o),
            ("c", p.c),
            ("T", p.big_t),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        match &self.levels {
            Some(Levels::Single(a)) => {
                let _ = writeln!(s, "\n[annuity]\na = {a:?}");
            }
            Some(Levels::Grid(g)) => {
                let _ = writeln!(s, "\n[annuity]\na_grid = {}", float_list(g));
            }
            Some(Levels::Uniform(n)) => {
                let _ = writeln!(s, "\n[annuity]\na_nodes = {n}");
            }
            None => {}
        }
        let g = &self.grid;
        let _ = writeln!(
            s,
            "\n[grid]\nn_y = {}\nn_t = {}\ny_min_factor = {:?}\ny_max_factor = {:?}\nn_w = {}",
            g.n_y, g.n_t, g.y_min_factor, g.y_max_factor, self.n_w
        );
        let q = &self.psor;
        let _ = writeln!(
            s,
            "\n[psor]\nomega = {:?}\ntol = {:?}\nmax_iter = {}",
            q.omega, q.tol, q.max_iter
        );
        let m = &self.sim;
        let strategy = match m.strategy {
            StrategySource::Solver => "solver",
            StrategySource::ClosedFormAtT => "closed-form-at-t",
        };
        let _ = writeln!(
            s,
            "\n[sim]\nn_paths = {}\ndt = {:?}\nw0 = {}\nt0 = {:?}\nstrategy = \"{strategy}\"\n\
             antithetic = {}\nbridge = {}\ndiagnostic_paths = {}",
            m.n_paths,
            m.dt,
            float_list(&m.w0),
            m.t0,
            m.antithetic,
            m.bridge,
            m.diagnostic_paths
        );
        s
    }
}

fn float_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Parse `text`, then apply `key.path=value` overrides (flags win). Values are
/// read as TOML, falling back to a bare string.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| RuinError::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut errs = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut root, o) {
            errs.push(e);
        }
    }
    if !errs.is_empty() {
        return Err(RuinError::Config(errs));
    }
    let mut r = Reader { errs: Vec::new() };
    let cfg = r.run_config(root);
    match cfg {
        Some(cfg) if r.errs.is_empty() => Ok(cfg),
        _ => Err(RuinError::Config(r.errs)),
    }
}

fn apply_override(root: &mut Table, spec: &str) -> std::result::Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override `{spec}` is not of the form key=value"))?;
    let path: Vec<&str> = path.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) || path.len() > 2 {
        return Err(format!(
            "override key `{}` must be `key` or `section.key`",
            path.join(".")
        ));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut table = root;
    for section in &path[..path.len() - 1] {
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| format!("override `{spec}`: `{section}` is not a section"))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

/// Walks the parsed table, removing every key it understands and recording
/// every problem; whatever is left over is reported as unknown.
struct Reader {
    errs: Vec<String>,
}

impl Reader {
    fn run_config(&mut self, mut root: Table) -> Option<RunConfig> {
        let command = match root.remove("command") {
            None => None,
            Some(Value::String(s)) => match Command::from_name(&s) {
                Some(c) => Some(c),
                None => {
                    self.errs.push(format!("command = \"{s}\" is not a known command"));
                    None
                }
            },
            Some(v) => {
                self.errs.push(format!("command = {v} must be a string"));
                None
            }
        };
        let seed = match root.remove("seed") {
            None => None,
            Some(Value::Integer(i)) if i >= 0 => Some(i as u64),
            Some(v) => {
                self.errs.push(format!("seed = {v} must be a non-negative integer"));
                None
            }
        };
        let out = match root.remove("out") {
            None => PathBuf::from("out"),
            Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
            Some(v) => {
                self.errs.push(format!("out = {v} must be a non-empty path string"));
                PathBuf::from("out")
            }
        };

        let mut params_t = self.section(&mut root, "params");
        let mut annuity_t = self.section(&mut root, "annuity");
        let mut grid_t = self.section(&mut root, "grid");
        let mut psor_t = self.section(&mut root, "psor");
        let mut sim_t = self.section(&mut root, "sim");
        for key in root.keys() {
            self.errs.push(format!("unknown key `{key}`"));
        }

        let params = self.params(&mut params_t);
        let levels = match params {
            Some(p) => self.levels(&mut annuity_t, &p),
            None => {
                // cannot be checked without valid params; not unknown either
                for key in ["a", "a_grid", "a_nodes"] {
                    annuity_t.remove(key);
                }
                None
            }
        };

        let defaults = GridSpec::default();
        let grid = GridSpec {
            n_y: self.count(&mut grid_t, "grid", "n_y", defaults.n_y),
            n_t: self.count(&mut grid_t, "grid", "n_t", defaults.n_t),
            y_min_factor: self.float(&mut grid_t, "grid", "y_min_factor", defaults.y_min_factor),
            y_max_factor: self.float(&mut grid_t, "grid", "y_max_factor", defaults.y_max_factor),
        };
        self.errs.extend(grid.violations());
        let n_w = self.count(&mut grid_t, "grid", "n_w", DEFAULT_N_W);
        if n_w < 2 {
            self.errs.push(format!("grid.n_w = {n_w} must be >= 2"));
        }

        let defaults = PsorSettings::default();
        let psor = PsorSettings {
            omega: self.float(&mut psor_t, "psor", "omega", defaults.omega),
            tol: self.float(&mut psor_t, "psor", "tol", defaults.tol),
            max_iter: self.count(&mut psor_t, "psor", "max_iter", defaults.max_iter),
        };
        self.errs.extend(psor.violations());

        let sim = self.sim(&mut sim_t, params.as_ref());

        for (name, t) in [
            ("params", params_t),
            ("annuity", annuity_t),
            ("grid", grid_t),
            ("psor", psor_t),
            ("sim", sim_t),
        ] {
            for key in t.keys() {
                self.errs.push(format!("unknown key `{name}.{key}`"));
            }
        }

        Some(RunConfig {
            command,
            params: params?,
            levels,
            grid,
            n_w,
            psor,
            sim,
            seed,
            out,
        })
    }

    fn section(&mut self, root: &mut Table, name: &str) -> Table {
        match root.remove(name) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(v) => {
                self.errs.push(format!("`{name}` must be a section, found {}", v.type_str()));
                Table::new()
            }
        }
    }

    fn params(&mut self, t: &mut Table) -> Option<ModelParams> {
        let mut vals = [0.0; 7];
        let mut ok = true;
        let missing: Vec<&str> = PARAM_KEYS
            .iter()
            .copied()
            .filter(|k| !t.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            self.errs.push(format!(
                "[params] has no defaults; missing keys: {}",
                missing.join(", ")
            ));
            ok = false;
        }
        for (slot, key) in vals.iter_mut().zip(PARAM_KEYS) {
            match t.remove(key).map(|v| as_f64(&v).ok_or(v)) {
                Some(Ok(x)) => *slot = x,
                Some(Err(v)) => {
                    self.errs.push(format!("params.{key} = {v} must be a number"));
                    ok = false;
                }
                None => {}
            }
        }
        if !ok {
            return None;
        }
        let p = ModelParams {
            r: vals[0],
            mu: vals[1],
            sigma: vals[2],
            lambda_s: vals[3],
            lambda_o: vals[4],
            c: vals[5],
            big_t: vals[6],
        };
        let v = p.violations();
        if v.is_empty() {
            return Some(p);
        }
        for (name, value, constraint) in v {
            let name = if name == "big_t" { "T" } else { name };
            self.errs.push(format!("params.{name} = {value} {constraint}"));
        }
        None
    }

    fn levels(&mut self, t: &mut Table, p: &ModelParams) -> Option<Levels> {
        let given: Vec<&str> = ["a", "a_grid", "a_nodes"]
            .into_iter()
            .filter(|k| t.contains_key(*k))
            .collect();
        if given.len() > 1 {
            self.errs.push(format!(
                "[annuity] takes exactly one of a, a_grid, a_nodes; got {}",
                given.join(", ")
            ));
        }
        let check = |a: f64| -> std::result::Result<f64, String> {
            AnnuityState::new(a, p).map(|_| a).map_err(|e| e.to_string())
        };
        if let Some(v) = t.remove("a") {
            return match as_f64(&v).ok_or_else(|| format!("annuity.a = {v} must be a number")).and_then(check) {
                Ok(a) => Some(Levels::Single(a)),
                Err(e) => {
                    self.errs.push(e);
                    None
                }
            };
        }
        if let Some(v) = t.remove("a_grid") {
            let Some(items) = v.as_array() else {
                self.errs.push(format!("annuity.a_grid = {v} must be an array of numbers"));
                return None;
            };
            let mut g = Vec::with_capacity(items.len());
            for item in items {
                match as_f64(item).ok_or_else(|| format!("annuity.a_grid entry {item} must be a number")).and_then(check) {
                    Ok(a) => g.push(a),
                    Err(e) => self.errs.push(e),
                }
            }
            if g.len() != items.len() {
                return None;
            }
            if g.len() < 3 || g.windows(2).any(|w| w[1] <= w[0]) {
                self.errs.push(format!(
                    "annuity.a_grid = {} must hold at least 3 strictly increasing levels",
                    float_list(&g)
                ));
                return None;
            }
            return Some(Levels::Grid(g));
        }
        if let Some(v) = t.remove("a_nodes") {
            return match v.as_integer() {
                Some(n) if n >= 3 => Some(Levels::Uniform(n as usize)),
                _ => {
                    self.errs.push(format!("annuity.a_nodes = {v} must be an integer >= 3"));
                    None
                }
            };
        }
        None
    }

    fn sim(&mut self, t: &mut Table, p: Option<&ModelParams>) -> SimSettings {
        let d = SimSettings::default();
        let w0 = match t.remove("w0") {
            None => d.w0.clone(),
            Some(v) => {
                let list = match &v {
                    Value::Array(items) => items.iter().map(as_f64).collect::<Option<Vec<_>>>(),
                    other => as_f64(other).map(|x| vec![x]),
                };
                match list {
                    Some(l) if !l.is_empty() && l.iter().all(|w| w.is_finite() && *w >= 0.0) => l,
                    _ => {
                        self.errs.push(format!(
                            "sim.w0 = {v} must be a number >= 0 or a non-empty array of them"
                        ));
                        d.w0.clone()
                    }
                }
            }
        };
        let strategy = match t.remove("strategy") {
            None => d.strategy,
            Some(Value::String(s)) if s == "solver" => StrategySource::Solver,
            Some(Value::String(s)) if s == "closed-form-at-t" => StrategySource::ClosedFormAtT,
            Some(v) => {
                self.errs.push(format!(
                    "sim.strategy = {v} must be \"solver\" or \"closed-form-at-t\""
                ));
                d.strategy
            }
        };
        let s = SimSettings {
            n_paths: self.count(t, "sim", "n_paths", d.n_paths),
            dt: self.float(t, "sim", "dt", d.dt),
            w0,
            t0: self.float(t, "sim", "t0", d.t0),
            strategy,
            antithetic: self.flag(t, "sim", "antithetic", d.antithetic),
            bridge: self.flag(t, "sim", "bridge", d.bridge),
            diagnostic_paths: self.count(t, "sim", "diagnostic_paths", d.diagnostic_paths),
        };
        if let Some(p) = p {
            let probe = s.sim_config(s.w0[0], AnnuityState::new(0.0, p).expect("0 is valid"), 0);
            self.errs.extend(probe.violations(p));
        }
        s
    }

    fn float(&mut self, t: &mut Table, section: &str, key: &str, default: f64) -> f64 {
        match t.remove(key) {
            None => default,
            Some(v) => match as_f64(&v) {
                Some(x) => x,
                None => {
                    self.errs.push(format!("{section}.{key} = {v} must be a number"));
                    default
                }
            },
        }
    }

    fn count(&mut self, t: &mut Table, section: &str, key: &str, default: usize) -> usize {
        match t.remove(key) {
            None => default,
            Some(Value::Integer(i)) if i >= 0 => i as usize,
            Some(v) => {
                self.errs
                    .push(format!("{section}.{key} = {v} must be a non-negative integer"));
                default
            }
        }
    }

    fn flag(&mut self, t: &mut Table, section: &str, key: &str, default: bool) -> bool {
        match t.remove(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(v) => {
                self.errs.push(format!("{section}.{key} = {v} must be true or false"));
                default
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"
seed = 7
out = "example-out"

[params]
r = 0.02
mu = 0.06
sigma = 0.2
lambda_s = 0.02
lambda_o = 0.02
c = 1.5
T = 5

[annuity]
a = 1.0
"#;

    fn messages(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(RuinError::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_lists_every_missing_param() {
        let errs = messages("");
        assert_eq!(errs.len(), 1, "{errs:?}");
        for key in PARAM_KEYS {
            assert!(errs[0].contains(key), "{key} missing from {}", errs[0]);
        }
        assert!(errs[0].contains("r, mu, sigma, lambda_s, lambda_o, c, T"));
    }

    #[test]
    fn mu_below_r_is_named() {
        let errs = messages(&EXAMPLE.replace("mu = 0.06", "mu = 0.01"));
        assert_eq!(errs, vec!["params.mu = 0.01 must exceed r = 0.02".to_string()]);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("bogus = 1\n{EXAMPLE}\n[grid]\nn_yy = 3\n[extra]\nz = 1\n");
        let errs = messages(&text);
        assert!(errs.contains(&"unknown key `bogus`".to_string()), "{errs:?}");
        assert!(errs.contains(&"unknown key `extra`".to_string()), "{errs:?}");
        assert!(errs.contains(&"unknown key `grid.n_yy`".to_string()), "{errs:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = EXAMPLE
            .replace("sigma = 0.2", "sigma = -1")
            .replace("[annuity]", "[grid]\nn_y = 2\n[psor]\nomega = 3\n[annuity]");
        let errs = messages(&text);
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn example_round_trips() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.params, ModelParams::example());
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), cfg.to_toml());
    }

    #[test]
    fn overrides_win() {
        let cfg = parse_config_with(
            EXAMPLE,
            &[
                "seed=11".into(),
                "sim.w0=[5, 10]".into(),
                "grid.n_y=400".into(),
                "out=other".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(11));
        assert_eq!(cfg.sim.w0, vec![5.0, 10.0]);
        assert_eq!(cfg.grid.n_y, 400);
        assert_eq!(cfg.out, PathBuf::from("other"));
        assert!(parse_config_with(EXAMPLE, &["nonsense".into()]).is_err());
    }

    #[test]
    fn simulate_needs_seed() {
        let cfg = parse_config(&EXAMPLE.replace("seed = 7", "")).unwrap();
        assert!(cfg.check_for(Command::Simulate).is_err());
        assert!(cfg.check_for(Command::Solve).is_ok());
        assert!(cfg.check_for(Command::Sweep).is_err());
    }
}
