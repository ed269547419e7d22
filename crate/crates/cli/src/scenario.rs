//! Scenario files.
//!
//! A scenario is a line-oriented `key = value` file with `[section]` headers
//! and `#` comments. `mode` sits above the first section; the remaining keys
//! live in `[grid]`, `[params]`, `[initial]`, `[stepping]`, `[output]` and,
//! for sweeps, `[sweep]`.
//!
//! ```text
//! mode = simulate            # simulate | stability | sweep
//!
//! [grid]
//! length = 1.0               # required
//! nodes = 256                # required
//!
//! [params]                   # all optional, defaults shown
//! m = 1
//! s_plus = 1
//! s_minus = 1
//! mu0_plus = 1
//! tau_half = 1               # inf gives a Newtonian upper film
//! p = 2
//! tau = 1
//!
//! [initial]
//! f = 1.0                    # required
//! g = 1.0                    # required
//! f_modes = 1:1e-4, 3:0.01   # optional list of mode:amplitude
//! g_modes =
//!
//! [stepping]
//! t_end = 0.5                # required unless mode = stability
//! scheme = implicit          # implicit | semi-implicit
//! dt0 = 1e-6
//! dt_min = 1e-14
//! dt_max = 1e-2
//! newton_tol = 1e-10
//! newton_max_iter = 25
//! rupture_floor = 1e-9       # default: 1e-8 * initial minimum height
//! blowup_norm_cap = 1e6      # default: 1e8 * initial H4 norm
//!
//! [output]
//! directory = out            # relative to the scenario file
//! every = 1                  # diagnostics row every N accepted steps
//! profile_every = 0          # profile every N diagnostics rows; 0 = first and last only
//! stability_modes = 8
//!
//! [sweep]
//! parameter = p              # any [params] key, or f / g from [initial]
//! values = 1, 1.5, 2         # or: range = start, stop, count
//! ```
//!
//! Initial fields are `base + sum amplitude cos(n pi x / L)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ellis_film::{FluidParams, Grid, Scheme, State, StepConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Stability,
    Sweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Stability => "stability",
            Mode::Sweep => "sweep",
        })
    }
}

/// `base + sum amplitude cos(n pi x / L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialField {
    pub base: f64,
    pub modes: Vec<(usize, f64)>,
}

impl InitialField {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        self.modes
            .iter()
            .fold(self.base, |acc, &(n, a)| acc + a * (n as f64 * PI * x / length).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    M,
    SPlus,
    SMinus,
    Mu0Plus,
    TauHalf,
    P,
    Tau,
    InitialF,
    InitialG,
}

impl SweepTarget {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "m" => Self::M,
            "s_plus" => Self::SPlus,
            "s_minus" => Self::SMinus,
            "mu0_plus" => Self::Mu0Plus,
            "tau_half" => Self::TauHalf,
            "p" => Self::P,
            "tau" => Self::Tau,
            "f" => Self::InitialF,
            "g" => Self::InitialG,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::M => "m",
            Self::SPlus => "s_plus",
            Self::SMinus => "s_minus",
            Self::Mu0Plus => "mu0_plus",
            Self::TauHalf => "tau_half",
            Self::P => "p",
            Self::Tau => "tau",
            Self::InitialF => "f",
            Self::InitialG => "g",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub target: SweepTarget,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub length: f64,
    pub nodes: usize,
    pub params: FluidParams,
    pub initial_f: InitialField,
    pub initial_g: InitialField,
    pub stepping: StepConfig,
    pub t_end: f64,
    pub every: usize,
    pub profile_every: usize,
    pub stability_modes: usize,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    pub fn grid(&self) -> Grid {
        Grid::new(self.length, self.nodes).expect("validated grid")
    }

    pub fn initial_state(&self, grid: &Grid) -> State {
        State::from_fn(
            grid,
            |x| self.initial_f.eval(x, self.length),
            |x| self.initial_g.eval(x, self.length),
        )
    }

    /// The scenario with the swept quantity set to `value`.
    pub fn with_sweep_value(&self, target: SweepTarget, value: f64) -> Scenario {
        let mut s = self.clone();
        match target {
            SweepTarget::M => s.params.m = value,
            SweepTarget::SPlus => s.params.s_plus = value,
            SweepTarget::SMinus => s.params.s_minus = value,
            SweepTarget::Mu0Plus => s.params.mu0_plus = value,
            SweepTarget::TauHalf => s.params.tau_half = value,
            SweepTarget::P => s.params.p = value,
            SweepTarget::Tau => s.params.tau = value,
            SweepTarget::InitialF => s.initial_f.base = value,
            SweepTarget::InitialG => s.initial_g.base = value,
        }
        s
    }

    /// Checks every invariant that can be checked before running.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Validation(m));
        let grid = Grid::new(self.length, self.nodes).map_err(|e| ScenarioError::Validation(e.to_string()))?;
        self.params
            .validate()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        self.stepping
            .validate()
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if self.mode != Mode::Stability && !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be positive and finite (got {})", self.t_end));
        }
        if self.every == 0 {
            return invalid("output every must be at least 1".into());
        }
        if self.stability_modes == 0 {
            return invalid("stability_modes must be at least 1".into());
        }
        for (name, field) in [("f", &self.initial_f), ("g", &self.initial_g)] {
            if !field.base.is_finite() || field.modes.iter().any(|&(_, a)| !a.is_finite()) {
                return invalid(format!("initial {name} must be finite"));
            }
            if let Some(i) = (0..grid.n).find(|&i| !(field.eval(grid.x(i), self.length) > 0.0)) {
                return invalid(format!(
                    "initial {name} must be strictly positive, but is {} at x = {}",
                    field.eval(grid.x(i), self.length),
                    grid.x(i)
                ));
            }
        }
        match (&self.sweep, self.mode) {
            (None, Mode::Sweep) => return invalid("mode = sweep needs a [sweep] section".into()),
            (Some(_), Mode::Simulate | Mode::Stability) => {
                return invalid(format!("[sweep] is only allowed with mode = sweep, not {}", self.mode))
            }
            (Some(plan), Mode::Sweep) => {
                if plan.values.is_empty() {
                    return invalid("sweep needs at least one value".into());
                }
                for &v in &plan.values {
                    self.with_sweep_value(plan.target, v).validate_single().map_err(|e| {
                        ScenarioError::Validation(format!("sweep {} = {v}: {}", plan.target.name(), strip(e)))
                    })?;
                }
            }
            (None, _) => {}
        }
        Ok(())
    }

    fn validate_single(&self) -> Result<(), ScenarioError> {
        Scenario {
            mode: Mode::Simulate,
            sweep: None,
            ..self.clone()
        }
        .validate()
    }
}

fn strip(e: ScenarioError) -> String {
    match e {
        ScenarioError::Validation(m) => m,
        other => other.to_string(),
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Raw `(section, key) -> value` table that tracks consumed keys.
struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["mode"]),
    ("grid", &["length", "nodes"]),
    ("params", &["m", "s_plus", "s_minus", "mu0_plus", "tau_half", "p", "tau"]),
    ("initial", &["f", "g", "f_modes", "g_modes"]),
    (
        "stepping",
        &[
            "t_end",
            "scheme",
            "dt0",
            "dt_min",
            "dt_max",
            "newton_tol",
            "newton_max_iter",
            "rupture_floor",
            "blowup_norm_cap",
        ],
    ),
    ("output", &["directory", "every", "profile_every", "stability_modes"]),
    ("sweep", &["parameter", "values", "range"]),
];

fn parse_error(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

impl Table {
    fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| parse_error(line, format!("malformed section header '{content}'")))?
                    .trim();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                    return Err(parse_error(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_error(line, format!("expected 'key = value', found '{content}'")))?;
            let key = key.trim();
            let known = KNOWN_KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| keys.contains(&key))
                .unwrap_or(false);
            if !known {
                let place = if section.is_empty() {
                    "before the first section".to_string()
                } else {
                    format!("in [{section}]")
                };
                return Err(parse_error(line, format!("unknown key '{key}' {place}")));
            }
            let slot = (section.clone(), key.to_string());
            if let Some(prev) = entries.get(&slot) {
                let prev: &Entry = prev;
                return Err(parse_error(line, format!("duplicate key '{key}' (first set on line {})", prev.line)));
            }
            entries.insert(
                slot,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(Self { entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn required(&self, section: &str, key: &str) -> Result<&Entry, ScenarioError> {
        self.get(section, key).ok_or_else(|| {
            let place = if section.is_empty() {
                "at the top of the file".to_string()
            } else {
                format!("in [{section}]")
            };
            ScenarioError::Validation(format!("missing required key '{key}' {place}"))
        })
    }

    fn f64_or(&self, section: &str, key: &str, default: f64, allow_inf: bool) -> Result<f64, ScenarioError> {
        match self.get(section, key) {
            Some(e) => parse_f64(e, key, allow_inf),
            None => Ok(default),
        }
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ScenarioError> {
        match self.get(section, key) {
            Some(e) => parse_usize(e, key),
            None => Ok(default),
        }
    }
}

fn parse_f64(e: &Entry, key: &str, allow_inf: bool) -> Result<f64, ScenarioError> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| parse_error(e.line, format!("'{key}' expects a number, found '{}'", e.value)))?;
    if v.is_nan() || (v.is_infinite() && !allow_inf) {
        return Err(parse_error(e.line, format!("'{key}' must be finite, found '{}'", e.value)));
    }
    Ok(v)
}

fn parse_usize(e: &Entry, key: &str) -> Result<usize, ScenarioError> {
    e.value
        .parse()
        .map_err(|_| parse_error(e.line, format!("'{key}' expects a nonnegative integer, found '{}'", e.value)))
}

fn parse_list(e: &Entry, key: &str) -> Result<Vec<f64>, ScenarioError> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| parse_error(e.line, format!("'{key}' expects numbers, found '{s}'")))
        })
        .collect()
}

fn parse_modes(e: Option<&Entry>, key: &str) -> Result<Vec<(usize, f64)>, ScenarioError> {
    let Some(e) = e else { return Ok(Vec::new()) };
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let bad = || parse_error(e.line, format!("'{key}' expects mode:amplitude pairs, found '{item}'"));
            let (n, a) = item.split_once(':').ok_or_else(bad)?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            if n == 0 || !a.is_finite() {
                return Err(parse_error(e.line, format!("'{key}': mode must be >= 1 and amplitude finite in '{item}'")));
            }
            Ok((n, a))
        })
        .collect()
}

/// Parses scenario text. Relative output directories are resolved against
/// `base_dir`.
pub fn parse_scenario_str(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let table = Table::parse(text)?;
    let mode_entry = table.required("", "mode")?;
    let mode = match mode_entry.value.as_str() {
        "simulate" => Mode::Simulate,
        "stability" => Mode::Stability,
        "sweep" => Mode::Sweep,
        other => {
            return Err(parse_error(
                mode_entry.line,
                format!("mode must be simulate, stability or sweep, found '{other}'"),
            ))
        }
    };

    let length = parse_f64(table.required("grid", "length")?, "length", false)?;
    let nodes = parse_usize(table.required("grid", "nodes")?, "nodes")?;

    let d = FluidParams::default();
    let params = FluidParams {
        m: table.f64_or("params", "m", d.m, false)?,
        s_plus: table.f64_or("params", "s_plus", d.s_plus, false)?,
        s_minus: table.f64_or("params", "s_minus", d.s_minus, false)?,
        mu0_plus: table.f64_or("params", "mu0_plus", d.mu0_plus, false)?,
        tau_half: table.f64_or("params", "tau_half", d.tau_half, true)?,
        p: table.f64_or("params", "p", d.p, false)?,
        tau: table.f64_or("params", "tau", d.tau, false)?,
    };

    let initial_f = InitialField {
        base: parse_f64(table.required("initial", "f")?, "f", false)?,
        modes: parse_modes(table.get("initial", "f_modes"), "f_modes")?,
    };
    let initial_g = InitialField {
        base: parse_f64(table.required("initial", "g")?, "g", false)?,
        modes: parse_modes(table.get("initial", "g_modes"), "g_modes")?,
    };

    let t_end = match (mode, table.get("stepping", "t_end")) {
        (_, Some(e)) => parse_f64(e, "t_end", false)?,
        (Mode::Stability, None) => 0.0,
        (_, None) => return Err(table.required("stepping", "t_end").err().expect("missing key")),
    };
    let sd = StepConfig::default();
    let scheme = match table.get("stepping", "scheme") {
        None => sd.scheme,
        Some(e) => match e.value.as_str() {
            "implicit" => Scheme::ImplicitNewton,
            "semi-implicit" => Scheme::SemiImplicit,
            other => {
                return Err(parse_error(
                    e.line,
                    format!("scheme must be implicit or semi-implicit, found '{other}'"),
                ))
            }
        },
    };
    let optional = |key: &str, allow_inf: bool| -> Result<Option<f64>, ScenarioError> {
        table.get("stepping", key).map(|e| parse_f64(e, key, allow_inf)).transpose()
    };
    let stepping = StepConfig {
        dt0: table.f64_or("stepping", "dt0", sd.dt0, false)?,
        dt_min: table.f64_or("stepping", "dt_min", sd.dt_min, false)?,
        dt_max: table.f64_or("stepping", "dt_max", sd.dt_max, false)?,
        scheme,
        newton_tol: table.f64_or("stepping", "newton_tol", sd.newton_tol, false)?,
        newton_max_iter: table.usize_or("stepping", "newton_max_iter", sd.newton_max_iter)?,
        rupture_floor: optional("rupture_floor", false)?,
        blowup_norm_cap: optional("blowup_norm_cap", true)?,
    };

    let directory = table
        .get("output", "directory")
        .map(|e| e.value.clone())
        .unwrap_or_else(|| "output".to_string());
    if directory.is_empty() {
        return Err(ScenarioError::Validation("output directory must not be empty".into()));
    }
    let output_dir = base_dir.join(directory);

    let sweep = if ["parameter", "values", "range"].iter().any(|k| table.get("sweep", k).is_some()) {
        let p = table.required("sweep", "parameter")?;
        let target = SweepTarget::parse(&p.value)
            .ok_or_else(|| parse_error(p.line, format!("cannot sweep '{}'", p.value)))?;
        let values = match (table.get("sweep", "values"), table.get("sweep", "range")) {
            (Some(v), None) => parse_list(v, "values")?,
            (None, Some(r)) => {
                let nums = parse_list(r, "range")?;
                let [start, stop, count] = nums[..] else {
                    return Err(parse_error(r.line, "range expects start, stop, count"));
                };
                if count < 1.0 || count.fract() != 0.0 {
                    return Err(parse_error(r.line, "range count must be a positive integer"));
                }
                let count = count as usize;
                if count == 1 {
                    vec![start]
                } else {
                    (0..count)
                        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                        .collect()
                }
            }
            (Some(v), Some(_)) => return Err(parse_error(v.line, "give either values or range, not both")),
            (None, None) => {
                return Err(ScenarioError::Validation("[sweep] needs values or range".into()));
            }
        };
        Some(SweepSpec { target, values })
    } else {
        None
    };

    let scenario = Scenario {
        mode,
        length,
        nodes,
        params,
        initial_f,
        initial_g,
        stepping,
        t_end,
        every: table.usize_or("output", "every", 1)?,
        profile_every: table.usize_or("output", "profile_every", 0)?,
        stability_modes: table.usize_or("output", "stability_modes", 8)?,
        output_dir,
        sweep,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario_str(&text, base)
}
