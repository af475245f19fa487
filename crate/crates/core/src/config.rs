//! Flat `key = value` run configuration.
//!
//! Keys are dotted (`model.omega`, `detector.kappa`, `grid.omega`). A
//! configuration is resolved against a fixed key table: unknown keys are
//! rejected, missing optional keys take their defaults, and the result is a
//! canonical map whose text form re-resolves to the same parameters. Output
//! headers embed that text form as `# cfg key = value` lines, which
//! [`parse_text`] accepts directly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::atomic::{dipole_coupling, HalfInt, HyperfineSpec};
use crate::models::{DetectorParams, LambdaParams};
use crate::setup::{Channel, Scenario};

pub type ConfigMap = BTreeMap<String, String>;

/// Prefix of configuration lines embedded in output headers.
pub const EMBEDDED_PREFIX: &str = "# cfg ";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("missing parameter `{0}`")]
    MissingKey(String),
    #[error("parameter `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Steady,
    Spectrum,
    G2,
    DetectorG2,
    Bandwidth,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Steady, Task::Spectrum, Task::G2, Task::DetectorG2, Task::Bandwidth];

    pub fn name(self) -> &'static str {
        match self {
            Task::Steady => "steady",
            Task::Spectrum => "spectrum",
            Task::G2 => "g2",
            Task::DetectorG2 => "detector-g2",
            Task::Bandwidth => "bandwidth",
        }
    }

    /// Tasks producing one number per run, and so usable in sweeps.
    pub fn is_scalar(self) -> bool {
        matches!(self, Task::Steady | Task::DetectorG2 | Task::Bandwidth)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| bad("task", format!("`{s}` is not one of steady, spectrum, g2, detector-g2, bandwidth")))
    }
}

/// Point set descriptor used for frequency grids, delay grids and sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Chosen from the model scales at run time.
    Auto,
    Linear {
        a: f64,
        b: f64,
        n: usize,
    },
    Log {
        a: f64,
        b: f64,
        n: usize,
    },
    /// Symmetric grid on `[−span, span]`, dense around the expected peaks.
    LogDense {
        span: f64,
        min_offset: f64,
        per_decade: usize,
    },
    List(Vec<f64>),
}

impl GridSpec {
    /// Points for explicit descriptors; `None` for `Auto` and `LogDense`,
    /// which need the model.
    pub fn explicit_points(&self) -> Option<Vec<f64>> {
        match self {
            GridSpec::Linear { a, b, n } => Some(crate::correl::linear_grid(*a, *b, *n)),
            GridSpec::Log { a, b, n } => Some(crate::correl::log_grid(*a, *b, *n)),
            GridSpec::List(v) => Some(v.clone()),
            GridSpec::Auto | GridSpec::LogDense { .. } => None,
        }
    }

    pub fn len_hint(&self) -> Option<usize> {
        match self {
            GridSpec::Linear { n, .. } | GridSpec::Log { n, .. } => Some(*n),
            GridSpec::List(v) => Some(v.len()),
            _ => None,
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Auto => f.write_str("auto"),
            GridSpec::Linear { a, b, n } => write!(f, "linear({},{},{n})", fmt_num(*a), fmt_num(*b)),
            GridSpec::Log { a, b, n } => write!(f, "logspace({},{},{n})", fmt_num(*a), fmt_num(*b)),
            GridSpec::LogDense { span, min_offset, per_decade } => {
                write!(f, "logdense({},{},{per_decade})", fmt_num(*span), fmt_num(*min_offset))
            }
            GridSpec::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// Parses `auto`, `linear(a,b,n)` (alias `linspace`), `logspace(a,b,n)`,
/// `logdense(span,min_offset,per_decade)` or a comma-separated list.
pub fn parse_grid(key: &str, text: &str) -> Result<GridSpec, ConfigError> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t == "auto" {
        return Ok(GridSpec::Auto);
    }
    if let Some((name, rest)) = t.split_once('(') {
        let inner = rest.strip_suffix(')').ok_or_else(|| bad(key, format!("unbalanced parentheses in `{text}`")))?;
        let args: Vec<&str> = inner.split(',').collect();
        if args.len() != 3 {
            return Err(bad(key, format!("`{name}` takes three arguments")));
        }
        let x = parse_quantity(key, args[0])?;
        let y = parse_quantity(key, args[1])?;
        let n: usize = args[2].parse().map_err(|_| bad(key, format!("`{}` is not a point count", args[2])))?;
        let spec = match name {
            "linear" | "linspace" => GridSpec::Linear { a: x, b: y, n },
            "logspace" => GridSpec::Log { a: x, b: y, n },
            "logdense" => GridSpec::LogDense { span: x, min_offset: y, per_decade: n },
            _ => return Err(bad(key, format!("unknown grid form `{name}`"))),
        };
        check_grid(key, &spec)?;
        return Ok(spec);
    }
    let values = t.split(',').map(|s| parse_quantity(key, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(GridSpec::List(values))
}

fn check_grid(key: &str, g: &GridSpec) -> Result<(), ConfigError> {
    match *g {
        GridSpec::Linear { a, b, n } => {
            if n < 2 || !(b > a) {
                return Err(bad(key, "linear grids need b > a and at least 2 points"));
            }
        }
        GridSpec::Log { a, b, n } => {
            if n < 2 || !(a > 0.0) || !(b > a) {
                return Err(bad(key, "log grids need 0 < a < b and at least 2 points"));
            }
        }
        GridSpec::LogDense { span, min_offset, per_decade }
            if !(min_offset > 0.0) || !(span > min_offset) || per_decade == 0 =>
        {
            return Err(bad(key, "logdense needs 0 < min_offset < span and a positive density"));
        }
        _ => {}
    }
    Ok(())
}

/// A number, optionally divided or multiplied by `gamma` (the unit rate).
pub fn parse_quantity(key: &str, text: &str) -> Result<f64, ConfigError> {
    let t = text.trim();
    let (num, unit) = match t.find(['/', '*']) {
        Some(i) => (&t[..i], Some(&t[i + 1..])),
        None => (t, None),
    };
    let x: f64 = num.trim().parse().map_err(|_| bad(key, format!("`{t}` is not a number")))?;
    if !x.is_finite() {
        return Err(bad(key, "value must be finite"));
    }
    match unit.map(str::trim) {
        None | Some("gamma") | Some("Gamma") => Ok(x),
        Some(u) => Err(bad(key, format!("unknown unit `{u}`"))),
    }
}

/// Shortest exact scientific representation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Num,
    Half,
    Int,
    Bool,
    Choice(&'static [&'static str]),
    Grid,
    /// `passive` or a number.
    Coupling,
    /// Sweep target: `+`-joined parameter names.
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    All,
    Lambda,
    Atomic,
    Rb87,
    Hyperfine,
    Transition,
    Polarization,
    Detector,
    Sweep1,
    Sweep2,
}

struct KeySpec {
    key: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    required: bool,
    scope: Scope,
}

const fn k(key: &'static str, kind: Kind, default: Option<&'static str>, required: bool, scope: Scope) -> KeySpec {
    KeySpec { key, kind, default, required, scope }
}

const TASKS: &[&str] = &["steady", "spectrum", "g2", "detector-g2", "bandwidth"];
const SCHEMES: &[&str] = &["lambda", "rb87", "hyperfine"];
const CHANNELS: &[&str] = &["transition", "polarization"];

const KEYS: &[KeySpec] = &[
    k("task", Kind::Choice(TASKS), None, true, Scope::All),
    k("model.scheme", Kind::Choice(SCHEMES), None, true, Scope::All),
    k("model.delta_e", Kind::Num, Some("0"), false, Scope::All),
    k("model.omega", Kind::Num, None, true, Scope::Lambda),
    k("model.omega_r", Kind::Num, None, true, Scope::Lambda),
    k("model.gamma1", Kind::Num, Some("1"), false, Scope::Lambda),
    k("model.gamma2", Kind::Num, Some("1"), false, Scope::Lambda),
    k("model.v_eg", Kind::Num, None, true, Scope::Rb87),
    k("model.omega_b", Kind::Num, None, true, Scope::Atomic),
    k("model.gamma", Kind::Num, Some("1"), false, Scope::Atomic),
    k("model.f_g", Kind::Half, None, true, Scope::Hyperfine),
    k("model.f_e", Kind::Half, None, true, Scope::Hyperfine),
    k("model.omega_l", Kind::Num, None, true, Scope::Hyperfine),
    k("model.q_laser", Kind::Int, Some("1"), false, Scope::Hyperfine),
    k("channel.kind", Kind::Choice(CHANNELS), Some("transition"), false, Scope::Atomic),
    k("channel.m_g", Kind::Half, Some("0"), false, Scope::Transition),
    k("channel.m_e", Kind::Half, Some("0"), false, Scope::Transition),
    k("channel.q", Kind::Int, Some("0"), false, Scope::Polarization),
    k("detector.enabled", Kind::Bool, Some("false"), false, Scope::All),
    k("detector.kappa", Kind::Num, None, true, Scope::Detector),
    k("detector.g", Kind::Coupling, Some("passive"), false, Scope::Detector),
    k("detector.delta_s", Kind::Num, Some("0"), false, Scope::Detector),
    k("detector.n_max", Kind::Int, Some("3"), false, Scope::Detector),
    k("grid.omega", Kind::Grid, Some("auto"), false, Scope::All),
    k("grid.tau", Kind::Grid, Some("auto"), false, Scope::All),
    k("bandwidth.mass", Kind::Num, Some("0.99"), false, Scope::All),
    k("units.gamma_mhz", Kind::Num, None, false, Scope::All),
    k("sweep.param", Kind::Target, None, false, Scope::All),
    k("sweep.values", Kind::Grid, None, true, Scope::Sweep1),
    k("sweep2.param", Kind::Target, None, false, Scope::Sweep1),
    k("sweep2.values", Kind::Grid, None, true, Scope::Sweep2),
];

fn key_spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|s| s.key == key)
}

/// All recognized keys.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|s| s.key)
}

/// Parses configuration text. When the text contains embedded `# cfg`
/// lines (an output file), only those are read.
pub fn parse_text(text: &str) -> Result<ConfigMap, ConfigError> {
    let embedded = text.lines().any(|l| l.starts_with(EMBEDDED_PREFIX));
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = if embedded {
            match raw.strip_prefix(EMBEDDED_PREFIX) {
                Some(rest) => rest,
                None => continue,
            }
        } else {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            l
        };
        let (key, value) = split_assignment(line).map_err(|reason| ConfigError::Syntax { line: i + 1, reason })?;
        if map.insert(key.clone(), value).is_some() {
            return Err(ConfigError::Syntax { line: i + 1, reason: format!("`{key}` set twice") });
        }
    }
    Ok(map)
}

/// Splits `key = value` (also `key=value`).
pub fn split_assignment(text: &str) -> Result<(String, String), String> {
    let (k, v) = text.split_once('=').ok_or_else(|| format!("expected `key = value`, found `{}`", text.trim()))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || k.contains(char::is_whitespace) {
        return Err(format!("bad key `{k}`"));
    }
    if v.is_empty() {
        return Err(format!("`{k}` has no value"));
    }
    Ok((k.to_string(), v.to_string()))
}

pub const PRESETS: &[&str] = &[
    "fig2a", "fig2b", "fig2c", "fig3", "figS3a", "figS3b", "figS3c", "figS3d", "figS3e", "figS3f", "figS4a", "figS4b",
];

const RB_UNITS: &str = "units.gamma_mhz = 38.11757198453568\n";

fn preset_text(name: &str) -> Option<String> {
    let lambda = |task: &str, omega_r: &str| {
        format!("task = {task}\nmodel.scheme = lambda\nmodel.omega = 1e-2\nmodel.omega_r = {omega_r}\n")
    };
    let rb = |task: &str, omega_b: &str, m_g: &str| {
        format!(
            "task = {task}\nmodel.scheme = rb87\nmodel.v_eg = 1e-2\nmodel.omega_b = {omega_b}\n\
             channel.kind = transition\nchannel.m_g = {m_g}\nchannel.m_e = 0\n{RB_UNITS}"
        )
    };
    let detector = "detector.enabled = true\ndetector.kappa = 1\ndetector.g = passive\ndetector.n_max = 3\n";
    let hyperfine = |f_g: &str| {
        format!(
            "task = spectrum\nmodel.scheme = hyperfine\nmodel.f_g = {f_g}\nmodel.f_e = 1\nmodel.omega_l = 3e-2\n\
             model.q_laser = 1\nmodel.omega_b = 1e-3\nchannel.kind = polarization\nchannel.q = 0\n{RB_UNITS}"
        )
    };
    let text = match name {
        "fig2a" => lambda("spectrum", "1e-5"),
        "fig2b" => lambda("spectrum", "1e-3"),
        "fig2c" => lambda("g2", "1e-3") + "grid.tau = linear(0,2e5,4001)\n",
        "fig3" => lambda("detector-g2", "1e-2") + detector,
        "figS3a" => rb("spectrum", "1e-3", "0"),
        "figS3b" => rb("g2", "1e-3", "0") + "grid.tau = linear(0,5e4,2001)\n",
        "figS3c" => rb("detector-g2", "1e-2", "0") + detector,
        "figS3d" => rb("spectrum", "1e-3", "1"),
        "figS3e" => rb("g2", "1e-3", "1") + "grid.tau = linear(0,5e4,2001)\n",
        "figS3f" => rb("detector-g2", "1e-2", "1") + detector,
        "figS4a" => hyperfine("2"),
        "figS4b" => hyperfine("1"),
        _ => return None,
    };
    Some(text)
}

pub fn preset(name: &str) -> Result<ConfigMap, ConfigError> {
    let text = preset_text(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    parse_text(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// `min(10⁻³, κ/10)`.
    Passive,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSetting {
    pub coupling: Coupling,
    pub kappa: f64,
    pub delta_s: f64,
    pub n_max: usize,
}

impl DetectorSetting {
    pub fn params(&self) -> DetectorParams {
        let g = match self.coupling {
            Coupling::Passive => DetectorParams::passive_coupling(self.kappa),
            Coupling::Fixed(g) => g,
        };
        DetectorParams { g, kappa: self.kappa, delta_s: self.delta_s, n_max: self.n_max }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSetting {
    Lambda(LambdaParams),
    Hyperfine { spec: HyperfineSpec, channel: Channel },
}

impl ModelSetting {
    pub fn scenario(&self, detector: Option<&DetectorParams>) -> crate::Result<Scenario> {
        match self {
            ModelSetting::Lambda(p) => Scenario::lambda(p, detector),
            ModelSetting::Hyperfine { spec, channel } => Scenario::hyperfine(spec, *channel, detector),
        }
    }

    /// Emitter Hilbert-space dimension.
    pub fn emitter_dim(&self) -> usize {
        match self {
            ModelSetting::Lambda(_) => crate::models::EMITTER_DIM,
            ModelSetting::Hyperfine { spec, .. } => spec.dim(),
        }
    }

    /// Scale of the narrow spectral features: `γ*` for the Λ emitter,
    /// `max|V|²/Γ` for hyperfine models.
    pub fn linewidth(&self) -> f64 {
        match self {
            ModelSetting::Lambda(p) => p.gamma_star(),
            ModelSetting::Hyperfine { spec, .. } => {
                let mut v_max: f64 = 0.0;
                for m_g in spec.f_g.projections() {
                    let m_e = m_g + HalfInt::int(spec.q_laser);
                    if m_e.twice().abs() <= spec.f_e.twice() {
                        if let Ok(v) = dipole_coupling(spec.f_e, m_e, spec.f_g, m_g, spec.q_laser, spec.omega_l) {
                            v_max = v_max.max(v.norm());
                        }
                    }
                }
                v_max * v_max / spec.gamma
            }
        }
    }

    /// Positive offsets of the expected spectral side peaks.
    pub fn peak_offsets(&self) -> Vec<f64> {
        match self {
            ModelSetting::Lambda(p) if p.omega_r > 0.0 => vec![2.0 * p.omega_r],
            ModelSetting::Lambda(_) => vec![],
            ModelSetting::Hyperfine { spec, .. } => {
                let step = std::f64::consts::SQRT_2 * spec.omega_b.abs();
                if step == 0.0 {
                    return vec![];
                }
                (1..=spec.f_g.twice()).map(|k| k as f64 * step).collect()
            }
        }
    }
}

/// One sweep axis: the listed keys all take each value in turn.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub keys: Vec<String>,
    pub label: String,
    pub values: Vec<f64>,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub model: ModelSetting,
    pub detector: Option<DetectorSetting>,
    pub omega_grid: GridSpec,
    pub tau_grid: GridSpec,
    pub mass: f64,
    pub gamma_mhz: Option<f64>,
    pub sweeps: Vec<SweepAxis>,
    canonical: ConfigMap,
}

impl RunConfig {
    pub fn resolve(map: &ConfigMap) -> Result<RunConfig, ConfigError> {
        for key in map.keys() {
            if key_spec(key).is_none() {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        let lookup = |key: &str| -> Option<String> {
            map.get(key).cloned().or_else(|| key_spec(key).and_then(|s| s.default.map(str::to_string)))
        };
        let scheme = lookup("model.scheme").ok_or_else(|| ConfigError::MissingKey("model.scheme".into()))?;
        let scheme = normalize(key_spec("model.scheme").unwrap(), &scheme)?;
        let detector_on =
            normalize(key_spec("detector.enabled").unwrap(), &lookup("detector.enabled").unwrap())? == "true";
        let channel_kind = normalize(key_spec("channel.kind").unwrap(), &lookup("channel.kind").unwrap())?;
        let atomic = scheme != "lambda";
        let active = |scope: Scope| match scope {
            Scope::All => true,
            Scope::Lambda => scheme == "lambda",
            Scope::Atomic => atomic,
            Scope::Rb87 => scheme == "rb87",
            Scope::Hyperfine => scheme == "hyperfine",
            Scope::Transition => atomic && channel_kind == "transition",
            Scope::Polarization => atomic && channel_kind == "polarization",
            Scope::Detector => detector_on,
            Scope::Sweep1 => map.contains_key("sweep.param"),
            Scope::Sweep2 => map.contains_key("sweep2.param"),
        };

        let mut canonical = ConfigMap::new();
        for spec in KEYS {
            if !active(spec.scope) {
                if map.contains_key(spec.key) {
                    log::warn!("`{}` has no effect in this configuration", spec.key);
                }
                continue;
            }
            match lookup(spec.key) {
                Some(v) => {
                    canonical.insert(spec.key.to_string(), normalize(spec, &v)?);
                }
                None if spec.required => return Err(ConfigError::MissingKey(spec.key.to_string())),
                None => {}
            }
        }
        Self::from_canonical(canonical)
    }

    fn from_canonical(c: ConfigMap) -> Result<RunConfig, ConfigError> {
        let num = |key: &str| -> f64 { c[key].parse().expect("normalized number") };
        let int = |key: &str| -> i64 { c[key].parse().expect("normalized integer") };
        let half = |key: &str| -> HalfInt { c[key].parse().expect("normalized half-integer") };
        let task: Task = c["task"].parse()?;
        let model = match c["model.scheme"].as_str() {
            "lambda" => {
                let p = LambdaParams {
                    omega: num("model.omega"),
                    omega_r: num("model.omega_r"),
                    gamma1: num("model.gamma1"),
                    gamma2: num("model.gamma2"),
                    delta_e: num("model.delta_e"),
                };
                p.validate().map_err(|e| bad("model", e.to_string()))?;
                ModelSetting::Lambda(p)
            }
            scheme => {
                let mut spec = if scheme == "rb87" {
                    HyperfineSpec::rb87(num("model.v_eg"), num("model.omega_b"))
                } else {
                    HyperfineSpec {
                        f_g: half("model.f_g"),
                        f_e: half("model.f_e"),
                        omega_l: num("model.omega_l"),
                        q_laser: int("model.q_laser") as i32,
                        omega_b: num("model.omega_b"),
                        gamma: 1.0,
                        delta_e: 0.0,
                    }
                };
                spec.gamma = num("model.gamma");
                spec.delta_e = num("model.delta_e");
                spec.validate().map_err(|e| bad("model", e.to_string()))?;
                let channel = if c["channel.kind"] == "transition" {
                    Channel::Transition { m_g: half("channel.m_g"), m_e: half("channel.m_e") }
                } else {
                    Channel::Polarization(int("channel.q") as i32)
                };
                ModelSetting::Hyperfine { spec, channel }
            }
        };
        let detector = if c["detector.enabled"] == "true" {
            let coupling = match c["detector.g"].as_str() {
                "passive" => Coupling::Passive,
                g => Coupling::Fixed(g.parse().expect("normalized coupling")),
            };
            let n_max = int("detector.n_max");
            let d = DetectorSetting {
                coupling,
                kappa: num("detector.kappa"),
                delta_s: num("detector.delta_s"),
                n_max: usize::try_from(n_max).map_err(|_| bad("detector.n_max", "must be non-negative"))?,
            };
            d.params().validate().map_err(|e| bad("detector", e.to_string()))?;
            Some(d)
        } else {
            None
        };
        let grid = |key: &str| parse_grid(key, &c[key]);
        let mass = num("bandwidth.mass");
        if !(mass > 0.0 && mass < 1.0) {
            return Err(bad("bandwidth.mass", "must lie in (0, 1)"));
        }
        let mut sweeps = Vec::new();
        for (p, v) in [("sweep.param", "sweep.values"), ("sweep2.param", "sweep2.values")] {
            if let Some(target) = c.get(p) {
                let values = match grid(v)? {
                    GridSpec::Auto | GridSpec::LogDense { .. } => {
                        return Err(bad(v, "sweeps need linear, logspace or an explicit list"))
                    }
                    g => g.explicit_points().expect("explicit grid"),
                };
                let keys: Vec<String> = target.split('+').map(str::to_string).collect();
                let label = keys.iter().map(|k| k.rsplit('.').next().unwrap()).collect::<Vec<_>>().join("+");
                sweeps.push(SweepAxis { keys, label, values });
            }
        }
        if !sweeps.is_empty() && !task.is_scalar() {
            return Err(bad("sweep.param", format!("task `{task}` cannot be swept")));
        }
        let cfg = RunConfig {
            task,
            model,
            detector,
            omega_grid: grid("grid.omega")?,
            tau_grid: grid("grid.tau")?,
            mass,
            gamma_mhz: c.get("units.gamma_mhz").map(|s| s.parse().expect("normalized number")),
            sweeps,
            canonical: c,
        };
        if cfg.task == Task::DetectorG2 && cfg.detector.is_none() {
            return Err(bad("detector.enabled", "task detector-g2 needs a detector"));
        }
        for axis in &cfg.sweeps {
            for key in &axis.keys {
                if !cfg.canonical.contains_key(key) {
                    return Err(bad("sweep.param", format!("`{key}` is not a parameter of this configuration")));
                }
            }
        }
        Ok(cfg)
    }

    /// Canonical key-value form, defaults included.
    pub fn canonical(&self) -> &ConfigMap {
        &self.canonical
    }

    /// Canonical text, one `key = value` per line.
    pub fn to_text(&self) -> String {
        self.canonical.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The configuration of one sweep point: the given keys set, sweeps removed.
    pub fn at_point(&self, assignments: &[(&str, f64)]) -> Result<RunConfig, ConfigError> {
        let mut map = self.canonical.clone();
        map.retain(|k, _| !k.starts_with("sweep"));
        for (key, v) in assignments {
            map.insert(key.to_string(), fmt_num(*v));
        }
        RunConfig::resolve(&map)
    }

    pub fn scenario(&self) -> crate::Result<Scenario> {
        let d = self.detector.map(|d| d.params());
        self.model.scenario(d.as_ref())
    }

    /// Hilbert-space dimension including the detector mode.
    pub fn hilbert_dim(&self) -> usize {
        self.model.emitter_dim() * self.detector.map_or(1, |d| d.n_max + 1)
    }
}

fn normalize(spec: &KeySpec, value: &str) -> Result<String, ConfigError> {
    let key = spec.key;
    let v = value.trim();
    Ok(match spec.kind {
        Kind::Num => fmt_num(parse_quantity(key, v)?),
        Kind::Half => v.parse::<HalfInt>().map_err(|e| bad(key, e.to_string()))?.to_string(),
        Kind::Int => v.parse::<i64>().map_err(|_| bad(key, format!("`{v}` is not an integer")))?.to_string(),
        Kind::Bool => match v {
            "true" | "yes" | "1" => "true".into(),
            "false" | "no" | "0" => "false".into(),
            _ => return Err(bad(key, format!("`{v}` is not a boolean"))),
        },
        Kind::Choice(options) => {
            if !options.contains(&v) {
                return Err(bad(key, format!("`{v}` is not one of {}", options.join(", "))));
            }
            v.to_string()
        }
        Kind::Grid => parse_grid(key, v)?.to_string(),
        Kind::Coupling => {
            if v == "passive" {
                v.to_string()
            } else {
                fmt_num(parse_quantity(key, v)?)
            }
        }
        Kind::Target => {
            let mut keys = Vec::new();
            for name in v.split('+').map(str::trim) {
                keys.push(sweep_target(key, name)?);
            }
            keys.join("+")
        }
    })
}

/// Full key of a sweepable parameter given its full or short name.
fn sweep_target(key: &str, name: &str) -> Result<String, ConfigError> {
    let numeric =
        |s: &&KeySpec| matches!(s.kind, Kind::Num | Kind::Coupling | Kind::Int) && !s.key.starts_with("sweep");
    if let Some(s) = KEYS.iter().filter(numeric).find(|s| s.key == name) {
        return Ok(s.key.to_string());
    }
    let matches: Vec<&KeySpec> =
        KEYS.iter().filter(numeric).filter(|s| s.key.rsplit('.').next() == Some(name)).collect();
    match matches.as_slice() {
        [one] => Ok(one.key.to_string()),
        [] => Err(bad(key, format!("`{name}` is not a sweepable parameter"))),
        _ => Err(bad(key, format!("`{name}` is ambiguous"))),
    }
}
