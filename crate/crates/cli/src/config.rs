//! `key = value` configuration with `[section]` headers.
//!
//! Lines are trimmed; `#` starts a comment; blank lines are ignored. Lists are
//! comma-separated, tables are comma-separated `x:value` pairs. Every key is
//! validated against its section, and keys that do not apply to the chosen
//! kernel are rejected as unknown.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use subdiff_core::kernel::{ALPHA_MAX, ALPHA_MIN, DEFAULT_QUAD_DEPTH};
use subdiff_core::{KernelPair, KernelVariant, NonlinearMode, Nonlinearity, PowerExtension, Scheme, TimeGrid};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Relax,
    Mlcheck,
    Pairverify,
    Ode,
    Pde,
    Eigen,
    StabilityScan,
    BlowupScan,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Relax => "relax",
            Command::Mlcheck => "mlcheck",
            Command::Pairverify => "pairverify",
            Command::Ode => "ode",
            Command::Pde => "pde",
            Command::Eigen => "eigen",
            Command::StabilityScan => "stability-scan",
            Command::BlowupScan => "blowup-scan",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    /// A valid config that the requested command cannot use.
    #[error("{0}")]
    Incompatible(String),
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: cannot parse `{key}` from `{value}`: expected {expected}")]
    Value {
        line: usize,
        key: String,
        value: String,
        expected: String,
    },
    #[error("line {line}: `{key}` = {value} is out of range {bound}")]
    Range {
        line: usize,
        key: String,
        value: String,
        bound: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Fractional,
    FractionalExp,
    Distributed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub gamma0: f64,
    pub quad_depth: usize,
}

impl KernelSpec {
    pub fn build(&self) -> subdiff_core::Result<KernelPair> {
        let variant = match self.kind {
            KernelKind::Fractional => KernelVariant::Fractional { alpha: self.alpha },
            KernelKind::FractionalExp => KernelVariant::FractionalExp {
                alpha: self.alpha,
                rate: self.gamma0,
            },
            KernelKind::Distributed => KernelVariant::DistributedOrder,
        };
        KernelPair::with_quad_depth(variant, self.quad_depth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Constant(f64),
    /// Piecewise constant along the first axis: `a(x) = a_i` for `x ≥ x_i`.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    pub extent: Vec<f64>,
    pub n: Vec<usize>,
    pub coefficient: CoefficientSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Constant(f64),
    /// `amplitude · Π sin(mode π x_i / extent_i)`.
    Sine { mode: u32, amplitude: f64 },
    /// Piecewise constant along the first axis, as for coefficients.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub scheme: Scheme,
    pub mode: NonlinearMode,
    pub threshold: f64,
    pub max_growth: f64,
    pub newton_tol: f64,
    pub max_halvings: usize,
}

/// Command-specific scalars and sweep lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub gamma: f64,
    pub t_min: f64,
    pub c_values: Vec<f64>,
    pub u0_values: Vec<f64>,
    pub alphas: Vec<f64>,
    pub points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub envelope_c: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub kernel: KernelSpec,
    pub tau: f64,
    pub horizon: f64,
    pub space: SpaceSpec,
    pub nonlinearity: Nonlinearity,
    pub initial: InitialSpec,
    pub solver: SolverSpec,
    pub stride: usize,
    pub out: Option<PathBuf>,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let nonlinearity = match command {
            Command::BlowupScan => Nonlinearity::Quadratic,
            _ => Nonlinearity::zero(),
        };
        let initial = match command {
            Command::Pde | Command::StabilityScan => InitialSpec::Sine { mode: 1, amplitude: 1.0 },
            _ => InitialSpec::Constant(1.0),
        };
        Self {
            command,
            kernel: KernelSpec {
                kind: KernelKind::Fractional,
                alpha: 0.5,
                gamma0: 0.0,
                quad_depth: DEFAULT_QUAD_DEPTH,
            },
            tau: 1e-3,
            horizon: 1.0,
            space: SpaceSpec {
                extent: vec![1.0],
                n: vec![199],
                coefficient: CoefficientSpec::Constant(1.0),
            },
            nonlinearity,
            initial,
            solver: SolverSpec {
                scheme: Scheme::KForm,
                mode: NonlinearMode::Newton,
                threshold: subdiff_core::evolution::DEFAULT_BLOWUP_THRESHOLD,
                max_growth: subdiff_core::evolution::DEFAULT_MAX_GROWTH,
                newton_tol: subdiff_core::evolution::DEFAULT_NEWTON_TOL,
                max_halvings: subdiff_core::evolution::DEFAULT_MAX_HALVINGS,
            },
            stride: 1,
            out: None,
            params: Params {
                gamma: 1.0,
                t_min: 0.1,
                c_values: vec![5.0, 15.0],
                u0_values: vec![1.0, 2.0, 5.0],
                alphas: vec![0.3, 0.5, 0.7],
                points: 40,
                x_min: 1e-3,
                x_max: 1e3,
                envelope_c: 1.1,
                seed: 42,
            },
        }
    }

    pub fn grid(&self) -> subdiff_core::Result<TimeGrid> {
        TimeGrid::with_horizon(self.tau, self.horizon)
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("kernel", &["kernel", "alpha", "gamma0", "quad_depth"]),
    ("grid", &["tau", "horizon"]),
    ("space", &["extent", "n", "coefficient"]),
    ("nonlinearity", &["f", "c", "p", "extension", "coeffs"]),
    ("initial", &["shape", "value", "mode", "amplitude", "table"]),
    ("solver", &["scheme", "mode", "threshold", "max_growth", "newton_tol", "max_halvings"]),
    ("output", &["stride", "out"]),
    (
        "params",
        &[
            "gamma", "t_min", "c_values", "u0_values", "alphas", "points", "x_min", "x_max", "envelope_c", "seed",
        ],
    ),
];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

type Raw = BTreeMap<(String, String), Entry>;

pub fn parse_config(text: &str, command: Command) -> Result<ExperimentConfig, ConfigError> {
    let raw = tokenize(text)?;
    let mut cfg = ExperimentConfig::defaults(command);
    let mut r = Reader { raw: &raw };

    if let Some(e) = r.get("kernel", "kernel") {
        cfg.kernel.kind = match e.value.as_str() {
            "fractional" => KernelKind::Fractional,
            "fractional_exp" => KernelKind::FractionalExp,
            "distributed" => KernelKind::Distributed,
            _ => return Err(value_err("kernel", e, "fractional | fractional_exp | distributed")),
        };
    }
    let kind = cfg.kernel.kind;
    for key in ["alpha", "gamma0"] {
        let applies = match (key, kind) {
            ("alpha", KernelKind::Distributed) => false,
            ("gamma0", k) => k == KernelKind::FractionalExp,
            _ => true,
        };
        if !applies {
            if let Some(e) = r.get("kernel", key) {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    section: "kernel".into(),
                    key: key.into(),
                });
            }
        }
    }
    if let Some(v) = r.float("kernel", "alpha", |a| a > ALPHA_MIN && a < ALPHA_MAX, "(0.05, 0.95)")? {
        cfg.kernel.alpha = v;
    }
    if let Some(v) = r.float("kernel", "gamma0", |g| g >= 0.0, "[0, ∞)")? {
        cfg.kernel.gamma0 = v;
    }
    if let Some(v) = r.int("kernel", "quad_depth", |d| (2..=512).contains(&d), "[2, 512]")? {
        cfg.kernel.quad_depth = v as usize;
    }

    if let Some(v) = r.float("grid", "tau", |t| t > 0.0, "(0, ∞)")? {
        cfg.tau = v;
    }
    if let Some(v) = r.float("grid", "horizon", |t| t > 0.0, "(0, ∞)")? {
        cfg.horizon = v;
    }
    if cfg.grid().is_err() {
        let e = r
            .get("grid", "horizon")
            .or_else(|| r.get("grid", "tau"))
            .cloned()
            .unwrap_or(Entry { line: 0, value: String::new() });
        return Err(ConfigError::Range {
            line: e.line,
            key: "horizon".into(),
            value: format!("{}", cfg.horizon),
            bound: format!("(an integer multiple of tau = {})", cfg.tau),
        });
    }

    if let Some(v) = r.float_list("space", "extent", |x| x > 0.0, "(0, ∞)")? {
        cfg.space.extent = v;
    }
    if let Some(v) = r.int_list("space", "n", |n| (3..=100_000).contains(&n), "[3, 100000]")? {
        cfg.space.n = v.into_iter().map(|n| n as usize).collect();
    }
    if cfg.space.extent.len() != cfg.space.n.len() || !(1..=2).contains(&cfg.space.n.len()) {
        let e = r.get("space", "n").or_else(|| r.get("space", "extent")).cloned().unwrap();
        return Err(ConfigError::Range {
            line: e.line,
            key: "n".into(),
            value: e.value.clone(),
            bound: "(one or two axes, matching `extent`)".into(),
        });
    }
    if let Some(e) = r.get("space", "coefficient") {
        cfg.space.coefficient = if e.value.contains(':') {
            let table = parse_table("coefficient", e)?;
            if table.iter().any(|(_, a)| !(*a > 0.0)) {
                return Err(range_err("coefficient", e, "(0, ∞)"));
            }
            CoefficientSpec::Table(table)
        } else {
            let a = parse_f64("coefficient", e)?;
            if !(a > 0.0) {
                return Err(range_err("coefficient", e, "(0, ∞)"));
            }
            CoefficientSpec::Constant(a)
        };
    }

    cfg.nonlinearity = parse_nonlinearity(&mut r, cfg.nonlinearity.clone())?;

    if let Some(e) = r.get("initial", "shape").cloned() {
        cfg.initial = match e.value.as_str() {
            "constant" => InitialSpec::Constant(1.0),
            "sine" => InitialSpec::Sine { mode: 1, amplitude: 1.0 },
            "table" => {
                let t = r.get("initial", "table").ok_or_else(|| ConfigError::Syntax {
                    line: e.line,
                    msg: "shape = table needs a `table` key".into(),
                })?;
                InitialSpec::Table(parse_table("table", t)?)
            }
            _ => return Err(value_err("shape", &e, "constant | sine | table")),
        };
    }
    let finite = |v: f64| v.is_finite();
    match &mut cfg.initial {
        InitialSpec::Constant(v) => {
            if let Some(x) = r.float("initial", "value", finite, "(-∞, ∞)")? {
                *v = x;
            }
        }
        InitialSpec::Sine { mode, amplitude } => {
            if let Some(m) = r.int("initial", "mode", |m| (1..=1000).contains(&m), "[1, 1000]")? {
                *mode = m as u32;
            }
            if let Some(a) = r.float("initial", "amplitude", finite, "(-∞, ∞)")? {
                *amplitude = a;
            }
        }
        InitialSpec::Table(_) => {}
    }
    // Keys meaningless for the chosen shape are unknown, like gamma0 above.
    let allowed: &[&str] = match cfg.initial {
        InitialSpec::Constant(_) => &["shape", "value"],
        InitialSpec::Sine { .. } => &["shape", "mode", "amplitude"],
        InitialSpec::Table(_) => &["shape", "table"],
    };
    r.reject_unused("initial", allowed)?;

    if let Some(e) = r.get("solver", "scheme") {
        cfg.solver.scheme = match e.value.as_str() {
            "kform" => Scheme::KForm,
            "lform" => Scheme::LForm,
            _ => return Err(value_err("scheme", e, "kform | lform")),
        };
    }
    if let Some(e) = r.get("solver", "mode") {
        cfg.solver.mode = match e.value.as_str() {
            "newton" => NonlinearMode::Newton,
            "imex" => NonlinearMode::Imex,
            _ => return Err(value_err("mode", e, "newton | imex")),
        };
    }
    if let Some(v) = r.float("solver", "threshold", |t| t > 0.0, "(0, ∞)")? {
        cfg.solver.threshold = v;
    }
    if let Some(v) = r.float("solver", "max_growth", |g| g > 1.0, "(1, ∞)")? {
        cfg.solver.max_growth = v;
    }
    if let Some(v) = r.float("solver", "newton_tol", |t| t > 0.0 && t < 1.0, "(0, 1)")? {
        cfg.solver.newton_tol = v;
    }
    if let Some(v) = r.int("solver", "max_halvings", |h| (1..=60).contains(&h), "[1, 60]")? {
        cfg.solver.max_halvings = v as usize;
    }

    if let Some(v) = r.int("output", "stride", |s| s >= 1, "[1, ∞)")? {
        cfg.stride = v as usize;
    }
    if let Some(e) = r.get("output", "out") {
        cfg.out = Some(PathBuf::from(&e.value));
    }

    let p = &mut cfg.params;
    if let Some(v) = r.float("params", "gamma", finite, "(-∞, ∞)")? {
        p.gamma = v;
    }
    if let Some(v) = r.float("params", "t_min", |t| t > 0.0, "(0, ∞)")? {
        p.t_min = v;
    }
    if let Some(v) = r.float_list("params", "c_values", finite, "(-∞, ∞)")? {
        p.c_values = v;
    }
    if let Some(v) = r.float_list("params", "u0_values", finite, "(-∞, ∞)")? {
        p.u0_values = v;
    }
    if let Some(v) = r.float_list("params", "alphas", |a| a > ALPHA_MIN && a < ALPHA_MAX, "(0.05, 0.95)")? {
        p.alphas = v;
    }
    if let Some(v) = r.int("params", "points", |n| (2..=100_000).contains(&n), "[2, 100000]")? {
        p.points = v as usize;
    }
    if let Some(v) = r.float("params", "x_min", |x| x > 0.0, "(0, ∞)")? {
        p.x_min = v;
    }
    if let Some(v) = r.float("params", "x_max", |x| x > 0.0, "(0, ∞)")? {
        p.x_max = v;
    }
    if let Some(v) = r.float("params", "envelope_c", |c| c > 0.0, "(0, ∞)")? {
        p.envelope_c = v;
    }
    if let Some(e) = r.get("params", "seed") {
        p.seed = e
            .value
            .parse()
            .map_err(|_| value_err("seed", e, "an unsigned 64-bit integer"))?;
    }
    if p.t_min >= cfg.horizon {
        if let Some(e) = r.get("params", "t_min") {
            return Err(range_err("t_min", e, "(0, horizon)"));
        }
    }
    if p.x_min >= p.x_max {
        let e = r.get("params", "x_max").or_else(|| r.get("params", "x_min")).unwrap();
        return Err(range_err("x_max", e, "(x_min, ∞)"));
    }
    Ok(cfg)
}

fn parse_nonlinearity(r: &mut Reader, default: Nonlinearity) -> Result<Nonlinearity, ConfigError> {
    let sec = "nonlinearity";
    let kind = match r.get(sec, "f") {
        Some(e) => e.clone(),
        None => {
            r.reject_unused(sec, &[])?;
            return Ok(default);
        }
    };
    let finite = |v: f64| v.is_finite();
    let f = match kind.value.as_str() {
        "zero" => {
            r.reject_unused(sec, &["f"])?;
            Nonlinearity::zero()
        }
        "linear" => {
            r.reject_unused(sec, &["f", "c"])?;
            Nonlinearity::Linear {
                c: r.float(sec, "c", finite, "(-∞, ∞)")?.unwrap_or(1.0),
            }
        }
        "power" => {
            r.reject_unused(sec, &["f", "p", "extension"])?;
            let p = r.float(sec, "p", |p| p >= 1.0 && p.is_finite(), "[1, ∞)")?.unwrap_or(2.0);
            let extension = match r.get(sec, "extension") {
                None => PowerExtension::Odd,
                Some(e) => match e.value.as_str() {
                    "odd" => PowerExtension::Odd,
                    "zero" => PowerExtension::Zero,
                    _ => return Err(value_err("extension", e, "odd | zero")),
                },
            };
            Nonlinearity::Power { p, extension }
        }
        "quadratic" => {
            r.reject_unused(sec, &["f"])?;
            Nonlinearity::Quadratic
        }
        "nsy" => {
            r.reject_unused(sec, &["f"])?;
            Nonlinearity::Nsy
        }
        "polynomial" => {
            r.reject_unused(sec, &["f", "coeffs"])?;
            Nonlinearity::Polynomial {
                coeffs: r.float_list(sec, "coeffs", finite, "(-∞, ∞)")?.unwrap_or_default(),
            }
        }
        _ => {
            return Err(value_err(
                "f",
                &kind,
                "zero | linear | power | quadratic | nsy | polynomial",
            ))
        }
    };
    Ok(f)
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut raw = Raw::new();
    let mut section: Option<&str> = None;
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim();
            let known = SECTIONS.iter().find(|(s, _)| *s == name).ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("unknown section [{name}]"),
            })?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "empty key or value".into(),
            });
        }
        let sec = section.ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("key `{key}` appears before any [section]"),
        })?;
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                section: sec.into(),
                key: key.into(),
            });
        }
        let slot = (sec.to_owned(), key.to_owned());
        if raw.contains_key(&slot) {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
        raw.insert(
            slot,
            Entry {
                line,
                value: value.to_owned(),
            },
        );
    }
    Ok(raw)
}

struct Reader<'a> {
    raw: &'a Raw,
}

impl<'a> Reader<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a Entry> {
        self.raw.get(&(section.to_owned(), key.to_owned()))
    }

    fn reject_unused(&self, section: &str, allowed: &[&str]) -> Result<(), ConfigError> {
        for ((s, k), e) in self.raw.range((section.to_owned(), String::new())..) {
            if s != section {
                break;
            }
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    section: section.into(),
                    key: k.clone(),
                });
            }
        }
        Ok(())
    }

    fn float(
        &self,
        section: &str,
        key: &str,
        ok: impl Fn(f64) -> bool,
        bound: &str,
    ) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        let v = parse_f64(key, e)?;
        if !v.is_finite() || !ok(v) {
            return Err(range_err(key, e, bound));
        }
        Ok(Some(v))
    }

    fn int(&self, section: &str, key: &str, ok: impl Fn(i64) -> bool, bound: &str) -> Result<Option<i64>, ConfigError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        let v: i64 = e.value.parse().map_err(|_| value_err(key, e, "an integer"))?;
        if !ok(v) {
            return Err(range_err(key, e, bound));
        }
        Ok(Some(v))
    }

    fn float_list(
        &self,
        section: &str,
        key: &str,
        ok: impl Fn(f64) -> bool,
        bound: &str,
    ) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in e.value.split(',') {
            let v = f64::from_str(part.trim()).map_err(|_| value_err(key, e, "a comma-separated list of numbers"))?;
            if !v.is_finite() || !ok(v) {
                return Err(range_err(key, e, bound));
            }
            out.push(v);
        }
        Ok(Some(out))
    }

    fn int_list(
        &self,
        section: &str,
        key: &str,
        ok: impl Fn(i64) -> bool,
        bound: &str,
    ) -> Result<Option<Vec<i64>>, ConfigError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in e.value.split(',') {
            let v: i64 = part
                .trim()
                .parse()
                .map_err(|_| value_err(key, e, "a comma-separated list of integers"))?;
            if !ok(v) {
                return Err(range_err(key, e, bound));
            }
            out.push(v);
        }
        Ok(Some(out))
    }
}

fn parse_f64(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    e.value.parse().map_err(|_| value_err(key, e, "a number"))
}

fn parse_table(key: &str, e: &Entry) -> Result<Vec<(f64, f64)>, ConfigError> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for part in e.value.split(',') {
        let (x, v) = part
            .split_once(':')
            .ok_or_else(|| value_err(key, e, "comma-separated `x:value` pairs"))?;
        let x: f64 = x.trim().parse().map_err(|_| value_err(key, e, "numeric breakpoints"))?;
        let v: f64 = v.trim().parse().map_err(|_| value_err(key, e, "numeric values"))?;
        if !x.is_finite() || !v.is_finite() {
            return Err(range_err(key, e, "finite entries"));
        }
        if out.last().is_some_and(|(px, _)| *px >= x) {
            return Err(range_err(key, e, "strictly increasing breakpoints"));
        }
        out.push((x, v));
    }
    Ok(out)
}

fn value_err(key: &str, e: &Entry, expected: &str) -> ConfigError {
    ConfigError::Value {
        line: e.line,
        key: key.into(),
        value: e.value.clone(),
        expected: expected.into(),
    }
}

fn range_err(key: &str, e: &Entry, bound: &str) -> ConfigError {
    ConfigError::Range {
        line: e.line,
        key: key.into(),
        value: e.value.clone(),
        bound: bound.into(),
    }
}

/// Value of a piecewise-constant table at `x`; left of the first breakpoint
/// the first value applies.
pub fn table_value(table: &[(f64, f64)], x: f64) -> f64 {
    table
        .iter()
        .rev()
        .find(|(bx, _)| x >= *bx)
        .or(table.first())
        .map_or(0.0, |(_, v)| *v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relax_defaults() {
        let cfg = parse_config("", Command::Relax).unwrap();
        assert_eq!(cfg.kernel.kind, KernelKind::Fractional);
        assert_eq!(cfg.kernel.alpha, 0.5);
        assert_eq!((cfg.tau, cfg.horizon, cfg.params.gamma), (1e-3, 1.0, 1.0));
        assert_eq!(cfg.params.seed, 42);
    }

    #[test]
    fn alpha_out_of_range() {
        let err = parse_config("[kernel]\nalpha = 1.5\n", Command::Relax).unwrap_err();
        assert!(matches!(err, ConfigError::Range { line: 2, .. }));
        assert!(err.to_string().contains("(0.05, 0.95)"), "{err}");
    }

    #[test]
    fn gamma0_unknown_for_distributed() {
        let text = "[kernel]\ngamma0 = 1\nkernel = distributed\n";
        let err = parse_config(text, Command::Relax).unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                section: "kernel".into(),
                key: "gamma0".into()
            }
        );
        assert!(parse_config("[kernel]\ngamma0 = 1\n", Command::Relax).is_err());
        let ok = parse_config("[kernel]\nkernel = fractional_exp\ngamma0 = 1\n", Command::Relax).unwrap();
        assert_eq!(ok.kernel.gamma0, 1.0);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let cases = [
            ("alpha = 0.5", 1),
            ("[kernel]\n\nalpha 0.5", 3),
            ("[nope]", 1),
            ("[grid]\ntau = 0.1\ntau = 0.2", 3),
            ("[grid]\nspeed = 1", 2),
            ("[grid]\ntau = fast", 2),
        ];
        for (text, line) in cases {
            let err = parse_config(text, Command::Ode).unwrap_err();
            assert!(err.to_string().starts_with(&format!("line {line}:")), "{text:?}: {err}");
        }
    }

    #[test]
    fn full_config() {
        let text = "\
# blowup run
[kernel]
kernel = fractional_exp
alpha = 0.4
gamma0 = 2
[grid]
tau = 0.01
horizon = 2
[space]
extent = 1, 2
n = 9, 19
coefficient = 0:1, 0.5:3
[nonlinearity]
f = power
p = 3
extension = zero
[initial]
shape = sine
mode = 2
amplitude = 0.5
[solver]
scheme = lform
mode = imex
[output]
stride = 5
out = run.csv
[params]
c_values = 1, 2, 3
";
        let cfg = parse_config(text, Command::Pde).unwrap();
        assert_eq!(cfg.kernel.kind, KernelKind::FractionalExp);
        assert_eq!(cfg.space.n, vec![9, 19]);
        assert_eq!(cfg.space.coefficient, CoefficientSpec::Table(vec![(0.0, 1.0), (0.5, 3.0)]));
        assert_eq!(
            cfg.nonlinearity,
            Nonlinearity::Power {
                p: 3.0,
                extension: PowerExtension::Zero
            }
        );
        assert_eq!(cfg.initial, InitialSpec::Sine { mode: 2, amplitude: 0.5 });
        assert_eq!(cfg.solver.scheme, Scheme::LForm);
        assert_eq!(cfg.solver.mode, NonlinearMode::Imex);
        assert_eq!(cfg.stride, 5);
        assert_eq!(cfg.params.c_values, vec![1.0, 2.0, 3.0]);
        assert_eq!(cfg, parse_config(text, Command::Pde).unwrap());
    }

    #[test]
    fn keys_must_fit_the_chosen_variant() {
        let err = parse_config("[nonlinearity]\nf = quadratic\nc = 2\n", Command::Ode).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
        let err = parse_config("[initial]\nshape = constant\nmode = 2\n", Command::Ode).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
        let err = parse_config("[grid]\ntau = 0.3\n", Command::Ode).unwrap_err();
        assert!(matches!(err, ConfigError::Range { .. }));
    }

    #[test]
    fn table_lookup() {
        let t = [(0.0, 1.0), (0.5, 3.0)];
        assert_eq!(table_value(&t, -1.0), 1.0);
        assert_eq!(table_value(&t, 0.25), 1.0);
        assert_eq!(table_value(&t, 0.5), 3.0);
    }
}
