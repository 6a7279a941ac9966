//! Resolved run description: defaults, then config file, then flags.

use std::fmt;
use std::str::FromStr;

use noisy_tunnel::analysis::{lin_space, log_space};
use noisy_tunnel::{Backend, InitialState, ModelParams};

use crate::config::Document;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    SweepCoherence,
    SweepNonmarkov,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::SweepCoherence => "sweep-coherence",
            Self::SweepNonmarkov => "sweep-nonmarkov",
            Self::Validate => "validate",
        }
    }

    pub fn default_output(self) -> &'static str {
        match self {
            Self::Evolve => "evolve.csv",
            Self::SweepCoherence => "sweep_coherence.csv",
            Self::SweepNonmarkov => "sweep_nonmarkov.csv",
            Self::Validate => "validate_residuals.csv",
        }
    }

    fn uses_time_axis(self) -> bool {
        matches!(self, Self::Evolve | Self::SweepCoherence)
    }

    fn allowed(self, section: &str) -> &'static [&'static str] {
        match (section, self) {
            ("meta", _) => &["command", "version", "rows"],
            ("run", Self::Validate) => &["seed"],
            ("run", _) => &["seed", "states", "backend"],
            ("params", Self::Validate) => &[],
            ("params", _) => &["epsilon", "kappa", "delta0", "delta1", "nu"],
            ("sweep", Self::Validate) => &[],
            ("sweep", _) => &["t", "K", "kappa", "epsilon", "nu", "delta1"],
            ("oracle", Self::SweepNonmarkov) => &["blp_dt", "refinement"],
            ("oracle", Self::Validate) => &["n_realizations", "sde_dt", "blp_dt", "perturb"],
            _ => &[],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisName {
    T,
    K,
    Kappa,
    Epsilon,
    Nu,
    Delta1,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::T => "t",
            Self::K => "K",
            Self::Kappa => "kappa",
            Self::Epsilon => "epsilon",
            Self::Nu => "nu",
            Self::Delta1 => "delta1",
        }
    }
}

impl FromStr for AxisName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "t" => Self::T,
            "K" => Self::K,
            "kappa" => Self::Kappa,
            "epsilon" => Self::Epsilon,
            "nu" => Self::Nu,
            "delta1" => Self::Delta1,
            _ => return Err(CliError::usage(format!("unknown sweep axis `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: Scale,
}

impl Axis {
    /// Parses `min max count [linear|log]`.
    pub fn parse(name: AxisName, text: &str) -> Result<Self, CliError> {
        let bad = |why: &str| {
            CliError::usage(format!("sweep axis `{}` = `{text}`: {why}", name.as_str()))
        };
        let parts: Vec<&str> = text.split_whitespace().collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad("expected `min max count [linear|log]`"));
        }
        let min = parse_f64(parts[0]).map_err(|_| bad("bad min"))?;
        let max = parse_f64(parts[1]).map_err(|_| bad("bad max"))?;
        let count: usize = parts[2].parse().map_err(|_| bad("bad count"))?;
        let scale = match parts.get(3).copied().unwrap_or("linear") {
            "linear" | "lin" => Scale::Linear,
            "log" => Scale::Log,
            _ => return Err(bad("scale must be `linear` or `log`")),
        };
        if count < 2 {
            return Err(bad("count must be at least 2"));
        }
        if !(min < max) {
            return Err(bad("min must be below max"));
        }
        if scale == Scale::Log && min <= 0.0 {
            return Err(bad("log axis needs min > 0"));
        }
        Ok(Self {
            name,
            min,
            max,
            count,
            scale,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => lin_space(self.min, self.max, self.count),
            Scale::Log => log_space(self.min, self.max, self.count),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scale = match self.scale {
            Scale::Linear => "linear",
            Scale::Log => "log",
        };
        write!(f, "{} {} {} {scale}", self.min, self.max, self.count)
    }
}

/// Generator entry `(row, col)` shifted by `delta` in the Monte Carlo
/// references of `validate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub row: usize,
    pub col: usize,
    pub delta: f64,
}

impl FromStr for Perturbation {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::usage(format!(
                "perturbation `{s}`: expected `row,col[,delta]` with indices below 6"
            ))
        };
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let row: usize = parts[0].parse().map_err(|_| bad())?;
        let col: usize = parts[1].parse().map_err(|_| bad())?;
        let delta = parts
            .get(2)
            .map_or(Ok(1e-3), |d| parse_f64(d))
            .map_err(|_| bad())?;
        if row >= 6 || col >= 6 {
            return Err(bad());
        }
        Ok(Self { row, col, delta })
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.row, self.col, self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub n_realizations: usize,
    pub sde_dt: f64,
    pub blp_dt: f64,
    pub refinement: bool,
    pub perturb: Option<Perturbation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub command: Command,
    pub epsilon: f64,
    pub kappa: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub nu: f64,
    pub backend: Backend,
    pub states: Vec<InitialState>,
    /// Swept axes in document order.
    pub axes: Vec<Axis>,
    pub seed: u64,
    pub oracle: OracleSettings,
}

/// One point of the parameter product, with the swept values in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub values: Vec<f64>,
    pub params: ModelParams,
}

pub fn defaults(command: Command) -> Document {
    let mut doc = Document::new();
    doc.set("run", "seed", "1");
    let (delta1, states, sweep): (&str, &str, &[(&str, &str)]) = match command {
        Command::Evolve => (
            "0",
            "rho1, rho2",
            &[("epsilon", "0 2 2 linear"), ("t", "0 20 2001 linear")],
        ),
        Command::SweepCoherence => (
            "1",
            "rho1, rho2",
            &[
                ("epsilon", "0 2 2 linear"),
                ("K", "0.1 10 21 log"),
                ("t", "0 20 401 linear"),
            ],
        ),
        Command::SweepNonmarkov => (
            "1",
            "rho1, rho3",
            &[
                ("epsilon", "0 2 2 linear"),
                ("K", "0.25 8 6 log"),
                ("kappa", "0 0.3 7 linear"),
            ],
        ),
        Command::Validate => {
            doc.set("oracle", "n_realizations", "10000");
            doc.set("oracle", "sde_dt", "0.001");
            doc.set("oracle", "blp_dt", "0.001");
            return doc;
        }
    };
    doc.set("run", "states", states);
    doc.set("run", "backend", "expm");
    for (k, v) in [
        ("epsilon", "0"),
        ("kappa", "0.1"),
        ("delta0", "1"),
        ("delta1", delta1),
        ("nu", "1"),
    ] {
        doc.set("params", k, v);
    }
    for (k, v) in sweep {
        doc.set("sweep", k, v);
    }
    if command == Command::SweepNonmarkov {
        doc.set("oracle", "blp_dt", "0.001");
        doc.set("oracle", "refinement", "true");
    }
    doc
}

/// Layers `over` on top of `base`, key by key. A `[sweep]` value of `off`
/// removes that axis.
pub fn merge(base: &mut Document, over: &Document) {
    for (section, kv) in over.sections() {
        for (k, v) in kv {
            if section == "sweep" && v == "off" {
                base.remove(section, k);
            } else {
                base.set(section, k, v);
            }
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, ()> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or(())
}

fn number(doc: &Document, section: &str, key: &str) -> Result<f64, CliError> {
    let raw = doc
        .get(section, key)
        .ok_or_else(|| CliError::usage(format!("missing `{section}.{key}`")))?;
    parse_f64(raw).map_err(|_| {
        CliError::usage(format!(
            "`{section}.{key}` = `{raw}` is not a finite number"
        ))
    })
}

fn flag(doc: &Document, section: &str, key: &str) -> Result<bool, CliError> {
    match doc.get(section, key) {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(other) => Err(CliError::usage(format!(
            "`{section}.{key}` = `{other}` must be true or false"
        ))),
    }
}

impl SweepSpec {
    pub fn from_document(command: Command, doc: &Document) -> Result<Self, CliError> {
        for (section, kv) in doc.sections() {
            let allowed = command.allowed(section);
            for (k, _) in kv {
                if !allowed.contains(&k.as_str()) {
                    return Err(CliError::usage(format!(
                        "unknown key `{section}.{k}` for `{command}`"
                    )));
                }
            }
        }
        if let Some(c) = doc.get("meta", "command") {
            if c != command.name() {
                return Err(CliError::usage(format!(
                    "config was written by `{c}`, not `{command}`"
                )));
            }
        }

        let seed = doc
            .get("run", "seed")
            .unwrap_or("1")
            .parse()
            .map_err(|_| CliError::usage("`run.seed` must be an unsigned integer"))?;
        let oracle = OracleSettings {
            n_realizations: match doc.get("oracle", "n_realizations") {
                Some(v) => v.parse().ok().filter(|&n: &usize| n >= 1).ok_or_else(|| {
                    CliError::usage("`oracle.n_realizations` must be a positive integer")
                })?,
                None => 1,
            },
            sde_dt: doc
                .get("oracle", "sde_dt")
                .map_or(Ok(1e-3), |_| number(doc, "oracle", "sde_dt"))?,
            blp_dt: doc
                .get("oracle", "blp_dt")
                .map_or(Ok(1e-3), |_| number(doc, "oracle", "blp_dt"))?,
            refinement: flag(doc, "oracle", "refinement")?,
            perturb: doc.get("oracle", "perturb").map(str::parse).transpose()?,
        };
        for (key, v) in [("sde_dt", oracle.sde_dt), ("blp_dt", oracle.blp_dt)] {
            if v <= 0.0 {
                return Err(CliError::usage(format!("`oracle.{key}` must be positive")));
            }
        }

        if command == Command::Validate {
            return Ok(Self {
                command,
                epsilon: 0.0,
                kappa: 0.0,
                delta0: 0.0,
                delta1: 0.0,
                nu: 1.0,
                backend: Backend::default(),
                states: Vec::new(),
                axes: Vec::new(),
                seed,
                oracle,
            });
        }

        let states = doc
            .get("run", "states")
            .ok_or_else(|| CliError::usage("missing `run.states`"))?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<InitialState>()
                    .map_err(|e| CliError::usage(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let backend = doc
            .get("run", "backend")
            .unwrap_or("expm")
            .parse::<Backend>()
            .map_err(|e| CliError::usage(e.to_string()))?;
        let axes = doc
            .keys("sweep")
            .into_iter()
            .map(|k| Axis::parse(k.parse()?, doc.get("sweep", k).unwrap_or_default()))
            .collect::<Result<Vec<_>, _>>()?;

        let spec = Self {
            command,
            epsilon: number(doc, "params", "epsilon")?,
            kappa: number(doc, "params", "kappa")?,
            delta0: number(doc, "params", "delta0")?,
            delta1: number(doc, "params", "delta1")?,
            nu: number(doc, "params", "nu")?,
            backend,
            states,
            axes,
            seed,
            oracle,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), CliError> {
        let swept = |n| self.axes.iter().any(|a| a.name == n);
        if swept(AxisName::K) && swept(AxisName::Nu) {
            return Err(CliError::usage(
                "K and nu cannot both be swept: nu = delta1 / K",
            ));
        }
        if self.command.uses_time_axis() {
            match self.axes.iter().find(|a| a.name == AxisName::T) {
                None => {
                    return Err(CliError::usage(format!(
                        "`{}` needs a `t` axis",
                        self.command
                    )))
                }
                Some(t) if t.min != 0.0 || t.scale != Scale::Linear => {
                    return Err(CliError::usage(
                        "the `t` axis must be linear and start at 0",
                    ))
                }
                _ => {}
            }
            if self.states.is_empty() {
                return Err(CliError::usage("no initial states requested"));
            }
        } else {
            if swept(AxisName::T) {
                return Err(CliError::usage(format!(
                    "`{}` does not take a `t` axis",
                    self.command
                )));
            }
            if self.states.len() != 2 || self.states[0] == self.states[1] {
                return Err(CliError::usage(
                    "`run.states` must name two distinct states",
                ));
            }
        }
        self.param_points().map(drop)
    }

    /// Values of the `t` axis.
    pub fn times(&self) -> Vec<f64> {
        self.axes
            .iter()
            .find(|a| a.name == AxisName::T)
            .map_or_else(Vec::new, Axis::values)
    }

    /// Swept axes other than `t`.
    pub fn param_axes(&self) -> Vec<&Axis> {
        self.axes.iter().filter(|a| a.name != AxisName::T).collect()
    }

    /// Cartesian product of the parameter axes, first axis slowest.
    pub fn param_points(&self) -> Result<Vec<ParamPoint>, CliError> {
        let axes = self.param_axes();
        let values: Vec<Vec<f64>> = axes.iter().map(|a| a.values()).collect();
        let total: usize = values.iter().map(Vec::len).product();
        (0..total)
            .map(|mut flat| {
                let mut point = vec![0.0; axes.len()];
                for (i, v) in values.iter().enumerate().rev() {
                    point[i] = v[flat % v.len()];
                    flat /= v.len();
                }
                let params = self.params_at(&axes, &point)?;
                Ok(ParamPoint {
                    values: point,
                    params,
                })
            })
            .collect()
    }

    fn params_at(&self, axes: &[&Axis], values: &[f64]) -> Result<ModelParams, CliError> {
        let (mut eps, mut kap, mut d1, mut nu) = (self.epsilon, self.kappa, self.delta1, self.nu);
        let mut kubo = None;
        for (axis, &v) in axes.iter().zip(values) {
            match axis.name {
                AxisName::Epsilon => eps = v,
                AxisName::Kappa => kap = v,
                AxisName::Delta1 => d1 = v,
                AxisName::Nu => nu = v,
                AxisName::K => kubo = Some(v),
                AxisName::T => {}
            }
        }
        if let Some(k) = kubo {
            nu = d1 / k;
        }
        ModelParams::new(eps, kap, self.delta0, d1, nu).map_err(|e| {
            let at: Vec<String> = axes
                .iter()
                .zip(values)
                .map(|(a, v)| format!("{}={v}", a.name.as_str()))
                .collect();
            CliError::usage(format!("{e} at {}", at.join(", ")))
        })
    }

    /// Canonical document for the manifest. `rows` is grid metadata.
    pub fn to_document(&self, rows: usize) -> Document {
        let mut doc = Document::new();
        doc.set("meta", "command", self.command.name());
        doc.set("meta", "version", env!("CARGO_PKG_VERSION"));
        doc.set("meta", "rows", &rows.to_string());
        doc.set("run", "seed", &self.seed.to_string());
        if self.command != Command::Validate {
            let states: Vec<&str> = self.states.iter().map(|s| s.label()).collect();
            doc.set("run", "states", &states.join(", "));
            doc.set("run", "backend", &self.backend.to_string());
            for (k, v) in [
                ("epsilon", self.epsilon),
                ("kappa", self.kappa),
                ("delta0", self.delta0),
                ("delta1", self.delta1),
                ("nu", self.nu),
            ] {
                doc.set("params", k, &v.to_string());
            }
            for a in &self.axes {
                doc.set("sweep", a.name.as_str(), &a.to_string());
            }
        }
        match self.command {
            Command::SweepNonmarkov => {
                doc.set("oracle", "blp_dt", &self.oracle.blp_dt.to_string());
                doc.set("oracle", "refinement", &self.oracle.refinement.to_string());
            }
            Command::Validate => {
                doc.set(
                    "oracle",
                    "n_realizations",
                    &self.oracle.n_realizations.to_string(),
                );
                doc.set("oracle", "sde_dt", &self.oracle.sde_dt.to_string());
                doc.set("oracle", "blp_dt", &self.oracle.blp_dt.to_string());
                if let Some(p) = self.oracle.perturb {
                    doc.set("oracle", "perturb", &p.to_string());
                }
            }
            _ => {}
        }
        doc
    }
}
