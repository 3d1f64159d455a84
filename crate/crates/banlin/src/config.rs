//! Experiment configuration.
//!
//! A config file is a flat JSON object whose keys match the `run` flags; flags
//! win over the file, the file wins over defaults. Resolution fills the
//! theorem defaults for `eta` and `gamma` and records where every value came
//! from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use banlin_core::env::Tuning;
use banlin_core::{ball, exp2, hypercube};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEEDS: usize = 50;
pub const DEFAULT_EXPERTS: usize = 10;
pub const DEFAULT_ROTATION_PERIOD: usize = 1000;
pub const DEFAULT_OUT_DIR: &str = "banlin-out";
/// Relative slack on the parameter preconditions, so that theorem defaults
/// pass after rounding.
const PRECONDITION_SLACK: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("`{field}` violates its precondition: {message}")]
    Precondition { field: &'static str, message: String },
}

impl ConfigError {
    /// Malformed input, as opposed to a well-formed config that fails validation.
    pub fn is_usage(&self) -> bool {
        matches!(self, ConfigError::Io { .. } | ConfigError::Json { .. } | ConfigError::Missing(_) | ConfigError::Invalid { .. })
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// EXP2 with John's exploration over a finite point set.
    Finite,
    /// Mirror descent on the hypercube.
    Hypercube,
    /// Mirror descent on the Euclidean ball.
    Ball,
    /// EXP2 over expert advice.
    Experts,
}

impl Setting {
    fn uses_points(self) -> bool {
        matches!(self, Setting::Finite | Setting::Experts)
    }
}

/// Loss sequence, as written in configs: `zero`, `fixed[:z1,z2,..]`,
/// `iid-l1-vertex`, `iid-sphere`, `rotating[:period]`, `adaptive-worst` or
/// `file:PATH` (CSV, one loss vector per row).
#[derive(Debug, Clone, PartialEq)]
pub enum AdversarySpec {
    Zero,
    /// `None` is `e_1`.
    Fixed(Option<Vec<f64>>),
    IidL1Vertex,
    IidSphere,
    Rotating(usize),
    AdaptiveWorst,
    File(PathBuf),
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::Zero => f.write_str("zero"),
            AdversarySpec::Fixed(None) => f.write_str("fixed"),
            AdversarySpec::Fixed(Some(z)) => {
                let parts: Vec<String> = z.iter().map(|v| v.to_string()).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
            AdversarySpec::IidL1Vertex => f.write_str("iid-l1-vertex"),
            AdversarySpec::IidSphere => f.write_str("iid-sphere"),
            AdversarySpec::Rotating(p) => write!(f, "rotating:{p}"),
            AdversarySpec::AdaptiveWorst => f.write_str("adaptive-worst"),
            AdversarySpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("zero", None) => Ok(AdversarySpec::Zero),
            ("fixed", None) => Ok(AdversarySpec::Fixed(None)),
            ("fixed", Some(list)) => {
                let z = list
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad coordinate {v:?}: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(AdversarySpec::Fixed(Some(z)))
            }
            ("iid-l1-vertex", None) => Ok(AdversarySpec::IidL1Vertex),
            ("iid-sphere", None) => Ok(AdversarySpec::IidSphere),
            ("rotating", None) => Ok(AdversarySpec::Rotating(DEFAULT_ROTATION_PERIOD)),
            ("rotating", Some(p)) => match p.parse::<usize>() {
                Ok(p) if p > 0 => Ok(AdversarySpec::Rotating(p)),
                _ => Err(format!("rotation period must be a positive integer, got {p:?}")),
            },
            ("adaptive-worst", None) => Ok(AdversarySpec::AdaptiveWorst),
            ("file", Some(p)) if !p.is_empty() => Ok(AdversarySpec::File(PathBuf::from(p))),
            _ => Err(format!(
                "unknown adversary {s:?}; expected zero, fixed[:list], iid-l1-vertex, iid-sphere, rotating[:period], adaptive-worst or file:PATH"
            )),
        }
    }
}

/// Finite action set: `cross-polytope` (`±e_i`), `corners` (all of
/// `{-1,1}^d`), `random` (`N` points on the unit sphere, drawn from `seed`)
/// or `file:PATH` (CSV, one point per row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionSpec {
    CrossPolytope,
    Corners,
    Random,
    File(PathBuf),
}

impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSpec::CrossPolytope => f.write_str("cross-polytope"),
            ActionSpec::Corners => f.write_str("corners"),
            ActionSpec::Random => f.write_str("random"),
            ActionSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for ActionSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cross-polytope" => Ok(ActionSpec::CrossPolytope),
            "corners" => Ok(ActionSpec::Corners),
            "random" => Ok(ActionSpec::Random),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(ActionSpec::File(PathBuf::from(p))),
                _ => Err(format!("unknown action set {s:?}; expected cross-polytope, corners, random or file:PATH")),
            },
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(AdversarySpec);
string_serde!(ActionSpec);

/// Everything optional: the shape of a config file and of the flag set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Number of actions (finite) or experts (experts).
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<ActionSpec>,
    /// Actions offered to the experts each round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    /// Ball only: shrink the played internal point to norm `1 - gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.to_owned(), source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    Config,
    Flag,
}

/// Fully resolved experiment. Written back out, it parses and resolves to
/// itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<ActionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<usize>,
    pub seeds: usize,
    pub seed: u64,
    pub adversary: AdversarySpec,
    pub eta: f64,
    pub gamma: f64,
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            setting: Some(self.setting),
            d: Some(self.d),
            n: Some(self.n),
            big_n: self.big_n,
            actions: self.actions.clone(),
            context: self.context,
            seeds: Some(self.seeds),
            seed: Some(self.seed),
            adversary: Some(self.adversary.clone()),
            eta: Some(self.eta),
            gamma: Some(self.gamma),
            strict: Some(self.strict),
            project: self.project,
            out_dir: self.out_dir.clone(),
        }
    }

    pub fn tuning(&self) -> Tuning {
        Tuning { eta: self.eta, gamma: self.gamma, clamped: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub provenance: BTreeMap<String, Source>,
    pub warnings: Vec<String>,
}

/// Number of points of a built-in action set; `None` when it is read from
/// a file or set by `N`.
pub fn builtin_size(spec: &ActionSpec, d: usize) -> Option<usize> {
    match spec {
        ActionSpec::CrossPolytope => Some(2 * d),
        ActionSpec::Corners => u32::try_from(d).ok().and_then(|d| 1usize.checked_shl(d)),
        ActionSpec::Random | ActionSpec::File(_) => None,
    }
}

fn count_rows(path: &Path) -> Result<usize, ConfigError> {
    crate::io::read_points(path).map(|p| p.len()).map_err(|e| invalid("actions", e.to_string()))
}

struct Merger<'a> {
    file: &'a RawConfig,
    flags: &'a RawConfig,
    provenance: BTreeMap<String, Source>,
}

impl Merger<'_> {
    fn take<T: Clone>(&mut self, key: &str, get: impl Fn(&RawConfig) -> Option<T>) -> Option<T> {
        if let Some(v) = get(self.flags) {
            self.provenance.insert(key.to_owned(), Source::Flag);
            Some(v)
        } else if let Some(v) = get(self.file) {
            self.provenance.insert(key.to_owned(), Source::Config);
            Some(v)
        } else {
            None
        }
    }

    fn or_default<T: Clone>(&mut self, key: &str, get: impl Fn(&RawConfig) -> Option<T>, default: T) -> T {
        self.take(key, get).unwrap_or_else(|| {
            self.provenance.insert(key.to_owned(), Source::Default);
            default
        })
    }
}

/// Merges `flags` over `file` over defaults and validates the result.
pub fn resolve(file: &RawConfig, flags: &RawConfig) -> Result<Resolved, ConfigError> {
    let mut m = Merger { file, flags, provenance: BTreeMap::new() };
    let mut warnings = Vec::new();

    let setting = m.take("setting", |r| r.setting).ok_or(ConfigError::Missing("setting"))?;
    let d = m.take("d", |r| r.d).ok_or(ConfigError::Missing("d"))?;
    let n = m.take("n", |r| r.n).ok_or(ConfigError::Missing("n"))?;
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let seeds = m.or_default("seeds", |r| r.seeds, DEFAULT_SEEDS);
    if seeds == 0 {
        return Err(invalid("seeds", "must be at least 1"));
    }
    let seed = m.or_default("seed", |r| r.seed, 0);
    let strict = m.or_default("strict", |r| r.strict, false);
    let adversary = m.or_default("adversary", |r| r.adversary.clone(), AdversarySpec::Fixed(None));
    if let AdversarySpec::Fixed(Some(z)) = &adversary {
        if z.len() != d {
            return Err(invalid("adversary", format!("fixed loss has {} coordinates, expected d = {d}", z.len())));
        }
    }
    let out_dir = m.or_default("out_dir", |r| r.out_dir.clone(), PathBuf::from(DEFAULT_OUT_DIR));

    let (big_n, actions, context) = if setting.uses_points() {
        let actions = m.or_default("actions", |r| r.actions.clone(), ActionSpec::CrossPolytope);
        let size = match &actions {
            ActionSpec::File(p) => Some(count_rows(p)?),
            other => builtin_size(other, d),
        };
        let explicit_n = m.take("N", |r| r.big_n);
        let big_n = match setting {
            Setting::Finite => match (size, explicit_n) {
                (Some(s), Some(k)) if s != k => {
                    return Err(invalid("N", format!("action set `{actions}` has {s} points, not {k}")));
                }
                (Some(s), _) => {
                    if explicit_n.is_none() {
                        m.provenance.insert("N".into(), Source::Default);
                    }
                    s
                }
                (None, Some(k)) => k,
                (None, None) => {
                    m.provenance.insert("N".into(), Source::Default);
                    2 * d
                }
            },
            _ => explicit_n.unwrap_or_else(|| {
                m.provenance.insert("N".into(), Source::Default);
                DEFAULT_EXPERTS
            }),
        };
        if big_n < 2 {
            return Err(invalid("N", "exponential weights need at least two actions or experts"));
        }
        let pool = size.unwrap_or(big_n);
        let context = if setting == Setting::Experts {
            let c = m.or_default("context", |r| r.context, d.min(pool));
            if c == 0 || c > pool {
                return Err(invalid("context", format!("must lie in 1..={pool}")));
            }
            Some(c)
        } else {
            reject(&mut m, "context", |r| r.context.is_some(), setting)?;
            None
        };
        (Some(big_n), Some(actions), context)
    } else {
        reject(&mut m, "N", |r| r.big_n.is_some(), setting)?;
        reject(&mut m, "actions", |r| r.actions.is_some(), setting)?;
        reject(&mut m, "context", |r| r.context.is_some(), setting)?;
        (None, None, None)
    };

    let project = if setting == Setting::Ball {
        Some(m.or_default("project", |r| r.project, false))
    } else {
        reject(&mut m, "project", |r| r.project.is_some(), setting)?;
        None
    };

    let defaults = match setting {
        Setting::Finite | Setting::Experts => exp2::params(n, d, big_n.unwrap_or(2), strict),
        Setting::Hypercube => hypercube::params(n, d, strict),
        Setting::Ball => ball::params(n.max(2), d, strict),
    }
    .map_err(|e| ConfigError::Precondition { field: "n", message: e.to_string() })?;
    let eta_given = m.take("eta", |r| r.eta);
    let gamma_given = m.take("gamma", |r| r.gamma);
    if defaults.clamped && (eta_given.is_none() || gamma_given.is_none()) {
        warnings.push(format!(
            "horizon n = {n} is too short for the theorem parameters; clamped to eta = {}, gamma = {}",
            defaults.eta, defaults.gamma
        ));
    }
    let eta = eta_given.unwrap_or_else(|| {
        m.provenance.insert("eta".into(), Source::Default);
        defaults.eta
    });
    let gamma = gamma_given.unwrap_or_else(|| {
        m.provenance.insert("gamma".into(), Source::Default);
        defaults.gamma
    });
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid("eta", "must be positive"));
    }
    let gamma_ok = match setting {
        Setting::Finite | Setting::Experts => gamma > 0.0 && gamma <= 1.0,
        Setting::Hypercube | Setting::Ball => gamma > 0.0 && gamma < 1.0,
    };
    if !gamma_ok {
        return Err(invalid("gamma", "must lie in (0, 1) ((0, 1] for exponential weights)"));
    }
    if let Some((field, message)) = precondition(setting, d, eta, gamma) {
        if strict {
            return Err(ConfigError::Precondition { field, message });
        }
        warnings.push(format!("{field}: {message}; the theorem analysis does not apply"));
    }

    let config = ExperimentConfig {
        setting,
        d,
        n,
        big_n,
        actions,
        context,
        seeds,
        seed,
        adversary,
        eta,
        gamma,
        strict,
        project,
        out_dir: Some(out_dir),
    };
    Ok(Resolved { config, provenance: m.provenance, warnings })
}

fn reject(m: &mut Merger<'_>, key: &'static str, given: impl Fn(&RawConfig) -> bool, setting: Setting) -> Result<(), ConfigError> {
    if given(m.flags) || given(m.file) {
        return Err(invalid(key, format!("does not apply to the {setting:?} setting")));
    }
    Ok(())
}

/// The condition on `(eta, gamma)` the regret analysis needs, if violated.
pub fn precondition(setting: Setting, d: usize, eta: f64, gamma: f64) -> Option<(&'static str, String)> {
    let d = d as f64;
    let (value, limit, what) = match setting {
        Setting::Finite | Setting::Experts => (eta * d / gamma, 1.0, "eta d / gamma"),
        Setting::Hypercube => (eta * d / gamma, 0.5, "eta d / gamma"),
        Setting::Ball => (eta * d, 0.5, "eta d"),
    };
    if value > limit * (1.0 + PRECONDITION_SLACK) {
        Some(("eta", format!("{what} = {value} exceeds {limit}")))
    } else {
        None
    }
}
