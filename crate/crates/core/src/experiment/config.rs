//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::CournotCoefficients;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },
}

/// Weight matrices are dense `n × n`; larger systems are rejected up front.
pub const MAX_AGENTS: usize = 4096;

fn field_error(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

/// Communication graph vocabulary shared by cluster and inter-cluster graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Ring,
    Complete,
    /// A ring over a shuffled node order plus `extra_edges` random edges.
    Random { seed: u64, extra_edges: usize },
    Edges { edges: Vec<[usize; 2]> },
    /// Edge list file, resolved relative to the config file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<CournotCoefficients>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_seed: Option<u64>,
    pub graph: GraphSpec,
}

/// Edges between clusters. The global graph is the union of every cluster
/// graph with `inter`, where `inter` spans all agents, or with `leaders`
/// mapped onto the first agent of each cluster when `leader_follower` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalGraphSpec {
    #[serde(default)]
    pub leader_follower: bool,
    pub inter: GraphSpec,
    /// Graph over the cluster leaders; defaults to `inter` rebuilt on `H` nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaders: Option<GraphSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Value(f64),
    Certify,
}

impl Serialize for AlphaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AlphaSpec::Value(a) => s.serialize_f64(*a),
            AlphaSpec::Certify => s.serialize_str("certify"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(a) => Ok(AlphaSpec::Value(a)),
            Raw::Text(t) if t == "certify" => Ok(AlphaSpec::Certify),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"certify\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateWindow {
    pub upper: f64,
    pub lower: f64,
}

impl Default for RateWindow {
    fn default() -> Self {
        Self {
            upper: crate::solver::DEFAULT_WINDOW_UPPER,
            lower: crate::solver::DEFAULT_WINDOW_LOWER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_trace")]
    pub trace: String,
    #[serde(default = "default_estimates")]
    pub estimates: String,
    #[serde(default = "default_report")]
    pub report: String,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_trace() -> String {
    "trace.csv".into()
}
fn default_estimates() -> String {
    "estimates.csv".into()
}
fn default_report() -> String {
    "report.txt".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            trace: default_trace(),
            estimates: default_estimates(),
            report: default_report(),
        }
    }
}

fn default_record_every() -> usize {
    1
}
fn default_x0_range() -> [f64; 2] {
    [0.0, 10.0]
}
fn default_compare_epsilon() -> f64 {
    5e-3
}
fn default_compare_max_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub price_constant: f64,
    pub alpha: AlphaSpec,
    pub max_iter: usize,
    #[serde(default)]
    pub consensus_tol: f64,
    #[serde(default)]
    pub gradient_tol: f64,
    pub x0_seed: u64,
    /// Initial estimates are drawn uniformly from `[lo, hi)`.
    #[serde(default = "default_x0_range")]
    pub x0_range: [f64; 2],
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub rate_window: RateWindow,
    /// Accuracy `‖x_1 − x*‖₂ ≤ ε` counted by `compare`.
    #[serde(default = "default_compare_epsilon")]
    pub compare_epsilon: f64,
    #[serde(default = "default_compare_max_iter")]
    pub compare_max_iter: usize,
    pub clusters: Vec<ClusterSpec>,
    pub global_graph: GlobalGraphSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Directory that relative `file` graph paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.size).collect()
    }

    pub fn agent_count(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }

    /// Coefficients of every agent, cluster by cluster. A cluster seed `s`
    /// draws its agents' coefficients from a generator seeded with `s`.
    pub fn coefficients(&self) -> Vec<CournotCoefficients> {
        self.clusters
            .iter()
            .flat_map(|c| match (&c.coefficients, c.coefficient_seed) {
                (Some(list), _) => list.clone(),
                (None, Some(seed)) => CournotCoefficients::seeded(c.size, seed),
                (None, None) => unreachable!("validated"),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.price_constant > 0.0 && self.price_constant.is_finite()) {
            return Err(field_error("price_constant", "must be positive and finite"));
        }
        if let AlphaSpec::Value(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(field_error("alpha", "must be positive and finite or \"certify\""));
            }
        }
        if self.max_iter == 0 {
            return Err(field_error("max_iter", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(field_error("record_every", "must be positive"));
        }
        for (name, v) in [("consensus_tol", self.consensus_tol), ("gradient_tol", self.gradient_tol)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field_error(name, "must be nonnegative and finite"));
            }
        }
        let [lo, hi] = self.x0_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(field_error("x0_range", "needs finite bounds with lo < hi"));
        }
        let w = self.rate_window;
        if !(w.lower > 0.0 && w.upper > w.lower && w.upper.is_finite()) {
            return Err(field_error("rate_window", "needs 0 < lower < upper"));
        }
        if !(self.compare_epsilon > 0.0 && self.compare_epsilon.is_finite()) {
            return Err(field_error("compare_epsilon", "must be positive"));
        }
        if self.compare_max_iter == 0 {
            return Err(field_error("compare_max_iter", "must be positive"));
        }
        if self.clusters.is_empty() {
            return Err(field_error("clusters", "at least one cluster is required"));
        }
        let total = self.clusters.iter().try_fold(0usize, |acc, c| acc.checked_add(c.size));
        if !total.is_some_and(|n| n <= MAX_AGENTS) {
            return Err(field_error("clusters", format!("at most {MAX_AGENTS} agents in total")));
        }
        for (h, c) in self.clusters.iter().enumerate() {
            let field = |f: &str| format!("clusters[{h}].{f}");
            if c.size == 0 {
                return Err(field_error(field("size"), "must be positive"));
            }
            match (&c.coefficients, c.coefficient_seed) {
                (Some(_), Some(_)) => {
                    return Err(field_error(
                        field("coefficients"),
                        "give either coefficients or coefficient_seed, not both",
                    ))
                }
                (None, None) => {
                    return Err(field_error(
                        field("coefficients"),
                        "missing; give coefficients or coefficient_seed",
                    ))
                }
                (Some(list), None) => {
                    if list.len() != c.size {
                        return Err(field_error(
                            field("coefficients"),
                            format!("has {} entries for {} agents", list.len(), c.size),
                        ));
                    }
                    for (i, co) in list.iter().enumerate() {
                        if !(co.a > 0.0 && co.a.is_finite() && co.b.is_finite() && co.c.is_finite()) {
                            return Err(field_error(
                                format!("clusters[{h}].coefficients[{i}]"),
                                "needs finite values with a > 0",
                            ));
                        }
                    }
                }
                (None, Some(_)) => {}
            }
        }
        Ok(())
    }
}
