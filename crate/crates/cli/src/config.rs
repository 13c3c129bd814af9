//! The JSON check configuration.

use std::collections::BTreeMap;

use dip_dpcheck::{DeltaSpec, DpQuery, EpsRange};
use dip_frontend::{parse_program_with, AdjacencySpec, Program};
use dip_semantics::BuildConfig;
use dip_symalg::{parse_q, EpsInterval, SignConfig, Q};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// Precision (bits) used when neither the config nor the environment sets one.
pub const DEFAULT_PRECISION: u32 = 128;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("program: {0}")]
    Program(#[from] dip_frontend::FrontendError),
    #[error("{field}: {msg}")]
    Field { field: &'static str, msg: String },
}

fn field(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AdjacencyConfig {
    #[serde(rename = "linf1")]
    LInf1,
    #[serde(rename = "l1_1")]
    L1_1,
    #[serde(rename = "explicit")]
    Explicit { pairs: Vec<(Vec<i64>, Vec<i64>)> },
}

impl AdjacencyConfig {
    pub fn spec(&self) -> AdjacencySpec {
        match self {
            AdjacencyConfig::LInf1 => AdjacencySpec::LInf1,
            AdjacencyConfig::L1_1 => AdjacencySpec::L1_1,
            AdjacencyConfig::Explicit { pairs } => AdjacencySpec::Explicit(pairs.clone()),
        }
    }
}

/// `"all"`, a rational such as `"1/2"`, or `{"interval": [lo, hi]}`, where
/// a lower end of `"0"` is the open end `0⁺` and `"inf"` is unbounded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonConfig {
    Text(String),
    Interval { interval: (String, String) },
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        EpsilonConfig::Text("all".into())
    }
}

impl EpsilonConfig {
    pub fn range(&self) -> Result<EpsRange, ConfigError> {
        let rational = |s: &str| parse_q(s.trim()).map_err(|e| field("epsilon", e.to_string()));
        match self {
            EpsilonConfig::Text(s) if s.trim() == "all" => Ok(EpsRange::Interval(EpsInterval::all())),
            EpsilonConfig::Text(s) => Ok(EpsRange::Fixed(rational(s)?)),
            EpsilonConfig::Interval { interval: (lo, hi) } => {
                let lo = rational(lo)?;
                let lo = if lo.is_zero() { None } else { Some(lo) };
                let hi = if hi.trim() == "inf" { None } else { Some(rational(hi)?) };
                Ok(EpsRange::Interval(EpsInterval::new(lo, hi).map_err(|e| field("epsilon", e))?))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Decide privacy and report every checked inequality.
    #[default]
    Check,
    /// Decide privacy and report only the verdict and counter-example.
    Counterexample,
    /// Compare the exact distributions with Monte-Carlo estimates.
    Oracle,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    #[serde(default = "default_oracle_eps")]
    pub eps: Vec<String>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Inputs to sample; all valuations when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<Vec<i64>>>,
    /// Agreement tolerance in standard errors.
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

fn default_oracle_eps() -> Vec<String> {
    vec!["1/2".into(), "1".into(), "2".into()]
}
fn default_samples() -> u64 {
    1_000_000
}
fn default_seed() -> u64 {
    1
}
fn default_sigmas() -> f64 {
    3.0
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            eps: default_oracle_eps(),
            samples: default_samples(),
            seed: default_seed(),
            inputs: None,
            sigmas: default_sigmas(),
        }
    }
}

fn one() -> String {
    "1".into()
}
fn zero() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Program file, relative to the config file.
    pub program: String,
    /// Overrides of `const` declarations, e.g. the number of queries `N`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub consts: BTreeMap<String, i64>,
    pub adjacency: AdjacencyConfig,
    #[serde(default = "one")]
    pub t: String,
    #[serde(default = "zero")]
    pub delta: String,
    #[serde(default)]
    pub epsilon: EpsilonConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub minimize: bool,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub oracle: OracleSettings,
}

impl CheckConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn program(&self, text: &str) -> Result<Program, ConfigError> {
        Ok(parse_program_with(text, &self.consts)?)
    }

    pub fn sign_config(&self, default_precision: u32) -> SignConfig {
        let base = SignConfig::default();
        let precision = self.caps.precision_bits.unwrap_or(default_precision);
        SignConfig {
            precision,
            max_precision: base.max_precision.max(precision),
            depth: self.caps.depth.unwrap_or(base.depth),
        }
    }

    /// The privacy question posed by this config about `program`.
    pub fn query(&self, program: Program, default_precision: u32) -> Result<DpQuery, ConfigError> {
        let t: Q = parse_q(self.t.trim()).map_err(|e| field("t", e.to_string()))?;
        let delta = DeltaSpec::parse(&self.delta).map_err(|e| field("delta", e.to_string()))?;
        let mut q = DpQuery::new(program, self.adjacency.spec());
        q.t = t;
        q.delta = delta;
        q.eps = self.epsilon.range()?;
        q.sign = self.sign_config(default_precision);
        if let Some(states) = self.caps.states {
            q.build = BuildConfig { max_states: states };
        }
        Ok(q)
    }
}
