//! Scenario configuration files.
//!
//! A config is a JSON object `{"kind", "parameters", "seed", "output_path"}`.
//! Parameters are validated against the schema of their kind; unknown fields
//! are rejected everywhere.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use moment_core::{DiscreteMeasure, GramForm, QuadraticModuleSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::construct::WeightSequence;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Trace,
    Gaussian,
    FundamentalLemma,
    Concentration,
    MainTheorem,
    Carleman,
    TildeTrace,
    ConstructQ,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Trace,
        ScenarioKind::Gaussian,
        ScenarioKind::FundamentalLemma,
        ScenarioKind::Concentration,
        ScenarioKind::MainTheorem,
        ScenarioKind::Carleman,
        ScenarioKind::TildeTrace,
        ScenarioKind::ConstructQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Trace => "trace",
            ScenarioKind::Gaussian => "gaussian",
            ScenarioKind::FundamentalLemma => "fundamental_lemma",
            ScenarioKind::Concentration => "concentration",
            ScenarioKind::MainTheorem => "main_theorem",
            ScenarioKind::Carleman => "carleman",
            ScenarioKind::TildeTrace => "tilde_trace",
            ScenarioKind::ConstructQ => "construct_q",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ScenarioKind::Trace => "relative trace tr(p/q), both routes",
            ScenarioKind::Gaussian => "second moments and tails of the Gaussian measure of q",
            ScenarioKind::FundamentalLemma => "mass of the dual unit ball under a concentrated measure",
            ScenarioKind::Concentration => "(eps, delta) certificates for the marginals of a measure",
            ScenarioKind::MainTheorem => "nine-stage representation pipeline",
            ScenarioKind::Carleman => "Carleman series diagnostic along a direction",
            ScenarioKind::TildeTrace => "trace of the graded tower, formula against direct sum",
            ScenarioKind::ConstructQ => "q from a p-orthonormal system and weights",
        }
    }

    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ScenarioKind::Trace => &["p", "q", "expected?"],
            ScenarioKind::Gaussian => &["q", "directions", "functionals?", "samples", "streams?"],
            ScenarioKind::FundamentalLemma => &["mu", "p", "q", "epsilon", "delta"],
            ScenarioKind::Concentration => &["measure", "p", "grid", "probes?"],
            ScenarioKind::MainTheorem => &["target", "q", "module?", "degree?", "epsilons", "probes?"],
            ScenarioKind::Carleman => &["source", "terms", "margin?", "expected_verdict?"],
            ScenarioKind::TildeTrace => &["p", "q", "depth"],
            ScenarioKind::ConstructQ => &["p", "system", "lambda"],
        }
    }

    /// The valid kind closest to `name` in edit distance.
    pub fn nearest(name: &str) -> ScenarioKind {
        *ScenarioKind::ALL.iter().min_by_key(|k| strsim::levenshtein(name, k.name())).expect("non-empty")
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown kind \"{s}\"; did you mean \"{}\"?", ScenarioKind::nearest(s))))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    pub p: GramForm,
    pub q: GramForm,
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    pub q: GramForm,
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub functionals: Vec<Vec<f64>>,
    pub samples: usize,
    #[serde(default = "default_streams")]
    pub streams: usize,
}

fn default_streams() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalLemmaParams {
    pub mu: DiscreteMeasure,
    pub p: GramForm,
    pub q: GramForm,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationParams {
    pub measure: DiscreteMeasure,
    pub p: GramForm,
    /// `(eps, delta)` pairs.
    pub grid: Vec<(f64, f64)>,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_probes() -> usize {
    32
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MainTheoremParams {
    pub target: DiscreteMeasure,
    pub q: GramForm,
    #[serde(default)]
    pub module: QuadraticModuleSpec,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_degree() -> usize {
    4
}

/// Where the even moments `L(v^2n)` come from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CarlemanSource {
    /// A finitely atomic measure and a direction `v`.
    Measure { measure: DiscreteMeasure, direction: Vec<f64> },
    /// Centered normal law with the given variance.
    Gaussian { variance: f64 },
    /// `L(v^2n) = exp(rate * n^2)`.
    ExpSquare { rate: f64 },
    /// Explicit `log L(v^2n)` for `n = 1..`.
    LogMoments { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanParams {
    pub source: CarlemanSource,
    pub terms: usize,
    pub margin: Option<f64>,
    pub expected_verdict: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TildeTraceParams {
    pub p: GramForm,
    pub q: GramForm,
    pub depth: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructQParams {
    pub p: GramForm,
    pub system: Vec<Vec<f64>>,
    pub lambda: WeightSequence,
}

#[derive(Debug, Clone)]
pub enum Parameters {
    Trace(TraceParams),
    Gaussian(GaussianParams),
    FundamentalLemma(FundamentalLemmaParams),
    Concentration(ConcentrationParams),
    MainTheorem(MainTheoremParams),
    Carleman(CarlemanParams),
    TildeTrace(TildeTraceParams),
    ConstructQ(ConstructQParams),
}

impl Parameters {
    pub fn parse(kind: ScenarioKind, value: Value) -> Result<Self, CliError> {
        fn de<T: serde::de::DeserializeOwned>(kind: ScenarioKind, v: Value) -> Result<T, CliError> {
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("parameters for {kind}: {e}")))
        }
        Ok(match kind {
            ScenarioKind::Trace => Parameters::Trace(de(kind, value)?),
            ScenarioKind::Gaussian => Parameters::Gaussian(de(kind, value)?),
            ScenarioKind::FundamentalLemma => Parameters::FundamentalLemma(de(kind, value)?),
            ScenarioKind::Concentration => Parameters::Concentration(de(kind, value)?),
            ScenarioKind::MainTheorem => Parameters::MainTheorem(de(kind, value)?),
            ScenarioKind::Carleman => Parameters::Carleman(de(kind, value)?),
            ScenarioKind::TildeTrace => Parameters::TildeTrace(de(kind, value)?),
            ScenarioKind::ConstructQ => Parameters::ConstructQ(de(kind, value)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub parameters: Parameters,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

const TOP_LEVEL: [&str; 4] = ["kind", "parameters", "seed", "output_path"];

/// Every problem found in `value`, in a fixed order. Empty means valid.
pub fn diagnose(value: &Value) -> Vec<String> {
    let Some(obj) = value.as_object() else {
        return vec!["config must be a JSON object".into()];
    };
    let mut out = Vec::new();
    for key in obj.keys() {
        if !TOP_LEVEL.contains(&key.as_str()) {
            out.push(format!("unknown field \"{key}\"; expected one of {}", TOP_LEVEL.join(", ")));
        }
    }
    let kind = match obj.get("kind") {
        None => {
            out.push("missing field \"kind\"".into());
            None
        }
        Some(Value::String(s)) => match s.parse::<ScenarioKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                out.push(e.to_string());
                None
            }
        },
        Some(_) => {
            out.push("\"kind\" must be a string".into());
            None
        }
    };
    match obj.get("seed") {
        None | Some(Value::Null) => {}
        Some(v) if v.as_u64().is_some() => {}
        Some(_) => out.push("\"seed\" must be a nonnegative integer".into()),
    }
    match obj.get("output_path") {
        None | Some(Value::Null) | Some(Value::String(_)) => {}
        Some(_) => out.push("\"output_path\" must be a string".into()),
    }
    match obj.get("parameters") {
        None => out.push("missing field \"parameters\"".into()),
        Some(p) => {
            if let Some(k) = kind {
                if let Err(e) = Parameters::parse(k, p.clone()) {
                    out.push(e.to_string());
                }
            }
        }
    }
    out
}

impl ScenarioConfig {
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let problems = diagnose(&value);
        if !problems.is_empty() {
            return Err(CliError::Config(problems.join("; ")));
        }
        let obj = value.as_object().expect("checked by diagnose");
        let kind: ScenarioKind = obj["kind"].as_str().expect("checked").parse()?;
        Ok(ScenarioConfig {
            kind,
            parameters: Parameters::parse(kind, obj["parameters"].clone())?,
            seed: obj.get("seed").and_then(Value::as_u64).unwrap_or(0),
            output_path: obj.get("output_path").and_then(Value::as_str).map(PathBuf::from),
        })
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        ScenarioConfig::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        ScenarioConfig::parse_str(&text)
    }
}
