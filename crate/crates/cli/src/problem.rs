//! Problem files: parsing and per-task validation.

use std::fmt;

use equilib::solver::SolverOptions;
use equilib::{CircleConfig, Configuration, ForceLaw, LineConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SolveCircle,
    SolveSegment,
    Relax,
    ZeroCentered,
    Extend,
    CertifyGap,
    CheckMonotone,
    GapRatio,
    DetectPeriod,
    Residuals,
    DiffField,
    Blaschke,
    Reconstruct,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SolveCircle => "solve-circle",
            Task::SolveSegment => "solve-segment",
            Task::Relax => "relax",
            Task::ZeroCentered => "zero-centered",
            Task::Extend => "extend",
            Task::CertifyGap => "certify-gap",
            Task::CheckMonotone => "check-monotone",
            Task::GapRatio => "gap-ratio",
            Task::DetectPeriod => "detect-period",
            Task::Residuals => "residuals",
            Task::DiffField => "diff-field",
            Task::Blaschke => "blaschke",
            Task::Reconstruct => "reconstruct",
        }
    }

    fn needs_law(self) -> bool {
        !matches!(self, Task::GapRatio | Task::DetectPeriod | Task::Blaschke)
    }

    fn needs_config(self) -> bool {
        !matches!(self, Task::SolveCircle | Task::SolveSegment | Task::ZeroCentered | Task::DiffField)
    }
}

/// Output file requests; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

/// A validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub task: Task,
    pub law: Option<ForceLaw>,
    pub config: Option<Configuration>,
    pub options: SolverOptions,
    pub params: Map<String, Value>,
    pub outputs: Outputs,
    /// The file as read, echoed into the result.
    pub raw: Value,
}

/// Schema or input error, reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub kind: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new("schema", message)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for ValidationError {}

impl From<equilib::EquilibError> for ValidationError {
    fn from(e: equilib::EquilibError) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

type VResult<T> = Result<T, ValidationError>;

fn section<T: DeserializeOwned>(name: &str, v: &Value) -> VResult<T> {
    serde_json::from_value(v.clone()).map_err(|e| ValidationError::schema(format!("{name}: {e}")))
}

/// Laws are given either as `"kind:param"` text or as a tagged object.
pub fn parse_law(v: &Value) -> VResult<ForceLaw> {
    match v {
        Value::String(s) => s.parse().map_err(|e: equilib::EquilibError| ValidationError::schema(e.to_string())),
        _ => section("law", v),
    }
}

pub fn parse_config(v: &Value) -> VResult<Configuration> {
    if v.get("angles").is_some() {
        Ok(Configuration::Circle(section::<CircleConfig>("config", v)?))
    } else {
        Ok(Configuration::Line(section::<LineConfig>("config", v)?))
    }
}

impl Problem {
    pub fn from_value(raw: Value) -> VResult<Self> {
        let obj = raw.as_object().ok_or_else(|| ValidationError::schema("problem file must be a JSON object"))?;
        match obj.get("schema_version") {
            None => return Err(ValidationError::schema("schema_version: required")),
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(ValidationError::schema(format!("schema_version: expected 1, got {v}"))),
        }
        let task: Task = section("task", obj.get("task").ok_or_else(|| ValidationError::schema("task: required"))?)?;
        let law = match obj.get("law") {
            Some(v) => Some(parse_law(v)?),
            None if task.needs_law() => return Err(ValidationError::schema("law: required")),
            None => None,
        };
        let config = match obj.get("config") {
            Some(v) => Some(parse_config(v)?),
            None if task.needs_config() => return Err(ValidationError::schema("config: required")),
            None => None,
        };
        let options: SolverOptions = match obj.get("options") {
            Some(v) => section("options", v)?,
            None => SolverOptions::default(),
        };
        let params = match obj.get("params") {
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(ValidationError::schema("params: must be an object")),
            None => Map::new(),
        };
        let outputs = match obj.get("outputs") {
            Some(v) => section("outputs", v)?,
            None => Outputs::default(),
        };
        for key in obj.keys() {
            if !["schema_version", "task", "law", "config", "options", "params", "outputs"].contains(&key.as_str()) {
                return Err(ValidationError::schema(format!("{key}: unknown section")));
            }
        }
        Ok(Self {
            task,
            law,
            config,
            options,
            params,
            outputs,
            raw,
        })
    }

    pub fn law(&self) -> VResult<&ForceLaw> {
        self.law.as_ref().ok_or_else(|| ValidationError::schema("law: required"))
    }

    pub fn line(&self) -> VResult<&LineConfig> {
        match &self.config {
            Some(Configuration::Line(c)) => Ok(c),
            Some(Configuration::Circle(_)) => Err(ValidationError::schema(format!(
                "config: {} needs a line configuration",
                self.task.name()
            ))),
            None => Err(ValidationError::schema("config: required")),
        }
    }

    pub fn param<T: DeserializeOwned>(&self, name: &str) -> VResult<Option<T>> {
        self.params
            .get(name)
            .map(|v| section(&format!("params.{name}"), v))
            .transpose()
    }

    pub fn required<T: DeserializeOwned>(&self, name: &str) -> VResult<T> {
        self.param(name)?
            .ok_or_else(|| ValidationError::schema(format!("params.{name}: required")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn missing_law_is_reported_by_name() {
        let raw = json!({"schema_version": 1, "task": "residuals", "config": {"window": [0.0, 1.0]}});
        let e = Problem::from_value(raw).unwrap_err();
        assert_eq!(e.message, "law: required");
    }

    #[test]
    fn wrong_version_and_unknown_task() {
        let e = Problem::from_value(json!({"schema_version": 2, "task": "residuals"})).unwrap_err();
        assert!(e.message.starts_with("schema_version"));
        let e = Problem::from_value(json!({"schema_version": 1, "task": "fly"})).unwrap_err();
        assert!(e.message.starts_with("task"));
    }

    #[test]
    fn law_accepts_text_and_object_forms() {
        let a = parse_law(&json!("inverse_power:2")).unwrap();
        let b = parse_law(&json!({"kind": "inverse_power", "k": 2.0})).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_ratio_needs_no_law() {
        let raw = json!({"schema_version": 1, "task": "gap-ratio", "config": {"window": [0.0, 1.0, 3.0]}});
        let p = Problem::from_value(raw).unwrap();
        assert!(p.law.is_none());
        assert_eq!(p.line().unwrap().len(), 3);
    }
}
