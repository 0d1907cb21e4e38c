//! Experiment configuration files and `--set` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use bifb::eval::{GridSpec, PipelineConfig};
use bifb::synth::SynthDatasetConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Grid axes as written in a config; a missing axis is pinned to the base
/// configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridAxes {
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub segment_length_s: Option<Vec<f64>>,
    pub overlap: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub learning_rate: Option<Vec<f64>>,
    /// Bandwidth multipliers for the optional per-stimulus refinement pass.
    pub refine_bandwidths: Option<Vec<f64>>,
}

impl GridAxes {
    pub fn to_spec(&self, base: &PipelineConfig) -> GridSpec {
        let one = GridSpec::singleton(base);
        let pick = |axis: &Option<Vec<f64>>, default: Vec<f64>| axis.clone().unwrap_or(default);
        GridSpec {
            gamma: pick(&self.gamma, one.gamma),
            beta: pick(&self.beta, one.beta),
            segment_length_s: pick(&self.segment_length_s, one.segment_length_s),
            overlap: pick(&self.overlap, one.overlap),
            lambda: pick(&self.lambda, one.lambda),
            learning_rate: pick(&self.learning_rate, one.learning_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub grid: Option<GridAxes>,
    pub simulate: Option<SynthDatasetConfig>,
}

impl ExperimentConfig {
    /// Reads `path` (or starts from an empty object), resolves relative
    /// paths in the file against the file's directory, then applies
    /// `KEY=VALUE` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut root = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                let mut v: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new("."));
                resolve_paths(&mut v, base);
                v
            }
            None => Value::Object(Map::new()),
        };
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        Self::from_value(root)
    }

    /// Splits off `dataset`, `output_dir`, `grid` and `simulate`; every
    /// other key belongs to the pipeline.
    pub fn from_value(root: Value) -> Result<Self, CliError> {
        let Value::Object(mut obj) = root else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        let mut take = |key: &str| obj.remove(key).filter(|v| !v.is_null());
        let dataset = take("dataset").map(path_from).transpose()?;
        let output_dir = take("output_dir").map(path_from).transpose()?;
        let grid = take("grid").map(|v| parse("grid", v)).transpose()?;
        let simulate = take("simulate").map(|v| parse("simulate", v)).transpose()?;
        let pipeline = parse("config", Value::Object(obj))?;
        Ok(ExperimentConfig {
            dataset,
            output_dir,
            pipeline,
            grid,
            simulate,
        })
    }

    /// The fully resolved configuration, with every default spelled out.
    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(&self.pipeline).expect("config serializes");
        let obj = v.as_object_mut().expect("object");
        if let Some(d) = &self.dataset {
            obj.insert("dataset".into(), Value::String(d.display().to_string()));
        }
        if let Some(g) = &self.grid {
            obj.insert(
                "grid".into(),
                serde_json::to_value(g).expect("grid serializes"),
            );
        }
        v
    }

    pub fn dataset_path(&self) -> Result<&Path, CliError> {
        self.dataset.as_deref().ok_or_else(|| {
            CliError::Config("no dataset given (set \"dataset\" in the config)".into())
        })
    }

    /// `--out` wins over the config's `output_dir`.
    pub fn output_dir(&self, out: Option<&Path>) -> Result<PathBuf, CliError> {
        out.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .ok_or_else(|| {
                CliError::Config("no output directory (use --out or \"output_dir\")".into())
            })
    }
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn path_from(v: Value) -> Result<PathBuf, CliError> {
    match v {
        Value::String(s) => Ok(PathBuf::from(s)),
        other => Err(CliError::Config(format!(
            "expected a path string, got {other}"
        ))),
    }
}

fn resolve_paths(v: &mut Value, base: &Path) {
    let Some(obj) = v.as_object_mut() else { return };
    for key in ["dataset", "output_dir"] {
        if let Some(Value::String(s)) = obj.get(key) {
            let p = Path::new(s);
            if p.is_relative() {
                let joined = base.join(p);
                obj.insert(key.into(), Value::String(joined.display().to_string()));
            }
        }
    }
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses and as
/// a plain string otherwise; numeric segments index into arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set: bad key {key:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| {
                    CliError::Config(format!("--set {key}: {part:?} is not an index"))
                })?;
                let len = items.len();
                items.get_mut(idx).ok_or_else(|| {
                    CliError::Config(format!("--set {key}: index {idx} out of range ({len})"))
                })?
            }
            Value::Null => {
                *cur = Value::Object(Map::new());
                cur.as_object_mut()
                    .unwrap()
                    .entry(*part)
                    .or_insert(Value::Null)
            }
            Value::Object(map) => map.entry(*part).or_insert(Value::Null),
            _ => {
                return Err(CliError::Config(format!(
                    "--set {key}: {:?} is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    unreachable!("key has at least one segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_overrides() {
        let mut v = json!({"segment": {"length_s": 2.0}, "bifb": {"gains": [1.0, 2.0]}});
        apply_override(&mut v, "segment.length_s=1.5").unwrap();
        apply_override(&mut v, "method=psda").unwrap();
        apply_override(&mut v, "bifb.gains.1=3").unwrap();
        apply_override(&mut v, "train.lambda=0.1").unwrap();
        assert_eq!(
            v,
            json!({"segment": {"length_s": 1.5}, "method": "psda",
                   "bifb": {"gains": [1.0, 3]}, "train": {"lambda": 0.1}})
        );
        assert!(apply_override(&mut v, "nonsense").is_err());
        assert!(apply_override(&mut v, "method.x=1").is_err());
        assert!(apply_override(&mut v, "bifb.gains.7=1").is_err());
    }

    #[test]
    fn unknown_pipeline_field_is_a_config_error() {
        let err = ExperimentConfig::from_value(json!({"segmnet": {}})).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let ok = ExperimentConfig::from_value(json!({"method": "cca", "dataset": "d"})).unwrap();
        assert_eq!(ok.pipeline.method, bifb::eval::MethodKind::Cca);
        assert_eq!(ok.dataset, Some(PathBuf::from("d")));
    }

    #[test]
    fn missing_axes_come_from_base() {
        let base = PipelineConfig::default();
        let axes = GridAxes {
            gamma: Some(vec![0.0, 1.0]),
            ..Default::default()
        };
        let spec = axes.to_spec(&base);
        assert_eq!(spec.gamma, vec![0.0, 1.0]);
        assert_eq!(spec.lambda, vec![base.train.lambda]);
    }
}
