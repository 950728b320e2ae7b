//! Scenario file loading and command-line overrides.
//!
//! Scenarios are TOML documents deserialized into
//! [`ScenarioSpec`](crate::sim::scenario::ScenarioSpec). A run can start from
//! a file or from a named template, and either source can be patched with
//! `KEY=VALUE` overrides before validation. Override keys are dotted paths
//! into the document (`schedule.modification_period_ms=5120`); when a path
//! segment lands on an array without an index, the rest of the path is
//! applied to every element, so `cells.bandwidth_mhz=5` rewrites all cell
//! entries at once.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;
use toml::Value;

use crate::sim::scenario::{self, ScenarioError, ScenarioSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("bad override {key:?}: {message}")]
    Override { key: String, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// A single `KEY=VALUE` override as given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
        if key.is_empty() {
            return Err(format!("empty key in {s:?}"));
        }
        Ok(Override {
            key: key.to_string(),
            value: value.to_string(),
        })
    }
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

/// Loads a scenario file, applies overrides, and validates the result.
pub fn load_scenario(path: &Path, overrides: &[Override]) -> Result<ScenarioSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut value: Value = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    apply_overrides(&mut value, overrides)?;
    finish(value, &path.display().to_string())
}

/// Builds a scenario from a named template, then applies overrides and
/// validates as for a file.
pub fn from_template(name: &str, overrides: &[Override]) -> Result<ScenarioSpec, ConfigError> {
    let spec = scenario::template(name)?;
    if overrides.is_empty() {
        return Ok(spec);
    }
    let mut value = Value::try_from(&spec).expect("template serializes");
    apply_overrides(&mut value, overrides)?;
    finish(value, &format!("template {name:?}"))
}

/// Validation-only entry point for `--validate`: parses and checks the file
/// without building anything.
pub fn validate_file(path: &Path) -> Result<(), ConfigError> {
    load_scenario(path, &[]).map(|_| ())
}

fn finish(value: Value, origin: &str) -> Result<ScenarioSpec, ConfigError> {
    let spec: ScenarioSpec = value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let issues = spec.validate();
    if issues.is_empty() {
        Ok(spec)
    } else {
        Err(ScenarioError::Invalid(issues).into())
    }
}

/// Applies each override in order to a parsed TOML document.
pub fn apply_overrides(value: &mut Value, overrides: &[Override]) -> Result<(), ConfigError> {
    for ovr in overrides {
        let segments: Vec<&str> = ovr.key.split('.').collect();
        set_path(value, &segments, &ovr.value).map_err(|message| ConfigError::Override {
            key: ovr.key.clone(),
            message,
        })?;
    }
    Ok(())
}

fn set_path(value: &mut Value, path: &[&str], raw: &str) -> Result<(), String> {
    let (head, rest) = match path.split_first() {
        Some(split) => split,
        None => return Err("empty path".to_string()),
    };
    match value {
        Value::Table(table) => {
            if rest.is_empty() {
                let parsed = match table.get(*head) {
                    Some(existing) => coerce_like(existing, raw)?,
                    None => infer(raw),
                };
                table.insert(head.to_string(), parsed);
                Ok(())
            } else {
                let inner = table
                    .get_mut(*head)
                    .ok_or_else(|| format!("no such key {head:?}"))?;
                set_path(inner, rest, raw)
            }
        }
        Value::Array(items) => {
            if let Ok(index) = head.parse::<usize>() {
                let len = items.len();
                let item = items
                    .get_mut(index)
                    .ok_or_else(|| format!("index {index} out of range (len {len})"))?;
                if rest.is_empty() {
                    *item = coerce_like(item, raw)?;
                    Ok(())
                } else {
                    set_path(item, rest, raw)
                }
            } else {
                if items.is_empty() {
                    return Err(format!("cannot set {head:?} on an empty array"));
                }
                for item in items.iter_mut() {
                    set_path(item, path, raw)?;
                }
                Ok(())
            }
        }
        other => Err(format!(
            "cannot descend into {} value with {head:?}",
            other.type_str()
        )),
    }
}

fn coerce_like(existing: &Value, raw: &str) -> Result<Value, String> {
    match existing {
        Value::Integer(_) => raw
            .parse::<i64>()
            .map(Value::Integer)
            .map_err(|_| format!("expected an integer, got {raw:?}")),
        Value::Float(_) => raw
            .parse::<f64>()
            .map(Value::Float)
            .map_err(|_| format!("expected a number, got {raw:?}")),
        Value::Boolean(_) => raw
            .parse::<bool>()
            .map(Value::Boolean)
            .map_err(|_| format!("expected true or false, got {raw:?}")),
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Array(_) => parse_array(raw),
        other => Err(format!("cannot replace a {} value", other.type_str())),
    }
}

fn infer(raw: &str) -> Value {
    if let Ok(i) = raw.parse::<i64>() {
        return Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return Value::Float(f);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return Value::Boolean(b);
    }
    if raw.starts_with('[') {
        if let Ok(v) = parse_array(raw) {
            return v;
        }
    }
    Value::String(raw.to_string())
}

fn parse_array(raw: &str) -> Result<Value, String> {
    let doc = format!("x = {raw}");
    let table: Value = doc
        .parse()
        .map_err(|e: toml::de::Error| format!("expected a TOML array, got {raw:?}: {e}"))?;
    Ok(table
        .get("x")
        .cloned()
        .expect("parsed document has the key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_value() -> Value {
        let spec = scenario::template("fig2").unwrap();
        Value::try_from(&spec).unwrap()
    }

    #[test]
    fn override_parses_key_value() {
        let ovr: Override = "schedule.modification_period_ms=5120".parse().unwrap();
        assert_eq!(ovr.key, "schedule.modification_period_ms");
        assert_eq!(ovr.value, "5120");
        assert!("no-equals-sign".parse::<Override>().is_err());
        assert!("=5".parse::<Override>().is_err());
    }

    #[test]
    fn scalar_override_lands() {
        let mut value = fig2_value();
        let ovr = Override {
            key: "schedule.modification_period_ms".into(),
            value: "5120".into(),
        };
        apply_overrides(&mut value, &[ovr]).unwrap();
        let spec: ScenarioSpec = value.try_into().unwrap();
        assert_eq!(spec.schedule.modification_period_ms, 5120);
    }

    #[test]
    fn array_broadcast_hits_every_element() {
        let mut value = fig2_value();
        let ovr = Override {
            key: "groups.service".into(),
            value: "video".into(),
        };
        apply_overrides(&mut value, &[ovr]).unwrap();
        let spec: ScenarioSpec = value.try_into().unwrap();
        assert!(!spec.groups.is_empty());
        assert!(spec.groups.iter().all(|g| g.service == "video"));
    }

    #[test]
    fn indexed_override_hits_one_element() {
        let spec = scenario::template("req-matrix").unwrap();
        let mut value = Value::try_from(&spec).unwrap();
        let ovr = Override {
            key: "groups.0.members".into(),
            value: "400".into(),
        };
        apply_overrides(&mut value, &[ovr]).unwrap();
        let patched: ScenarioSpec = value.try_into().unwrap();
        assert_eq!(patched.groups[0].members, 400);
        assert_eq!(patched.groups[1].members, spec.groups[1].members);
    }

    #[test]
    fn type_mismatch_is_reported() {
        let mut value = fig2_value();
        let ovr = Override {
            key: "duration_ms".into(),
            value: "soon".into(),
        };
        let err = apply_overrides(&mut value, &[ovr]).unwrap_err();
        assert!(matches!(err, ConfigError::Override { .. }));
        assert!(err.to_string().contains("expected an integer"));
    }

    #[test]
    fn unknown_key_is_reported() {
        let mut value = fig2_value();
        let ovr = Override {
            key: "schedul.period".into(),
            value: "50".into(),
        };
        let err = apply_overrides(&mut value, &[ovr]).unwrap_err();
        assert!(err.to_string().contains("no such key"));
    }

    #[test]
    fn template_with_override_validates() {
        let ovr = Override {
            key: "cells.bandwidth_mhz".into(),
            value: "5".into(),
        };
        let spec = from_template("fig2", &[ovr]).unwrap();
        assert!(spec.cells.iter().all(|c| c.bandwidth_mhz == 5));
    }

    #[test]
    fn override_that_breaks_validation_is_caught() {
        let ovr = Override {
            key: "cells.mbsfn_subframes".into(),
            value: "7".into(),
        };
        let err = from_template("fig2", &[ovr]).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("mbsfn_subframes"), "{text}");
    }

    #[test]
    fn file_round_trip() {
        let spec = scenario::template("fig4").unwrap();
        let dir = std::env::temp_dir().join(format!("pmrsim-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fig4.toml");
        std::fs::write(&path, toml::to_string_pretty(&spec).unwrap()).unwrap();
        let loaded = load_scenario(&path, &[]).unwrap();
        assert_eq!(loaded, spec);
        validate_file(&path).unwrap();
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_scenario(Path::new("/nonexistent/scenario.toml"), &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }

    #[test]
    fn parse_error_cites_location() {
        let dir = std::env::temp_dir().join(format!("pmrsim-parse-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.toml");
        std::fs::write(&path, "duration_ms = [unclosed").unwrap();
        let err = load_scenario(&path, &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn minimal_document_parses_with_defaults() {
        let text = r#"
duration_ms = 10000

[model]
bandwidth_mhz = 10

[[cells]]
bandwidth_mhz = 10
mbsfn_subframes = 6

[[areas]]
cells = [0]
sync_mode = "sc"

[[groups]]
members = 8
service = "voice"
"#;
        let value: Value = text.parse().unwrap();
        let spec: ScenarioSpec = value.try_into().unwrap();
        assert!(spec.validate().is_empty());
        assert_eq!(spec.schedule.modification_period_ms, 50);
        assert_eq!(spec.policy.kind, "static");
        assert_eq!(spec.bearers.option, "pre_established");
    }

    #[test]
    fn optional_field_can_be_inserted() {
        let mut value = fig2_value();
        let ovr = Override {
            key: "cells.0.capacity_units".into(),
            value: "40".into(),
        };
        apply_overrides(&mut value, &[ovr]).unwrap();
        let spec: ScenarioSpec = value.try_into().unwrap();
        assert_eq!(spec.cells[0].capacity_units, Some(40));
    }
}
