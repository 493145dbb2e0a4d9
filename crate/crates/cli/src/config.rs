//! Layered configuration: defaults, then a config file, then `RTIL_SEED` for
//! an unset seed, then command-line flags.
//!
//! A config file may be a bare JSON object, a JSON output of this tool (its
//! `"config"` field is used), or a CSV output whose `# config: ` header line
//! carries the JSON.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u64 = 1;
pub const SEED_ENV: &str = "RTIL_SEED";
const CSV_CONFIG_PREFIX: &str = "# config: ";

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Extracts the config object from any of the accepted file shapes.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Map<String, Value>, CliError> {
    let json = match text.lines().find_map(|l| l.strip_prefix(CSV_CONFIG_PREFIX)) {
        Some(line) if text.trim_start().starts_with('#') => line.to_string(),
        _ => text.to_string(),
    };
    let value: Value = serde_json::from_str(&json).map_err(|e| {
        CliError::Usage(format!(
            "{origin}: line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let value = match value {
        Value::Object(mut obj) if obj.contains_key("schema") && obj.contains_key("config") => {
            obj.remove("config").expect("checked")
        }
        other => other,
    };
    match value {
        Value::Object(obj) => Ok(obj),
        _ => Err(CliError::Usage(format!(
            "{origin}: config must be a JSON object"
        ))),
    }
}

pub fn load_config_file(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    match path {
        Some(p) => parse_config_text(&read_text(p)?, &p.display().to_string()),
        None => Ok(Map::new()),
    }
}

/// Sets `obj[key]` from `RTIL_SEED` when the key is absent.
pub fn apply_env_seed(obj: &mut Map<String, Value>, key: &str) -> Result<(), CliError> {
    if obj.contains_key(key) {
        return Ok(());
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        let seed: u64 = raw.trim().parse().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer"))
        })?;
        obj.insert(key.into(), seed.into());
    }
    Ok(())
}

/// Inserts `value` under `key` when a flag was given.
pub fn set<T: Serialize>(obj: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        obj.insert(
            key.into(),
            serde_json::to_value(v).expect("flag values serialize"),
        );
    }
}

/// Like [`set`], inside the nested object `outer` (created if missing).
pub fn set_nested<T: Serialize>(
    obj: &mut Map<String, Value>,
    outer: &str,
    key: &str,
    value: Option<T>,
) {
    if value.is_none() {
        return;
    }
    let entry = obj
        .entry(outer.to_string())
        .or_insert_with(|| Value::Object(Map::new()));
    if let Value::Object(inner) = entry {
        set(inner, key, value);
    }
}

/// Deserializes with the failing field path in the error.
pub fn resolve<T: DeserializeOwned>(obj: Map<String, Value>) -> Result<T, CliError> {
    serde_path_to_error::deserialize(Value::Object(obj)).map_err(|e| {
        let path = e.path().to_string();
        CliError::Usage(format!("config field `{path}`: {}", e.into_inner()))
    })
}

/// `{"schema": 1, "config": ..., <rest>}`
pub fn envelope<C: Serialize>(config: &C, rest: Vec<(&str, Value)>) -> Value {
    let mut obj = Map::new();
    obj.insert("schema".into(), SCHEMA_VERSION.into());
    obj.insert(
        "config".into(),
        serde_json::to_value(config).expect("config serializes"),
    );
    for (k, v) in rest {
        obj.insert(k.into(), v);
    }
    Value::Object(obj)
}

pub fn csv_config_line<C: Serialize>(config: &C) -> String {
    format!(
        "{CSV_CONFIG_PREFIX}{}\n",
        serde_json::to_string(config).expect("config serializes")
    )
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_bare_envelope_and_csv() {
        let bare = parse_config_text(r#"{"a": 1}"#, "t").unwrap();
        let env = parse_config_text(r#"{"schema": 1, "config": {"a": 1}, "x": []}"#, "t").unwrap();
        let csv = parse_config_text("# config: {\"a\": 1}\nalgo,ratio\n", "t").unwrap();
        assert_eq!(bare, env);
        assert_eq!(bare, csv);
    }

    #[test]
    fn rejects_non_objects() {
        assert!(parse_config_text("[1, 2]", "t").is_err());
        assert!(parse_config_text("{", "t").is_err());
    }

    #[test]
    fn nested_flags() {
        let mut obj = Map::new();
        set_nested(&mut obj, "inversion", "n_codes", Some(5));
        set_nested::<u32>(&mut obj, "other", "k", None);
        assert_eq!(
            Value::Object(obj),
            serde_json::json!({"inversion": {"n_codes": 5}})
        );
    }
}
