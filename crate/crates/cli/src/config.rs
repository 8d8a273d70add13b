//! JSON config files merged with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Global settings shared by every command.
#[derive(Clone, Debug, Serialize)]
pub struct Globals {
    pub out: PathBuf,
    pub seed: u64,
}

/// Reads `path` as a JSON object. `out` and `seed` are lifted out as globals;
/// everything else belongs to the command.
pub fn load(path: Option<&Path>) -> Result<(Map<String, Value>, Option<PathBuf>, Option<u64>)> {
    let Some(path) = path else {
        return Ok((Map::new(), None, None));
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    let Value::Object(mut map) = value else {
        bail!("config {} must hold a JSON object", path.display());
    };
    let out = match map.remove("out") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => bail!("config key `out` must be a string, found {other}"),
    };
    let seed = match map.remove("seed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .with_context(|| format!("config key `seed` must be a u64, found {v}"))?,
        ),
    };
    Ok((map, out, seed))
}

/// Overlays the flags that were given onto the file values and parses the
/// result, rejecting unknown keys.
pub fn merge<A: Serialize + DeserializeOwned + Default>(flags: &A, file: Map<String, Value>) -> Result<A> {
    let Value::Object(known) = serde_json::to_value(A::default())? else {
        bail!("flags did not serialize to an object");
    };
    let mut unknown: Vec<&String> = file.keys().filter(|k| !known.contains_key(*k)).collect();
    if !unknown.is_empty() {
        unknown.sort();
        let allowed: Vec<&String> = known.keys().collect();
        bail!("unknown config keys {unknown:?}; allowed keys are {allowed:?} plus `out` and `seed`");
    }
    let Value::Object(given) = serde_json::to_value(flags)? else {
        bail!("flags did not serialize to an object");
    };
    let mut merged = file;
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).context("invalid configuration")
}

pub fn parse_json(s: &str) -> Result<Value, String> {
    serde_json::from_str(s).map_err(|e| format!("not valid JSON: {e}"))
}
