//! Experiment configs: defaults, then the TOML file, then `--set` overrides.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

/// Keys that tag an enum variant; objects carrying one replace the default
/// wholesale instead of merging field by field.
const TAG_KEYS: [&str; 2] = ["shape", "kind"];

/// Resolve the config of `experiment` from its defaults, an optional TOML
/// file and `key.path=value` overrides, in increasing precedence.
pub fn resolve(experiment: &str, file: Option<&Path>, overrides: &[String]) -> Result<Value> {
    let mut config = capnorm::verify::default_config(experiment)?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let table: toml::Table =
            toml::from_str(&text).with_context(|| format!("invalid TOML in {}", path.display()))?;
        merge(&mut config, to_json(toml::Value::Table(table))?);
    }
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{item}` is not of the form key=value"))?;
        set_path(&mut config, key.trim(), parse_value(raw.trim())?)?;
    }
    Ok(config)
}

/// TOML to JSON, spelling `inf` as the string `"inf"` since JSON has no
/// infinities.
fn to_json(v: toml::Value) -> Result<Value> {
    Ok(match v {
        toml::Value::Float(x) if x == f64::INFINITY => Value::String("inf".into()),
        toml::Value::Float(x) if !x.is_finite() => bail!("non-finite value {x} in config"),
        toml::Value::Array(items) => {
            Value::Array(items.into_iter().map(to_json).collect::<Result<_>>()?)
        }
        toml::Value::Table(t) => Value::Object(
            t.into_iter()
                .map(|(k, v)| Ok((k, to_json(v)?)))
                .collect::<Result<_>>()?,
        ),
        other => serde_json::to_value(other)?,
    })
}

fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) if !TAG_KEYS.iter().any(|k| s.contains_key(*k)) => {
            for (k, v) in s {
                match d.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (dst, src) => *dst = src,
    }
}

/// A TOML value (`1.5`, `[4, 5]`, `"inf"`, `{ kind = "constant", value = 1 }`),
/// or a bare string when it does not parse as one.
fn parse_value(raw: &str) -> Result<Value> {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => to_json(t.remove("v").expect("key just written")),
        Err(_) => Ok(Value::String(raw.to_string())),
    }
}

fn set_path(config: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut slot = config;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("bad override key `{key}`");
    }
    for part in &parts[..parts.len() - 1] {
        slot = match slot {
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            _ => bail!("override `{key}`: `{part}` is not a table"),
        };
    }
    match slot {
        Value::Object(map) => {
            let last = parts[parts.len() - 1].to_string();
            match map.get_mut(&last) {
                Some(old) => merge(old, value),
                None => {
                    map.insert(last, value);
                }
            }
            Ok(())
        }
        _ => bail!("override `{key}`: parent is not a table"),
    }
}
