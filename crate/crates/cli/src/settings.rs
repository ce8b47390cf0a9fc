//! Layered `key = value` settings: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use expulsive::ProblemSpec;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Self {
        Self {
            values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Later layers win.
    pub fn overlay(&mut self, layer: BTreeMap<String, String>) {
        self.values.extend(layer);
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Config(format!("missing required setting '{key}'")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        parse(key, self.required(key)?)
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key).map(|raw| parse(key, raw)).transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(other) => Err(CliError::Config(format!("'{key}' = '{other}' is not a boolean"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_ladder(self.required(key)?).map_err(|e| CliError::Config(format!("'{key}': {e}")))
    }

    /// Problem description for the given dimension tag.
    pub fn problem(&self, dimension: &str) -> Result<ProblemSpec, CliError> {
        let mut map = BTreeMap::new();
        map.insert("dimension".to_string(), dimension.to_string());
        let keys: &[&str] = match dimension {
            "1d" => &["gamma", "g", "sigma", "energy", "parity"],
            _ => &["gamma", "g", "sigma", "energy", "vorticity"],
        };
        for key in keys {
            if let Some(v) = self.raw(key) {
                map.insert(key.to_string(), v.to_string());
            }
        }
        Ok(ProblemSpec::from_key_values(&map)?)
    }
}

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse '{key}' = '{raw}'")))
}

/// Reads a flat `key = value` file. A JSON run manifest is also accepted,
/// in which case its resolved `config` block is used.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        return manifest_config(&text, path);
    }
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{}:{}: expected 'key = value'", path.display(), lineno + 1))
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn manifest_config(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config = value
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| CliError::Config(format!("{}: no 'config' object", path.display())))?;
    config
        .iter()
        .map(|(k, v)| match v {
            serde_json::Value::String(s) => Ok((k.clone(), s.clone())),
            other => Ok((k.clone(), other.to_string())),
        })
        .collect()
}

/// Parses `a:b:log:n`, `a:b:lin:n` or a comma-separated list.
///
/// Log ladders need `a` and `b` of the same sign and space `|value|`
/// geometrically.
pub fn parse_ladder(raw: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
    if parts.len() == 1 {
        return raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number '{s}'")))
            .collect();
    }
    if parts.len() != 4 {
        return Err(format!("expected a:b:log:n or a:b:lin:n, got '{raw}'"));
    }
    let a: f64 = parts[0].parse().map_err(|_| format!("bad number '{}'", parts[0]))?;
    let b: f64 = parts[1].parse().map_err(|_| format!("bad number '{}'", parts[1]))?;
    let n: usize = parts[3].parse().map_err(|_| format!("bad count '{}'", parts[3]))?;
    if n < 2 {
        return Err("a ladder needs at least 2 points".into());
    }
    let t = |k: usize| k as f64 / (n - 1) as f64;
    match parts[2] {
        "lin" => Ok((0..n).map(|k| a + (b - a) * t(k)).collect()),
        "log" => {
            if !(a * b > 0.0) {
                return Err("log ladder ends must be non-zero with equal signs".into());
            }
            let (la, lb) = (a.abs().ln(), b.abs().ln());
            Ok((0..n).map(|k| a.signum() * (la + (lb - la) * t(k)).exp()).collect())
        }
        other => Err(format!("unknown spacing '{other}'")),
    }
}
