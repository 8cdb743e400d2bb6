//! Flag/config-file merging. Flags override keys from `--config`; the seed
//! falls back to `INFOTHERM_SEED` and then to a fixed default.

use std::fmt;
use std::fs;
use std::io::Read;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SEED_ENV: &str = "INFOTHERM_SEED";
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Reads a file, or stdin for `-`.
pub fn read_source(path: &str) -> Result<Box<dyn Read>> {
    if path == "-" {
        return Ok(Box::new(std::io::stdin().lock()));
    }
    let f = fs::File::open(path).with_context(|| format!("opening {path}"))?;
    Ok(Box::new(std::io::BufReader::new(f)))
}

/// Parses JSON from a file or stdin, reporting the field path on failure.
pub fn read_json<T: DeserializeOwned>(path: &str) -> Result<T> {
    let mut text = String::new();
    read_source(path)?.read_to_string(&mut text)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        anyhow!("{path}: at `{at}`: {}", e.into_inner())
    })
}

/// Loads the `--config` object. Top-level keys apply to every command; a
/// nested object under the command's name overrides them.
pub fn load_config(path: Option<&str>, command: &str) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let root: Value = read_json(path)?;
    let Value::Object(mut obj) = root else {
        bail!("{path}: config must be a JSON object");
    };
    let section = obj.remove(command);
    let mut merged: Map<String, Value> = obj
        .into_iter()
        .filter(|(_, v)| !v.is_object())
        .collect();
    if let Some(Value::Object(sec)) = section {
        merged.extend(sec);
    }
    Ok(merged)
}

/// Overlays explicitly given flags on the config object and deserializes
/// the result. Unset options and `false` switches do not override.
pub fn merge<A: Serialize + DeserializeOwned>(
    flags: &A,
    mut config: Map<String, Value>,
    command: &str,
) -> Result<A> {
    let Value::Object(given) = serde_json::to_value(flags)? else {
        bail!("internal: flags did not serialize to an object");
    };
    for (k, v) in given {
        if v.is_null() || v == Value::Bool(false) {
            continue;
        }
        config.insert(k, v);
    }
    serde_path_to_error::deserialize(Value::Object(config)).map_err(|e| {
        let at = e.path().to_string();
        anyhow!("config for `{command}`: at `{at}`: {}", e.into_inner())
    })
}

pub fn required<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing parameter `{key}` (flag --{} or config key)", key.replace('_', "-")))
}

pub fn seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Number list given as `a,b,c`, as `start:stop:n` (inclusive linear
/// spacing) or, in config files, as a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 {
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2].trim().parse().map_err(|e| format!("`{}`: {e}", parts[2]))?;
            if n < 2 {
                return Err("range needs at least 2 points".into());
            }
            return Ok(NumList(
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            ));
        }
        s.split(',').map(num).collect::<std::result::Result<_, _>>().map(NumList)
    }
}

impl<'de> Deserialize<'de> for NumList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Text(String),
            List(Vec<f64>),
        }
        match Either::deserialize(d)? {
            Either::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Either::List(v) => Ok(NumList(v)),
        }
    }
}

impl fmt::Display for NumList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Args {
        m: Option<f64>,
        sigma2: Option<f64>,
        flag: bool,
    }

    #[test]
    fn flags_win_over_config() {
        let cfg: Map<String, Value> =
            serde_json::from_str(r#"{"m": 2.0, "sigma2": 5.0, "flag": true}"#).unwrap();
        let flags = Args { m: Some(4.0), sigma2: None, flag: false };
        let out = merge(&flags, cfg, "t").unwrap();
        assert_eq!(out, Args { m: Some(4.0), sigma2: Some(5.0), flag: true });
    }

    #[test]
    fn bad_config_names_the_field() {
        let cfg: Map<String, Value> = serde_json::from_str(r#"{"m": "four"}"#).unwrap();
        let flags = Args { m: None, sigma2: None, flag: false };
        let err = merge(&flags, cfg, "state").unwrap_err().to_string();
        assert!(err.contains("`m`"), "{err}");
    }

    #[test]
    fn num_lists() {
        assert_eq!("1,2.5".parse::<NumList>().unwrap().0, vec![1.0, 2.5]);
        assert_eq!("0:1:3".parse::<NumList>().unwrap().0, vec![0.0, 0.5, 1.0]);
        assert!("0:1:1".parse::<NumList>().is_err());
        let v: NumList = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(v.0, vec![1.0, 2.0]);
    }
}
