//! Configuration layering: command-line flags, then the `--config` file,
//! then `RINGBREAK_SEED`, then built-in defaults.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SEED_ENV: &str = "RINGBREAK_SEED";

/// Reads a config file. A report is accepted too: its embedded `config`
/// object is used.
fn read_file(path: &Path, command: &str) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("config {} is not valid JSON", path.display()))?;
    let value = match value {
        Value::Object(mut obj) if obj.contains_key("schema_version") => obj
            .remove("config")
            .ok_or_else(|| anyhow!("report {} has no embedded config", path.display()))?,
        other => other,
    };
    let Value::Object(obj) = value else {
        bail!("config {} must be a JSON object", path.display());
    };
    if let Some(c) = obj.get("command") {
        if c.as_str() != Some(command) {
            bail!(
                "config {} is for command {c}, not {command:?}",
                path.display()
            );
        }
    }
    Ok(obj)
}

fn parse_seed(v: &Value) -> Result<u64> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| anyhow!("seed must be a u64, got {n}")),
        Value::String(s) => s
            .parse()
            .map_err(|_| anyhow!("seed must be a u64, got {s:?}")),
        other => bail!("seed must be a u64, got {other}"),
    }
}

/// Merges `flags` over the file at `config` and resolves the master seed.
pub fn layer<A>(
    flags: &A,
    config: Option<&Path>,
    seed_flag: Option<u64>,
    command: &str,
) -> Result<(A, u64)>
where
    A: Serialize + DeserializeOwned,
{
    let mut merged = match config {
        Some(path) => read_file(path, command)?,
        None => Map::new(),
    };
    merged.remove("command");
    let file_seed = merged.remove("seed").map(|v| parse_seed(&v)).transpose()?;
    let Value::Object(given) = serde_json::to_value(flags)? else {
        unreachable!("argument structs serialize to objects");
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    let args: A = serde_json::from_value(Value::Object(merged)).context("invalid configuration")?;
    let seed = match (seed_flag, file_seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| anyhow!("{SEED_ENV} must be a u64, got {s:?}"))?,
            Err(_) => 0,
        },
    };
    Ok((args, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Default, Debug, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Toy {
        trials: Option<u64>,
        protocol: Option<String>,
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"command":"toy","seed":5,"trials":10,"protocol":"xor"}"#,
        )
        .unwrap();
        let flags = Toy {
            trials: Some(99),
            protocol: None,
        };
        let (args, seed) = layer(&flags, Some(&path), None, "toy").unwrap();
        assert_eq!(args.trials, Some(99));
        assert_eq!(args.protocol.as_deref(), Some("xor"));
        assert_eq!(seed, 5);
        let (_, seed) = layer(&flags, Some(&path), Some(1), "toy").unwrap();
        assert_eq!(seed, 1);
    }

    #[test]
    fn report_configs_and_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        fs::write(
            &path,
            r#"{"schema_version":1,"config":{"command":"toy","seed":3,"trials":4}}"#,
        )
        .unwrap();
        let (args, seed) = layer(&Toy::default(), Some(&path), None, "toy").unwrap();
        assert_eq!((args.trials, seed), (Some(4), 3));
        assert!(layer(&Toy::default(), Some(&path), None, "other").is_err());
        fs::write(&path, r#"{"bogus":1}"#).unwrap();
        assert!(layer(&Toy::default(), Some(&path), None, "toy").is_err());
    }
}
