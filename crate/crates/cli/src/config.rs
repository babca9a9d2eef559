//! Run configuration: one JSON object per run, with command-line flags
//! layered on top.

use crate::error::{CliError, CliResult};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "lie-anneal-out";

#[derive(Debug)]
pub struct Resolved<P> {
    pub params: P,
    pub seed: u64,
    pub out: PathBuf,
    /// Every value that determines the results, including the seed.
    pub config: Map<String, Value>,
    pub hash: String,
}

pub fn load_file(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("config", format!("cannot read `{}`: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::validation(
            "config",
            format!("`{}` must hold a JSON object", path.display()),
        )),
        Err(e) => Err(CliError::validation("config", format!("`{}`: {e}", path.display()))),
    }
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form of `config`
/// for `command`.
pub fn config_hash(command: &str, config: &Map<String, Value>) -> String {
    let mut m = config.clone();
    m.insert("command".into(), Value::String(command.into()));
    let bytes = serde_json::to_vec(&Value::Object(m)).expect("JSON values always serialize");
    hex::encode(Sha256::digest(bytes))
}

/// Overlays the flags given on the command line (unset ones serialize to
/// `null` and are skipped) onto `base` and splits off the seed and output
/// directory.
pub fn resolve<P: Serialize + DeserializeOwned + Default>(
    command: &str,
    mut base: Map<String, Value>,
    flags: &P,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<Resolved<P>> {
    if let Some(c) = base.remove("command") {
        if c.as_str() != Some(command) {
            return Err(CliError::validation(
                "config",
                format!("file is for command {c}, not `{command}`"),
            ));
        }
    }
    let Value::Object(overlay) = serde_json::to_value(flags).expect("parameters serialize") else {
        unreachable!("parameter structs serialize to objects")
    };
    base.extend(overlay.into_iter().filter(|(_, v)| !v.is_null()));
    base.retain(|_, v| !v.is_null());
    if let Some(s) = seed {
        base.insert("seed".into(), s.into());
    }
    if let Some(o) = out {
        base.insert("out".into(), Value::String(o.display().to_string()));
    }
    let out = match base.remove("out") {
        None => PathBuf::from(DEFAULT_OUT),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(v) => {
            return Err(CliError::validation(
                "config",
                format!("`out` must be a string, got {v}"),
            ))
        }
    };
    let seed = match base.get("seed") {
        None => DEFAULT_SEED,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| CliError::validation("config", format!("`seed` must be a non-negative integer, got {v}")))?,
    };
    base.insert("seed".into(), seed.into());
    let mut rest = base.clone();
    rest.remove("seed");
    let Value::Object(known) = serde_json::to_value(P::default()).expect("parameters serialize") else {
        unreachable!("parameter structs serialize to objects")
    };
    if let Some(k) = rest.keys().find(|k| !known.contains_key(*k)) {
        let mut valid: Vec<&String> = known.keys().collect();
        valid.sort();
        return Err(CliError::validation(
            "config",
            format!(
                "unknown parameter `{k}` for `{command}`; valid: seed, out, {}",
                valid.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    let params: P = serde_json::from_value(Value::Object(rest)).map_err(|e| CliError::validation("config", e))?;
    // Re-serialize so that `2` and `2.0` give the same canonical form.
    let Value::Object(mut config) = serde_json::to_value(&params).expect("parameters serialize") else {
        unreachable!("parameter structs serialize to objects")
    };
    config.retain(|_, v| !v.is_null());
    config.insert("seed".into(), seed.into());
    let hash = config_hash(command, &config);
    Ok(Resolved {
        params,
        seed,
        out,
        config,
        hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    struct P {
        t: Option<f64>,
        model: Option<String>,
    }

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn flags_override_file_values() {
        let base = obj(serde_json::json!({"t": 2.0, "model": "su2", "seed": 9}));
        let r = resolve(
            "gap",
            base,
            &P {
                t: Some(0.5),
                model: None,
            },
            None,
            None,
        )
        .unwrap();
        assert_eq!(
            r.params,
            P {
                t: Some(0.5),
                model: Some("su2".into())
            }
        );
        assert_eq!(r.seed, 9);
        assert_eq!(r.out, PathBuf::from(DEFAULT_OUT));
    }

    #[test]
    fn hash_ignores_output_dir_and_key_order() {
        let a = resolve(
            "gap",
            obj(serde_json::json!({"t": 1.0, "model": "su2"})),
            &P::default(),
            None,
            Some(Path::new("a")),
        )
        .unwrap();
        let b = resolve(
            "gap",
            obj(serde_json::json!({"model": "su2", "t": 1.0})),
            &P::default(),
            None,
            Some(Path::new("b")),
        )
        .unwrap();
        assert_eq!(a.hash, b.hash);
        let c = resolve(
            "gap",
            obj(serde_json::json!({"model": "su2", "t": 1.0})),
            &P::default(),
            Some(2),
            None,
        )
        .unwrap();
        assert_ne!(a.hash, c.hash);
        assert_ne!(config_hash("gap", &a.config), config_hash("kernel", &a.config));
    }

    #[test]
    fn integer_and_float_spellings_hash_alike() {
        let a = resolve("gap", obj(serde_json::json!({"t": 2})), &P::default(), None, None).unwrap();
        let b = resolve(
            "gap",
            Map::new(),
            &P {
                t: Some(2.0),
                model: None,
            },
            None,
            None,
        )
        .unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.config, b.config);
    }

    #[test]
    fn rejects_unknown_keys_and_wrong_command() {
        assert!(resolve("gap", obj(serde_json::json!({"tt": 1.0})), &P::default(), None, None).is_err());
        assert!(resolve(
            "gap",
            obj(serde_json::json!({"command": "kernel"})),
            &P::default(),
            None,
            None
        )
        .is_err());
        assert!(resolve("gap", obj(serde_json::json!({"seed": -1})), &P::default(), None, None).is_err());
    }
}
