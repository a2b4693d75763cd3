use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subspace_core::scenario::hex_digest;

use crate::failure::{Failure, Outcome};

pub const TOOL: &str = concat!("subspace ", env!("CARGO_PKG_VERSION"));

/// Embedded in every artifact. Contains no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub stage: String,
    /// SHA-256 of the stage options as canonical JSON.
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_hash: Option<String>,
    /// Input name to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new<T: Serialize>(stage: &str, config: &T, seed: Option<u64>) -> Outcome<Self> {
        Ok(Self {
            tool: TOOL.to_string(),
            stage: stage.to_string(),
            config_hash: json_hash(config)?,
            plan_hash: None,
            inputs: BTreeMap::new(),
            seed,
        })
    }

    pub fn input(mut self, name: &str, hash: &str) -> Self {
        self.inputs.insert(name.to_string(), hash.to_string());
        self
    }

    pub fn plan(mut self, hash: Option<&str>) -> Self {
        self.plan_hash = hash.map(str::to_string);
        self
    }
}

pub fn json_hash<T: Serialize>(value: &T) -> Outcome<String> {
    Ok(hex_digest(&serde_json::to_vec(value)?))
}

pub fn file_hash(path: &Path) -> Outcome<String> {
    let bytes = std::fs::read(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex_digest(&bytes))
}

/// Writes bytes and returns their hash. Parent directories are created.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Outcome<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(hex_digest(bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// JSON summary path next to a container: `x.bin` becomes `x.json`.
pub fn summary_path(container: &Path) -> Outcome<PathBuf> {
    let out = container.with_extension("json");
    if out == container {
        return Err(Failure::config(format!(
            "container path {} must not end in .json",
            container.display()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_is_stable() {
        let a = Provenance::new("x", &serde_json::json!({"b": 1, "a": 2}), Some(3)).unwrap();
        let b = Provenance::new("x", &serde_json::json!({"a": 2, "b": 1}), Some(3)).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn summary_next_to_container() {
        assert_eq!(summary_path(Path::new("a/b.bin")).unwrap(), PathBuf::from("a/b.json"));
        assert!(summary_path(Path::new("a/b.json")).is_err());
    }
}
