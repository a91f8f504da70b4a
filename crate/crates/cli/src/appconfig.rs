//! Layered run configuration: built-in desk-scale defaults, then an
//! optional TOML file, then repeatable `--set key=value` overrides.
//! Every run that writes outputs echoes the effective result into its
//! output directory so the run is reproducible from the artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mepsnet_model::MepsNetConfig;
use serde::{Deserialize, Serialize};
use toml::Value;
use train_optim::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub model: MepsNetConfig,
    pub train: TrainConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            model: MepsNetConfig::desk_default(),
            train: TrainConfig::desk_default(),
        }
    }
}

impl AppConfig {
    /// Builds the effective config: defaults, overlaid by `path` if given,
    /// overlaid by each `--set` entry in order. Unknown keys at any depth
    /// are rejected rather than silently ignored.
    pub fn resolve(path: Option<&Path>, sets: &[String]) -> Result<AppConfig> {
        let mut value = Value::try_from(AppConfig::default()).expect("defaults serialize");
        let reference = value.clone();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let file: Value = text
                .parse()
                .with_context(|| format!("parsing config {}", p.display()))?;
            merge(&mut value, file);
        }
        for entry in sets {
            apply_set(&mut value, entry)?;
        }
        check_known(&value, &reference, "")?;
        let cfg: AppConfig = value.try_into().context("interpreting effective config")?;
        cfg.model.validate()?;
        cfg.train.validate(cfg.model.kernel_size)?;
        Ok(cfg)
    }

    /// Writes the effective config as `config.toml` inside `dir`.
    pub fn echo(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.toml");
        let text = toml::to_string_pretty(self).expect("config serializes");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Overlays `over` onto `base`. Tables merge per key; anything else replaces.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `key=value` override at a dotted path. The value is parsed
/// as a TOML literal (`80`, `1e-4`, `[200, 350]`); if that fails it is
/// kept as a string.
fn apply_set(root: &mut Value, entry: &str) -> Result<()> {
    let Some((key, raw)) = entry.split_once('=') else {
        bail!("--set {entry}: expected key=value");
    };
    let parsed = toml::from_str::<Value>(&format!("v = {raw}"))
        .ok()
        .and_then(|v| v.get("v").cloned())
        .unwrap_or_else(|| Value::String(raw.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .with_context(|| format!("--set {entry}: '{part}' is not inside a table"))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Default::default()));
    }
    let leaf = parts.last().expect("split yields at least one part");
    node.as_table_mut()
        .with_context(|| format!("--set {entry}: parent of '{leaf}' is not a table"))?
        .insert(leaf.to_string(), parsed);
    Ok(())
}

/// Every key present in `value` must also exist in `reference` (the fully
/// populated defaults), so typos fail loudly instead of being dropped.
fn check_known(value: &Value, reference: &Value, prefix: &str) -> Result<()> {
    let (Value::Table(v), Value::Table(r)) = (value, reference) else {
        return Ok(());
    };
    for (k, inner) in v {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match r.get(k) {
            Some(ref_inner) => check_known(inner, ref_inner, &path)?,
            None => bail!("unknown config key '{path}'"),
        }
    }
    Ok(())
}

/// Named architecture presets for the inspect subcommands.
pub fn preset(name: &str) -> Result<MepsNetConfig> {
    match name {
        "desk-tiny" => Ok(MepsNetConfig::desk_tiny()),
        "desk" => Ok(MepsNetConfig::desk_default()),
        "paper" => Ok(MepsNetConfig::paper_default()),
        other => bail!("unknown preset '{other}' (desk-tiny|desk|paper)"),
    }
}
