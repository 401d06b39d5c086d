//! Run configuration: one TOML file, then `key=value` overrides, then
//! command-line flags, in increasing precedence.
//!
//! ```toml
//! [data]
//! csv = "data/dataset.csv"
//! schema = "data/schema.toml"
//!
//! [synth]
//! preset = "complementary"   # or "regime_shift"; other keys refine it
//! noise_seed = 7
//!
//! [experiment]
//! output_dir = "runs/latest"
//! master_seed = 1
//! ```

use std::path::{Path, PathBuf};

use fraudlab_core::experiment::ExperimentConfig;
use fraudlab_core::synthgen::SynthSpec;
use fraudlab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub csv: PathBuf,
    pub schema: PathBuf,
}

impl Default for DataPaths {
    fn default() -> Self {
        DataPaths {
            csv: "data/dataset.csv".into(),
            schema: "data/schema.toml".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub data: DataPaths,
    pub synth: Option<SynthSpec>,
    pub experiment: Option<ExperimentConfig>,
}

impl CliConfig {
    pub fn synth(&self) -> Result<&SynthSpec> {
        self.synth
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [synth] section".into()))
    }

    pub fn experiment(&self) -> Result<&ExperimentConfig> {
        self.experiment
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [experiment] section (or pass --out)".into()))
    }
}

/// Parses `a.b.c=value`. The value is read as a TOML literal when it parses
/// as one and as a bare string otherwise.
pub fn parse_override(text: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Argument(format!("override {text:?} is not KEY=VALUE")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Argument(format!("override key {key:?} is malformed")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn set_path(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("override path is nonempty");
    let mut cur = table;
    for (depth, key) in parents.iter().enumerate() {
        let entry = cur
            .entry(key.clone())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::Argument(format!("{} is not a table", path[..=depth].join(".")))
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn expand_preset(table: &mut Table) -> Result<()> {
    let Some(Value::Table(synth)) = table.get_mut("synth") else {
        return Ok(());
    };
    let Some(preset) = synth.remove("preset") else {
        return Ok(());
    };
    let spec = match preset.as_str() {
        Some("regime_shift") => SynthSpec::regime_shift(0),
        Some("complementary") => SynthSpec::complementary(0),
        _ => {
            return Err(Error::Config(format!(
                "unknown synth preset {preset}; expected \"regime_shift\" or \"complementary\""
            )))
        }
    };
    let Value::Table(mut expanded) = Value::try_from(&spec)? else {
        unreachable!("a struct serializes to a table")
    };
    merge(&mut expanded, std::mem::take(synth));
    *synth = expanded;
    Ok(())
}

/// Builds the effective configuration. Keys are checked against the full
/// configuration tree, so a misspelled override is an error rather than a
/// silent no-op.
pub fn resolve(mut table: Table, overrides: &[(Vec<String>, Value)]) -> Result<CliConfig> {
    for (path, value) in overrides {
        set_path(&mut table, path, value.clone())?;
    }
    expand_preset(&mut table)?;
    let config = CliConfig::deserialize(Value::Table(table)).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(s) = &config.synth {
        s.validate()?;
    }
    if let Some(e) = &config.experiment {
        e.validate()?;
    }
    Ok(config)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
