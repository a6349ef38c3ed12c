use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{KappaSchedule, ModelParams};
use crate::scenarios::{Forcing, InitialData, Resolution};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "FENE_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Equilibrium,
    Relax,
    Shear,
    Corotational,
    Nonunique,
    Sweep,
    Check,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Equilibrium => "equilibrium",
            Scenario::Relax => "relax",
            Scenario::Shear => "shear",
            Scenario::Corotational => "corotational",
            Scenario::Nonunique => "nonunique",
            Scenario::Sweep => "sweep",
            Scenario::Check => "check",
        }
    }

    fn default_kappa(&self) -> KappaSchedule {
        match self {
            Scenario::Shear => KappaSchedule::Shear { rate: 1.0 },
            Scenario::Corotational => KappaSchedule::Corotational { rate: 1.0 },
            _ => KappaSchedule::Zero,
        }
    }

    fn default_initial(&self) -> InitialData {
        match self {
            Scenario::Equilibrium => InitialData::Equilibrium,
            Scenario::Nonunique => InitialData::Zero,
            _ => InitialData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    #[serde(default = "two")]
    n: usize,
    b: f64,
    #[serde(default = "one")]
    horizon: f64,
    kappa: Option<KappaSchedule>,
}

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonuniqueSection {
    pub gamma: Option<f64>,
    #[serde(default)]
    pub forcing: Forcing,
    #[serde(default = "default_log_modes")]
    pub log_modes: usize,
}

fn default_log_modes() -> usize {
    2
}

impl Default for NonuniqueSection {
    fn default() -> Self {
        NonuniqueSection { gamma: None, forcing: Forcing::default(), log_modes: default_log_modes() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub b_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    directory: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Scenario,
    model: ModelSection,
    #[serde(default)]
    resolution: Resolution,
    initial: Option<InitialData>,
    #[serde(default)]
    nonunique: NonuniqueSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    output: OutputSection,
}

/// A validated run description. Sweep entries may carry `b <= 2`; they are
/// reported as rejected rather than failing the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub resolution: Resolution,
    pub initial: InitialData,
    pub nonunique: NonuniqueSection,
    pub sweep: SweepSection,
    pub output: PathBuf,
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parses the right-hand side of an override as a TOML value, falling back to a string.
fn parse_value(text: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {text}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.into()),
    }
}

/// Applies `a.b.c=value` to a parsed table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for k in &path[..path.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key '{key}' descends into a non-table")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_error)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: RawConfig = toml::Value::Table(table).try_into().map_err(config_error)?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        raw.resolution.validate()?;
        let kappa = raw.model.kappa.unwrap_or_else(|| raw.scenario.default_kappa());
        // sweep entries are checked one by one; the base model only has to be valid
        let b = if raw.scenario == Scenario::Sweep && !(raw.model.b > 2.0) { 4.0 } else { raw.model.b };
        let params = ModelParams::new(raw.model.n, b, kappa, raw.model.horizon)?;
        if params.n() != 2 {
            return Err(Error::Config("only n = 2 is supported by the solver".into()));
        }
        if raw.scenario == Scenario::Sweep && raw.sweep.b_values.is_empty() {
            return Err(Error::Config("sweep needs [sweep] b_values".into()));
        }
        let output = raw.output.directory.unwrap_or_else(|| PathBuf::from("output").join(raw.scenario.name()));
        Ok(RunConfig {
            scenario: raw.scenario,
            initial: raw.initial.unwrap_or_else(|| raw.scenario.default_initial()),
            params,
            resolution: raw.resolution,
            nonunique: raw.nonunique,
            sweep: raw.sweep,
            output,
        })
    }

    /// Output directory after applying the root override to relative paths.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output.is_relative() => PathBuf::from(root).join(&self.output),
            _ => self.output.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "scenario = \"shear\"\n[model]\nb = 4.0\n";

    #[test]
    fn defaults_follow_the_scenario() {
        let c = RunConfig::from_toml(BASE, &[]).unwrap();
        assert_eq!(c.params.kappa(), &KappaSchedule::Shear { rate: 1.0 });
        assert_eq!(c.resolution, Resolution::default());
        assert_eq!(c.output, PathBuf::from("output/shear"));
    }

    #[test]
    fn overrides_and_errors() {
        let c = RunConfig::from_toml(BASE, &["model.b=3.5".into(), "resolution.k_r=4".into(), "model.kappa.rate=2".into()]);
        assert!(c.is_err(), "kappa without kind must not parse");
        let c = RunConfig::from_toml(BASE, &["model.b=3.5".into(), "resolution.k_r=4".into()]).unwrap();
        assert_eq!((c.params.b(), c.resolution.k_r), (3.5, 4));
        assert!(RunConfig::from_toml(BASE, &["model.b=2.0".into()]).unwrap_err().is_config());
        assert!(RunConfig::from_toml(BASE, &["resolution.k_r=0".into()]).unwrap_err().is_config());
        assert!(RunConfig::from_toml(BASE, &["nonsense".into()]).is_err());
        assert!(RunConfig::from_toml("scenario = \"nope\"\n[model]\nb = 4.0\n", &[]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_toml(BASE, &[]).unwrap();
        let b = RunConfig::from_toml(BASE, &["model.horizon=0.5".into()]).unwrap();
        assert_eq!(a.hash(), RunConfig::from_toml(BASE, &[]).unwrap().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
