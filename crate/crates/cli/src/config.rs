//! Run configuration: defaults, then a TOML file, then command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use blox_core::designer::DesignParams;
use blox_core::evalharness::NoiseModel;
use blox_core::{RedesignParams, RenderConfig, SimParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where model replies come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientMode {
    Live,
    Replay(PathBuf),
}

impl FromStr for ClientMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "live" => Ok(ClientMode::Live),
            Some(("replay", dir)) if !dir.is_empty() => Ok(ClientMode::Replay(PathBuf::from(dir))),
            _ => Err(format!("client must be \"live\" or \"replay:<dir>\", got {s:?}")),
        }
    }
}

impl ClientMode {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMode::Live => "live",
            ClientMode::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub max_repair_rounds: u32,
    pub rating_cutoff: u8,
}

impl Default for DesignSection {
    fn default() -> Self {
        let d = DesignParams::default();
        Self { max_repair_rounds: d.max_repair_rounds, rating_cutoff: d.rating_cutoff }
    }
}

/// Every setting, as read from a config file. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog file; the bundled catalog when absent.
    pub catalog: Option<PathBuf>,
    pub prompt: Option<String>,
    pub candidates: usize,
    /// `live` or `replay:<dir>`.
    pub client: String,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub trials: usize,
    pub sim: SimParams,
    pub redesign: RedesignParams,
    pub noise: NoiseModel,
    pub design: DesignSection,
    pub render: RenderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            catalog: None,
            prompt: None,
            candidates: DesignParams::default().candidates,
            client: "live".into(),
            out: None,
            seed: 0,
            trials: 100,
            sim: SimParams::default(),
            redesign: RedesignParams::default(),
            noise: NoiseModel::default(),
            design: DesignSection::default(),
            render: RenderConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` on top, and validates.
    ///
    /// Overrides are dotted keys such as `sim.com_margin_mm` with TOML
    /// literal values; bare words are taken as strings.
    pub fn resolve(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, raw) in overrides {
            set_dotted(&mut table, key, literal(raw))?;
        }
        let cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |what: &str, e: String| CliError::Usage(format!("{what}: {e}"));
        self.sim.validate().map_err(|e| usage("sim", e))?;
        self.redesign.validate().map_err(|e| usage("redesign", e))?;
        self.noise.validate().map_err(|e| usage("noise", e))?;
        self.render.validate().map_err(|e| usage("render", e))?;
        if self.candidates == 0 {
            return Err(CliError::Usage("candidates must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Usage("trials must be at least 1".into()));
        }
        if let ClientMode::Replay(dir) = self.client_mode()? {
            if !dir.is_dir() {
                return Err(CliError::Usage(format!("replay directory {} does not exist", dir.display())));
            }
        }
        Ok(())
    }

    pub fn client_mode(&self) -> Result<ClientMode, CliError> {
        self.client.parse().map_err(CliError::Usage)
    }

    pub fn design_params(&self) -> DesignParams {
        DesignParams {
            candidates: self.candidates,
            max_repair_rounds: self.design.max_repair_rounds,
            rating_cutoff: self.design.rating_cutoff,
            sim: self.sim,
            render: self.render,
        }
    }

    /// The noise model with the run seed applied.
    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel { seed: self.seed, ..self.noise }
    }
}

fn literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Usage(format!("bad key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Usage(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value` for `--set`.
pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}
