use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::DatasetFormat;
use crate::encoder::{ActivationKind, EncoderDescriptor};
use crate::error::{Error, Result};
use crate::evaluation::{FinetuneConfig, LinearEvalConfig};
use crate::federation::{FederationConfig, Method};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "FEDX_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    /// Verification mode: every tensor in `f64`.
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSettings {
    pub beta: f64,
    pub seed: u64,
    /// Reuse a saved partition instead of drawing one.
    pub file: Option<PathBuf>,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        PartitionSettings {
            beta: 0.5,
            seed: 0,
            file: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSettings {
    pub path: Option<PathBuf>,
    /// Inferred from the extension when absent.
    pub format: Option<DatasetFormat>,
    /// `[channels, height, width]`, needed for CSV images.
    pub shape: Option<[usize; 3]>,
    /// Held-out set for evaluation commands.
    pub test_path: Option<PathBuf>,
}

impl DatasetSettings {
    pub fn format_of(&self, path: &Path) -> DatasetFormat {
        self.format
            .unwrap_or_else(|| DatasetFormat::from_path(path))
    }

    pub fn shape_tuple(&self) -> Option<(usize, usize, usize)> {
        self.shape.map(|[c, h, w]| (c, h, w))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSettings {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub head_hidden: usize,
    pub activation: ActivationKind,
    pub bias: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        let d = EncoderDescriptor::mlp(1);
        EncoderSettings {
            hidden: d.hidden,
            embed_dim: d.embed_dim,
            head_hidden: d.head_hidden,
            activation: d.activation,
            bias: d.bias,
        }
    }
}

impl EncoderSettings {
    pub fn descriptor(&self, input_dim: usize, method: Method) -> EncoderDescriptor {
        EncoderDescriptor {
            input_dim,
            hidden: self.hidden.clone(),
            embed_dim: self.embed_dim,
            head_hidden: self.head_hidden,
            activation: self.activation,
            bias: self.bias,
            predictor: method == Method::Byol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub linear: LinearEvalConfig,
    pub finetune: FinetuneConfig,
    pub label_ratios: Vec<f64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            linear: LinearEvalConfig::default(),
            finetune: FinetuneConfig::default(),
            label_ratios: vec![0.01, 0.05, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Global checkpoint period in rounds; the final round is always saved.
    pub checkpoint_every: usize,
    pub precision: Precision,
    /// Also save every client's final local model.
    pub save_clients: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            dir: PathBuf::from("runs/fedx"),
            checkpoint_every: 10,
            precision: Precision::F32,
            save_clients: true,
        }
    }
}

/// Everything a training run depends on, besides the data itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub federation: FederationConfig,
    pub partition: PartitionSettings,
    pub encoder: EncoderSettings,
    pub dataset: DatasetSettings,
    pub eval: EvalSettings,
    pub output: OutputSettings,
}

impl RunConfig {
    /// Layers `file`, then `FEDX_OUTPUT_DIR`, then `overrides` (`dotted.key=value`).
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            set_dotted(&mut table, "output.dir", Value::String(dir))?;
        }
        for (key, raw) in overrides {
            set_dotted(&mut table, key, parse_scalar(raw))?;
        }
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.federation.validate()?;
        if !(self.partition.beta > 0.0 && self.partition.beta.is_finite()) {
            return Err(Error::Config(format!(
                "partition.beta must be positive, got {}",
                self.partition.beta
            )));
        }
        if self.encoder.embed_dim == 0
            || self.encoder.head_hidden == 0
            || self.encoder.hidden.contains(&0)
        {
            return Err(Error::Config("encoder widths must be positive".into()));
        }
        if self.output.checkpoint_every == 0 {
            return Err(Error::Config(
                "output.checkpoint_every must be at least 1".into(),
            ));
        }
        if let Some(r) = self
            .eval
            .label_ratios
            .iter()
            .find(|r| !(**r > 0.0 && **r <= 1.0))
        {
            return Err(Error::Config(format!("label ratio {r} outside (0, 1]")));
        }
        if self.eval.linear.batch_size == 0 || self.eval.finetune.batch_size == 0 {
            return Err(Error::Config(
                "evaluation batch sizes must be positive".into(),
            ));
        }
        match self.dataset.shape_tuple() {
            Some(shape) => self.federation.augment.validate(shape),
            None => Ok(()),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Digest of the resolved configuration.
    pub fn hash(&self) -> Result<String> {
        Ok(crate::encoder::hex_digest(self.to_toml()?.as_bytes()))
    }
}

/// Interprets a flag value as a TOML scalar or array, else as a bare string.
fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::Config(format!("bad key {key:?}")))?;
    let mut cursor = table;
    for p in parts {
        cursor = cursor
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_apply_to_nested_keys() {
        let cfg = RunConfig::resolve(
            None,
            &[
                set("federation.rounds", "2"),
                set("federation.loss.tau", "0.5"),
                set("federation.method", "byol"),
                set("encoder.hidden", "[32, 16]"),
            ],
        )
        .unwrap();
        assert_eq!(cfg.federation.rounds, 2);
        assert_eq!(cfg.federation.loss.tau, 0.5);
        assert_eq!(cfg.federation.method, Method::Byol);
        assert_eq!(cfg.encoder.hidden, vec![32, 16]);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_rejected() {
        assert!(RunConfig::resolve(None, &[set("federation.roundz", "2")]).is_err());
        assert!(RunConfig::resolve(None, &[set("federation.batch_size", "1")]).is_err());
        assert!(RunConfig::resolve(None, &[set("partition.beta", "0")]).is_err());
    }
}
