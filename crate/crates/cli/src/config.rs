use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hsi_mvt::model::ModelConfig;
use hsi_mvt::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Run configuration. Every field has a default, so `{}` is a valid file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub mpca: MpcaSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub cube_path: PathBuf,
    pub labels_path: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            cube_path: "data/cube.hsz".into(),
            labels_path: "data/labels.hsz".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcaSection {
    pub g: usize,
    pub d: usize,
    pub enabled: bool,
}

impl Default for MpcaSection {
    fn default() -> Self {
        Self {
            g: 10,
            d: 3,
            enabled: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    #[serde(rename = "P")]
    pub patch_size: usize,
    #[serde(rename = "K1")]
    pub k1: usize,
    #[serde(rename = "K2")]
    pub k2: usize,
    #[serde(rename = "K3")]
    pub k3: usize,
    pub heads: usize,
    pub j: usize,
    pub use_sed: bool,
    pub use_global_token: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            patch_size: m.patch_size,
            k1: m.k1,
            k2: m.k2,
            k3: m.k3,
            heads: m.heads,
            j: m.feature_dim,
            use_sed: m.use_sed,
            use_global_token: m.use_global_token,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch: t.batch_size,
            lr: t.learning_rate,
            seed: t.seed,
            train_fraction: t.train_fraction,
            val_fraction: t.val_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl RunConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("{}: cannot read config", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| hsi_mvt::Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Model config for a label raster with `classes` classes.
    pub fn model_config(&self, classes: usize) -> Result<ModelConfig> {
        let m = &self.model;
        let cfg = ModelConfig {
            patch_size: m.patch_size,
            views: self.mpca.g,
            view_components: self.mpca.d,
            k1: m.k1,
            k2: m.k2,
            k3: m.k3,
            heads: m.heads,
            feature_dim: m.j,
            num_classes: classes,
            use_mpca: self.mpca.enabled,
            use_sed: m.use_sed,
            use_global_token: m.use_global_token,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch,
            learning_rate: t.lr,
            seed: t.seed,
            train_fraction: t.train_fraction,
            val_fraction: t.val_fraction,
            ..TrainConfig::default()
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output.dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let m = cfg.model_config(16).unwrap();
        assert_eq!(m, ModelConfig { num_classes: 16, ..ModelConfig::default() });
        let t = cfg.train_config();
        assert_eq!((t.epochs, t.batch_size, t.learning_rate), (300, 64, 1e-4));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"model": {"dropout": 0.1}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn keys_use_short_names() {
        let cfg: RunConfig = serde_json::from_str(r#"{"model": {"P": 7, "K3": 32, "heads": 4, "j": 16}}"#).unwrap();
        assert_eq!((cfg.model.patch_size, cfg.model.k3, cfg.model.heads, cfg.model.j), (7, 32, 4, 16));
    }
}
