//! JSON loop description shared by every CLI command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomposition::LogBase;
use crate::error::{Error, Result};
use crate::lti::{LoopModel, TransferFunction};
use crate::spectral::NoiseSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfigFile {
    pub plant: TransferFunction,
    pub controller: TransferFunction,
    #[serde(default = "TransferFunction::unity")]
    pub feedback_filter: TransferFunction,
    pub channel_noise: NoiseSpec,
    pub output_disturbance: NoiseSpec,
    /// Past plant outputs, most recent first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_state: Vec<f64>,
    /// Extra controllers for the independence check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alt_controllers: Vec<TransferFunction>,
    #[serde(default)]
    pub options: ConfigOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_base: Option<LogBase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
}

impl LoopConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: LoopConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path,
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.to_model().map_err(|e| Error::Config {
            path: ".".into(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_model(&self) -> Result<LoopModel> {
        LoopModel::new(
            self.plant.clone(),
            self.controller.clone(),
            self.feedback_filter.clone(),
            self.channel_noise.clone(),
            self.output_disturbance.clone(),
        )?
        .with_initial_state(self.initial_state.clone())
    }

    pub fn from_model(model: &LoopModel, options: ConfigOptions) -> Self {
        LoopConfigFile {
            plant: model.plant().clone(),
            controller: model.controller().clone(),
            feedback_filter: model.feedback_filter().clone(),
            channel_noise: model.channel_noise().clone(),
            output_disturbance: model.output_disturbance().clone(),
            initial_state: model.initial_state().to_vec(),
            alt_controllers: Vec::new(),
            options,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
