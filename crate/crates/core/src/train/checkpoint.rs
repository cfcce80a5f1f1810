use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::data::{PipelineConfig, Scaler};
use crate::error::{Error, Result};
use crate::model::{Architecture, Model};
use crate::nn::Parameters;
use crate::tensor::Prng;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Everything needed to evaluate a trained model on new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub architecture: Architecture,
    pub num_features: usize,
    pub window: usize,
    pub target_column: String,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub config: TrainConfig,
    pub scaler: Scaler,
    pub final_epoch: usize,
    pub best_epoch: usize,
    /// Weights after the final epoch.
    pub tensors: Vec<NamedTensor>,
    /// Weights with the lowest validation loss; used for evaluation.
    pub best_tensors: Vec<NamedTensor>,
}

fn export(model: &Model) -> Vec<NamedTensor> {
    model
        .named_tensors()
        .into_iter()
        .map(|(name, t)| NamedTensor {
            name,
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        })
        .collect()
}

impl Checkpoint {
    pub fn new(
        model: &Model,
        best_model: &Model,
        scaler: Scaler,
        pipeline: &PipelineConfig,
        config: TrainConfig,
        final_epoch: usize,
        best_epoch: usize,
    ) -> Result<Self> {
        if model.architecture() != best_model.architecture()
            || model.num_features() != best_model.num_features()
            || model.window() != best_model.window()
        {
            return Err(Error::shape("final and best models differ in structure"));
        }
        if pipeline.window != model.window() {
            return Err(Error::Config(format!(
                "pipeline window {} differs from model window {}",
                pipeline.window,
                model.window()
            )));
        }
        Ok(Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            architecture: model.architecture(),
            num_features: model.num_features(),
            window: model.window(),
            target_column: pipeline.target.clone(),
            test_fraction: pipeline.test_fraction,
            val_fraction: pipeline.val_fraction,
            config,
            scaler,
            final_epoch,
            best_epoch,
            tensors: export(model),
            best_tensors: export(best_model),
        })
    }

    fn restore(&self, tensors: &[NamedTensor]) -> Result<Model> {
        let mut model = Model::build(
            self.architecture,
            self.num_features,
            self.window,
            &mut Prng::new(0),
        )
        .map_err(|e| Error::Schema(format!("checkpoint header: {e}")))?;
        let names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != tensors.len() {
            return Err(Error::Schema(format!(
                "{} checkpoint has {} tensors, expected {}",
                self.architecture,
                tensors.len(),
                names.len()
            )));
        }
        for ((dst, name), src) in model.tensors_mut().into_iter().zip(&names).zip(tensors) {
            if &src.name != name {
                return Err(Error::Schema(format!(
                    "expected tensor {name:?}, found {:?}",
                    src.name
                )));
            }
            if src.shape != dst.shape() || src.data.len() != dst.len() {
                return Err(Error::Schema(format!(
                    "tensor {name} has shape {:?} with {} values, expected {:?}",
                    src.shape,
                    src.data.len(),
                    dst.shape()
                )));
            }
            if src.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!(
                    "tensor {name} holds non-finite values"
                )));
            }
            dst.data_mut().copy_from_slice(&src.data);
        }
        Ok(model)
    }

    /// Data settings the model was trained with.
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            target: self.target_column.clone(),
            window: self.window,
            test_fraction: self.test_fraction,
            val_fraction: self.val_fraction,
        }
    }

    /// Final-epoch weights.
    pub fn final_model(&self) -> Result<Model> {
        self.restore(&self.tensors)
    }

    /// Best-validation weights.
    pub fn best_model(&self) -> Result<Model> {
        self.restore(&self.best_tensors)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("cannot serialize checkpoint: {e}")))
    }

    /// Parses and validates a checkpoint, including every tensor shape.
    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("malformed checkpoint: {e}")))?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint schema version {} is not supported (expected {})",
                ckpt.schema_version, CHECKPOINT_SCHEMA_VERSION
            )));
        }
        if ckpt.scaler.columns.len() != ckpt.num_features {
            return Err(Error::Schema(format!(
                "scaler has {} columns but the model takes {} features",
                ckpt.scaler.columns.len(),
                ckpt.num_features
            )));
        }
        if ckpt.scaler.target.name != ckpt.target_column {
            return Err(Error::Schema(format!(
                "scaler target {:?} differs from target column {:?}",
                ckpt.scaler.target.name, ckpt.target_column
            )));
        }
        ckpt.final_model()?;
        ckpt.best_model()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
