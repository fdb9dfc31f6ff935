use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{G3adConfig, G3adModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "g3ad-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Serialized model: configuration, graph dimensions and named weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: G3adConfig,
    pub n: usize,
    pub d: usize,
    pub params: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &G3adModel) -> Self {
        let params = model
            .params()
            .iter()
            .map(|(name, v)| TensorRecord {
                name: name.to_string(),
                rows: v.nrows(),
                cols: v.ncols(),
                data: v.iter().copied().collect(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            n: model.n(),
            d: model.d(),
            params,
        }
    }

    /// Rebuilds the model, matching every tensor by name and shape.
    pub fn into_model(self) -> Result<G3adModel> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Contract(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut model = G3adModel::new(&self.config, self.n, self.d, 0)?;
        if self.params.len() != model.params().len() {
            return Err(Error::Contract(format!(
                "checkpoint has {} tensors, model expects {}",
                self.params.len(),
                model.params().len()
            )));
        }
        for rec in self.params {
            let id = model
                .params()
                .id_of(&rec.name)
                .ok_or_else(|| Error::Contract(format!("unknown tensor `{}`", rec.name)))?;
            let expected = model.params().get(id).dim();
            if expected != (rec.rows, rec.cols) {
                return Err(Error::Shape {
                    op: "checkpoint",
                    lhs: expected,
                    rhs: (rec.rows, rec.cols),
                });
            }
            let value = Array2::from_shape_vec((rec.rows, rec.cols), rec.data)
                .map_err(|e| Error::Contract(format!("tensor `{}`: {e}", rec.name)))?;
            *model.params_mut().get_mut(id) = value;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

impl G3adModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Checkpoint::from_model(self).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::load(path)?.into_model()
    }
}
