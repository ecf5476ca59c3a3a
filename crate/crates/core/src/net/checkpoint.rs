use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetConfig, NoiseModel};
use crate::error::{Error, Result};

const FORMAT: &str = "mixdiff-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// JSON container of a model's parameters plus fingerprints of the
/// schedule and prior it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: NetConfig,
    tensors: Vec<Tensor>,
    pub schedule_fingerprint: String,
    pub prior_fingerprint: String,
}

/// SHA-256 of the JSON encoding of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    hex::encode(Sha256::digest(&bytes))
}

impl Checkpoint {
    pub fn capture(model: &NoiseModel, schedule_fingerprint: String, prior_fingerprint: String) -> Self {
        let tensors = model
            .tensor_names()
            .into_iter()
            .zip(model.tensors())
            .map(|((name, shape), data)| Tensor { name, shape, data: data.to_vec() })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: model.config().clone(),
            tensors,
            schedule_fingerprint,
            prior_fingerprint,
        }
    }

    pub fn restore(&self) -> Result<NoiseModel> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported container {} v{}", self.format, self.version)));
        }
        let mut model = NoiseModel::new(self.config.clone(), 0)?;
        let expected = model.tensor_names();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", expected.len(), self.tensors.len())));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!("tensor {} does not match {name} {shape:?}", t.name)));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {name} holds non-finite values")));
            }
        }
        for (dst, t) in model.tensors_mut().into_iter().zip(&self.tensors) {
            dst.copy_from_slice(&t.data);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
