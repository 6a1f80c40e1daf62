//! Trained-model container.
//!
//! A versioned JSON document holding the schedule, the training moments,
//! the layer sizes and every parameter. Floats are written in shortest
//! round-trip form and parsed with correct rounding, so save followed by
//! load reproduces the parameters bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::bridge::MomentStats;
use crate::schedule::{BridgeSchedule, ScheduleForm};
use crate::{Error, FormatError, Result};

use super::{Dense, PreconditionedNet, TinyNet};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_NAME: &str = "ddbridge-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    format: String,
    version: u32,
    pub schedule_form: ScheduleForm,
    pub gamma_max: f64,
    pub moments: MomentStats,
    pub layer_sizes: Vec<usize>,
    layers: Vec<LayerRecord>,
    /// Free-form annotations such as the translation direction.
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn from_model(model: &PreconditionedNet, tags: BTreeMap<String, String>) -> Self {
        let layers = model
            .net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect();
        Self {
            format: MODEL_FORMAT_NAME.to_string(),
            version: MODEL_FORMAT_VERSION,
            schedule_form: model.schedule.form(),
            gamma_max: model.schedule.gamma_max(),
            moments: model.moments,
            layer_sizes: model.net.layer_sizes(),
            layers,
            tags,
        }
    }

    pub fn into_model(self) -> Result<PreconditionedNet> {
        if self.layer_sizes.len() != self.layers.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} layer sizes for {} layers",
                self.layer_sizes.len(),
                self.layers.len()
            )));
        }
        let mut dense = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.into_iter().enumerate() {
            let (ins, outs) = (self.layer_sizes[i], self.layer_sizes[i + 1]);
            let weights = Array2::from_shape_vec((outs, ins), rec.weights)
                .map_err(|e| Error::InvalidConfig(format!("layer {i} weights: {e}")))?;
            if rec.bias.len() != outs {
                return Err(Error::InvalidConfig(format!("layer {i}: bias length {}", rec.bias.len())));
            }
            dense.push(Dense {
                weights,
                bias: Array1::from(rec.bias),
            });
        }
        let net = TinyNet::from_layers(dense)?;
        let schedule = BridgeSchedule::new(self.gamma_max, self.schedule_form)?;
        PreconditionedNet::new(net, schedule, self.moments)
    }
}

pub fn save_model(model: &PreconditionedNet, tags: BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = ModelFile::from_model(model, tags);
    let text = serde_json::to_string(&doc)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a model and its tags.
pub fn load_model(path: impl AsRef<Path>) -> Result<(PreconditionedNet, BTreeMap<String, String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelFile = serde_json::from_str(&text)?;
    if doc.format != MODEL_FORMAT_NAME {
        return Err(Error::Format {
            path: path.to_path_buf(),
            source: FormatError::BadMagic,
        });
    }
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::Format {
            path: path.to_path_buf(),
            source: FormatError::UnsupportedVersion(doc.version),
        });
    }
    let tags = doc.tags.clone();
    Ok((doc.into_model()?, tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Denoiser;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn save_load_predict_is_bit_exact() {
        let mut rng = seeded(42);
        let net = TinyNet::for_chunk(1, 16, &mut rng).unwrap();
        let model = PreconditionedNet::new(
            net,
            BridgeSchedule::linear(0.2).unwrap(),
            MomentStats::new(0.051234567, 0.0399, 0.0301).unwrap(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut tags = BTreeMap::new();
        tags.insert("direction".to_string(), "t1-to-fa".to_string());
        save_model(&model, tags.clone(), &path).unwrap();
        let (loaded, loaded_tags) = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded_tags, tags);
        for _ in 0..20 {
            let t = rng.random_range(0.001..1.0);
            let xt: Vec<f64> = (0..4).map(|_| rng.random_range(-0.2..1.2)).collect();
            let x1: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = model.predict(t, &xt, &x1).unwrap();
            let b = loaded.predict(t, &xt, &x1).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rejects_foreign_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let net = TinyNet::for_chunk(1, 2, &mut seeded(0)).unwrap();
        let model = PreconditionedNet::new(net, BridgeSchedule::default(), MomentStats::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        let mut doc = ModelFile::from_model(&model, BTreeMap::new());
        doc.version = 99;
        fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::Format {
                source: FormatError::UnsupportedVersion(99),
                ..
            })
        ));
        doc.version = MODEL_FORMAT_VERSION;
        doc.format = "something-else".into();
        fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(load_model(&path).is_err());
        assert!(matches!(load_model(dir.path().join("missing.json")), Err(Error::Io { .. })));
    }
}
