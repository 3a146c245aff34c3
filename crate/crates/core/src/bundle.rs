//! Self-contained model bundles: configuration, class names and the trained
//! model tree in one versioned JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::learners::Classifier;
use crate::model::Model;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub class_names: Vec<String>,
    pub model: Model,
}

/// Predicted class with the per-class scores it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub class_id: usize,
    pub scores: Vec<f64>,
}

impl ModelBundle {
    pub fn new(config: PipelineConfig, class_names: Vec<String>, model: Model) -> Result<Self> {
        if class_names.len() != model.n_classes() {
            return Err(Error::Shape {
                expected: model.n_classes(),
                got: class_names.len(),
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            config,
            class_names,
            model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// The version field is checked before the rest of the document is
    /// interpreted, so a bundle from another format version fails with a
    /// version error rather than a schema error.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let bundle: Self = serde_json::from_str(text)?;
        if bundle.class_names.len() != bundle.model.n_classes() {
            return Err(Error::Shape {
                expected: bundle.model.n_classes(),
                got: bundle.class_names.len(),
            });
        }
        bundle.config.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Prediction from an already extracted feature vector.
    pub fn predict_features(&self, x: &[f64]) -> Result<Prediction> {
        let class_id = self.model.predict(x)?;
        Ok(Prediction {
            label: self.class_names[class_id].clone(),
            class_id,
            scores: self.model.predict_scores(x)?,
        })
    }

    /// Preprocess, extract and predict a raw clip.
    pub fn predict(&self, clip: &AudioClip) -> Result<Prediction> {
        let prepared = self.config.preprocess.apply(clip)?;
        let fv = self.config.extractor.extract(&prepared, self.config.features)?;
        self.predict_features(&fv.values)
    }
}
