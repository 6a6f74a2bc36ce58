//! Versioned JSON model documents.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::network::{DenseNetwork, OutputHead};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Divisors applied to raw signal features before they enter a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureScaling {
    pub phase_divisor: f64,
    pub power_divisor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument<T> {
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub output_head: OutputHead,
    /// One row-major `(out, in)` matrix per layer.
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
    pub scaling: Option<FeatureScaling>,
}

impl<T: Scalar> ModelDocument<T> {
    pub fn from_network(net: &DenseNetwork<T>, scaling: Option<FeatureScaling>) -> Self {
        ModelDocument {
            version: MODEL_FORMAT_VERSION,
            layer_dims: net.layer_dims().to_vec(),
            output_head: net.head(),
            weights: net.weights().iter().map(|w| w.iter().copied().collect()).collect(),
            biases: net.biases().iter().map(|b| b.to_vec()).collect(),
            scaling,
        }
    }

    pub fn to_network(&self) -> Result<DenseNetwork<T>> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.version
            )));
        }
        if self.layer_dims.len() < 2 || self.weights.len() + 1 != self.layer_dims.len() {
            return Err(Error::input("layer count does not match layer_dims"));
        }
        let weights = self
            .layer_dims
            .windows(2)
            .zip(&self.weights)
            .map(|(d, w)| {
                Array2::from_shape_vec((d[1], d[0]), w.clone())
                    .map_err(|e| Error::input(format!("weight shape: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = self.biases.iter().cloned().map(Array1::from_vec).collect();
        DenseNetwork::from_parts(self.layer_dims.clone(), self.output_head, weights, biases)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the version before the full schema so old documents get a clear error
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::input(format!("malformed JSON: {e}")))?;
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::input(format!(
                    "unsupported model format version {v} (expected {MODEL_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::input("missing model format version")),
        }
        serde_json::from_value(probe).map_err(|e| Error::input(format!("invalid model document: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e))
    }
}
