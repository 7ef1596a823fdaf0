//! JSON checkpoints of a trained Q-network.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::network::{LayerParams, Mlp, ShapeError};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("checkpoint {path} does not match the network: {source}")]
    Shape { path: String, source: ShapeError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<LayerParams>,
    /// Optimizer steps taken by this network.
    pub steps: u64,
    pub pdc: usize,
    pub seed: u64,
    /// Resolved experiment config the network was trained under.
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn from_network(
        net: &Mlp,
        steps: u64,
        pdc: usize,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        Self {
            layer_sizes: net.sizes().to_vec(),
            layers: net.layers(),
            steps,
            pdc,
            seed,
            config,
        }
    }

    pub fn network(&self) -> Result<Mlp, ShapeError> {
        Mlp::from_layers(&self.layer_sizes, &self.layers)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(path, text).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let shown = || path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: shown(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CheckpointError::Parse {
            path: shown(),
            source,
        })
    }

    /// Loads the network and checks it has the expected layer sizes.
    pub fn load_network(path: &Path, expected: &[usize]) -> Result<Mlp, CheckpointError> {
        let ckpt = Self::load(path)?;
        let shape = |source| CheckpointError::Shape {
            path: path.display().to_string(),
            source,
        };
        if ckpt.layer_sizes != expected {
            return Err(shape(ShapeError::Layers(ckpt.layer_sizes)));
        }
        ckpt.network().map_err(shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rlagent::network::LAYER_SIZES;
    use crate::rng::{stream, Stream};

    #[test]
    fn bit_exact_reload() {
        let mut rng = stream(11, Stream::Agent(0));
        let net = Mlp::glorot(&LAYER_SIZES, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdc_1.json");
        Checkpoint::from_network(&net, 7, 0, 11, serde_json::json!({"k": 1}))
            .save(&path)
            .unwrap();
        let back = Checkpoint::load_network(&path, &LAYER_SIZES).unwrap();
        assert!(back
            .params()
            .iter()
            .zip(net.params())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(matches!(
            Checkpoint::load_network(&path, &[25, 16, 3]),
            Err(CheckpointError::Shape { .. })
        ));
        assert!(matches!(
            Checkpoint::load(&dir.path().join("missing.json")),
            Err(CheckpointError::Io { .. })
        ));
    }
}
