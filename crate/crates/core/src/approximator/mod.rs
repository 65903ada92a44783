//! Minimal differentiable function approximators: ReLU multilayer perceptrons
//! with exact reverse-mode gradients, an input-gradient penalty, Adam, and a
//! versioned checkpoint format.

mod adam;
mod matrix;
mod mlp;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use matrix::Matrix;
pub use mlp::{argmax, log_softmax, logprob_grad, softmax_logits_to_logprob, Mlp, Tape};

use crate::error::{Error, Result};

pub const PARAM_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Writes a single network as JSON. Floats round-trip exactly.
pub fn save_params(net: &Mlp, path: &Path) -> Result<()> {
    let file = ParamFile {
        format_version: PARAM_FORMAT_VERSION,
        layer_sizes: net.sizes().to_vec(),
        params: net.params().to_vec(),
    };
    let text = serde_json::to_string(&file).expect("serializing plain data");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ParamFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if file.format_version != PARAM_FORMAT_VERSION {
        return Err(Error::Version {
            found: file.format_version,
            expected: PARAM_FORMAT_VERSION,
        });
    }
    Mlp::from_params(&file.layer_sizes, file.params)
}
