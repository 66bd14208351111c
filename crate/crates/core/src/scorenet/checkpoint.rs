//! Single-file checkpoints: an 8-byte little-endian header length, a JSON
//! header, then the parameters as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ScoreModel};
use crate::error::{Error, Result};
use crate::sde::NoiseSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub schedule: NoiseSchedule,
    /// Training step at which the parameters were taken.
    pub step: usize,
    /// Whether the parameters are the exponential moving average.
    pub ema: bool,
    pub num_params: usize,
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ScoreModel, step: usize, ema: bool) -> Result<()> {
    let path = path.as_ref();
    let header = CheckpointHeader {
        architecture: *model.architecture(),
        schedule: *model.schedule(),
        step,
        ema,
        num_params: model.num_params(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut bytes = Vec::with_capacity(8 + json.len() + 8 * model.num_params());
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for p in model.params() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ScoreModel, CheckpointHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 8 {
        return Err(corrupt("truncated header"));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let rest = &bytes[8..];
    if len > rest.len() {
        return Err(corrupt("header length exceeds file size"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&rest[..len]).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let payload = &rest[len..];
    if payload.len() != 8 * header.num_params {
        return Err(corrupt(&format!(
            "expected {} parameters, payload holds {} bytes",
            header.num_params,
            payload.len()
        )));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let model = ScoreModel::from_params(header.architecture, header.schedule, params)?;
    Ok((model, header))
}
