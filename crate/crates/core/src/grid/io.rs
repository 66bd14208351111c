//! Two-file grid format: `<name>.grid` holds row-major little-endian `f32`
//! values and `<name>.json` carries the header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChannelRole, ConditionTensor, GridField, Space};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub height: usize,
    pub width: usize,
    pub space: Space,
    pub cell_km: f64,
    pub units: String,
}

impl GridHeader {
    fn for_field(field: &GridField) -> Self {
        let units = match field.space() {
            Space::Physical => "mm/day",
            Space::Normalized => "1",
        };
        Self {
            height: field.height(),
            width: field.width(),
            space: field.space(),
            cell_km: field.cell_km(),
            units: units.to_string(),
        }
    }
}

/// Strips a trailing `.grid` / `.json` so either file of the pair, or the
/// bare stem, can name a grid.
fn stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("grid") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the pair. Values are stored as `f32`, so a field written once and
/// read back is the `f32` rounding of the original; from then on the round
/// trip is bit-exact.
pub fn write_grid(field: &GridField, path: impl AsRef<Path>) -> Result<()> {
    let stem = stem(path.as_ref());
    let grid_path = with_suffix(&stem, ".grid");
    let json_path = with_suffix(&stem, ".json");

    let mut payload = Vec::with_capacity(field.len() * 4);
    for &v in field.values() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&grid_path, payload).map_err(|e| Error::io(&grid_path, e))?;

    let header = serde_json::to_string_pretty(&GridHeader::for_field(field))
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&json_path, header).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<GridField> {
    let stem = stem(path.as_ref());
    let grid_path = with_suffix(&stem, ".grid");
    let json_path = with_suffix(&stem, ".json");

    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: GridHeader = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", json_path.display())))?;

    let payload = fs::read(&grid_path).map_err(|e| Error::io(&grid_path, e))?;
    let expected = header.height * header.width * 4;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "{}: header declares {}x{} ({expected} bytes) but payload has {} bytes",
            grid_path.display(),
            header.height,
            header.width,
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    GridField::new(header.height, header.width, values, header.space, header.cell_km)
}

/// Descriptor of a condition stack: one grid per channel, named relative
/// to the descriptor's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionFile {
    pub channels: Vec<ConditionChannelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionChannelEntry {
    pub grid: String,
    pub role: ChannelRole,
}

fn condition_stem(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    match s.strip_suffix(".cond.json") {
        Some(stem) => PathBuf::from(stem),
        None => path.to_path_buf(),
    }
}

/// Writes `<stem>.cond.json` plus one grid `<stem>.cond<k>` per channel.
/// Returns the descriptor path.
pub fn write_condition(cond: &ConditionTensor, stem: impl AsRef<Path>) -> Result<PathBuf> {
    let stem = condition_stem(stem.as_ref());
    let base = stem
        .file_name()
        .ok_or_else(|| Error::Config(format!("bad condition path {}", stem.display())))?
        .to_string_lossy()
        .into_owned();
    let mut channels = Vec::with_capacity(cond.num_channels());
    for (k, (field, role)) in cond.channels().iter().zip(cond.roles()).enumerate() {
        let name = format!("{base}.cond{k}");
        write_grid(field, stem.with_file_name(&name))?;
        channels.push(ConditionChannelEntry { grid: name, role: *role });
    }
    let path = with_suffix(&stem, ".cond.json");
    let text = serde_json::to_string_pretty(&ConditionFile { channels })
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads a stack from its `.cond.json` descriptor (or the bare stem).
pub fn read_condition(path: impl AsRef<Path>) -> Result<ConditionTensor> {
    let path = with_suffix(&condition_stem(path.as_ref()), ".cond.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: ConditionFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut channels = Vec::with_capacity(file.channels.len());
    let mut roles = Vec::with_capacity(file.channels.len());
    for entry in file.channels {
        channels.push(read_grid(dir.join(&entry.grid))?);
        roles.push(entry.role);
    }
    ConditionTensor::new(channels, roles)
}
