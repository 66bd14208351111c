//! On-disk dataset layout.
//!
//! A data directory holds `manifest.json` and, per sample `<name>`, the
//! target grid `<name>.target` and the condition stack `<name>.cond.json`.
//! Sampled ensembles are written as `<out>/<name>/member_<k>` grids.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wassdiff_core::grid::{read_condition, read_grid, write_condition, write_grid};
use wassdiff_core::{ConditionTensor, Error, GridField, Result};

use crate::config::io_error;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub height: usize,
    pub width: usize,
    pub cell_km: f64,
    pub samples: Vec<String>,
}

pub fn target_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.target"))
}

pub fn condition_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.cond.json"))
}

pub fn sample_name(i: usize) -> String {
    format!("sample_{i:04}")
}

pub fn write_dataset(dir: &Path, pairs: &[(GridField, ConditionTensor)]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let first = pairs
        .first()
        .ok_or_else(|| Error::Config("num_samples must be positive".into()))?;
    let mut samples = Vec::with_capacity(pairs.len());
    for (i, (target, cond)) in pairs.iter().enumerate() {
        let name = sample_name(i);
        write_grid(target, target_path(dir, &name))?;
        write_condition(cond, condition_path(dir, &name))?;
        samples.push(name);
    }
    let manifest = Manifest {
        height: first.0.height(),
        width: first.0.width(),
        cell_km: first.0.cell_km(),
        samples,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<(GridField, ConditionTensor)>)> {
    let manifest = read_manifest(dir)?;
    let pairs = manifest
        .samples
        .iter()
        .map(|name| Ok((read_grid(target_path(dir, name))?, read_condition(condition_path(dir, name))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, pairs))
}

/// Grid stems (paths without extension) of every `.grid` file in `dir`,
/// sorted by name.
pub fn grid_stems(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("grid") {
            out.push(path.with_extension(""));
        }
    }
    out.sort();
    Ok(out)
}

/// Up to `limit` members from an ensemble directory, in name order.
pub fn read_ensemble_dir(dir: &Path, limit: Option<usize>) -> Result<Vec<GridField>> {
    let mut stems = grid_stems(dir)?;
    if stems.is_empty() {
        return Err(Error::Config(format!("no grids in {}", dir.display())));
    }
    if let Some(n) = limit {
        stems.truncate(n.max(1));
    }
    stems.iter().map(read_grid).collect()
}

pub fn member_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("member_{k:03}"))
}

/// Observed fields by sample name: the targets of a data directory, or
/// every grid of a plain directory.
pub fn read_observations(dir: &Path) -> Result<Vec<(String, GridField)>> {
    if dir.join(MANIFEST).exists() {
        let manifest = read_manifest(dir)?;
        return manifest
            .samples
            .iter()
            .map(|name| Ok((name.clone(), read_grid(target_path(dir, name))?)))
            .collect();
    }
    grid_stems(dir)?
        .into_iter()
        .map(|stem| {
            let name = stem.file_name().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, read_grid(&stem)?))
        })
        .collect()
}

/// Prediction for `name`: an ensemble directory `<dir>/<name>/`, a single
/// grid `<dir>/<name>`, or the target of a data directory.
pub fn read_prediction(dir: &Path, name: &str, limit: Option<usize>) -> Result<Vec<GridField>> {
    let sub = dir.join(name);
    if sub.is_dir() {
        return read_ensemble_dir(&sub, limit);
    }
    let single = dir.join(format!("{name}.grid"));
    if single.exists() {
        return Ok(vec![read_grid(&single)?]);
    }
    if dir.join(format!("{name}.target.grid")).exists() {
        return Ok(vec![read_grid(target_path(dir, name))?]);
    }
    Err(Error::Io {
        path: sub.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no prediction for this sample"),
    })
}
