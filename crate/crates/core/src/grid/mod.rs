//! Gridded intensity fields and the conditioning stack built from them.

mod io;
mod synth;

pub use io::{read_condition, read_grid, write_condition, write_grid, ConditionChannelEntry, ConditionFile, GridHeader};
pub use synth::{generate_dataset, generate_pair, SyntheticPairConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precipitation scaling constant of the zero-preserving log transform.
pub const DEFAULT_PRECIP_SCALE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// mm/day, non-negative.
    Physical,
    /// Dimensionless network space.
    Normalized,
}

/// A row-major 2-D field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    height: usize,
    width: usize,
    values: Vec<f64>,
    space: Space,
    cell_km: f64,
}

impl GridField {
    pub fn new(
        height: usize,
        width: usize,
        values: Vec<f64>,
        space: Space,
        cell_km: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        if height * width != values.len() {
            return Err(Error::Dimension(format!(
                "{height}x{width} grid needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if !(cell_km.is_finite() && cell_km > 0.0) {
            return Err(Error::Domain(format!("cell_km must be positive, got {cell_km}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite grid value {v}")));
        }
        if space == Space::Physical {
            if let Some(v) = values.iter().find(|&&v| v < 0.0) {
                return Err(Error::Domain(format!("negative physical intensity {v}")));
            }
        }
        Ok(Self {
            height,
            width,
            values,
            space,
            cell_km,
        })
    }

    pub fn physical(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(height, width, values, Space::Physical, 1.0)
    }

    pub fn normalized(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(height, width, values, Space::Normalized, 1.0)
    }

    pub fn constant(height: usize, width: usize, value: f64, space: Space) -> Result<Self> {
        Self::new(height, width, vec![value; height * width], space, 1.0)
    }

    pub fn with_cell_km(mut self, cell_km: f64) -> Result<Self> {
        if !(cell_km.is_finite() && cell_km > 0.0) {
            return Err(Error::Domain(format!("cell_km must be positive, got {cell_km}")));
        }
        self.cell_km = cell_km;
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn cell_km(&self) -> f64 {
        self.cell_km
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy of the `h`×`w` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Self> {
        if row + h > self.height || col + w > self.width {
            return Err(Error::Dimension(format!(
                "window {h}x{w} at ({row},{col}) exceeds {}x{} grid",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(h * w);
        for r in row..row + h {
            let start = r * self.width + col;
            values.extend_from_slice(&self.values[start..start + w]);
        }
        Self::new(h, w, values, self.space, self.cell_km)
    }

    pub fn require_space(&self, space: Space, what: &str) -> Result<()> {
        if self.space != space {
            return Err(Error::State(format!(
                "{what} expects a {space:?} field, got {:?}",
                self.space
            )));
        }
        Ok(())
    }

    pub fn require_same_dims(&self, other: &GridField) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "field dimensions differ: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// `log(v + 1) / c_p` per pixel.
pub fn normalize(field: &GridField, c_p: f64) -> Result<GridField> {
    check_scale(c_p)?;
    field.require_space(Space::Physical, "normalize")?;
    let values = field.values.iter().map(|&v| (v + 1.0).ln() / c_p).collect();
    GridField::new(field.height, field.width, values, Space::Normalized, field.cell_km)
}

/// Inverse of [`normalize`], clamped at zero.
pub fn denormalize(field: &GridField, c_p: f64) -> Result<GridField> {
    check_scale(c_p)?;
    field.require_space(Space::Normalized, "denormalize")?;
    let values: Vec<f64> = field.values.iter().map(|&v| denormalize_value(v, c_p)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "denormalized intensity overflows f64".to_string(),
        ));
    }
    GridField::new(field.height, field.width, values, Space::Physical, field.cell_km)
}

#[inline]
pub fn denormalize_value(v: f64, c_p: f64) -> f64 {
    (c_p * v).exp_m1().max(0.0)
}

fn check_scale(c_p: f64) -> Result<()> {
    if !(c_p.is_finite() && c_p > 0.0) {
        return Err(Error::Domain(format!("scaling constant must be positive, got {c_p}")));
    }
    Ok(())
}

/// Block mean over `factor`×`factor` cells.
pub fn coarsen(field: &GridField, factor: usize) -> Result<GridField> {
    if factor == 0 || !field.height.is_multiple_of(factor) || !field.width.is_multiple_of(factor) {
        return Err(Error::Dimension(format!(
            "{}x{} grid is not divisible by factor {factor}",
            field.height, field.width
        )));
    }
    let (h, w) = (field.height / factor, field.width / factor);
    let area = (factor * factor) as f64;
    let mut values = vec![0.0; h * w];
    for (r, row) in values.chunks_mut(w).enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for dr in 0..factor {
                let base = (r * factor + dr) * field.width + c * factor;
                acc += field.values[base..base + factor].iter().sum::<f64>();
            }
            *out = acc / area;
        }
    }
    GridField::new(h, w, values, field.space, field.cell_km * factor as f64)
}

/// Corner-aligned bilinear interpolation: the first and last rows/columns
/// of source and target coincide.
pub fn upsample_bilinear(field: &GridField, target_h: usize, target_w: usize) -> Result<GridField> {
    if target_h < field.height || target_w < field.width {
        return Err(Error::Dimension(format!(
            "cannot upsample {}x{} to smaller {target_h}x{target_w}",
            field.height, field.width
        )));
    }
    let rows = axis_weights(field.height, target_h);
    let cols = axis_weights(field.width, target_w);
    let mut values = Vec::with_capacity(target_h * target_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let v00 = field.get(r0, c0);
            let v01 = field.get(r0, c1);
            let v10 = field.get(r1, c0);
            let v11 = field.get(r1, c1);
            let top = v00 + fc * (v01 - v00);
            let bottom = v10 + fc * (v11 - v10);
            values.push(top + fr * (bottom - top));
        }
    }
    let cell_km = field.cell_km * field.width as f64 / target_w as f64;
    GridField::new(target_h, target_w, values, field.space, cell_km)
}

fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                return (0, 0, 0.0);
            }
            let pos = (i * (src - 1)) as f64 / (dst - 1) as f64;
            let i0 = (pos.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    CoarsePrecip,
    StationDensity,
    Ancillary,
}

/// Conditioning stack at target resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTensor {
    channels: Vec<GridField>,
    roles: Vec<ChannelRole>,
}

impl ConditionTensor {
    pub fn new(channels: Vec<GridField>, roles: Vec<ChannelRole>) -> Result<Self> {
        if channels.len() != roles.len() {
            return Err(Error::Dimension(format!(
                "{} channels but {} roles",
                channels.len(),
                roles.len()
            )));
        }
        if let Some(first) = channels.first() {
            for ch in &channels[1..] {
                first.require_same_dims(ch)?;
            }
        }
        let coarse = roles.iter().filter(|r| **r == ChannelRole::CoarsePrecip).count();
        if coarse > 1 {
            return Err(Error::Config(format!(
                "at most one coarse_precip channel allowed, got {coarse}"
            )));
        }
        Ok(Self { channels, roles })
    }

    pub fn empty() -> Self {
        Self {
            channels: Vec::new(),
            roles: Vec::new(),
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[GridField] {
        &self.channels
    }

    pub fn roles(&self) -> &[ChannelRole] {
        &self.roles
    }

    /// `None` for an empty stack.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.channels.first().map(GridField::dims)
    }

    pub fn coarse_precip_index(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == ChannelRole::CoarsePrecip)
    }

    pub fn coarse_precip(&self) -> Option<&GridField> {
        self.coarse_precip_index().map(|i| &self.channels[i])
    }

    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| c.crop(row, col, h, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            roles: self.roles.clone(),
        })
    }

    /// The stack as seen by the score network: the precipitation channel is
    /// log-normalized when it is still physical, other channels pass through.
    pub fn to_network_space(&self, c_p: f64) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .zip(&self.roles)
            .map(|(ch, role)| match (role, ch.space()) {
                (ChannelRole::CoarsePrecip, Space::Physical) => normalize(ch, c_p),
                _ => Ok(ch.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            roles: self.roles.clone(),
        })
    }

    /// Channel-major flat copy, `channels × height × width`.
    pub fn flat_values(&self) -> Vec<f64> {
        self.channels
            .iter()
            .flat_map(|c| c.values().iter().copied())
            .collect()
    }
}
