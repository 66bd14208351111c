//! Synthetic zero-inflated, heavy-tailed fine/coarse training pairs.

use serde::{Deserialize, Serialize};

use super::{coarsen, upsample_bilinear, ChannelRole, ConditionTensor, GridField, Space};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticPairConfig {
    pub fine_size: usize,
    pub coarsen_factor: usize,
    /// Log-normal sigma of the wet-pixel marginal.
    pub tail_heaviness: f64,
    /// Correlation length of the latent Gaussian field, in pixels.
    pub smoothness: f64,
    pub seed: u64,
    pub num_ancillary: usize,
    /// Fraction of pixels forced to zero (lowest intensities).
    pub dry_fraction: f64,
    /// Median wet intensity, mm/day.
    pub scale_mm_day: f64,
    pub cell_km: f64,
}

impl Default for SyntheticPairConfig {
    fn default() -> Self {
        Self {
            fine_size: 32,
            coarsen_factor: 4,
            tail_heaviness: 1.0,
            smoothness: 3.0,
            seed: 0,
            num_ancillary: 1,
            dry_fraction: 0.4,
            scale_mm_day: 8.0,
            cell_km: 1.0,
        }
    }
}

impl SyntheticPairConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.fine_size == 0 {
            return fail("fine_size must be positive".into());
        }
        if self.coarsen_factor < 2 {
            return fail(format!("coarsen_factor must be >= 2, got {}", self.coarsen_factor));
        }
        if !self.fine_size.is_multiple_of(self.coarsen_factor) {
            return fail(format!(
                "fine_size {} is not divisible by coarsen_factor {}",
                self.fine_size, self.coarsen_factor
            ));
        }
        if !(self.tail_heaviness.is_finite() && self.tail_heaviness >= 0.0) {
            return fail(format!("tail_heaviness must be >= 0, got {}", self.tail_heaviness));
        }
        if !(self.smoothness.is_finite() && self.smoothness > 0.0) {
            return fail(format!("smoothness must be positive, got {}", self.smoothness));
        }
        if !(0.0..1.0).contains(&self.dry_fraction) {
            return fail(format!("dry_fraction must lie in [0, 1), got {}", self.dry_fraction));
        }
        if !(self.scale_mm_day.is_finite() && self.scale_mm_day > 0.0) {
            return fail(format!("scale_mm_day must be positive, got {}", self.scale_mm_day));
        }
        if !(self.cell_km.is_finite() && self.cell_km > 0.0) {
            return fail(format!("cell_km must be positive, got {}", self.cell_km));
        }
        Ok(())
    }
}

/// Gaussian kernel wrapped onto a periodic axis of length `n`.
fn wrapped_kernel(sigma: f64, n: usize) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k = vec![0.0; n];
    for off in -radius..=radius {
        let w = (-(off * off) as f64 / (2.0 * sigma * sigma)).exp();
        k[off.rem_euclid(n as i64) as usize] += w;
    }
    k
}

fn circular_smooth_rows(values: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let row = &values[r * w..(r + 1) * w];
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                if kw != 0.0 {
                    acc += kw * row[(c + w - k) % w];
                }
            }
            out[r * w + c] = acc;
        }
    }
    out
}

fn transpose(values: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            out[c * h + r] = values[r * w + c];
        }
    }
    out
}

/// Unit-variance stationary Gaussian random field on an `n`×`n` torus.
fn gaussian_random_field(seed: u64, stream: u64, n: usize, smoothness: f64) -> Vec<f64> {
    let mut r = rng::stream(seed, stream);
    let white = rng::standard_normal_vec(&mut r, n * n);
    let kernel = wrapped_kernel(smoothness, n);
    let energy: f64 = kernel.iter().map(|k| k * k).sum();
    // separable filter: output variance is the product of the axis energies
    let scale = 1.0 / energy;
    let rows = circular_smooth_rows(&white, n, n, &kernel);
    let cols = circular_smooth_rows(&transpose(&rows, n, n), n, n, &kernel);
    transpose(&cols, n, n).into_iter().map(|v| v * scale).collect()
}

fn coarse_proxy(field: &GridField, factor: usize) -> Result<GridField> {
    let (h, w) = field.dims();
    upsample_bilinear(&coarsen(field, factor)?, h, w)
}

/// One `(target, condition)` pair; bit-reproducible from `cfg.seed`.
pub fn generate_pair(cfg: &SyntheticPairConfig) -> Result<(GridField, ConditionTensor)> {
    cfg.validate()?;
    let n = cfg.fine_size;
    let latent = gaussian_random_field(cfg.seed, streams::TARGET_FIELD, n, cfg.smoothness);

    let mut intensity: Vec<f64> = latent
        .iter()
        .map(|&g| cfg.scale_mm_day * (cfg.tail_heaviness * g).exp())
        .collect();
    if cfg.dry_fraction > 0.0 {
        let mut sorted = intensity.clone();
        sorted.sort_by(f64::total_cmp);
        let threshold = sorted[(cfg.dry_fraction * sorted.len() as f64).floor() as usize];
        for v in intensity.iter_mut() {
            if *v < threshold {
                *v = 0.0;
            }
        }
    }
    let target = GridField::new(n, n, intensity, Space::Physical, cfg.cell_km)?;

    let mut channels = vec![
        coarse_proxy(&target, cfg.coarsen_factor)?,
        GridField::new(n, n, vec![1.0; n * n], Space::Normalized, cfg.cell_km)?,
    ];
    let mut roles = vec![ChannelRole::CoarsePrecip, ChannelRole::StationDensity];
    let mix = (1.0f64 - 0.7 * 0.7).sqrt();
    for k in 0..cfg.num_ancillary {
        let own = gaussian_random_field(
            cfg.seed,
            rng::substream(streams::ANCILLARY, k as u64),
            n,
            2.0 * cfg.smoothness,
        );
        let values = latent.iter().zip(&own).map(|(g, h)| 0.7 * g + mix * h).collect();
        let field = GridField::new(n, n, values, Space::Normalized, cfg.cell_km)?;
        channels.push(coarse_proxy(&field, cfg.coarsen_factor)?);
        roles.push(ChannelRole::Ancillary);
    }
    Ok((target, ConditionTensor::new(channels, roles)?))
}

/// `count` pairs with per-sample seeds derived from `cfg.seed`.
pub fn generate_dataset(
    cfg: &SyntheticPairConfig,
    count: usize,
) -> Result<Vec<(GridField, ConditionTensor)>> {
    (0..count)
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = rng::substream(cfg.seed, i as u64);
            generate_pair(&c)
        })
        .collect()
}
