//! Tiled sampling: every score evaluation is computed on overlapping
//! patches and blended with normalized Gaussian weights, so a model trained
//! on small fields can sample large ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConditionTensor, GridField, Space};
use crate::sde::{pc_sample, NoiseSchedule, SamplerConfig, ScoreFn, StepObserver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiledConfig {
    pub patch: usize,
    pub stride: usize,
    /// Blend kernel standard deviation in pixels; `None` uses `patch / 4`.
    pub kernel_std: Option<f64>,
}

impl Default for TiledConfig {
    fn default() -> Self {
        Self {
            patch: 256,
            stride: 192,
            kernel_std: None,
        }
    }
}

/// Top-left corners of the patches along one axis.
fn axis_offsets(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut offsets = vec![0];
    let mut last = 0;
    while last + patch < dim {
        last = (last + stride).min(dim - patch);
        offsets.push(last);
    }
    offsets
}

/// Square patches of side `patch` covering an `height`×`width` field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchPlan {
    pub height: usize,
    pub width: usize,
    pub patch: usize,
    pub stride: usize,
    pub row_offsets: Vec<usize>,
    pub col_offsets: Vec<usize>,
}

impl PatchPlan {
    /// `(row, col)` corners in row-major order.
    pub fn corners(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_offsets
            .iter()
            .flat_map(move |&r| self.col_offsets.iter().map(move |&c| (r, c)))
    }

    pub fn num_patches(&self) -> usize {
        self.row_offsets.len() * self.col_offsets.len()
    }
}

/// Offsets `0, stride, 2 stride, ...` per axis, the last one moved back to
/// `dim - patch` so that the final patch ends on the edge.
pub fn plan_patches(height: usize, width: usize, patch: usize, stride: usize) -> Result<PatchPlan> {
    if patch == 0 || stride == 0 || stride > patch {
        return Err(Error::Config(format!(
            "need 0 < stride <= patch, got patch {patch}, stride {stride}"
        )));
    }
    if patch > height.min(width) {
        return Err(Error::Dimension(format!(
            "patch {patch} does not fit in a {height}x{width} field"
        )));
    }
    Ok(PatchPlan {
        height,
        width,
        patch,
        stride,
        row_offsets: axis_offsets(height, patch, stride),
        col_offsets: axis_offsets(width, patch, stride),
    })
}

/// Gaussian patch weights centred on the patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendKernel {
    pub patch: usize,
    pub std: f64,
    pub weights: Vec<f64>,
}

impl BlendKernel {
    pub fn gaussian(patch: usize, std: f64) -> Result<Self> {
        if patch == 0 || !(std > 0.0 && std.is_finite()) {
            return Err(Error::Config(format!("bad blend kernel: patch {patch}, std {std}")));
        }
        let centre = (patch as f64 - 1.0) / 2.0;
        let profile: Vec<f64> = (0..patch)
            .map(|i| (-(i as f64 - centre).powi(2) / (2.0 * std * std)).exp())
            .collect();
        let mut weights = Vec::with_capacity(patch * patch);
        for r in &profile {
            weights.extend(profile.iter().map(|c| r * c));
        }
        Ok(Self { patch, std, weights })
    }

    /// Standard deviation `patch / 4`.
    pub fn for_patch(patch: usize) -> Result<Self> {
        Self::gaussian(patch, patch as f64 / 4.0)
    }
}

/// Sum over patches of the kernel weight covering each pixel.
pub fn weight_sum_map(plan: &PatchPlan, kernel: &BlendKernel) -> Result<Vec<f64>> {
    if kernel.patch != plan.patch {
        return Err(Error::Dimension(format!(
            "kernel is {0}x{0} but patches are {1}x{1}",
            kernel.patch, plan.patch
        )));
    }
    let p = plan.patch;
    let mut sum = vec![0.0; plan.height * plan.width];
    for (r0, c0) in plan.corners() {
        for r in 0..p {
            let dst = &mut sum[(r0 + r) * plan.width + c0..][..p];
            for (d, w) in dst.iter_mut().zip(&kernel.weights[r * p..(r + 1) * p]) {
                *d += w;
            }
        }
    }
    Ok(sum)
}

/// Per-pixel sum of the normalized weights; 1 wherever the field is covered.
pub fn normalization_map(plan: &PatchPlan, kernel: &BlendKernel) -> Result<Vec<f64>> {
    let sum = weight_sum_map(plan, kernel)?;
    let p = plan.patch;
    let mut total = vec![0.0; sum.len()];
    for (r0, c0) in plan.corners() {
        for r in 0..p {
            let row = (r0 + r) * plan.width + c0;
            for c in 0..p {
                total[row + c] += kernel.weights[r * p + c] / sum[row + c];
            }
        }
    }
    Ok(total)
}

/// Blends `members` stacked fields per patch into the full grid.
struct Blender {
    plan: PatchPlan,
    kernel: BlendKernel,
    weight_sum: Vec<f64>,
}

impl Blender {
    fn new(plan: PatchPlan, kernel: BlendKernel) -> Result<Self> {
        let weight_sum = weight_sum_map(&plan, &kernel)?;
        Ok(Self {
            plan,
            kernel,
            weight_sum,
        })
    }

    fn accumulate(&self, out: &mut [f64], members: usize, corner: (usize, usize), patch_values: &[f64]) {
        let (p, w) = (self.plan.patch, self.plan.width);
        let full = self.plan.height * w;
        let (r0, c0) = corner;
        for k in 0..members {
            let src = &patch_values[k * p * p..(k + 1) * p * p];
            let dst = &mut out[k * full..(k + 1) * full];
            for r in 0..p {
                let row = (r0 + r) * w + c0;
                for c in 0..p {
                    let i = row + c;
                    dst[i] += self.kernel.weights[r * p + c] / self.weight_sum[i] * src[r * p + c];
                }
            }
        }
    }

    fn crop(&self, x: &[f64], members: usize, corner: (usize, usize)) -> Vec<f64> {
        let (p, w) = (self.plan.patch, self.plan.width);
        let full = self.plan.height * w;
        let (r0, c0) = corner;
        let mut out = Vec::with_capacity(members * p * p);
        for k in 0..members {
            for r in 0..p {
                out.extend_from_slice(&x[k * full + (r0 + r) * w + c0..][..p]);
            }
        }
        out
    }
}

/// Weighted average of per-patch outputs, given in the plan's corner order.
pub fn merge_step(outputs: &[GridField], plan: &PatchPlan, kernel: &BlendKernel) -> Result<GridField> {
    if outputs.len() != plan.num_patches() {
        return Err(Error::State(format!(
            "plan has {} patches but {} outputs were given",
            plan.num_patches(),
            outputs.len()
        )));
    }
    let first = &outputs[0];
    for o in outputs {
        if o.dims() != (plan.patch, plan.patch) {
            return Err(Error::Dimension(format!(
                "patch output is {:?}, expected {1}x{1}",
                o.dims(),
                plan.patch
            )));
        }
    }
    let blender = Blender::new(plan.clone(), kernel.clone())?;
    let mut out = vec![0.0; plan.height * plan.width];
    for (o, corner) in outputs.iter().zip(plan.corners()) {
        blender.accumulate(&mut out, 1, corner, o.values());
    }
    let space = if outputs.iter().all(|o| o.space() == Space::Physical) {
        Space::Physical
    } else {
        Space::Normalized
    };
    GridField::new(plan.height, plan.width, out, space, first.cell_km())
}

/// A score function evaluated patchwise on a larger grid.
pub struct TiledScore<S> {
    inner: S,
    blender: Blender,
}

impl<S: ScoreFn> TiledScore<S> {
    pub fn new(inner: S, plan: PatchPlan, kernel: BlendKernel) -> Result<Self> {
        Ok(Self {
            inner,
            blender: Blender::new(plan, kernel)?,
        })
    }
}

impl<S: ScoreFn> ScoreFn for TiledScore<S> {
    fn score(&self, x: &[f64], members: usize, y: &ConditionTensor, t: f64) -> Result<Vec<f64>> {
        let plan = &self.blender.plan;
        if y.dims() != Some((plan.height, plan.width)) {
            return Err(Error::Dimension(format!(
                "condition is {:?}, plan covers {}x{}",
                y.dims(),
                plan.height,
                plan.width
            )));
        }
        let mut out = vec![0.0; x.len()];
        for corner in plan.corners() {
            let xp = self.blender.crop(x, members, corner);
            let yp = y.crop(corner.0, corner.1, plan.patch, plan.patch)?;
            let s = self.inner.score(&xp, members, &yp, t)?;
            self.blender.accumulate(&mut out, members, corner, &s);
        }
        Ok(out)
    }
}

/// Predictor-corrector sampling with patchwise score evaluation. Noise is
/// drawn on the full grid, so overlapping patches see the same noise.
pub fn tiled_pc_sample<S: ScoreFn>(
    score: S,
    y: &ConditionTensor,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
    plan: &PatchPlan,
    kernel: &BlendKernel,
    observer: &mut dyn StepObserver,
) -> Result<Vec<GridField>> {
    let tiled = TiledScore::new(score, plan.clone(), kernel.clone())?;
    pc_sample(&tiled, y, schedule, cfg, observer)
}
