//! Verification metrics for physical-space (mm/day) fields and ensembles.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, Space};

/// Empirical quantile with linear interpolation between order statistics
/// (`p = 0` is the minimum, `p = 1` the maximum).
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Domain("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level must lie in [0, 1], got {p}")));
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn check_pair(pred: &GridField, obs: &GridField) -> Result<()> {
    pred.require_space(Space::Physical, "metric input")?;
    obs.require_space(Space::Physical, "metric input")?;
    pred.require_same_dims(obs)
}

pub fn mae(pred: &GridField, obs: &GridField) -> Result<f64> {
    check_pair(pred, obs)?;
    let n = pred.len() as f64;
    Ok(pred.values().iter().zip(obs.values()).map(|(p, o)| (p - o).abs()).sum::<f64>() / n)
}

/// Mean of `pred - obs`; positive means overestimation.
pub fn bias(pred: &GridField, obs: &GridField) -> Result<f64> {
    check_pair(pred, obs)?;
    let n = pred.len() as f64;
    Ok(pred.values().iter().zip(obs.values()).map(|(p, o)| p - o).sum::<f64>() / n)
}

/// Contingency counts of pooled exceedance masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub hits: usize,
    /// Predicted exceedance where none was observed.
    pub false_alarms: usize,
    /// Observed exceedance that was not predicted.
    pub misses: usize,
    pub correct_negatives: usize,
}

impl Confusion {
    /// `TP / (TP + FP + FN)`, 1 when nothing exceeds anywhere.
    pub fn csi(&self) -> f64 {
        let denom = self.hits + self.false_alarms + self.misses;
        if denom == 0 {
            1.0
        } else {
            self.hits as f64 / denom as f64
        }
    }

    /// `2 TP / (2 TP + FP + FN)`, 1 when nothing exceeds anywhere.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.hits + self.false_alarms + self.misses;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.hits as f64 / denom as f64
        }
    }
}

/// Window side, in cells, for pooling at `pool_km`.
fn pool_factor(cell_km: f64, pool_km: f64) -> Result<usize> {
    let ratio = pool_km / cell_km;
    let k = ratio.round();
    if !(k >= 1.0 && (ratio - k).abs() < 1e-9) {
        return Err(Error::Config(format!(
            "pooling scale {pool_km} km is not a whole multiple of the {cell_km} km cell"
        )));
    }
    Ok(k as usize)
}

/// Any-exceed max pooling of `v >= threshold` over `k`×`k` windows; edge
/// windows are truncated.
fn pooled_mask(field: &GridField, threshold: f64, k: usize) -> Vec<bool> {
    let (h, w) = field.dims();
    let (ph, pw) = (h.div_ceil(k), w.div_ceil(k));
    let mut out = vec![false; ph * pw];
    for r in 0..h {
        for c in 0..w {
            if field.get(r, c) >= threshold {
                out[(r / k) * pw + c / k] = true;
            }
        }
    }
    out
}

pub fn confusion(pred: &GridField, obs: &GridField, threshold: f64, pool_km: f64) -> Result<Confusion> {
    check_pair(pred, obs)?;
    let k = pool_factor(obs.cell_km(), pool_km)?;
    let p = pooled_mask(pred, threshold, k);
    let o = pooled_mask(obs, threshold, k);
    let mut c = Confusion {
        hits: 0,
        false_alarms: 0,
        misses: 0,
        correct_negatives: 0,
    };
    for (&pi, &oi) in p.iter().zip(&o) {
        match (pi, oi) {
            (true, true) => c.hits += 1,
            (true, false) => c.false_alarms += 1,
            (false, true) => c.misses += 1,
            (false, false) => c.correct_negatives += 1,
        }
    }
    Ok(c)
}

/// Pooled critical success index at `threshold` mm/day.
pub fn csi(pred: &GridField, obs: &GridField, threshold: f64, pool_km: f64) -> Result<f64> {
    Ok(confusion(pred, obs, threshold, pool_km)?.csi())
}

/// Absolute difference of the counts of pixels above `heavy_threshold`.
pub fn hrre(pred: &GridField, obs: &GridField, heavy_threshold: f64) -> Result<f64> {
    check_pair(pred, obs)?;
    let count = |f: &GridField| f.values().iter().filter(|&&v| v > heavy_threshold).count() as f64;
    Ok((count(pred) - count(obs)).abs())
}

/// `|Q(pred, q) - Q(obs, q)|` for the extreme quantile level `q`.
pub fn mppe_at(pred: &GridField, obs: &GridField, q: f64) -> Result<f64> {
    check_pair(pred, obs)?;
    Ok((quantile(pred.values(), q)? - quantile(obs.values(), q)?).abs())
}

pub fn mppe(pred: &GridField, obs: &GridField) -> Result<f64> {
    mppe_at(pred, obs, 0.999)
}

/// Equally weighted members of one forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<GridField>,
}

impl Ensemble {
    pub fn new(members: Vec<GridField>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Domain("ensemble needs at least one member".into()))?;
        for m in &members {
            m.require_space(Space::Physical, "ensemble member")?;
            m.require_same_dims(first)?;
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[GridField] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.members[0].dims()
    }

    /// Pixelwise mean of the members.
    pub fn mean(&self) -> Result<GridField> {
        let n = self.members.len() as f64;
        let mut acc = vec![0.0; self.members[0].len()];
        for m in &self.members {
            for (a, v) in acc.iter_mut().zip(m.values()) {
                *a += v;
            }
        }
        let (h, w) = self.dims();
        GridField::new(h, w, acc.into_iter().map(|a| a / n).collect(), Space::Physical, self.members[0].cell_km())
    }
}

/// Pixel-averaged CRPS of the empirical ensemble CDF,
/// `(1/M) sum |x_i - y| - (1/2M^2) sum_ij |x_i - x_j|`.
pub fn crps(ens: &Ensemble, obs: &GridField) -> Result<f64> {
    obs.require_space(Space::Physical, "observation")?;
    obs.require_same_dims(&ens.members[0])?;
    let m = ens.size();
    let mf = m as f64;
    let mut xs = vec![0.0; m];
    let mut total = 0.0;
    for (p, &y) in obs.values().iter().enumerate() {
        for (x, member) in xs.iter_mut().zip(&ens.members) {
            *x = member.values()[p];
        }
        let skill = xs.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
        xs.sort_by(f64::total_cmp);
        // sum_ij |x_i - x_j| = 2 sum_i (2i - M + 1) x_(i) over sorted members
        let spread: f64 = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (2.0 * i as f64 - mf + 1.0) * x)
            .sum::<f64>();
        total += skill - spread / (mf * mf);
    }
    Ok(total / obs.len() as f64)
}

/// Percentile-vs-percentile data for calibration plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqCurve {
    pub percentiles: Vec<f64>,
    pub observed: Vec<f64>,
    /// `members[k][i]` is member `k`'s value at `percentiles[i]`.
    pub members: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Population standard deviation across members.
    pub std: Vec<f64>,
}

impl QqCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("percentile,observed,mean,std,lower,upper");
        for k in 0..self.members.len() {
            let _ = write!(out, ",member_{k}");
        }
        out.push('\n');
        for i in 0..self.percentiles.len() {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                self.percentiles[i],
                self.observed[i],
                self.mean[i],
                self.std[i],
                self.mean[i] - self.std[i],
                self.mean[i] + self.std[i]
            );
            for m in &self.members {
                let _ = write!(out, ",{}", m[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Quantiles at the integer percentiles 0..=100 of every member and of
/// the observation.
pub fn qq_curve(ens: &Ensemble, obs: &GridField) -> Result<QqCurve> {
    obs.require_space(Space::Physical, "observation")?;
    let percentiles: Vec<f64> = (0..=100).map(f64::from).collect();
    let at_all = |values: &[f64]| -> Result<Vec<f64>> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        percentiles.iter().map(|p| quantile_sorted(&v, p / 100.0)).collect()
    };
    let observed = at_all(obs.values())?;
    let members = ens
        .members
        .iter()
        .map(|m| at_all(m.values()))
        .collect::<Result<Vec<_>>>()?;
    let mf = members.len() as f64;
    let mean: Vec<f64> = (0..percentiles.len())
        .map(|i| members.iter().map(|m| m[i]).sum::<f64>() / mf)
        .collect();
    let std = (0..percentiles.len())
        .map(|i| (members.iter().map(|m| (m[i] - mean[i]).powi(2)).sum::<f64>() / mf).sqrt())
        .collect();
    Ok(QqCurve {
        percentiles,
        observed,
        members,
        mean,
        std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// CSI exceedance threshold, mm/day.
    pub csi_threshold: f64,
    pub pool_km: f64,
    /// Heavy-rain threshold for HRRE, mm/day.
    pub heavy_threshold: f64,
    /// Quantile level for MPPE.
    pub extreme_quantile: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            csi_threshold: 10.0,
            pool_km: 16.0,
            heavy_threshold: 56.0,
            extreme_quantile: 0.999,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pool_km > 0.0 && self.pool_km.is_finite()) {
            return Err(Error::Config(format!("pool_km must be positive, got {}", self.pool_km)));
        }
        if !(0.0..=1.0).contains(&self.extreme_quantile) {
            return Err(Error::Config(format!(
                "extreme_quantile must lie in [0, 1], got {}",
                self.extreme_quantile
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub mae: f64,
    pub bias: f64,
    pub csi: f64,
    pub hrre: f64,
    pub mppe: f64,
    pub crps: f64,
}

impl SampleMetrics {
    const NAMES: [&'static str; 6] = ["mae", "bias", "csi", "hrre", "mppe", "crps"];

    fn as_array(&self) -> [f64; 6] {
        [self.mae, self.bias, self.csi, self.hrre, self.mppe, self.crps]
    }
}

/// MAE, bias and CSI of the ensemble mean; HRRE and MPPE averaged over
/// members; CRPS of the whole ensemble.
pub fn evaluate_sample(ens: &Ensemble, obs: &GridField, cfg: &MetricConfig) -> Result<SampleMetrics> {
    cfg.validate()?;
    let mean = ens.mean()?;
    let mf = ens.size() as f64;
    let mut hrre_sum = 0.0;
    let mut mppe_sum = 0.0;
    for m in ens.members() {
        hrre_sum += hrre(m, obs, cfg.heavy_threshold)?;
        mppe_sum += mppe_at(m, obs, cfg.extreme_quantile)?;
    }
    Ok(SampleMetrics {
        mae: mae(&mean, obs)?,
        bias: bias(&mean, obs)?,
        csi: csi(&mean, obs, cfg.csi_threshold, cfg.pool_km)?,
        hrre: hrre_sum / mf,
        mppe: mppe_sum / mf,
        crps: crps(ens, obs)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub config: MetricConfig,
    pub cell_km: f64,
    pub rows: Vec<(String, SampleMetrics)>,
}

impl MetricReport {
    /// Per-metric mean and population standard deviation over samples.
    pub fn summary(&self) -> (SampleMetrics, SampleMetrics) {
        let n = self.rows.len().max(1) as f64;
        let mut mean = [0.0; 6];
        for (_, r) in &self.rows {
            for (m, v) in mean.iter_mut().zip(r.as_array()) {
                *m += v / n;
            }
        }
        let mut var = [0.0; 6];
        for (_, r) in &self.rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_array()).zip(mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let pack = |a: [f64; 6]| SampleMetrics {
            mae: a[0],
            bias: a[1],
            csi: a[2],
            hrre: a[3],
            mppe: a[4],
            crps: a[5],
        };
        (pack(mean), pack(var.map(f64::sqrt)))
    }

    /// One row per sample followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample");
        for n in SampleMetrics::NAMES {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        let (mean, std) = self.summary();
        let rows = self
            .rows
            .iter()
            .map(|(name, m)| (name.as_str(), *m))
            .chain([("mean", mean), ("std", std)]);
        for (name, m) in rows {
            out.push_str(name);
            for v in m.as_array() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}
