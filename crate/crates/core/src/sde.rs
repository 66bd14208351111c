//! Variance-exploding SDE and the predictor-corrector reverse sampler.
//!
//! Forward process: `dx = g(t) dw` with `sigma(t) = sigma_min (sigma_max /
//! sigma_min)^t` and `g(t)^2 = d sigma^2 / dt`. The transition kernel is
//! `x(t) | x(0) ~ N(x(0), sigma(t)^2 I)` (the `sigma_min` offset at `t = 0`
//! is ignored, as is conventional).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{denormalize_value, ChannelRole, ConditionTensor, GridField, Space};
use crate::rng::{self, streams};

/// Smallest time visited by the sampler and drawn in training.
pub const T_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    VarianceExploding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kind: ScheduleKind,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_min: 0.01,
            sigma_max: 50.0,
            kind: ScheduleKind::VarianceExploding,
        }
    }
}

impl NoiseSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        let s = Self {
            sigma_min,
            sigma_max,
            kind: ScheduleKind::VarianceExploding,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_max > self.sigma_min && self.sigma_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }

    /// Final time of the forward process.
    pub const fn horizon(&self) -> f64 {
        1.0
    }

    /// `sigma(t)` without the range check.
    #[inline]
    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma_min * (self.sigma_max / self.sigma_min).powf(t)
    }

    /// `g(t)^2 = sigma(t)^2 * 2 ln(sigma_max / sigma_min)`.
    pub fn diffusion_sq(&self, t: f64) -> f64 {
        let s = self.sigma(t);
        s * s * 2.0 * (self.sigma_max / self.sigma_min).ln()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(())
}

pub fn sigma_at(schedule: &NoiseSchedule, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(schedule.sigma(t))
}

/// Draws `x(t) = x(0) + sigma(t) z`. Returns `(x(t), z)`.
pub fn perturb(
    x0: &GridField,
    schedule: &NoiseSchedule,
    t: f64,
    noise_seed: u64,
) -> Result<(GridField, GridField)> {
    let sigma = sigma_at(schedule, t)?;
    let mut r = rng::stream(noise_seed, streams::PERTURB);
    let z = rng::standard_normal_vec(&mut r, x0.len());
    let xt: Vec<f64> = x0.values().iter().zip(&z).map(|(x, n)| x + sigma * n).collect();
    let (h, w) = x0.dims();
    Ok((
        GridField::new(h, w, xt, Space::Normalized, x0.cell_km())?,
        GridField::new(h, w, z, Space::Normalized, x0.cell_km())?,
    ))
}

/// `grad log p_0t(x(t) | x(0)) = -(x(t) - x(0)) / sigma(t)^2`.
pub fn score_target(
    xt: &GridField,
    x0: &GridField,
    schedule: &NoiseSchedule,
    t: f64,
) -> Result<GridField> {
    xt.require_same_dims(x0)?;
    let s2 = sigma_at(schedule, t)?.powi(2);
    let values = xt
        .values()
        .iter()
        .zip(x0.values())
        .map(|(a, b)| -(a - b) / s2)
        .collect();
    let (h, w) = xt.dims();
    GridField::new(h, w, values, Space::Normalized, xt.cell_km())
}

/// A (conditional) score `s(x, y, t)` evaluated on a stack of fields.
pub trait ScoreFn {
    /// `x` holds `members` row-major fields with the dimensions of `y`;
    /// returns the score at each entry.
    fn score(&self, x: &[f64], members: usize, y: &ConditionTensor, t: f64) -> Result<Vec<f64>>;
}

impl<S: ScoreFn + ?Sized> ScoreFn for &S {
    fn score(&self, x: &[f64], members: usize, y: &ConditionTensor, t: f64) -> Result<Vec<f64>> {
        (**self).score(x, members, y, t)
    }
}

/// Exact score of `N(mean, data_std^2 I)` diffused by `schedule`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianScore {
    pub mean: f64,
    pub data_std: f64,
    pub schedule: NoiseSchedule,
}

impl GaussianScore {
    pub fn at(&self, x: f64, t: f64) -> f64 {
        let var = self.data_std * self.data_std + self.schedule.sigma(t).powi(2);
        -(x - self.mean) / var
    }
}

impl ScoreFn for GaussianScore {
    fn score(&self, x: &[f64], _members: usize, _y: &ConditionTensor, t: f64) -> Result<Vec<f64>> {
        Ok(x.iter().map(|&v| self.at(v, t)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub num_steps: usize,
    pub langevin_steps_per_predictor: usize,
    pub snr: f64,
    pub seed: u64,
    pub ensemble_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            num_steps: 1000,
            langevin_steps_per_predictor: 1,
            snr: 0.16,
            seed: 0,
            ensemble_size: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_steps == 0 {
            return Err(Error::Config("num_steps must be >= 1".into()));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::Config(format!("snr must be positive, got {}", self.snr)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Decreasing grid `1 = t_0 > ... > t_N = T_EPS`.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.num_steps;
        (0..=n)
            .map(|i| 1.0 - (1.0 - T_EPS) * i as f64 / n as f64)
            .collect()
    }
}

/// Receives the ensemble state after every sampler step.
pub trait StepObserver {
    /// `states` holds `members` normalized fields at time `t`.
    fn observe(&mut self, step: usize, t: f64, states: &[f64], members: usize);
}

impl StepObserver for () {
    fn observe(&mut self, _: usize, _: f64, _: &[f64], _: usize) {}
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub t: f64,
    /// Per-member mean of the normalized state.
    pub mean_normalized: Vec<f64>,
    /// Per-member mean intensity `mu_x` of the denormalized state, mm/day.
    pub mean_intensity: Vec<f64>,
}

/// Records the sample-average intensity trajectory of every member.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrace {
    precip_scale: f64,
    pub records: Vec<TraceRecord>,
}

impl IntensityTrace {
    pub fn new(precip_scale: f64) -> Self {
        Self {
            precip_scale,
            records: Vec::new(),
        }
    }

    /// Trajectory of member `k` as `(t, mu_x)` pairs.
    pub fn member(&self, k: usize) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.mean_intensity[k])).collect()
    }
}

impl StepObserver for IntensityTrace {
    fn observe(&mut self, step: usize, t: f64, states: &[f64], members: usize) {
        let d = states.len() / members;
        let mut mean_normalized = Vec::with_capacity(members);
        let mut mean_intensity = Vec::with_capacity(members);
        for field in states.chunks_exact(d) {
            mean_normalized.push(field.iter().sum::<f64>() / d as f64);
            mean_intensity.push(
                field
                    .iter()
                    .map(|&v| denormalize_value(v, self.precip_scale))
                    .sum::<f64>()
                    / d as f64,
            );
        }
        self.records.push(TraceRecord {
            step,
            t,
            mean_normalized,
            mean_intensity,
        });
    }
}

/// A single all-ones station-density channel; carries only the field shape
/// for unconditional score functions.
pub fn shape_only_condition(height: usize, width: usize) -> Result<ConditionTensor> {
    ConditionTensor::new(
        vec![GridField::constant(height, width, 1.0, Space::Normalized)?],
        vec![ChannelRole::StationDensity],
    )
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean over members of the per-member Euclidean norm.
fn mean_member_norm(v: &[f64], members: usize) -> f64 {
    let d = v.len() / members;
    v.chunks_exact(d).map(norm).sum::<f64>() / members as f64
}

fn ensure_finite(x: &[f64], step: usize, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            step,
            message: format!("non-finite {what}"),
        });
    }
    Ok(())
}

/// Per-member noise streams; member `k` sees the same noise whatever the
/// ensemble size.
struct EnsembleNoise {
    streams: Vec<rng::Rng>,
    dim: usize,
}

impl EnsembleNoise {
    fn new(seed: u64, members: usize, dim: usize) -> Self {
        Self {
            streams: (0..members)
                .map(|k| rng::stream(seed, rng::substream(streams::SAMPLER, k as u64)))
                .collect(),
            dim,
        }
    }

    fn draw(&mut self, out: &mut [f64]) {
        for (r, chunk) in self.streams.iter_mut().zip(out.chunks_exact_mut(self.dim)) {
            rng::fill_standard_normal(r, chunk);
        }
    }
}

/// Predictor-corrector sampling of the reverse SDE.
///
/// Starting from `x(1) ~ N(0, sigma_max^2 I)`, each of the `num_steps`
/// steps applies the reverse-diffusion predictor from `t_i` to `t_{i+1}`
/// (`x += (sigma_i^2 - sigma_{i+1}^2) s + sqrt(sigma_i^2 - sigma_{i+1}^2) z`)
/// followed by `langevin_steps_per_predictor` Langevin corrections at
/// `t_{i+1}` with step `2 (snr |z| / |s|)^2`, the norms averaged over the
/// ensemble. The observer sees the state after every step.
///
/// Returns the `ensemble_size` normalized members.
pub fn pc_sample<S: ScoreFn + ?Sized>(
    score: &S,
    y: &ConditionTensor,
    schedule: &NoiseSchedule,
    cfg: &SamplerConfig,
    observer: &mut dyn StepObserver,
) -> Result<Vec<GridField>> {
    schedule.validate()?;
    cfg.validate()?;
    let (h, w) = y
        .dims()
        .ok_or_else(|| Error::Dimension("condition has no channels".into()))?;
    let cell_km = y.channels()[0].cell_km();
    let members = cfg.ensemble_size;
    let d = h * w;
    let mut noise = EnsembleNoise::new(cfg.seed, members, d);
    let mut z = vec![0.0; members * d];

    let mut x = vec![0.0; members * d];
    noise.draw(&mut x);
    for v in x.iter_mut() {
        *v *= schedule.sigma_max;
    }

    let grid = cfg.time_grid();
    for step in 0..cfg.num_steps {
        let (t, t_next) = (grid[step], grid[step + 1]);

        let s = score.score(&x, members, y, t)?;
        ensure_finite(&s, step, "score in predictor")?;
        let var_step = schedule.sigma(t).powi(2) - schedule.sigma(t_next).powi(2);
        let g = var_step.sqrt();
        noise.draw(&mut z);
        for ((xi, si), zi) in x.iter_mut().zip(&s).zip(&z) {
            *xi += var_step * si + g * zi;
        }

        for _ in 0..cfg.langevin_steps_per_predictor {
            let s = score.score(&x, members, y, t_next)?;
            ensure_finite(&s, step, "score in corrector")?;
            noise.draw(&mut z);
            let grad_norm = mean_member_norm(&s, members);
            let noise_norm = mean_member_norm(&z, members);
            if grad_norm == 0.0 {
                continue;
            }
            let eps = 2.0 * (cfg.snr * noise_norm / grad_norm).powi(2);
            let amp = (2.0 * eps).sqrt();
            for ((xi, si), zi) in x.iter_mut().zip(&s).zip(&z) {
                *xi += eps * si + amp * zi;
            }
        }

        ensure_finite(&x, step, "sampler state")?;
        observer.observe(step, t_next, &x, members);
    }

    x.chunks_exact(d)
        .map(|m| GridField::new(h, w, m.to_vec(), Space::Normalized, cell_km))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::default()
    }

    #[test]
    fn sigma_endpoints_and_midpoint() {
        let s = sched();
        assert!((sigma_at(&s, 0.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((sigma_at(&s, 1.0).unwrap() - 50.0).abs() < 1e-12);
        assert!((sigma_at(&s, 0.5).unwrap() - (0.01f64 * 50.0).sqrt()).abs() < 1e-12);
        assert!(matches!(sigma_at(&s, 1.5), Err(Error::Domain(_))));
        assert!(matches!(sigma_at(&s, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn sigma_is_strictly_increasing() {
        let s = sched();
        let vals: Vec<f64> = (0..=100).map(|i| s.sigma(i as f64 / 100.0)).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_schedule() {
        assert!(NoiseSchedule::new(1.0, 0.5).is_err());
        assert!(NoiseSchedule::new(0.0, 0.5).is_err());
    }

    #[test]
    fn diffusion_matches_derivative_of_variance() {
        let s = sched();
        let (t, h) = (0.37, 1e-6);
        let fd = (s.sigma(t + h).powi(2) - s.sigma(t - h).powi(2)) / (2.0 * h);
        assert!((fd - s.diffusion_sq(t)).abs() < 1e-6 * fd);
    }

    #[test]
    fn perturb_kernel_std_at_t1() {
        let x0 = GridField::constant(400, 250, 0.3, Space::Normalized).unwrap();
        let (xt, z) = perturb(&x0, &sched(), 1.0, 17).unwrap();
        let dev: Vec<f64> = xt.values().iter().zip(x0.values()).map(|(a, b)| a - b).collect();
        let n = dev.len() as f64;
        let mean = dev.iter().sum::<f64>() / n;
        let std = (dev.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 50.0).abs() < 0.5, "std {std}");
        assert_eq!(xt.dims(), x0.dims());
        assert_eq!(z.dims(), x0.dims());
        let (again, _) = perturb(&x0, &sched(), 1.0, 17).unwrap();
        assert_eq!(xt, again);
    }

    #[test]
    fn perturb_at_t0_has_sigma_min_spread() {
        let x0 = GridField::constant(100, 100, 0.0, Space::Normalized).unwrap();
        let (xt, _) = perturb(&x0, &sched(), 0.0, 3).unwrap();
        let n = xt.len() as f64;
        let std = (xt.values().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        assert!((std - 0.01).abs() < 0.0005);
    }

    #[test]
    fn score_target_identities() {
        let s = sched();
        let x0 = GridField::normalized(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let zero = score_target(&x0, &x0, &s, 0.4).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let t = 0.6;
        let (xt, z) = perturb(&x0, &s, t, 5).unwrap();
        let st = score_target(&xt, &x0, &s, t).unwrap();
        let sig = s.sigma(t);
        for (a, zi) in st.values().iter().zip(z.values()) {
            assert!((a + zi / sig).abs() < 1e-10 * (1.0 + (zi / sig).abs()));
        }
    }

    #[test]
    fn score_target_matches_finite_difference_of_log_density() {
        let s = sched();
        let mut r = rng::stream(2, 0);
        for _ in 0..20 {
            let t: f64 = 0.05 + 0.9 * rand::Rng::gen::<f64>(&mut r);
            let sig = s.sigma(t);
            let x0v = rng::standard_normal_vec(&mut r, 4);
            let xtv: Vec<f64> = x0v.iter().map(|v| v + sig * rng::standard_normal(&mut r)).collect();
            let log_p = |x: &[f64]| -> f64 {
                x.iter()
                    .zip(&x0v)
                    .map(|(a, b)| -(a - b).powi(2) / (2.0 * sig * sig) - (sig * (2.0 * std::f64::consts::PI).sqrt()).ln())
                    .sum()
            };
            let x0 = GridField::normalized(2, 2, x0v.clone()).unwrap();
            let xt = GridField::normalized(2, 2, xtv.clone()).unwrap();
            let st = score_target(&xt, &x0, &s, t).unwrap();
            for k in 0..4 {
                let h = 1e-5 * sig.max(1e-3);
                let mut p = xtv.clone();
                p[k] += h;
                let mut m = xtv.clone();
                m[k] -= h;
                let fd = (log_p(&p) - log_p(&m)) / (2.0 * h);
                let exact = st.values()[k];
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-3), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn score_target_dimension_mismatch() {
        let a = GridField::normalized(1, 3, vec![0.0; 3]).unwrap();
        let b = GridField::normalized(3, 1, vec![0.0; 3]).unwrap();
        assert!(matches!(score_target(&a, &b, &sched(), 0.5), Err(Error::Dimension(_))));
    }

    #[test]
    fn sampler_defaults() {
        let c = SamplerConfig::default();
        assert_eq!(c.num_steps, 1000);
        assert_eq!(c.langevin_steps_per_predictor, 1);
        assert_eq!(c.snr, 0.16);
    }

    #[test]
    fn time_grid_is_decreasing() {
        let g = SamplerConfig { num_steps: 10, ..Default::default() }.time_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 1.0);
        assert!((g[10] - T_EPS).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    struct Exploding;
    impl ScoreFn for Exploding {
        fn score(&self, x: &[f64], _: usize, _: &ConditionTensor, t: f64) -> Result<Vec<f64>> {
            Ok(x.iter().map(|_| if t < 0.5 { f64::NAN } else { 0.0 }).collect())
        }
    }

    #[test]
    fn non_finite_score_reports_step() {
        let y = shape_only_condition(2, 2).unwrap();
        let cfg = SamplerConfig { num_steps: 10, ..Default::default() };
        let err = pc_sample(&Exploding, &y, &sched(), &cfg, &mut ()).unwrap_err();
        // t_6 = 0.40001 is the first time below 0.5; step 5 corrects at t_6
        assert!(matches!(err, Error::Numeric { step: 5, .. }), "{err:?}");
    }

    #[test]
    fn members_differ_and_runs_repeat() {
        let g = GaussianScore { mean: 0.2, data_std: 0.1, schedule: sched() };
        let y = shape_only_condition(4, 4).unwrap();
        let cfg = SamplerConfig { num_steps: 50, ensemble_size: 2, seed: 9, ..Default::default() };
        let a = pc_sample(&g, &y, &sched(), &cfg, &mut ()).unwrap();
        let b = pc_sample(&g, &y, &sched(), &cfg, &mut ()).unwrap();
        assert_ne!(a[0], a[1]);
        assert_eq!(a, b);
    }

    #[test]
    fn trace_has_one_record_per_step() {
        let g = GaussianScore { mean: 0.2, data_std: 0.1, schedule: sched() };
        let y = shape_only_condition(4, 4).unwrap();
        let cfg = SamplerConfig { num_steps: 37, ensemble_size: 3, ..Default::default() };
        let mut trace = IntensityTrace::new(5.0);
        let out = pc_sample(&g, &y, &sched(), &cfg, &mut trace).unwrap();
        assert_eq!(trace.records.len(), 37);
        assert!(trace.records.windows(2).all(|w| w[0].t > w[1].t));
        let last = trace.records.last().unwrap();
        assert_eq!(last.mean_normalized.len(), 3);
        assert!((last.mean_normalized[1] - out[1].mean()).abs() < 1e-12);
    }
}
