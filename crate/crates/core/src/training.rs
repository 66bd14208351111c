//! Training objective (denoising score matching plus a sliced-Wasserstein
//! penalty on one-step denoised estimates), optimizer loop and EMA.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{denormalize_value, generate_dataset, normalize, ConditionTensor, GridField, Space, SyntheticPairConfig};
use crate::metrics::quantile;
use crate::rng::{self, streams};
use crate::scorenet::{Architecture, NetInput, ScoreModel, Tape};
use crate::sde::{pc_sample, IntensityTrace, NoiseSchedule, SamplerConfig, T_EPS};
use crate::transport::{sample_projections, sliced_wasserstein_with_grad, wasserstein_1d, EmpiricalBatch, ProjectionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaWeighting {
    /// `lambda(t) = sigma(t)^2`.
    SigmaSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the Wasserstein penalty; 0 gives plain score matching.
    pub alpha: f64,
    pub batch_size: usize,
    pub num_iters: usize,
    pub ema_rate: f64,
    pub learning_rate: f64,
    pub lambda_weighting: LambdaWeighting,
    pub swd_projections: usize,
    pub seed: u64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    /// Checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            batch_size: 12,
            num_iters: 1000,
            ema_rate: 0.999,
            learning_rate: 2e-4,
            lambda_weighting: LambdaWeighting::SigmaSquared,
            swd_projections: 100,
            seed: 0,
            grad_clip: 1.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.alpha > 0.0 && self.batch_size < 2 {
            return fail("the Wasserstein penalty needs batch_size >= 2".into());
        }
        if !(0.0..1.0).contains(&self.ema_rate) {
            return fail(format!("ema_rate must lie in [0, 1), got {}", self.ema_rate));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.swd_projections == 0 {
            return fail("swd_projections must be positive".into());
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return fail(format!("grad_clip must be >= 0, got {}", self.grad_clip));
        }
        Ok(())
    }
}

/// Normalized targets and network-space conditions, ready for batching.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    height: usize,
    width: usize,
    condition_channels: usize,
    coarse_channel: Option<usize>,
    targets: Vec<Vec<f64>>,
    conds: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn from_pairs(pairs: &[(GridField, ConditionTensor)], precip_scale: f64) -> Result<Self> {
        let (first, y0) = pairs
            .first()
            .ok_or_else(|| Error::Config("training set is empty".into()))?;
        let (height, width) = first.dims();
        let mut targets = Vec::with_capacity(pairs.len());
        let mut conds = Vec::with_capacity(pairs.len());
        for (x, y) in pairs {
            if x.dims() != (height, width) || y.dims() != Some((height, width)) {
                return Err(Error::Dimension("training pairs must share one field size".into()));
            }
            if y.roles() != y0.roles() {
                return Err(Error::Dimension("training pairs must share one channel layout".into()));
            }
            let x = match x.space() {
                Space::Physical => normalize(x, precip_scale)?,
                Space::Normalized => x.clone(),
            };
            targets.push(x.into_values());
            conds.push(y.to_network_space(precip_scale)?.flat_values());
        }
        Ok(Self {
            height,
            width,
            condition_channels: y0.num_channels(),
            coarse_channel: y0.coarse_precip_index(),
            targets,
            conds,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn condition_channels(&self) -> usize {
        self.condition_channels
    }
}

/// A perturbed minibatch `x(t) = x(0) + sigma(t) z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyBatch {
    /// Network input; `input.x` holds `x(t)`.
    pub input: NetInput,
    pub x0: Vec<f64>,
    pub noise: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl NoisyBatch {
    /// Draws `batch_size` examples with replacement, one `t ~ U(T_EPS, 1)`
    /// and one noise field per example.
    pub fn draw(set: &TrainingSet, schedule: &NoiseSchedule, batch_size: usize, r: &mut rng::Rng) -> Self {
        let d = set.height * set.width;
        let mut x0 = Vec::with_capacity(batch_size * d);
        let mut cond = Vec::with_capacity(batch_size * d * set.condition_channels);
        let mut t = Vec::with_capacity(batch_size);
        let mut noise = vec![0.0; batch_size * d];
        for b in 0..batch_size {
            let i = r.gen_range(0..set.len());
            x0.extend_from_slice(&set.targets[i]);
            cond.extend_from_slice(&set.conds[i]);
            t.push(T_EPS + (1.0 - T_EPS) * r.gen::<f64>());
            rng::fill_standard_normal(r, &mut noise[b * d..(b + 1) * d]);
        }
        Self::new(set, x0, cond, t, noise, schedule)
    }

    fn new(set: &TrainingSet, x0: Vec<f64>, cond: Vec<f64>, t: Vec<f64>, noise: Vec<f64>, schedule: &NoiseSchedule) -> Self {
        let d = set.height * set.width;
        let sigmas: Vec<f64> = t.iter().map(|&t| schedule.sigma(t)).collect();
        let xt = x0
            .iter()
            .zip(&noise)
            .enumerate()
            .map(|(i, (x, z))| x + sigmas[i / d] * z)
            .collect();
        Self {
            input: NetInput {
                batch: t.len(),
                height: set.height,
                width: set.width,
                x: xt,
                cond,
                coarse_channel: set.coarse_channel,
                t,
            },
            x0,
            noise,
            sigmas,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.input.batch
    }

    fn dim(&self) -> usize {
        self.input.height * self.input.width
    }
}

/// `mean |eps_hat - z|^2` and its gradient with respect to `eps_hat`.
fn score_matching_terms(eps: &[f64], noise: &[f64]) -> (f64, Vec<f64>) {
    let n = eps.len() as f64;
    let mut loss = 0.0;
    let grad = eps
        .iter()
        .zip(noise)
        .map(|(e, z)| {
            let r = e - z;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    (loss / n, grad)
}

/// Sliced `W1` between the denoised estimates `x(t) - sigma eps_hat` and
/// the clean batch, with its gradient with respect to `eps_hat`.
fn wdr_terms(eps: &[f64], batch: &NoisyBatch, proj: &ProjectionSet) -> Result<(f64, Vec<f64>)> {
    let m = batch.batch_size();
    if m < 2 {
        return Err(Error::Config("the Wasserstein penalty needs a batch of at least 2".into()));
    }
    let d = batch.dim();
    let x0_hat: Vec<f64> = batch
        .input
        .x
        .iter()
        .zip(eps)
        .enumerate()
        .map(|(i, (x, e))| x - batch.sigmas[i / d] * e)
        .collect();
    let a = EmpiricalBatch::new(m, d, x0_hat)?;
    let b = EmpiricalBatch::new(m, d, batch.x0.clone())?;
    let (value, mut grad) = sliced_wasserstein_with_grad(&a, &b, proj)?;
    for (i, g) in grad.iter_mut().enumerate() {
        *g *= -batch.sigmas[i / d];
    }
    Ok((value, grad))
}

/// Value of each objective term and the parameter gradient of `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    pub score: f64,
    /// `None` when the penalty was not evaluated (`alpha = 0`).
    pub wdr: Option<f64>,
    pub total: f64,
    pub grad: Vec<f64>,
}

/// Denoising score-matching loss with `lambda(t) = sigma(t)^2`, i.e.
/// `mean |eps_hat - z|^2`, and its parameter gradient.
pub fn score_matching_loss(model: &ScoreModel, batch: &NoisyBatch) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let eps = model.forward_recorded(&batch.input, &mut tape)?;
    let (loss, d_eps) = score_matching_terms(&eps, &batch.noise);
    Ok((loss, model.backward(&tape, &d_eps)?))
}

/// Sliced-Wasserstein penalty between one-step denoised estimates and the
/// clean batch, and its parameter gradient.
pub fn wdr_loss(model: &ScoreModel, batch: &NoisyBatch, proj: &ProjectionSet) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let eps = model.forward_recorded(&batch.input, &mut tape)?;
    let (loss, d_eps) = wdr_terms(&eps, batch, proj)?;
    Ok((loss, model.backward(&tape, &d_eps)?))
}

/// `(1 - alpha) score + alpha wdr`. With `alpha = 0` the penalty is skipped
/// entirely and `proj` may be `None`.
pub fn combined_loss(
    model: &ScoreModel,
    batch: &NoisyBatch,
    alpha: f64,
    proj: Option<&ProjectionSet>,
) -> Result<LossTerms> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut tape = Tape::new();
    let eps = model.forward_recorded(&batch.input, &mut tape)?;
    let (score, mut d_eps) = score_matching_terms(&eps, &batch.noise);
    if alpha == 0.0 {
        let grad = model.backward(&tape, &d_eps)?;
        return Ok(LossTerms {
            score,
            wdr: None,
            total: score,
            grad,
        });
    }
    let proj = proj.ok_or_else(|| Error::Config("alpha > 0 needs a projection set".into()))?;
    if !score.is_finite() {
        // a diverged network; let the caller report it with its step
        return Ok(LossTerms {
            score,
            wdr: Some(f64::NAN),
            total: f64::NAN,
            grad: vec![f64::NAN; model.num_params()],
        });
    }
    let (wdr, d_wdr) = wdr_terms(&eps, batch, proj)?;
    for (g, w) in d_eps.iter_mut().zip(&d_wdr) {
        *g = (1.0 - alpha) * *g + alpha * w;
    }
    Ok(LossTerms {
        score,
        wdr: Some(wdr),
        total: (1.0 - alpha) * score + alpha * wdr,
        grad: model.backward(&tape, &d_eps)?,
    })
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u32,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            steps: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps as i32);
        let c2 = 1.0 - self.beta2.powi(self.steps as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// Scales `grad` to norm `clip` when it is longer; returns the original norm.
pub fn clip_grad_norm(grad: &mut [f64], clip: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if clip > 0.0 && norm > clip {
        let s = clip / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// `ema <- rate ema + (1 - rate) params`.
pub fn ema_update(ema: &mut [f64], params: &[f64], rate: f64) {
    for (e, p) in ema.iter_mut().zip(params) {
        *e = rate * *e + (1.0 - rate) * p;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRecord {
    pub step: usize,
    pub score_loss: f64,
    pub wdr_loss: Option<f64>,
    pub total: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

pub fn loss_history_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("step,score_loss,wdr_loss,total,grad_norm\n");
    for r in history {
        let wdr = r.wdr_loss.map(|w| w.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", r.step, r.score_loss, wdr, r.total, r.grad_norm);
    }
    out
}

pub fn write_loss_history(path: impl AsRef<Path>, history: &[LossRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, loss_history_csv(history)).map_err(|e| Error::io(path, e))
}

/// Mutable training state: parameters, EMA, optimizer moments, batch
/// stream and loss history.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    model: ScoreModel,
    ema: ScoreModel,
    adam: Adam,
    batch_rng: rng::Rng,
    step: usize,
    history: Vec<LossRecord>,
}

impl Trainer {
    pub fn new(model: ScoreModel, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            adam: Adam::new(model.num_params(), cfg.learning_rate),
            ema: model.clone(),
            model,
            batch_rng: rng::stream(cfg.seed, streams::BATCH),
            step: 0,
            history: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ScoreModel {
        &self.model
    }

    pub fn ema(&self) -> &ScoreModel {
        &self.ema
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &[LossRecord] {
        &self.history
    }

    /// Projection seed for a given optimizer step; independent of the
    /// batch stream so the penalty never shifts the batch draws.
    pub fn projection_seed(seed: u64, step: usize) -> u64 {
        rng::substream(seed ^ streams::PROJECTIONS, step as u64)
    }

    pub fn step(&mut self, set: &TrainingSet) -> Result<LossRecord> {
        let arch = self.model.architecture();
        if set.condition_channels() != arch.condition_channels {
            return Err(Error::Dimension(format!(
                "model expects {} condition channels, data has {}",
                arch.condition_channels,
                set.condition_channels()
            )));
        }
        let batch = NoisyBatch::draw(set, self.model.schedule(), self.cfg.batch_size, &mut self.batch_rng);
        let proj = if self.cfg.alpha > 0.0 {
            let (h, w) = set.dims();
            Some(sample_projections(
                h * w,
                self.cfg.swd_projections,
                Self::projection_seed(self.cfg.seed, self.step),
            )?)
        } else {
            None
        };
        let mut terms = combined_loss(&self.model, &batch, self.cfg.alpha, proj.as_ref())?;
        let grad_norm = clip_grad_norm(&mut terms.grad, self.cfg.grad_clip);
        if !terms.total.is_finite() || !grad_norm.is_finite() {
            return Err(Error::Training {
                step: self.step,
                message: format!("loss {} with gradient norm {grad_norm}", terms.total),
            });
        }
        self.adam.update(self.model.params_mut(), &terms.grad);
        ema_update(self.ema.params_mut(), self.model.params(), self.cfg.ema_rate);
        let record = LossRecord {
            step: self.step,
            score_loss: terms.score,
            wdr_loss: terms.wdr,
            total: terms.total,
            grad_norm,
        };
        self.history.push(record);
        self.step += 1;
        Ok(record)
    }

    /// Runs the remaining steps up to `num_iters`, calling `after_step`
    /// after each one.
    pub fn run(
        &mut self,
        set: &TrainingSet,
        after_step: &mut dyn FnMut(&Trainer) -> Result<()>,
    ) -> Result<()> {
        while self.step < self.cfg.num_iters {
            self.step(set)?;
            after_step(self)?;
        }
        Ok(())
    }
}

/// Trains `model` for `cfg.num_iters` steps.
pub fn train(set: &TrainingSet, model: ScoreModel, cfg: TrainConfig) -> Result<Trainer> {
    let mut trainer = Trainer::new(model, cfg)?;
    trainer.run(set, &mut |_| Ok(()))?;
    Ok(trainer)
}

/// Paired baseline / regularized training and sampling on synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasExperimentConfig {
    pub data: SyntheticPairConfig,
    pub train_pairs: usize,
    pub eval_pairs: usize,
    pub architecture: Architecture,
    pub schedule: NoiseSchedule,
    /// Shared by both runs except for `alpha`.
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub baseline_alpha: f64,
    pub regularized_alpha: f64,
}

impl Default for BiasExperimentConfig {
    fn default() -> Self {
        Self {
            data: SyntheticPairConfig::default(),
            train_pairs: 64,
            eval_pairs: 4,
            architecture: Architecture {
                hidden_channels: 8,
                ..Default::default()
            },
            schedule: NoiseSchedule::default(),
            train: TrainConfig::default(),
            sampler: SamplerConfig {
                num_steps: 200,
                ensemble_size: 4,
                ..Default::default()
            },
            baseline_alpha: 0.0,
            regularized_alpha: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRun {
    pub alpha: f64,
    pub history: Vec<LossRecord>,
    /// One trace per evaluation pair, each covering every ensemble member.
    pub traces: Vec<IntensityTrace>,
    /// `W1` between pooled sample and pooled target intensities, mm/day.
    pub intensity_w1: f64,
    /// `|Q_0.999(samples) - Q_0.999(targets)|`, mm/day.
    pub q999_error: f64,
    /// Mean intensity of the samples and of the targets, mm/day.
    pub sample_mean: f64,
    pub target_mean: f64,
    pub initial_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub baseline: BiasRun,
    pub regularized: BiasRun,
}

impl BiasReport {
    pub fn regularized_w1_not_worse(&self) -> bool {
        self.regularized.intensity_w1 <= self.baseline.intensity_w1
    }

    pub fn regularized_q999_not_worse(&self) -> bool {
        self.regularized.q999_error <= self.baseline.q999_error
    }

    /// Summary table with one row per run.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,intensity_w1,q999_error,sample_mean,target_mean,final_loss\n");
        for run in [&self.baseline, &self.regularized] {
            let last = run.history.last().map(|r| r.score_loss).unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                run.alpha, run.intensity_w1, run.q999_error, run.sample_mean, run.target_mean, last
            );
        }
        out
    }

    /// Long-format trajectories: `alpha,pair,member,step,t,mean_intensity`.
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("alpha,pair,member,step,t,mean_intensity\n");
        for run in [&self.baseline, &self.regularized] {
            for (p, trace) in run.traces.iter().enumerate() {
                for r in &trace.records {
                    for (k, mu) in r.mean_intensity.iter().enumerate() {
                        let _ = writeln!(out, "{},{p},{k},{},{},{mu}", run.alpha, r.step, r.t);
                    }
                }
            }
        }
        out
    }
}

fn run_arm(
    cfg: &BiasExperimentConfig,
    alpha: f64,
    set: &TrainingSet,
    eval: &[(GridField, ConditionTensor)],
) -> Result<BiasRun> {
    let arch = Architecture {
        condition_channels: set.condition_channels(),
        ..cfg.architecture
    };
    let model = ScoreModel::new(arch, cfg.schedule, cfg.train.seed)?;
    let initial_params = model.params().to_vec();
    let trainer = train(set, model, TrainConfig { alpha, ..cfg.train })?;
    let mut traces = Vec::with_capacity(eval.len());
    let mut samples = Vec::new();
    let mut targets = Vec::new();
    for (i, (target, y)) in eval.iter().enumerate() {
        let mut trace = IntensityTrace::new(arch.precip_scale);
        let sampler = SamplerConfig {
            seed: rng::substream(cfg.sampler.seed, i as u64),
            ..cfg.sampler
        };
        let members = pc_sample(trainer.ema(), y, &cfg.schedule, &sampler, &mut trace)?;
        for m in &members {
            samples.extend(m.values().iter().map(|&v| denormalize_value(v, arch.precip_scale)));
        }
        targets.extend_from_slice(target.values());
        traces.push(trace);
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            step: cfg.sampler.num_steps,
            message: format!("alpha {alpha} run produced intensities that overflow after denormalization"),
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(BiasRun {
        alpha,
        history: trainer.history().to_vec(),
        traces,
        intensity_w1: wasserstein_1d(&samples, &targets)?,
        q999_error: (quantile(&samples, 0.999)? - quantile(&targets, 0.999)?).abs(),
        sample_mean: mean(&samples),
        target_mean: mean(&targets),
        initial_params,
    })
}

/// Trains the baseline and regularized models with identical seeds, data
/// and step budget, then samples matched ensembles on held-out pairs.
pub fn bias_trace_experiment(cfg: &BiasExperimentConfig) -> Result<BiasReport> {
    if cfg.train_pairs == 0 || cfg.eval_pairs == 0 {
        return Err(Error::Config("train_pairs and eval_pairs must be positive".into()));
    }
    let pairs = generate_dataset(&cfg.data, cfg.train_pairs + cfg.eval_pairs)?;
    let (train_pairs, eval) = pairs.split_at(cfg.train_pairs);
    let set = TrainingSet::from_pairs(train_pairs, cfg.architecture.precip_scale)?;
    Ok(BiasReport {
        baseline: run_arm(cfg, cfg.baseline_alpha, &set, eval)?,
        regularized: run_arm(cfg, cfg.regularized_alpha, &set, eval)?,
    })
}
