use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wassdiff_core::grid::{denormalize, generate_dataset, read_condition, read_grid, write_grid};
use wassdiff_core::metrics::{evaluate_sample, qq_curve, Ensemble, MetricReport};
use wassdiff_core::scorenet::{load_checkpoint, save_checkpoint, Architecture, ScoreModel};
use wassdiff_core::sde::{pc_sample, SamplerConfig};
use wassdiff_core::tiled::{plan_patches, tiled_pc_sample, BlendKernel, TiledConfig};
use wassdiff_core::training::{bias_trace_experiment, write_loss_history, Trainer, TrainingSet};
use wassdiff_core::transport::tail_sensitivity_demo;
use wassdiff_core::{ConditionTensor, Error, Result};

mod config;
mod data;

use config::{io_error, RunConfig};

#[derive(Parser)]
#[command(name = "wassdiff", version, about = "Score-based diffusion downscaling with Wasserstein regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; defaults are used for missing sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// A `<name>.cond.json` descriptor or a data directory.
    #[arg(long)]
    condition: PathBuf,
    /// Members per condition; overrides `sampler.ensemble_size`.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Overrides `sampler.num_steps`.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic (target, condition) pairs and a manifest.
    GenData {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a score model; writes checkpoints and a loss history.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `train.num_iters`.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Draw ensemble members for one condition or a whole data directory.
    Sample(SampleArgs),
    /// As `sample`, evaluating the score on overlapping patches.
    TiledSample {
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Per-sample metrics of predictions against observations.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        /// Ensemble directories `<name>/`, single grids, or a data directory.
        #[arg(long)]
        pred: PathBuf,
        /// A data directory or a directory of observed grids.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Maximum members used per sample.
        #[arg(long, default_value_t = 13)]
        ensemble: usize,
    },
    /// Quantile-quantile curve of an ensemble against one observation.
    Qq {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        ensemble_dir: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Maximum members used.
        #[arg(long, default_value_t = 16)]
        ensemble: usize,
    },
    /// Compare W1, KL and JS on the heavy-tail fixture.
    DistanceDemo {
        /// Also write `distance-demo.csv` and the effective config here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and sample matched baseline and regularized models.
    BiasExperiment {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Format(_) | Error::Parse(_) => 2,
        Error::Numeric { .. } | Error::Training { .. } => 3,
        Error::Config(_) | Error::Domain(_) | Error::State(_) | Error::Dimension(_) => 1,
    }
}

fn required(value: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    value.ok_or_else(|| Error::Config(format!("missing {what}: pass it as a flag or under `paths` in the config")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn gen_data(mut cfg: RunConfig, out: Option<PathBuf>) -> Result<()> {
    let out = required(out.or(cfg.paths.data_dir.clone()), "output directory")?;
    cfg.paths.data_dir = Some(out.clone());
    let pairs = generate_dataset(&cfg.data.synthetic, cfg.data.num_samples)?;
    let manifest = data::write_dataset(&out, &pairs)?;
    cfg.write_effective(&out)?;
    println!(
        "wrote {} pairs of {}x{} to {}",
        manifest.samples.len(),
        manifest.height,
        manifest.width,
        out.display()
    );
    Ok(())
}

fn train(mut cfg: RunConfig, data_dir: Option<PathBuf>, out: Option<PathBuf>, iters: Option<usize>) -> Result<()> {
    let data_dir = required(data_dir.or(cfg.paths.data_dir.clone()), "data directory")?;
    let out = required(out.or(cfg.paths.out_dir.clone()), "output directory")?;
    if let Some(n) = iters {
        cfg.train.num_iters = n;
    }
    cfg.paths.data_dir = Some(data_dir.clone());
    cfg.paths.out_dir = Some(out.clone());
    let (_, pairs) = data::read_dataset(&data_dir)?;
    let set = TrainingSet::from_pairs(&pairs, cfg.model.precip_scale)?;
    if set.condition_channels() != cfg.model.condition_channels {
        return Err(Error::Config(format!(
            "model.condition_channels is {} but the data has {} condition channels",
            cfg.model.condition_channels,
            set.condition_channels()
        )));
    }
    cfg.write_effective(&out)?;
    let model = ScoreModel::new(cfg.model, cfg.schedule, cfg.train.seed)?;
    println!("training {} parameters for {} steps", model.num_params(), cfg.train.num_iters);
    let mut trainer = Trainer::new(model, cfg.train)?;
    let every = cfg.train.checkpoint_every;
    let started = Instant::now();
    let report_every = (cfg.train.num_iters / 10).max(1);
    trainer.run(&set, &mut |t| {
        let step = t.steps_done();
        if every > 0 && step % every == 0 {
            save_checkpoint(out.join(format!("checkpoint_{step:06}.ckpt")), t.ema(), step, true)?;
        }
        if step % report_every == 0 {
            let last = t.history().last().expect("a step was recorded");
            println!(
                "step {step}: score {:.4} total {:.4} ({:.0}s)",
                last.score_loss,
                last.total,
                started.elapsed().as_secs_f64()
            );
        }
        Ok(())
    })?;
    save_checkpoint(out.join("final.ckpt"), trainer.ema(), trainer.steps_done(), true)?;
    write_loss_history(out.join("loss.csv"), trainer.history())?;
    Ok(())
}

/// `(name, condition)` pairs from a descriptor or a data directory.
fn load_conditions(path: &Path) -> Result<Vec<(String, ConditionTensor)>> {
    if path.is_dir() {
        let manifest = data::read_manifest(path)?;
        return manifest
            .samples
            .iter()
            .map(|name| Ok((name.clone(), read_condition(data::condition_path(path, name))?)))
            .collect();
    }
    let file = path.file_name().unwrap_or_default().to_string_lossy();
    let name = file.strip_suffix(".cond.json").unwrap_or(&file).to_string();
    Ok(vec![(name, read_condition(path)?)])
}

fn checkpoint_path(cfg: &RunConfig, arg: Option<PathBuf>) -> Result<PathBuf> {
    required(arg.or(cfg.paths.checkpoint.clone()), "checkpoint")
}

fn sample(mut cfg: RunConfig, args: SampleArgs, tiled: Option<TiledConfig>) -> Result<()> {
    let ckpt = checkpoint_path(&cfg, args.checkpoint)?;
    if let Some(m) = args.ensemble {
        cfg.sampler.ensemble_size = m;
    }
    if let Some(n) = args.steps {
        cfg.sampler.num_steps = n;
    }
    if let Some(t) = tiled {
        cfg.tiled = t;
    }
    cfg.paths.checkpoint = Some(ckpt.clone());
    cfg.paths.out_dir = Some(args.out.clone());
    cfg.validate()?;
    let (model, header) = load_checkpoint(&ckpt)?;
    cfg.model = header.architecture;
    cfg.schedule = header.schedule;
    cfg.write_effective(&args.out)?;
    let arch: Architecture = *model.architecture();
    for (i, (name, y)) in load_conditions(&args.condition)?.into_iter().enumerate() {
        let sampler = SamplerConfig {
            seed: wassdiff_core::rng::substream(cfg.sampler.seed, i as u64),
            ..cfg.sampler
        };
        let members = match tiled {
            None => pc_sample(&model, &y, &cfg.schedule, &sampler, &mut ())?,
            Some(t) => {
                let (h, w) = y
                    .dims()
                    .ok_or_else(|| Error::Dimension("condition has no channels".into()))?;
                let plan = plan_patches(h, w, t.patch, t.stride)?;
                let kernel = match t.kernel_std {
                    Some(std) => BlendKernel::gaussian(t.patch, std)?,
                    None => BlendKernel::for_patch(t.patch)?,
                };
                tiled_pc_sample(&model, &y, &cfg.schedule, &sampler, &plan, &kernel, &mut ())?
            }
        };
        let dir = args.out.join(&name);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        for (k, m) in members.iter().enumerate() {
            write_grid(&denormalize(m, arch.precip_scale)?, data::member_path(&dir, k))?;
        }
        println!("{name}: {} members", members.len());
    }
    Ok(())
}

fn evaluate(cfg: RunConfig, pred: &Path, obs: &Path, out: &Path, ensemble: usize) -> Result<()> {
    let observations = data::read_observations(obs)?;
    if observations.is_empty() {
        return Err(Error::Config(format!("no observations in {}", obs.display())));
    }
    let mut rows = Vec::with_capacity(observations.len());
    for (name, o) in &observations {
        let members = data::read_prediction(pred, name, Some(ensemble))?;
        let ens = Ensemble::new(members)?;
        rows.push((name.clone(), evaluate_sample(&ens, o, &cfg.metrics)?));
    }
    let report = MetricReport {
        config: cfg.metrics,
        cell_km: observations[0].1.cell_km(),
        rows,
    };
    write_text(out, &report.to_csv())?;
    cfg.write_effective(&parent_dir(out))?;
    let (mean, _) = report.summary();
    println!(
        "{} samples: MAE {:.4} bias {:.4} CSI {:.4} HRRE {:.2} MPPE {:.4} CRPS {:.4}",
        report.rows.len(),
        mean.mae,
        mean.bias,
        mean.csi,
        mean.hrre,
        mean.mppe,
        mean.crps
    );
    Ok(())
}

fn qq(cfg: RunConfig, ensemble_dir: &Path, obs: &Path, out: &Path, ensemble: usize) -> Result<()> {
    let ens = Ensemble::new(data::read_ensemble_dir(ensemble_dir, Some(ensemble))?)?;
    let curve = qq_curve(&ens, &read_grid(obs)?)?;
    write_text(out, &curve.to_csv())?;
    cfg.write_effective(&parent_dir(out))?;
    println!("{} members, {} percentiles", ens.size(), curve.percentiles.len());
    Ok(())
}

fn distance_demo(out: Option<PathBuf>) -> Result<()> {
    let report = tail_sensitivity_demo();
    let csv = report.to_csv();
    print!("{csv}");
    println!(
        "wasserstein ranks P1 closer while KL and JS rank P2 closer: {}",
        report.reproduces_ordering()
    );
    if let Some(dir) = out {
        write_text(&dir.join("distance-demo.csv"), &csv)?;
        RunConfig::default().write_effective(&dir)?;
    }
    Ok(())
}

fn bias_experiment(mut cfg: RunConfig, out: Option<PathBuf>) -> Result<()> {
    let out = required(out.or(cfg.paths.out_dir.clone()), "output directory")?;
    cfg.paths.out_dir = Some(out.clone());
    cfg.write_effective(&out)?;
    let report = bias_trace_experiment(&cfg.bias_experiment())?;
    write_text(&out.join("summary.csv"), &report.to_csv())?;
    write_text(&out.join("traces.csv"), &report.traces_csv())?;
    write_loss_history(out.join("loss_baseline.csv"), &report.baseline.history)?;
    write_loss_history(out.join("loss_regularized.csv"), &report.regularized.history)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { config, out } => gen_data(RunConfig::load(config.config.as_deref())?, out),
        Command::Train { config, data, out, iters } => {
            train(RunConfig::load(config.config.as_deref())?, data, out, iters)
        }
        Command::Sample(args) => {
            let cfg = RunConfig::load(args.config.config.as_deref())?;
            sample(cfg, args, None)
        }
        Command::TiledSample { sample: args, patch, stride } => {
            let cfg = RunConfig::load(args.config.config.as_deref())?;
            let tiled = TiledConfig {
                patch: patch.unwrap_or(cfg.tiled.patch),
                stride: stride.unwrap_or(cfg.tiled.stride),
                kernel_std: cfg.tiled.kernel_std,
            };
            sample(cfg, args, Some(tiled))
        }
        Command::Evaluate { config, pred, obs, out, ensemble } => {
            evaluate(RunConfig::load(config.config.as_deref())?, &pred, &obs, &out, ensemble)
        }
        Command::Qq { config, ensemble_dir, obs, out, ensemble } => {
            qq(RunConfig::load(config.config.as_deref())?, &ensemble_dir, &obs, &out, ensemble)
        }
        Command::DistanceDemo { out } => distance_demo(out),
        Command::BiasExperiment { config, out } => bias_experiment(RunConfig::load(config.config.as_deref())?, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
