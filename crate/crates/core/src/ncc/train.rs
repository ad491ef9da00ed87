use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::{Architecture, NccError, NccModel, Objective, TrainingBatch};
use crate::nn::RmsProp;
use crate::seed::{component_rng, derive_seed};
use crate::synthgen::{make_training_minibatch, CausalSample, Generator, GeneratorConfig, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Fresh scatterplots per minibatch; each contributes both orientations.
    pub pairs_per_batch: usize,
    pub architecture: Architecture,
    pub validation_size: usize,
    pub with_independent: bool,
    pub objective: Objective,
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub generator: GeneratorConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            pairs_per_batch: 16,
            architecture: Architecture::default(),
            validation_size: 10_000,
            with_independent: false,
            objective: Objective::Composite,
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
            generator: GeneratorConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NccError> {
        self.architecture.validate()?;
        self.generator.validate()?;
        if self.iterations == 0 || self.pairs_per_batch == 0 {
            return Err(NccError::InvalidConfig(
                "iterations and pairs_per_batch must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && (0.0..1.0).contains(&self.decay) && self.epsilon > 0.0) {
            return Err(NccError::InvalidConfig(format!(
                "optimizer lr={} decay={} eps={} out of range",
                self.learning_rate, self.decay, self.epsilon
            )));
        }
        Ok(())
    }

    /// Stable key identifying every setting that influences the trained model.
    pub fn cache_key(&self) -> String {
        format!("{:016x}", derive_seed(0, &format!("{self:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NccModel,
    /// Minibatch loss per iteration.
    pub history: Vec<f64>,
}

/// Trains from scratch with RMSProp on freshly generated minibatches.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome, NccError> {
    cfg.validate()?;
    let mut init_rng = component_rng(cfg.seed, "ncc/init");
    let mut data_rng = component_rng(cfg.seed, "ncc/data");
    let mut dropout_rng = component_rng(cfg.seed, "ncc/dropout");
    let mut model = NccModel::new(cfg.architecture, &mut init_rng)?;
    let mut opt = RmsProp::new(cfg.learning_rate, cfg.decay, cfg.epsilon);
    let mut history = Vec::with_capacity(cfg.iterations);
    let report_every = (cfg.iterations / 20).max(1);
    let started = Instant::now();
    for it in 0..cfg.iterations {
        let samples = make_training_minibatch(
            &cfg.generator,
            cfg.pairs_per_batch,
            cfg.with_independent,
            &mut data_rng,
        )?;
        let batch = TrainingBatch::new(&samples, cfg.objective)?;
        let (loss, grads) = model.loss_and_gradients(&batch, cfg.objective, &mut dropout_rng)?;
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        opt.step(&mut model.parameters_mut(), &grad_refs)?;
        history.push(loss);
        if (it + 1) % report_every == 0 {
            let window = &history[history.len().saturating_sub(report_every)..];
            log::info!(
                "iteration {:>6}/{} mean loss {:.4} ({:.0}s)",
                it + 1,
                cfg.iterations,
                window.iter().sum::<f64>() / window.len() as f64,
                started.elapsed().as_secs_f64()
            );
        }
    }
    Ok(TrainOutcome { model, history })
}

fn cache_paths(dir: &Path, cfg: &TrainConfig) -> (PathBuf, PathBuf) {
    let key = cfg.cache_key();
    (
        dir.join(format!("ncc-{key}.ckpt")),
        dir.join(format!("ncc-{key}.history.csv")),
    )
}

/// [`train`], reusing a checkpoint in `dir` written by an earlier identical run.
///
/// Training is deterministic, so a cached checkpoint equals a fresh one.
pub fn train_cached(cfg: &TrainConfig, dir: &Path) -> Result<TrainOutcome, NccError> {
    let io = |e: std::io::Error| NccError::Io(e.to_string());
    let (ckpt, hist) = cache_paths(dir, cfg);
    if ckpt.exists() && hist.exists() {
        let model = NccModel::load(&ckpt)?;
        let history = read_history(&hist).map_err(io)?;
        log::info!("loaded cached model {}", ckpt.display());
        return Ok(TrainOutcome { model, history });
    }
    let out = train(cfg)?;
    std::fs::create_dir_all(dir).map_err(io)?;
    out.model.save(&ckpt).map_err(io)?;
    write_history(&hist, &out.history).map_err(io)?;
    Ok(out)
}

/// Writes `iteration,loss` rows.
pub fn write_history(path: &Path, history: &[f64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "loss"])?;
    for (i, l) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    w.flush()
}

pub fn read_history(path: &Path) -> std::io::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, "bad history row")
            })
        })
        .collect()
}

/// Held-out synthetic samples, each presented in a random orientation.
pub fn validation_set(
    generator: &GeneratorConfig,
    size: usize,
    seed: u64,
) -> Result<Vec<CausalSample>, NccError> {
    let cfg = GeneratorConfig {
        seed: derive_seed(seed, "ncc/validation"),
        ..generator.clone()
    };
    Ok(Generator::new(cfg)?.labeled_set(size)?)
}

/// Fraction of samples whose symmetric score falls on the side of their label.
/// A score of exactly 0.5 earns half credit. Independent-labeled samples are skipped.
pub fn validate(model: &NccModel, samples: &[CausalSample]) -> Result<f64, NccError> {
    let credits = samples
        .par_iter()
        .filter(|s| s.label != Label::Independent)
        .map(|s| {
            let score = model.symmetric(s)?;
            let predicted_anticausal = s.label == Label::Anticausal;
            Ok(if score == 0.5 {
                0.5
            } else if (score > 0.5) == predicted_anticausal {
                1.0
            } else {
                0.0
            })
        })
        .collect::<Result<Vec<f64>, NccError>>()?;
    if credits.is_empty() {
        return Ok(0.0);
    }
    Ok(credits.iter().sum::<f64>() / credits.len() as f64)
}
