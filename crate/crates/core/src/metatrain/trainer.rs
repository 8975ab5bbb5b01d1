//! The meta-learning loop: sample episodes, one-shot write, query, BCE loss,
//! parameter update.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffcore::{AdamConfig, AdamState, Array, ParamStore};
use crate::tasks::{sample_episode, DatasetSource, Episode, TaskKind, TaskSpec};

use super::model::{AnyModel, EpisodeEval, ModelConfig};
use super::TrainError;

fn default_lr() -> f64 {
    1e-3
}

fn default_batch() -> usize {
    8
}

fn default_eval_period() -> usize {
    1000
}

fn default_eval_episodes() -> usize {
    8
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub task: TaskSpec,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Episodes per optimizer step.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub max_steps: usize,
    #[serde(default = "default_eval_period")]
    pub eval_period: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Global-norm gradient clip; defaults to 5.0 for the LSTM (BPTT
    /// stability) and none for the others.
    #[serde(default)]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub allow_long_unroll: bool,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate < 0.0 {
            return Err(TrainError::Config("learning_rate must be >= 0".to_string()));
        }
        if self.batch_size == 0 || self.eval_episodes == 0 || self.eval_period == 0 {
            return Err(TrainError::Config(
                "batch_size, eval_episodes, eval_period must be >= 1".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(TrainError::Config(format!(
                "test_fraction {} outside [0, 1)",
                self.test_fraction
            )));
        }
        self.task.validate()?;
        if let ModelConfig::Nbf(c) = &self.model {
            c.validate()?;
        }
        Ok(())
    }

    fn effective_clip(&self) -> Option<f64> {
        self.grad_clip.or(match self.model {
            ModelConfig::Lstm(_) => Some(5.0),
            _ => None,
        })
    }
}

/// One training-log row, emitted per eval period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    /// Mean training loss over the period ending at `step`.
    pub loss: f64,
    pub eval_fnr: f64,
    pub eval_fpr: f64,
    pub wall_seconds: f64,
}

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut out = String::from("step,loss,eval_fnr,eval_fpr,wall_seconds\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step, row.loss, row.eval_fnr, row.eval_fpr, row.wall_seconds
        ));
    }
    out
}

/// False-negative / false-positive rates at a logit threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRates {
    pub fnr: f64,
    pub fpr: f64,
    pub positives: usize,
    pub negatives: usize,
}

pub struct TrainOutcome {
    pub model: AnyModel,
    pub params: ParamStore,
    pub log: Vec<LogRow>,
}

/// Stepwise training driver. `run_steps` may be called repeatedly; state
/// (step counter, optimizer moments, ZCA estimates) carries over.
pub struct Trainer {
    config: TrainConfig,
    model: AnyModel,
    params: ParamStore,
    adam: AdamState,
    train_source: DatasetSource,
    eval_source: DatasetSource,
    step: usize,
    log: Vec<LogRow>,
    last_good: ParamStore,
    period_loss: (f64, usize),
    started: Instant,
}

const STEP_STREAM: u64 = 0x57e9;
const EVAL_STREAM: u64 = 0xe7a1;

/// Train/eval sources per the evaluation protocol: the exponential task
/// memorizes a weight map over concrete items, so it evaluates on the
/// training items; the other kinds hold items out.
pub fn train_eval_sources(
    task: &TaskSpec,
    test_fraction: f64,
    seed: u64,
) -> Result<(DatasetSource, DatasetSource), TrainError> {
    let source = DatasetSource::from_spec(&task.source)?;
    Ok(match task.kind {
        TaskKind::Exponential => (source.clone(), source),
        _ => source.split(test_fraction, seed),
    })
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let (train_source, eval_source) =
            train_eval_sources(&config.task, config.test_fraction, config.seed)?;
        let mut model = AnyModel::from_config(&config.model, config.seed)?;
        model.set_training(true);
        let params = model.init_params(config.seed.wrapping_add(1));
        let adam = AdamState::new(AdamConfig::with_lr(config.learning_rate));
        let last_good = params.clone();
        Ok(Trainer {
            config,
            model,
            params,
            adam,
            train_source,
            eval_source,
            step: 0,
            log: Vec::new(),
            last_good,
            period_loss: (0.0, 0),
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn model(&self) -> &AnyModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut AnyModel {
        &mut self.model
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    /// Parameters at the last completed eval period; the recovery point
    /// after divergence.
    pub fn last_good_params(&self) -> &ParamStore {
        &self.last_good
    }

    pub fn eval_source(&self) -> &DatasetSource {
        &self.eval_source
    }

    pub fn train_source(&self) -> &DatasetSource {
        &self.train_source
    }

    fn sample_batch(&self, count: usize, stream: u64) -> Result<Vec<Episode>, TrainError> {
        let mut r = crate::rng::chacha(self.config.seed ^ STEP_STREAM, stream);
        (0..count)
            .map(|_| Ok(sample_episode(&mut r, &self.config.task, &self.train_source)?))
            .collect()
    }

    /// Episodes drawn from the held-out side with the same task spec.
    pub fn sample_eval_episodes(
        &self,
        count: usize,
        stream: u64,
    ) -> Result<Vec<Episode>, TrainError> {
        let mut r = crate::rng::chacha(self.config.seed ^ EVAL_STREAM, stream);
        (0..count)
            .map(|_| Ok(sample_episode(&mut r, &self.config.task, &self.eval_source)?))
            .collect()
    }

    /// FNR/FPR at a logit threshold over freshly sampled held-out episodes.
    pub fn evaluate(&self, episode_count: usize, tau: f64) -> Result<EvalRates, TrainError> {
        let episodes = self.sample_eval_episodes(episode_count, self.step as u64)?;
        let mut fn_count = 0usize;
        let mut fp_count = 0usize;
        let mut positives = 0usize;
        let mut negatives = 0usize;
        for episode in &episodes {
            let memory =
                self.model
                    .store_set(&self.params, &episode.storage, self.config.allow_long_unroll)?;
            for (query, &label) in episode.queries.iter().zip(&episode.labels) {
                let logit = self.model.query_logit(&self.params, &memory, query)?;
                let predicted = logit >= tau;
                if label {
                    positives += 1;
                    if !predicted {
                        fn_count += 1;
                    }
                } else {
                    negatives += 1;
                    if predicted {
                        fp_count += 1;
                    }
                }
            }
        }
        Ok(EvalRates {
            fnr: fn_count as f64 / positives.max(1) as f64,
            fpr: fp_count as f64 / negatives.max(1) as f64,
            positives,
            negatives,
        })
    }

    /// Run `count` optimizer steps (bounded by max_steps).
    pub fn run_steps(&mut self, count: usize) -> Result<(), TrainError> {
        let target = (self.step + count).min(self.config.max_steps);
        while self.step < target {
            let episodes = self.sample_batch(self.config.batch_size, self.step as u64)?;
            let evals: Vec<EpisodeEval> = if self.config.workers > 1 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(self.config.workers)
                    .build()
                    .map_err(|e| TrainError::Config(e.to_string()))?;
                pool.install(|| {
                    episodes
                        .par_iter()
                        .map(|ep| {
                            self.model.episode_backward(
                                &self.params,
                                ep,
                                self.config.allow_long_unroll,
                            )
                        })
                        .collect::<Result<Vec<_>, _>>()
                })?
            } else {
                episodes
                    .iter()
                    .map(|ep| {
                        self.model
                            .episode_backward(&self.params, ep, self.config.allow_long_unroll)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };

            let batch = evals.len() as f64;
            let mean_loss: f64 = evals.iter().map(|e| e.loss).sum::<f64>() / batch;
            if !mean_loss.is_finite() {
                return Err(TrainError::Diverged { step: self.step });
            }

            // Average gradients in episode order.
            let mut summed: BTreeMap<String, Array> = BTreeMap::new();
            for eval in &evals {
                for (name, grad) in &eval.grads {
                    match summed.get_mut(name) {
                        Some(acc) => {
                            for (a, g) in acc.values_mut().iter_mut().zip(grad.values()) {
                                *a += g;
                            }
                        }
                        None => {
                            summed.insert(name.clone(), grad.clone());
                        }
                    }
                }
            }
            for grad in summed.values_mut() {
                for v in grad.values_mut() {
                    *v /= batch;
                }
            }
            if let Some(clip) = self.config.effective_clip() {
                let norm: f64 = summed
                    .values()
                    .flat_map(|g| g.values())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                if norm > clip {
                    let scale = clip / norm;
                    for grad in summed.values_mut() {
                        for v in grad.values_mut() {
                            *v *= scale;
                        }
                    }
                }
            }
            self.adam
                .step(&mut self.params, &summed)
                .map_err(|e| match e {
                    crate::diffcore::DiffError::NonFinite(_) => {
                        TrainError::Diverged { step: self.step }
                    }
                    other => TrainError::Diff(other),
                })?;

            let raw: Vec<Vec<f64>> = evals.into_iter().flat_map(|e| e.raw_queries).collect();
            self.model.sphering_update(&raw)?;

            self.period_loss.0 += mean_loss;
            self.period_loss.1 += 1;
            self.step += 1;

            if self.step % self.config.eval_period == 0 || self.step == self.config.max_steps {
                let rates = self.evaluate(self.config.eval_episodes, 0.0)?;
                let loss = self.period_loss.0 / self.period_loss.1.max(1) as f64;
                self.period_loss = (0.0, 0);
                self.log.push(LogRow {
                    step: self.step,
                    loss,
                    eval_fnr: rates.fnr,
                    eval_fpr: rates.fpr,
                    wall_seconds: self.started.elapsed().as_secs_f64(),
                });
                self.last_good = self.params.clone();
            }
        }
        Ok(())
    }

    pub fn train_to_completion(&mut self) -> Result<(), TrainError> {
        let remaining = self.config.max_steps - self.step;
        self.run_steps(remaining)
    }

    pub fn into_outcome(mut self) -> TrainOutcome {
        self.model.set_training(false);
        TrainOutcome {
            model: self.model,
            params: self.params,
            log: self.log,
        }
    }
}

/// Sample episodes, write sets, query, backprop, update; fully reproducible
/// from the seed.
pub fn train(config: TrainConfig) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(config)?;
    trainer.train_to_completion()?;
    Ok(trainer.into_outcome())
}
