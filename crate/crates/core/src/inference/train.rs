//! Training driver: initialization, iteration loop, diagnostics and
//! checkpoints.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{hyper, local, particle, InferenceError, Role, SamplerConfig, SamplerKind, Selector, Streams};
use crate::corpus::{Corpus, Tag, TypeId};
use crate::model::{AmbiguityClass, Checkpoint, Model};

/// Diagnostics of one iteration; formats as a `key=value` line. Only
/// `seconds` differs between runs with equal settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: u64,
    pub log_joint: f64,
    pub seconds: f64,
    /// Fraction of word types whose committed class changed.
    pub class_change_rate: f64,
    pub mean_class_size: f64,
    /// Fraction of tokens whose tag changed.
    pub tag_change_rate: f64,
}

impl fmt::Display for IterationStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iteration={} log_joint={:.6} seconds={:.6} class_change_rate={:.6} mean_class_size={:.6} tag_change_rate={:.6}",
            self.iteration,
            self.log_joint,
            self.seconds,
            self.class_change_rate,
            self.mean_class_size,
            self.tag_change_rate
        )
    }
}

/// A sampler bound to a corpus.
pub struct Trainer<'c> {
    corpus: &'c Corpus,
    config: SamplerConfig,
    model: Model,
    iteration: u64,
    pool: Option<rayon::ThreadPool>,
}

impl<'c> Trainer<'c> {
    /// Builds a randomly initialized model. The lexicon sampler starts from
    /// one random tag per word type; the pinned samplers start from uniform
    /// random tags per token with full classes.
    pub fn new(corpus: &'c Corpus, config: SamplerConfig) -> Result<Self, InferenceError> {
        config.validate()?;
        let n = config.num_tags;
        let mut rng = Streams::new(config.seed, 0).rng(0, Role::Init);
        let mut model = Model::new(corpus, n, config.emission, config.hyper)?;
        let (classes, tags): (Vec<AmbiguityClass>, Vec<Vec<Tag>>) = match config.kind {
            SamplerKind::Lex => {
                let choice: Vec<Tag> = (0..corpus.num_types()).map(|_| rng.random_range(0..n as Tag)).collect();
                let classes = choice.iter().map(|&t| AmbiguityClass::singleton(t)).collect();
                let tags = corpus
                    .sentences()
                    .iter()
                    .map(|s| s.iter().map(|&w| choice[w as usize]).collect())
                    .collect();
                (classes, tags)
            }
            SamplerKind::PypType | SamplerKind::Local => {
                let tags = corpus
                    .sentences()
                    .iter()
                    .map(|s| s.iter().map(|_| rng.random_range(0..n as Tag)).collect())
                    .collect();
                (vec![AmbiguityClass::full(n); corpus.num_types()], tags)
            }
        };
        model.initialize(corpus, classes, tags, &mut rng)?;
        Self::with_model(corpus, config, model, 0)
    }

    /// Continues from a checkpoint written under the same configuration.
    pub fn resume(corpus: &'c Corpus, config: SamplerConfig, checkpoint: &Checkpoint) -> Result<Self, InferenceError> {
        config.validate()?;
        if checkpoint.config != config.describe() {
            return Err(InferenceError::Config(format!(
                "checkpoint settings differ: checkpoint has [{}], run has [{}]",
                checkpoint.config,
                config.describe()
            )));
        }
        let model = checkpoint.restore(corpus)?;
        Self::with_model(corpus, config, model, checkpoint.iteration)
    }

    /// Wraps an existing model, e.g. one prepared by hand in tests.
    pub fn with_model(corpus: &'c Corpus, config: SamplerConfig, model: Model, iteration: u64) -> Result<Self, InferenceError> {
        config.validate()?;
        if model.tagset().size() != config.num_tags || model.mode() != config.emission {
            return Err(InferenceError::Config("model does not match the configuration".into()));
        }
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| InferenceError::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Trainer {
            corpus,
            config,
            model,
            iteration,
            pool,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// Completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.model, self.corpus, self.iteration, self.config.seed, self.config.describe())
    }

    /// Runs one iteration: a sweep over all word types in a fresh random
    /// order (or over all tokens for the local sampler), then optionally a
    /// hyperparameter update.
    pub fn step(&mut self) -> Result<IterationStats, InferenceError> {
        let start = Instant::now();
        self.iteration += 1;
        let streams = Streams::new(self.config.seed, self.iteration);
        let before_classes = self.model.lexicon().classes().to_vec();
        let before_tags = self.model.tags_flat();
        let corpus = self.corpus;
        let config = &self.config;
        let model = &mut self.model;
        let mut run = || -> Result<(), InferenceError> {
            match config.kind {
                SamplerKind::Local => {
                    local::local_gibbs_sweep(model, corpus, config, &streams);
                }
                SamplerKind::Lex | SamplerKind::PypType => {
                    let mut order: Vec<TypeId> = (0..corpus.num_types() as TypeId).collect();
                    order.shuffle(&mut streams.rng(0, Role::Order));
                    for w in order {
                        particle::sweep_type(model, corpus, w, config, &streams, Selector::Weighted)?;
                    }
                }
            }
            Ok(())
        };
        match &self.pool {
            Some(pool) => pool.install(run)?,
            None => run()?,
        }
        if self.config.hyper_every > 0 && self.iteration.is_multiple_of(self.config.hyper_every) {
            let mut rng = streams.rng(0, Role::Hyper);
            hyper::resample_hyperparameters(&mut self.model, &self.config.hyper_prior, &mut rng);
        }
        let classes = self.model.lexicon().classes();
        let changed = classes.iter().zip(&before_classes).filter(|(a, b)| a != b).count();
        let after_tags = self.model.tags_flat();
        let tag_changes = after_tags.iter().zip(&before_tags).filter(|(a, b)| a != b).count();
        let num_types = classes.len().max(1) as f64;
        Ok(IterationStats {
            iteration: self.iteration,
            log_joint: self.model.log_joint(),
            seconds: start.elapsed().as_secs_f64(),
            class_change_rate: changed as f64 / num_types,
            mean_class_size: classes.iter().map(|c| c.len()).sum::<usize>() as f64 / num_types,
            tag_change_rate: tag_changes as f64 / after_tags.len().max(1) as f64,
        })
    }
}

/// Final state of a training run.
pub struct TrainingOutput {
    pub model: Model,
    pub diagnostics: Vec<IterationStats>,
}

/// Trains for `config.iterations` iterations, reporting each one.
pub fn run_training(
    corpus: &Corpus,
    config: SamplerConfig,
    mut on_iteration: impl FnMut(&IterationStats, &Trainer<'_>),
) -> Result<TrainingOutput, InferenceError> {
    let mut trainer = Trainer::new(corpus, config)?;
    let mut diagnostics = Vec::new();
    while trainer.iteration() < trainer.config().iterations {
        let stats = trainer.step()?;
        on_iteration(&stats, &trainer);
        diagnostics.push(stats);
    }
    Ok(TrainingOutput {
        model: trainer.into_model(),
        diagnostics,
    })
}
