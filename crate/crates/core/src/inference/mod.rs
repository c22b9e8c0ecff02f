//! Samplers for the lexicon HMM: type-blocked particle Gibbs over a word
//! type's ambiguity class and all of its tags, token-level Gibbs, and slice
//! sampling of the Pitman-Yor hyperparameters.

mod hyper;
mod local;
mod particle;
mod site;
mod train;

pub use hyper::{resample_hyperparameters, HyperPrior};
pub use local::{local_gibbs_site, local_gibbs_sweep};
pub use particle::{sweep_type, Selector, TypeSweep};
pub use train::{run_training, IterationStats, Trainer, TrainingOutput};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::model::{EmissionMode, Hyper, ModelError};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    /// Particle Gibbs over each type's ambiguity class and tags.
    #[default]
    Lex,
    /// Particle Gibbs over each type's tags with every class pinned to the
    /// full tagset and no lexicon factors.
    PypType,
    /// Token-by-token Gibbs with classes pinned to the full tagset.
    Local,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Lex => "lex",
            SamplerKind::PypType => "pyp-type",
            SamplerKind::Local => "local",
        }
    }

    /// Whether ambiguity classes are sampled.
    pub fn samples_classes(self) -> bool {
        self == SamplerKind::Lex
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lex" => Ok(SamplerKind::Lex),
            "pyp-type" => Ok(SamplerKind::PypType),
            "local" => Ok(SamplerKind::Local),
            _ => Err(format!("unknown sampler {s:?} (expected lex, pyp-type or local)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub num_tags: usize,
    /// Particle count including the reference particle.
    pub particles: usize,
    pub iterations: u64,
    pub seed: u64,
    pub kind: SamplerKind,
    pub emission: EmissionMode,
    /// Resample when the effective sample size drops below this fraction of
    /// the particle count.
    pub resample_threshold: f64,
    /// Resample hyperparameters every this many iterations; 0 disables.
    pub hyper_every: u64,
    /// Initial hyperparameters; the class parameters and `p_geom` stay fixed.
    pub hyper: Hyper,
    pub hyper_prior: HyperPrior,
    /// Worker threads for particle propagation. Results do not depend on it.
    pub threads: usize,
    /// Correct for the proposal's approximations so the samplers target the
    /// model's posterior exactly. When false, particle weights use only the
    /// proposal normalizers and local Gibbs accepts every proposal.
    pub exact_weights: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            num_tags: 45,
            particles: 10,
            iterations: 200,
            seed: 1,
            kind: SamplerKind::Lex,
            emission: EmissionMode::Uniform,
            resample_threshold: 0.5,
            hyper_every: 1,
            hyper: Hyper::default(),
            hyper_prior: HyperPrior::default(),
            threads: 1,
            exact_weights: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: &str| Err(InferenceError::Config(m.to_string()));
        if self.num_tags == 0 {
            return bad("the tagset must have at least one tag");
        }
        if self.num_tags > crate::model::AmbiguityClass::MAX_TAGS {
            return bad("at most 128 tags are supported");
        }
        if self.particles == 0 {
            return bad("at least one particle is required");
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return bad("resample threshold must lie in [0, 1]");
        }
        if self.threads == 0 {
            return bad("thread count must be positive");
        }
        if !(self.hyper.p_geom > 0.0 && self.hyper.p_geom <= 1.0) {
            return bad("p_geom must lie in (0, 1]");
        }
        Ok(())
    }

    /// Everything that determines the sampled chain except the iteration
    /// count and the thread count. Checkpoints refuse to resume under a
    /// different description.
    pub fn describe(&self) -> String {
        format!(
            "tags={} particles={} seed={} sampler={} emission={:?} resample_threshold={} \
             hyper_every={} hyper={:?} hyper_prior={:?} exact_weights={}",
            self.num_tags,
            self.particles,
            self.seed,
            self.kind,
            self.emission,
            self.resample_threshold,
            self.hyper_every,
            self.hyper,
            self.hyper_prior,
            self.exact_weights
        )
    }
}

/// Independent random streams, one per `(iteration, key, role)`, so results
/// do not depend on the order in which work is scheduled.
#[derive(Debug, Clone, Copy)]
pub struct Streams {
    seed: u64,
    iteration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub(crate) enum Role {
    Init = 1,
    Order = 2,
    Remove = 3,
    Control = 4,
    Local = 5,
    Hyper = 6,
    /// Particle slots use `Particle + slot`.
    Particle = 16,
}

impl Streams {
    pub fn new(seed: u64, iteration: u64) -> Self {
        Streams { seed, iteration }
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub(crate) fn rng(&self, key: u64, role: Role) -> ChaCha8Rng {
        self.rng_raw(key, role as u32)
    }

    pub(crate) fn particle(&self, key: u64, slot: usize) -> ChaCha8Rng {
        self.rng_raw(key, Role::Particle as u32 + slot as u32)
    }

    fn rng_raw(&self, key: u64, role: u32) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&self.iteration.to_le_bytes());
        bytes[16..24].copy_from_slice(&key.to_le_bytes());
        bytes[24..28].copy_from_slice(&role.to_le_bytes());
        ChaCha8Rng::from_seed(bytes)
    }
}

#[cfg(test)]
mod tests;
