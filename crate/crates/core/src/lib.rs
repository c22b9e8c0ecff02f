//! Pitman-Yor lexicon HMM for unsupervised part-of-speech induction.
//!
//! A trigram HMM with hierarchical Pitman-Yor priors on transitions and
//! emissions, plus a lexicon that restricts each word type to an ambiguity
//! class of tags. Training is type-blocked particle Gibbs.

pub mod corpus;
pub mod eval;
pub mod inference;
pub mod model;
pub mod pyp;

pub use corpus::{Corpus, CorpusBuilder, CorpusError, GoldColumn, Site, Tag, Tagset, TypeId};
pub use eval::{
    extract_classes, many_to_one, power_law_fit, v_measure, zipf_table, ClassReport, ClassTags, ContingencyTable,
    EvalError, LexiconSummary, Metrics, ZipfRow,
};
pub use inference::{run_training, InferenceError, IterationStats, SamplerConfig, SamplerKind, Trainer, TrainingOutput};
pub use model::{AmbiguityClass, Checkpoint, EmissionMode, Hyper, Model, ModelError};
