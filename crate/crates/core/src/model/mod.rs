//! The Pitman-Yor lexicon HMM: a trigram transition hierarchy, per-tag
//! emission restaurants whose bases respect the lexicon, an optional per-tag
//! character bigram language model, and the ambiguity-class prior.

mod checkpoint;
mod class;
mod lexicon;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use class::AmbiguityClass;
pub use lexicon::{geometric_base_prob, Lexicon};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Tag, Tagset, TypeId};
use crate::pyp::{self, Chooser, Franchise, Level, PypParams, RestId, Sampling, SeatingDelta, SeatingStore};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("ambiguity classes must be non-empty")]
    EmptyClass,
    #[error("tag outside the induced tagset")]
    TagOutOfRange,
    #[error("at most 128 induced tags are supported, got {0}")]
    TooManyTags(usize),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("corrupt model state: {0}")]
    Corrupt(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Base distribution of the emission restaurants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EmissionMode {
    /// Uniform over the word types whose class contains the tag.
    #[default]
    Uniform,
    /// Per-tag character bigram model, zero outside the lexicon (deficient).
    CharLm,
}

impl EmissionMode {
    pub fn name(self) -> &'static str {
        match self {
            EmissionMode::Uniform => "uniform",
            EmissionMode::CharLm => "charlm",
        }
    }
}

impl fmt::Display for EmissionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EmissionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(EmissionMode::Uniform),
            "charlm" => Ok(EmissionMode::CharLm),
            _ => Err(format!("unknown emission mode {s:?} (expected uniform or charlm)")),
        }
    }
}

/// Restaurant levels that share one `(a, b)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HyperLevel {
    Trigram,
    Bigram,
    Unigram,
    Emission,
    CharBigram,
    CharUnigram,
}

impl HyperLevel {
    pub const ALL: [HyperLevel; 6] = [
        HyperLevel::Trigram,
        HyperLevel::Bigram,
        HyperLevel::Unigram,
        HyperLevel::Emission,
        HyperLevel::CharBigram,
        HyperLevel::CharUnigram,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub trigram: PypParams,
    pub bigram: PypParams,
    pub unigram: PypParams,
    pub emission: PypParams,
    pub char_bigram: PypParams,
    pub char_unigram: PypParams,
    pub class: PypParams,
    /// Success probability of the geometric class-size distribution.
    pub p_geom: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        let p = PypParams::default();
        Hyper {
            trigram: p,
            bigram: p,
            unigram: p,
            emission: p,
            char_bigram: p,
            char_unigram: p,
            class: p,
            p_geom: 0.5,
        }
    }
}

impl Hyper {
    pub fn level(&self, level: HyperLevel) -> PypParams {
        match level {
            HyperLevel::Trigram => self.trigram,
            HyperLevel::Bigram => self.bigram,
            HyperLevel::Unigram => self.unigram,
            HyperLevel::Emission => self.emission,
            HyperLevel::CharBigram => self.char_bigram,
            HyperLevel::CharUnigram => self.char_unigram,
        }
    }

    pub fn level_mut(&mut self, level: HyperLevel) -> &mut PypParams {
        match level {
            HyperLevel::Trigram => &mut self.trigram,
            HyperLevel::Bigram => &mut self.bigram,
            HyperLevel::Unigram => &mut self.unigram,
            HyperLevel::Emission => &mut self.emission,
            HyperLevel::CharBigram => &mut self.char_bigram,
            HyperLevel::CharUnigram => &mut self.char_unigram,
        }
    }
}

/// One transition customer: `next` following the context `(prev1, prev2)`,
/// `prev1` being the immediately preceding tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub prev2: Tag,
    pub prev1: Tag,
    pub next: Tag,
}

/// Log probabilities produced by seating one customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeatOutcome {
    /// Probability of the exact seating path taken, base draws included.
    pub log_path: f64,
    /// Path probability over the probability that sequential sampling chose
    /// that path: the importance weight of the customer.
    pub log_weight: f64,
}

/// Restaurant layout and parameters; everything needed to evaluate or seat
/// customers against some [`SeatingStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    tagset: Tagset,
    mode: EmissionMode,
    hyper: Hyper,
    bigram_off: u32,
    unigram: u32,
    emission_off: u32,
    char_off: u32,
    char_contexts: u32,
    char_support: u32,
    char_start: u32,
    char_end: u32,
    total: u32,
}

impl Structure {
    fn new(tagset: Tagset, mode: EmissionMode, hyper: Hyper, corpus: &Corpus) -> Self {
        let t1 = tagset.size() as u32 + 1;
        let bigram_off = t1 * t1;
        let unigram = bigram_off + t1;
        let emission_off = unigram + 1;
        let char_off = emission_off + tagset.size() as u32;
        let alphabet = corpus.alphabet();
        let char_contexts = match mode {
            EmissionMode::Uniform => 0,
            EmissionMode::CharLm => alphabet.num_contexts() as u32,
        };
        let total = char_off + tagset.size() as u32 * (char_contexts + 1) * u32::from(char_contexts > 0);
        Structure {
            tagset,
            mode,
            hyper,
            bigram_off,
            unigram,
            emission_off,
            char_off,
            char_contexts,
            char_support: alphabet.support() as u32,
            char_start: alphabet.start_context(),
            char_end: alphabet.end(),
            total,
        }
    }

    pub fn tagset(&self) -> Tagset {
        self.tagset
    }

    pub fn mode(&self) -> EmissionMode {
        self.mode
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn num_restaurants(&self) -> usize {
        self.total as usize
    }

    fn t1(&self) -> u32 {
        self.tagset.size() as u32 + 1
    }

    pub fn trigram_rest(&self, prev1: Tag, prev2: Tag) -> RestId {
        prev1 * self.t1() + prev2
    }

    pub fn bigram_rest(&self, prev1: Tag) -> RestId {
        self.bigram_off + prev1
    }

    pub fn unigram_rest(&self) -> RestId {
        self.unigram
    }

    pub fn emission_rest(&self, tag: Tag) -> RestId {
        self.emission_off + tag
    }

    fn char_unigram_rest(&self, tag: Tag) -> RestId {
        self.char_off + tag * (self.char_contexts + 1)
    }

    fn char_bigram_rest(&self, tag: Tag, ctx: u32) -> RestId {
        self.char_unigram_rest(tag) + 1 + ctx
    }

    pub fn level_of(&self, rest: RestId) -> HyperLevel {
        if rest < self.bigram_off {
            HyperLevel::Trigram
        } else if rest < self.unigram {
            HyperLevel::Bigram
        } else if rest == self.unigram {
            HyperLevel::Unigram
        } else if rest < self.char_off {
            HyperLevel::Emission
        } else if (rest - self.char_off).is_multiple_of(self.char_contexts + 1) {
            HyperLevel::CharUnigram
        } else {
            HyperLevel::CharBigram
        }
    }

    /// The tag served by emission restaurant `rest`, if it is one.
    fn emission_tag(&self, rest: RestId) -> Option<Tag> {
        (self.emission_off..self.char_off)
            .contains(&rest)
            .then(|| rest - self.emission_off)
    }

    pub fn transition_chain(&self, prev1: Tag, prev2: Tag) -> [Level; 3] {
        let h = &self.hyper;
        [
            Level::new(self.trigram_rest(prev1, prev2), h.trigram),
            Level::new(self.bigram_rest(prev1), h.bigram),
            Level::new(self.unigram, h.unigram),
        ]
    }

    /// Uniform terminal over induced tags plus the boundary.
    pub fn transition_base(&self) -> f64 {
        1.0 / f64::from(self.t1())
    }

    pub fn emission_chain(&self, tag: Tag) -> [Level; 1] {
        [Level::new(self.emission_rest(tag), self.hyper.emission)]
    }

    fn char_chain(&self, tag: Tag, ctx: u32) -> [Level; 2] {
        [
            Level::new(self.char_bigram_rest(tag, ctx), self.hyper.char_bigram),
            Level::new(self.char_unigram_rest(tag), self.hyper.char_unigram),
        ]
    }

    fn char_base(&self) -> f64 {
        1.0 / f64::from(self.char_support)
    }

    /// `(context, symbol)` pairs of a spelling, end symbol included.
    fn char_events<'a>(&self, spelling: &'a [u32]) -> impl DoubleEndedIterator<Item = (u32, u32)> + 'a {
        let start = self.char_start;
        let end = self.char_end;
        (0..=spelling.len()).map(move |k| {
            let ctx = if k == 0 { start } else { spelling[k - 1] };
            let sym = spelling.get(k).copied().unwrap_or(end);
            (ctx, sym)
        })
    }

    pub fn transition_prob_in<S: SeatingStore<u32>>(&self, store: &S, tr: Transition) -> f64 {
        pyp::predictive(
            store,
            &self.transition_chain(tr.prev1, tr.prev2),
            tr.next,
            self.transition_base(),
        )
    }

    /// Character-LM probability of a spelling under `tag`'s model.
    pub fn charlm_prob_in<S: SeatingStore<u32>>(&self, store: &S, tag: Tag, spelling: &[u32]) -> f64 {
        let base = self.char_base();
        self.char_events(spelling)
            .map(|(ctx, sym)| pyp::predictive(store, &self.char_chain(tag, ctx), sym, base))
            .product()
    }

    /// Base probability of word type `w` in tag `tag`'s emission restaurant,
    /// given whether the tag is in the type's class and the current `e_t`.
    pub fn emission_base_in<S: SeatingStore<u32>>(
        &self,
        store: &S,
        corpus: &Corpus,
        tag: Tag,
        w: TypeId,
        included: bool,
        type_count: u32,
    ) -> f64 {
        if !included {
            return 0.0;
        }
        match self.mode {
            EmissionMode::Uniform => 1.0 / f64::from(type_count),
            EmissionMode::CharLm => self.charlm_prob_in(store, tag, corpus.spelling(w)),
        }
    }

    pub fn emission_prob_in<S: SeatingStore<u32>>(&self, store: &S, tag: Tag, w: TypeId, base: f64) -> f64 {
        pyp::predictive(store, &self.emission_chain(tag), w, base)
    }

    /// Seats a transition customer.
    pub fn seat_transition_in<S, C>(
        &self,
        store: &mut S,
        tr: Transition,
        chooser: &mut C,
        journal: &mut SeatingDelta<u32>,
    ) -> SeatOutcome
    where
        S: SeatingStore<u32>,
        C: Chooser<u32> + ?Sized,
    {
        let chain = self.transition_chain(tr.prev1, tr.prev2);
        let s = pyp::seat_with(store, &chain, tr.next, self.transition_base(), chooser, journal);
        SeatOutcome {
            log_path: s.log_prob,
            log_weight: s.log_predictive,
        }
    }

    pub fn unseat_transition_in<S, R>(
        &self,
        store: &mut S,
        tr: Transition,
        rng: &mut R,
        journal: &mut SeatingDelta<u32>,
    ) where
        S: SeatingStore<u32>,
        R: Rng + ?Sized,
    {
        let chain = self.transition_chain(tr.prev1, tr.prev2);
        pyp::unseat(store, &chain, tr.next, rng, journal);
    }

    /// Seats an emission customer. A new table in the emission restaurant
    /// draws the word from the base; in char-LM mode that seats the word's
    /// characters, whose sequential predictives replace `base` in the weight.
    #[allow(clippy::too_many_arguments)]
    pub fn seat_emission_in<S, C>(
        &self,
        store: &mut S,
        corpus: &Corpus,
        tag: Tag,
        w: TypeId,
        base: f64,
        chooser: &mut C,
        journal: &mut SeatingDelta<u32>,
    ) -> SeatOutcome
    where
        S: SeatingStore<u32>,
        C: Chooser<u32> + ?Sized,
    {
        let seated = pyp::seat_with(store, &self.emission_chain(tag), w, base, chooser, journal);
        let mut out = SeatOutcome {
            log_path: seated.log_prob,
            log_weight: seated.log_predictive,
        };
        if seated.opened_root && self.mode == EmissionMode::CharLm {
            out.log_path -= base.ln();
            out.log_weight -= base.ln();
            let cb = self.char_base();
            for (ctx, sym) in self.char_events(corpus.spelling(w)) {
                let c = pyp::seat_with(store, &self.char_chain(tag, ctx), sym, cb, chooser, journal);
                out.log_path += c.log_prob;
                out.log_weight += c.log_predictive;
            }
        }
        out
    }

    pub fn unseat_emission_in<S, R>(
        &self,
        store: &mut S,
        corpus: &Corpus,
        tag: Tag,
        w: TypeId,
        rng: &mut R,
        journal: &mut SeatingDelta<u32>,
    ) where
        S: SeatingStore<u32>,
        R: Rng + ?Sized,
    {
        let closed = pyp::unseat(store, &self.emission_chain(tag), w, rng, journal);
        if closed && self.mode == EmissionMode::CharLm {
            for (ctx, sym) in self.char_events(corpus.spelling(w)).rev() {
                pyp::unseat(store, &self.char_chain(tag, ctx), sym, rng, journal);
            }
        }
    }
}

/// Transitions of one sentence: `len + 1` customers, the last predicting the
/// boundary.
pub fn sentence_transitions(tags: &[Tag], boundary: Tag) -> impl Iterator<Item = Transition> + '_ {
    let at = move |q: isize| -> Tag {
        if q < 0 || q as usize >= tags.len() {
            boundary
        } else {
            tags[q as usize]
        }
    };
    (0..=tags.len() as isize).map(move |l| Transition {
        prev2: at(l - 2),
        prev1: at(l - 1),
        next: at(l),
    })
}

/// Full sampler state: seating counts of every restaurant, the lexicon and
/// the current tag assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    structure: Structure,
    franchise: Franchise<u32>,
    lexicon: Lexicon,
    tags: Vec<Vec<Tag>>,
}

impl Model {
    /// An empty model; call [`Model::initialize`] before sampling.
    pub fn new(corpus: &Corpus, num_tags: usize, mode: EmissionMode, hyper: Hyper) -> Result<Self, ModelError> {
        if num_tags == 0 {
            return Err(ModelError::InvalidAssignment("tagset must be non-empty".into()));
        }
        if num_tags > AmbiguityClass::MAX_TAGS {
            return Err(ModelError::TooManyTags(num_tags));
        }
        let structure = Structure::new(Tagset::new(num_tags), mode, hyper, corpus);
        Ok(Model {
            franchise: Franchise::new(structure.num_restaurants()),
            lexicon: Lexicon::new(corpus.num_types(), num_tags, hyper.class, hyper.p_geom),
            tags: Vec::new(),
            structure,
        })
    }

    /// Attaches every type's class, then seats all transition and emission
    /// customers in corpus order.
    pub fn initialize<R: Rng + ?Sized>(
        &mut self,
        corpus: &Corpus,
        classes: Vec<AmbiguityClass>,
        tags: Vec<Vec<Tag>>,
        rng: &mut R,
    ) -> Result<(), ModelError> {
        if !self.tags.is_empty() || self.lexicon.restaurant().customers() > 0 {
            return Err(ModelError::InvalidAssignment("model already initialized".into()));
        }
        let full = AmbiguityClass::full(self.structure.tagset.size());
        if classes.len() != corpus.num_types() {
            return Err(ModelError::InvalidAssignment("one class per word type required".into()));
        }
        for c in &classes {
            if c.is_empty() {
                return Err(ModelError::EmptyClass);
            }
            if !c.is_subset(full) {
                return Err(ModelError::TagOutOfRange);
            }
        }
        if tags.len() != corpus.num_sentences()
            || tags.iter().zip(corpus.sentences()).any(|(t, s)| t.len() != s.len())
        {
            return Err(ModelError::InvalidAssignment("tags must align with the corpus".into()));
        }
        for (ts, ws) in tags.iter().zip(corpus.sentences()) {
            for (&t, &w) in ts.iter().zip(ws) {
                if !classes[w as usize].contains(t) {
                    return Err(ModelError::InvalidAssignment(format!(
                        "tag {t} of {:?} outside its class",
                        corpus.word_type(w).surface
                    )));
                }
            }
        }
        for (w, c) in classes.into_iter().enumerate() {
            self.lexicon.attach(w as TypeId, c, rng);
        }
        let s = &self.structure;
        let mut journal = SeatingDelta::new();
        for (ts, ws) in tags.iter().zip(corpus.sentences()) {
            for tr in sentence_transitions(ts, s.tagset.boundary()) {
                s.seat_transition_in(&mut self.franchise, tr, &mut Sampling(&mut *rng), &mut journal);
            }
            for (&t, &w) in ts.iter().zip(ws) {
                let base = s.emission_base_in(&self.franchise, corpus, t, w, true, self.lexicon.type_count(t));
                s.seat_emission_in(&mut self.franchise, corpus, t, w, base, &mut Sampling(&mut *rng), &mut journal);
            }
            journal = SeatingDelta::new();
        }
        self.tags = tags;
        Ok(())
    }

    pub(crate) fn from_parts(
        structure: Structure,
        franchise: Franchise<u32>,
        lexicon: Lexicon,
        tags: Vec<Vec<Tag>>,
    ) -> Self {
        Model {
            structure,
            franchise,
            lexicon,
            tags,
        }
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn tagset(&self) -> Tagset {
        self.structure.tagset
    }

    pub fn mode(&self) -> EmissionMode {
        self.structure.mode
    }

    pub fn hyper(&self) -> &Hyper {
        &self.structure.hyper
    }

    /// Replaces the discount/strength parameters. Class parameters and
    /// `p_geom` are part of the lexicon and stay as constructed.
    pub fn set_hyper(&mut self, hyper: Hyper) {
        self.structure.hyper = Hyper {
            class: self.structure.hyper.class,
            p_geom: self.structure.hyper.p_geom,
            ..hyper
        };
    }

    pub fn franchise(&self) -> &Franchise<u32> {
        &self.franchise
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn tags(&self) -> &[Vec<Tag>] {
        &self.tags
    }

    /// Tag assignment flattened in corpus order.
    pub fn tags_flat(&self) -> Vec<Tag> {
        self.tags.iter().flatten().copied().collect()
    }

    pub(crate) fn parts_mut(&mut self) -> (&Structure, &mut Franchise<u32>, &mut Lexicon, &mut Vec<Vec<Tag>>) {
        (&self.structure, &mut self.franchise, &mut self.lexicon, &mut self.tags)
    }

    pub fn transition_prob(&self, prev1: Tag, prev2: Tag, tag: Tag) -> f64 {
        self.structure.transition_prob_in(
            &self.franchise,
            Transition {
                prev2,
                prev1,
                next: tag,
            },
        )
    }

    pub fn word_base_prob(&self, corpus: &Corpus, tag: Tag, w: TypeId) -> f64 {
        let included = self.lexicon.class_of(w).contains(tag);
        self.structure.emission_base_in(
            &self.franchise,
            corpus,
            tag,
            w,
            included,
            self.lexicon.type_count(tag),
        )
    }

    pub fn emission_prob(&self, corpus: &Corpus, tag: Tag, w: TypeId) -> f64 {
        let base = self.word_base_prob(corpus, tag, w);
        self.structure.emission_prob_in(&self.franchise, tag, w, base)
    }

    /// Log joint probability of the lexicon, the tags, the words and the
    /// seating arrangement of every restaurant.
    pub fn log_joint(&self) -> f64 {
        let s = &self.structure;
        let mut lp = self.lexicon.log_prob();
        for (i, r) in self.franchise.restaurants().iter().enumerate() {
            if r.is_empty() {
                continue;
            }
            let rest = i as RestId;
            let level = s.level_of(rest);
            lp += r.log_seating_prob(s.hyper.level(level));
            let k = f64::from(r.tables());
            match level {
                HyperLevel::Unigram => lp += k * s.transition_base().ln(),
                HyperLevel::CharUnigram => lp += k * s.char_base().ln(),
                HyperLevel::Emission if s.mode == EmissionMode::Uniform => {
                    let t = s.emission_tag(rest).expect("emission restaurant");
                    lp -= k * f64::from(self.lexicon.type_count(t)).ln();
                }
                _ => {}
            }
        }
        lp
    }

    /// Exhaustive consistency check of counts against the tag assignment.
    pub fn check_invariants(&self, corpus: &Corpus) -> Result<(), String> {
        use rustc_hash::FxHashMap;
        let s = &self.structure;
        self.franchise.check_invariants()?;
        self.lexicon.check_invariants()?;
        let num_tags = s.tagset.size() as u32;
        let mut leaf: FxHashMap<(RestId, u32), u32> = FxHashMap::default();
        for (ts, ws) in self.tags.iter().zip(corpus.sentences()) {
            for tr in sentence_transitions(ts, s.tagset.boundary()) {
                *leaf.entry((s.trigram_rest(tr.prev1, tr.prev2), tr.next)).or_default() += 1;
            }
            for (&t, &w) in ts.iter().zip(ws) {
                if t >= num_tags {
                    return Err(format!("tag {t} out of range"));
                }
                if !self.lexicon.class_of(w).contains(t) {
                    return Err(format!("tag {t} outside the class of type {w}"));
                }
                *leaf.entry((s.emission_rest(t), w)).or_default() += 1;
            }
        }
        // Parent customers must equal the tables of the children.
        let mut expected: FxHashMap<(RestId, u32), u32> = FxHashMap::default();
        for (i, r) in self.franchise.restaurants().iter().enumerate() {
            let rest = i as RestId;
            let parent = match s.level_of(rest) {
                HyperLevel::Trigram => Some(s.bigram_rest(rest / s.t1())),
                HyperLevel::Bigram => Some(s.unigram),
                HyperLevel::CharBigram => {
                    let tag = (rest - s.char_off) / (s.char_contexts + 1);
                    Some(s.char_unigram_rest(tag))
                }
                _ => None,
            };
            for (d, t) in r.sorted_dishes() {
                if let Some(p) = parent {
                    *expected.entry((p, d)).or_default() += t.tables();
                }
                if let (Some(tag), EmissionMode::CharLm) = (s.emission_tag(rest), s.mode) {
                    for (ctx, sym) in s.char_events(corpus.spelling(d)) {
                        *expected.entry((s.char_bigram_rest(tag, ctx), sym)).or_default() += t.tables();
                    }
                }
            }
        }
        expected.extend(leaf);
        for (i, r) in self.franchise.restaurants().iter().enumerate() {
            for (d, t) in r.sorted_dishes() {
                let want = expected.remove(&(i as RestId, d)).unwrap_or(0);
                if want != t.customers() {
                    return Err(format!(
                        "restaurant {i} ({:?}) dish {d}: {} customers, expected {want}",
                        s.level_of(i as RestId),
                        t.customers()
                    ));
                }
            }
        }
        if let Some(((rest, d), n)) = expected.into_iter().find(|(_, n)| *n > 0) {
            return Err(format!("restaurant {rest} dish {d}: missing {n} customers"));
        }
        Ok(())
    }
}
