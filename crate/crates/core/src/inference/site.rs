//! Customers touched by one token site, and the proposal over its tag.

use rand::Rng;
use smallvec::SmallVec;

use crate::corpus::{Corpus, Site, Tag, TypeId};
use crate::model::{AmbiguityClass, Structure, Transition};
use crate::pyp::{Chooser, SeatingDelta, SeatingStore};

/// Where a tag in a transition comes from while a block is resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Fixed(Tag),
    /// The tag chosen for site `k` of the block.
    Site(u32),
}

/// One site of a block. Each transition is owned by the latest block site
/// among the three positions it involves, so it is seated exactly once and
/// every block tag it reads has already been chosen.
#[derive(Debug, Clone)]
pub(crate) struct SitePlan {
    pub word: TypeId,
    /// `[prev2, prev1, next]`, in increasing position order.
    pub transitions: SmallVec<[[Slot; 3]; 3]>,
}

/// Plans every site in `sites` (corpus order) as one block.
pub(crate) fn block_plan(corpus: &Corpus, tags: &[Vec<Tag>], boundary: Tag, sites: &[Site]) -> Vec<SitePlan> {
    let mut plans = Vec::with_capacity(sites.len());
    let mut start = 0;
    while start < sites.len() {
        let sentence = sites[start].sentence;
        let mut end = start;
        while end < sites.len() && sites[end].sentence == sentence {
            end += 1;
        }
        let len = corpus.sentence(sentence as usize).len() as i64;
        let ts = &tags[sentence as usize];
        let block_index = |q: i64| -> Option<u32> {
            (start..end)
                .find(|&k| i64::from(sites[k].position) == q)
                .map(|k| k as u32)
        };
        let slot = |q: i64| -> Slot {
            if q < 0 || q >= len {
                Slot::Fixed(boundary)
            } else if let Some(k) = block_index(q) {
                Slot::Site(k)
            } else {
                Slot::Fixed(ts[q as usize])
            }
        };
        for site in &sites[start..end] {
            let i = i64::from(site.position);
            let mut transitions = SmallVec::new();
            for l in i..=(i + 2).min(len) {
                let owner = (l - 2..=l)
                    .rev()
                    .find(|&q| q >= 0 && q < len && block_index(q).is_some());
                if owner == Some(i) {
                    transitions.push([slot(l - 2), slot(l - 1), slot(l)]);
                }
            }
            plans.push(SitePlan {
                word: corpus.word_at(*site),
                transitions,
            });
        }
        start = end;
    }
    plans
}

/// Single-site block for token-level sampling.
pub(crate) fn token_plan(corpus: &Corpus, tags: &[Vec<Tag>], boundary: Tag, site: Site) -> SitePlan {
    block_plan(corpus, tags, boundary, &[site]).pop().expect("one site")
}

/// Tags already chosen for earlier sites of the block plus the candidate for
/// the current site `k`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Choice<'a> {
    pub chosen: &'a [Tag],
    pub k: u32,
    pub tag: Tag,
}

impl Choice<'_> {
    fn resolve(&self, slot: Slot) -> Tag {
        match slot {
            Slot::Fixed(t) => t,
            Slot::Site(j) if j == self.k => self.tag,
            Slot::Site(j) => self.chosen[j as usize],
        }
    }

    fn transition(&self, tr: &[Slot; 3]) -> Transition {
        Transition {
            prev2: self.resolve(tr[0]),
            prev1: self.resolve(tr[1]),
            next: self.resolve(tr[2]),
        }
    }
}

/// Emission base of the block's word type under a candidate class.
#[derive(Debug, Clone)]
pub(crate) struct EmissionBase {
    pub class: AmbiguityClass,
    /// `e_t` with the block's type counted according to `class`.
    pub counts: Vec<u32>,
}

impl EmissionBase {
    pub fn prob<S: SeatingStore<u32>>(&self, s: &Structure, store: &S, corpus: &Corpus, tag: Tag, w: TypeId) -> f64 {
        s.emission_base_in(store, corpus, tag, w, self.class.contains(tag), self.counts[tag as usize])
    }
}

/// Unnormalized proposal: the product of the predictives of every customer
/// the site would seat, all evaluated against `store` as it stands.
pub(crate) fn proposal_weight<S: SeatingStore<u32>>(
    s: &Structure,
    store: &S,
    corpus: &Corpus,
    plan: &SitePlan,
    base: &EmissionBase,
    choice: Choice<'_>,
) -> f64 {
    let mut q = 1.0;
    for tr in &plan.transitions {
        q *= s.transition_prob_in(store, choice.transition(tr));
    }
    let b = base.prob(s, store, corpus, choice.tag, plan.word);
    q * s.emission_prob_in(store, choice.tag, plan.word, b)
}

/// Proposal weights for every tag of `base.class`, ascending tag order.
pub(crate) fn proposal<S: SeatingStore<u32>>(
    s: &Structure,
    store: &S,
    corpus: &Corpus,
    plan: &SitePlan,
    base: &EmissionBase,
    chosen: &[Tag],
    k: u32,
) -> SmallVec<[(Tag, f64); 8]> {
    base.class
        .iter()
        .map(|tag| (tag, proposal_weight(s, store, corpus, plan, base, Choice { chosen, k, tag })))
        .collect()
}

/// Draws a tag proportionally to the proposal weights.
pub(crate) fn sample_tag<R: Rng + ?Sized>(weights: &[(Tag, f64)], total: f64, rng: &mut R) -> Tag {
    let mut u = rng.random::<f64>() * total;
    for &(t, w) in weights {
        if u < w {
            return t;
        }
        u -= w;
    }
    weights.iter().rev().find(|(_, w)| *w > 0.0).expect("positive proposal").0
}

/// Seats the site's customers in forward order; returns the summed
/// importance log weights (path over sampling probability) of the seatings.
#[allow(clippy::too_many_arguments)]
pub(crate) fn seat_site<S, C>(
    s: &Structure,
    store: &mut S,
    corpus: &Corpus,
    plan: &SitePlan,
    base: &EmissionBase,
    choice: Choice<'_>,
    chooser: &mut C,
    journal: &mut SeatingDelta<u32>,
) -> f64
where
    S: SeatingStore<u32>,
    C: Chooser<u32> + ?Sized,
{
    let mut lw = 0.0;
    for tr in &plan.transitions {
        lw += s.seat_transition_in(store, choice.transition(tr), chooser, journal).log_weight;
    }
    let b = base.prob(s, &*store, corpus, choice.tag, plan.word);
    lw + s
        .seat_emission_in(store, corpus, choice.tag, plan.word, b, chooser, journal)
        .log_weight
}

/// Removes the site's customers in exact reverse of [`seat_site`].
pub(crate) fn unseat_site<S, R>(
    s: &Structure,
    store: &mut S,
    corpus: &Corpus,
    plan: &SitePlan,
    choice: Choice<'_>,
    rng: &mut R,
    journal: &mut SeatingDelta<u32>,
) where
    S: SeatingStore<u32>,
    R: Rng + ?Sized,
{
    s.unseat_emission_in(store, corpus, choice.tag, plan.word, rng, journal);
    for tr in plan.transitions.iter().rev() {
        s.unseat_transition_in(store, choice.transition(tr), rng, journal);
    }
}
