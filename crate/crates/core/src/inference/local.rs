//! Token-level Gibbs sampling.
//!
//! Each token's customers are removed, a tag is proposed from the product of
//! the predictives it would use, and the customers are reseated. With
//! `exact_weights` the move is accepted by Metropolis-Hastings against the
//! sequential seating probabilities, which makes it exact.

use rand::Rng;

use super::site::{self, Choice, EmissionBase};
use super::{Role, SamplerConfig, Streams};
use crate::corpus::{Corpus, Site, Tag};
use crate::model::Model;
use crate::pyp::{Replay, Sampling, SeatingDelta};

/// Resamples the tag of one token. Returns whether the tag changed.
pub fn local_gibbs_site<R: Rng + ?Sized>(
    model: &mut Model,
    corpus: &Corpus,
    site_at: Site,
    exact: bool,
    rng: &mut R,
) -> bool {
    let boundary = model.tagset().boundary();
    let (s, franchise, lexicon, tags) = model.parts_mut();
    let plan = site::token_plan(corpus, tags, boundary, site_at);
    let old = tags[site_at.sentence as usize][site_at.position as usize];
    let base = EmissionBase {
        class: lexicon.class_of(plan.word),
        counts: (0..s.tagset().size() as Tag).map(|t| lexicon.type_count(t)).collect(),
    };
    let at = |tag| Choice { chosen: &[], k: 0, tag };

    let mut removal = SeatingDelta::new();
    site::unseat_site(s, franchise, corpus, &plan, at(old), rng, &mut removal);
    let weights = site::proposal(s, &*franchise, corpus, &plan, &base, &[], 0);
    let total: f64 = weights.iter().map(|&(_, q)| q).sum();
    let new = site::sample_tag(&weights, total, rng);
    let q_of = |t: Tag| weights.iter().find(|&&(u, _)| u == t).map_or(0.0, |&(_, q)| q);

    let mut journal = SeatingDelta::new();
    if !exact {
        site::seat_site(s, franchise, corpus, &plan, &base, at(new), &mut Sampling(rng), &mut journal);
        tags[site_at.sentence as usize][site_at.position as usize] = new;
        return new != old;
    }

    // Weight of the current state: re-enact the removed seating, then undo.
    let restore = removal.inverted();
    let mut scratch = SeatingDelta::new();
    let lw_old = site::seat_site(
        s,
        franchise,
        corpus,
        &plan,
        &base,
        at(old),
        &mut Replay::new(restore.moves()),
        &mut scratch,
    ) - q_of(old).ln();
    scratch.revert_on(franchise);

    let lw_new = site::seat_site(s, franchise, corpus, &plan, &base, at(new), &mut Sampling(&mut *rng), &mut journal)
        - q_of(new).ln();
    let accept = lw_new >= lw_old || rng.random::<f64>() < (lw_new - lw_old).exp();
    if accept {
        tags[site_at.sentence as usize][site_at.position as usize] = new;
        new != old
    } else {
        journal.revert_on(franchise);
        restore.apply_to(franchise);
        false
    }
}

/// One pass over every token in corpus order. Returns the number of tokens
/// whose tag changed.
pub fn local_gibbs_sweep(model: &mut Model, corpus: &Corpus, config: &SamplerConfig, streams: &Streams) -> usize {
    let mut changed = 0;
    let mut token = 0u64;
    for (si, sentence) in corpus.sentences().iter().enumerate() {
        for pos in 0..sentence.len() {
            let mut rng = streams.rng(token, Role::Local);
            let st = Site {
                sentence: si as u32,
                position: pos as u32,
            };
            changed += usize::from(local_gibbs_site(model, corpus, st, config.exact_weights, &mut rng));
            token += 1;
        }
    }
    changed
}
