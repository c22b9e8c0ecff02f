//! Type-blocked particle Gibbs with a conditional SMC update.
//!
//! All customers of one word type are removed, then `P` particles rebuild
//! them site by site against private overlays of the remaining counts.
//! Slot 0 holds the reference particle, which re-enacts the removed seating
//! exactly; one particle is finally selected by weight and committed.
//!
//! With `exact_weights`, each particle's class is proposed around an
//! auxiliary centre drawn next to the reference class, and every seating
//! step carries the ratio of its sequential predictives to the frozen ones
//! used by the proposal, so the update leaves the posterior invariant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::site::{self, Choice, EmissionBase, SitePlan};
use super::{InferenceError, Role, SamplerConfig, Streams};
use crate::corpus::{Corpus, Tag, TypeId};
use crate::model::{AmbiguityClass, EmissionMode, Model, Structure};
use crate::pyp::{Franchise, Overlay, Replay, Sampling, SeatingDelta, SeatingStore};

/// How the final particle is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selector {
    /// Proportionally to the final weights.
    #[default]
    Weighted,
    /// Always the reference particle.
    Reference,
}

/// Outcome of one type sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TypeSweep {
    pub class_changed: bool,
    pub selected: usize,
    pub resamplings: u32,
}

#[derive(Clone)]
struct Particle<'a> {
    base: EmissionBase,
    tags: Vec<Tag>,
    store: Overlay<'a, u32>,
    delta: SeatingDelta<u32>,
    log_w: f64,
}

/// Draws a class one toggle away from `from` (or `from` itself), uniformly
/// over the `|T|` toggles and staying put; toggles that empty the class are
/// redrawn.
fn propose_class<R: Rng + ?Sized>(from: AmbiguityClass, num_tags: usize, rng: &mut R) -> AmbiguityClass {
    loop {
        let r = rng.random_range(0..=num_tags as Tag);
        if r == num_tags as Tag {
            return from;
        }
        let to = from.toggled(r);
        if !to.is_empty() {
            return to;
        }
    }
}

/// `ln K(to | from)` for the proposal above, `to` assumed reachable.
fn log_class_kernel(from: AmbiguityClass, num_tags: usize) -> f64 {
    let options = num_tags + 1 - usize::from(from.len() == 1);
    -(options as f64).ln()
}

/// Resamples particle `w` jointly with all tags of its tokens.
pub fn sweep_type(
    model: &mut Model,
    corpus: &Corpus,
    w: TypeId,
    config: &SamplerConfig,
    streams: &Streams,
    selector: Selector,
) -> Result<TypeSweep, InferenceError> {
    let sites = corpus.sites_of_type(w)?;
    if sites.is_empty() {
        return Ok(TypeSweep::default());
    }
    let num_tags = model.tagset().size();
    let boundary = model.tagset().boundary();
    let lex = config.kind.samples_classes();
    let key = u64::from(w);
    let mut control = streams.rng(key, Role::Control);

    let (s, franchise, lexicon, tags) = model.parts_mut();
    let plans = site::block_plan(corpus, tags, boundary, sites);
    let reference: Vec<Tag> = sites
        .iter()
        .map(|st| tags[st.sentence as usize][st.position as usize])
        .collect();

    // Remove every customer of the block, newest first, keeping one journal
    // per site so the reference particle can re-enact them in order.
    let mut removal = vec![SeatingDelta::new(); plans.len()];
    let mut rm_rng = streams.rng(key, Role::Remove);
    for k in (0..plans.len()).rev() {
        let choice = Choice {
            chosen: &reference,
            k: k as u32,
            tag: reference[k],
        };
        site::unseat_site(s, franchise, corpus, &plans[k], choice, &mut rm_rng, &mut removal[k]);
    }
    let old_class = lexicon.class_of(w);
    let class_delta = lex.then(|| lexicon.detach(w, &mut control));

    let replays: Vec<SeatingDelta<u32>> = removal.iter().map(SeatingDelta::inverted).collect();
    let p = config.particles;
    let mut rngs: Vec<ChaCha8Rng> = (0..p).map(|slot| streams.particle(key, slot)).collect();

    let centre = if lex && config.exact_weights {
        propose_class(old_class, num_tags, &mut control)
    } else {
        old_class
    };
    let uniform = s.mode() == EmissionMode::Uniform;
    let table_counts: Vec<u32> = (0..num_tags as Tag)
        .map(|t| franchise.totals(s.emission_rest(t)).1)
        .collect();
    let frozen: &Franchise<u32> = franchise;

    let mut particles: Vec<Particle<'_>> = (0..p)
        .map(|slot| {
            let class = if slot == 0 || !lex {
                old_class
            } else {
                propose_class(centre, num_tags, &mut rngs[slot])
            };
            let counts: Vec<u32> = (0..num_tags as Tag)
                .map(|t| lexicon.type_count(t) + u32::from(lex && class.contains(t)))
                .collect();
            let mut log_w = 0.0;
            if lex {
                log_w += lexicon.class_prior_prob(class).ln();
                if uniform {
                    for t in 0..num_tags {
                        let tables = f64::from(table_counts[t]);
                        if tables > 0.0 {
                            log_w -= tables * f64::from(counts[t]).ln();
                        }
                    }
                }
                if config.exact_weights {
                    log_w += log_class_kernel(class, num_tags) - log_class_kernel(centre, num_tags);
                }
            }
            Particle {
                base: EmissionBase { class, counts },
                tags: Vec::with_capacity(plans.len()),
                store: frozen.overlay(),
                delta: SeatingDelta::new(),
                log_w,
            }
        })
        .collect();

    let mut resamplings = 0;
    for k in 0..plans.len() {
        let step = |(slot, (part, rng)): (usize, (&mut Particle<'_>, &mut ChaCha8Rng))| {
            let replay = (slot == 0).then(|| &replays[k]);
            extend(s, corpus, &plans[k], k as u32, part, rng, replay, reference[k], config.exact_weights);
        };
        if config.threads > 1 {
            particles.par_iter_mut().zip(rngs.par_iter_mut()).enumerate().for_each(step);
        } else {
            particles.iter_mut().zip(rngs.iter_mut()).enumerate().for_each(step);
        }
        if k + 1 < plans.len() && p > 1 && ess_fraction(&particles) < config.resample_threshold {
            resample(&mut particles, &mut control);
            resamplings += 1;
        }
    }

    let selected = match selector {
        Selector::Reference => 0,
        Selector::Weighted => select(&particles, &mut control),
    };
    let chosen = particles.swap_remove(selected);
    let (class, new_tags, delta) = (chosen.base.class, chosen.tags, chosen.delta);
    drop(particles);

    delta.apply_to(franchise);
    for (st, &t) in sites.iter().zip(&new_tags) {
        tags[st.sentence as usize][st.position as usize] = t;
    }
    if let Some(cd) = class_delta {
        if selected == 0 {
            lexicon.reattach(w, &cd);
        } else {
            lexicon.attach(w, class, &mut control);
        }
    }
    Ok(TypeSweep {
        class_changed: class != old_class,
        selected,
        resamplings,
    })
}

/// Extends one particle by site `k`: proposes (or, for the reference,
/// re-enacts) its tag, seats the site's customers and updates the weight.
#[allow(clippy::too_many_arguments)]
fn extend(
    s: &Structure,
    corpus: &Corpus,
    plan: &SitePlan,
    k: u32,
    part: &mut Particle<'_>,
    rng: &mut ChaCha8Rng,
    replay: Option<&SeatingDelta<u32>>,
    reference_tag: Tag,
    exact: bool,
) {
    let weights = site::proposal(s, &part.store, corpus, plan, &part.base, &part.tags, k);
    let total: f64 = weights.iter().map(|&(_, q)| q).sum();
    let tag = match replay {
        Some(_) => reference_tag,
        None => site::sample_tag(&weights, total, rng),
    };
    let q = weights
        .iter()
        .find(|&&(t, _)| t == tag)
        .map_or(0.0, |&(_, q)| q);
    let choice = Choice {
        chosen: &part.tags,
        k,
        tag,
    };
    let lw = match replay {
        Some(moves) => {
            let mut chooser = Replay::new(moves.moves());
            let lw = site::seat_site(s, &mut part.store, corpus, plan, &part.base, choice, &mut chooser, &mut part.delta);
            debug_assert!(chooser.is_exhausted());
            lw
        }
        None => site::seat_site(
            s,
            &mut part.store,
            corpus,
            plan,
            &part.base,
            choice,
            &mut Sampling(rng),
            &mut part.delta,
        ),
    };
    part.log_w += total.ln();
    if exact {
        part.log_w += lw - q.ln();
    }
    part.tags.push(tag);
}

fn normalized(particles: &[Particle<'_>]) -> Vec<f64> {
    let max = particles.iter().map(|p| p.log_w).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = particles.iter().map(|p| (p.log_w - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn ess_fraction(particles: &[Particle<'_>]) -> f64 {
    let w = normalized(particles);
    1.0 / (w.iter().map(|x| x * x).sum::<f64>() * w.len() as f64)
}

fn draw_index<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Conditional multinomial resampling: slot 0 keeps the reference lineage,
/// the other slots draw ancestors from all particles. Weights reset.
fn resample<R: Rng + ?Sized>(particles: &mut Vec<Particle<'_>>, rng: &mut R) {
    let w = normalized(particles);
    let ancestors: Vec<usize> = (1..particles.len()).map(|_| draw_index(&w, rng)).collect();
    let mut next = Vec::with_capacity(particles.len());
    next.push(particles[0].clone());
    next.extend(ancestors.into_iter().map(|a| particles[a].clone()));
    for part in &mut next {
        part.log_w = 0.0;
    }
    *particles = next;
}

fn select<R: Rng + ?Sized>(particles: &[Particle<'_>], rng: &mut R) -> usize {
    draw_index(&normalized(particles), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn class_kernel_is_normalized_and_never_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6usize {
            for bits in 1..(1u128 << n) {
                let from = AmbiguityClass::from_bits(bits);
                let mut counts = std::collections::HashMap::new();
                let draws = 4000;
                for _ in 0..draws {
                    let to = propose_class(from, n, &mut rng);
                    assert!(!to.is_empty());
                    assert!(to == from || (to.bits() ^ from.bits()).count_ones() == 1);
                    *counts.entry(to).or_insert(0) += 1;
                }
                let expect = log_class_kernel(from, n).exp();
                let support = n + 1 - usize::from(from.len() == 1);
                assert_eq!(counts.len(), support);
                for (_, c) in counts {
                    let f = f64::from(c) / f64::from(draws);
                    assert!((f - expect).abs() < 0.05, "n={n} from={from}: {f} vs {expect}");
                }
            }
        }
    }
}
