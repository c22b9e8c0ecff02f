use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{Corpus, CorpusBuilder, Tag, TypeId};
use crate::model::{sentence_transitions, AmbiguityClass, EmissionMode, Hyper, Model, Structure};
use crate::pyp::{Franchise, Level, Move, PypParams, SeatingStore};

fn corpus(sentences: &[&str]) -> Corpus {
    let mut b = CorpusBuilder::new();
    for s in sentences {
        b.push_sentence(s.split_whitespace().map(|w| (w, None))).unwrap();
    }
    b.build().unwrap()
}

fn hyper() -> Hyper {
    Hyper {
        trigram: PypParams::new(0.3, 0.7).unwrap(),
        bigram: PypParams::new(0.5, 1.2).unwrap(),
        unigram: PypParams::new(0.2, 2.0).unwrap(),
        emission: PypParams::new(0.4, 0.9).unwrap(),
        class: PypParams::new(0.5, 1.0).unwrap(),
        ..Hyper::default()
    }
}

fn config(kind: SamplerKind, num_tags: usize, particles: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        num_tags,
        particles,
        iterations: 1,
        seed,
        kind,
        hyper: hyper(),
        hyper_every: 0,
        ..SamplerConfig::default()
    }
}

/// Random lexicon state with tags inside the classes.
fn random_model(c: &Corpus, num_tags: usize, mode: EmissionMode, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<AmbiguityClass> = (0..c.num_types())
        .map(|_| loop {
            let cls = AmbiguityClass::from_bits(rng.random_range(1..(1u128 << num_tags)));
            if cls.len() <= 3 {
                break cls;
            }
        })
        .collect();
    let tags = c
        .sentences()
        .iter()
        .map(|s| {
            s.iter()
                .map(|&w| {
                    let m: Vec<Tag> = classes[w as usize].iter().collect();
                    m[rng.random_range(0..m.len())]
                })
                .collect()
        })
        .collect();
    let mut m = Model::new(c, num_tags, mode, hyper()).unwrap();
    m.initialize(c, classes, tags, &mut rng).unwrap();
    m
}

fn toy() -> Corpus {
    corpus(&[
        "the dog barks at the cat",
        "a dog runs",
        "the cat runs fast fast",
        "dog bites cat",
        "the the dog",
        "cat",
    ])
}

#[test]
fn single_particle_sweep_is_identity() {
    let c = toy();
    for mode in [EmissionMode::Uniform, EmissionMode::CharLm] {
        for kind in [SamplerKind::Lex, SamplerKind::PypType] {
            let mut m = if kind == SamplerKind::Lex {
                random_model(&c, 4, mode, 1)
            } else {
                let mut tr = Trainer::new(&c, SamplerConfig { emission: mode, ..config(kind, 4, 1, 3) }).unwrap();
                tr.step().unwrap();
                tr.into_model()
            };
            let cfg = SamplerConfig { emission: mode, ..config(kind, 4, 1, 5) };
            for it in 0..20 {
                let streams = Streams::new(5, it);
                for w in 0..c.num_types() as TypeId {
                    let before = m.clone();
                    let out = sweep_type(&mut m, &c, w, &cfg, &streams, Selector::Weighted).unwrap();
                    assert_eq!(out.selected, 0);
                    assert_eq!(m, before, "{mode:?} {kind:?} type {w}");
                }
            }
        }
    }
}

#[test]
fn selecting_the_reference_restores_the_state() {
    let c = toy();
    for mode in [EmissionMode::Uniform, EmissionMode::CharLm] {
        let mut m = random_model(&c, 4, mode, 2);
        let cfg = SamplerConfig { emission: mode, resample_threshold: 0.9, ..config(SamplerKind::Lex, 4, 6, 7) };
        for it in 0..10 {
            let streams = Streams::new(7, it);
            for w in 0..c.num_types() as TypeId {
                let before = m.clone();
                sweep_type(&mut m, &c, w, &cfg, &streams, Selector::Reference).unwrap();
                assert_eq!(m, before);
                // Move on with a weighted sweep so later checks start elsewhere.
                sweep_type(&mut m, &c, w, &cfg, &streams, Selector::Weighted).unwrap();
            }
        }
    }
}

#[test]
fn weighted_sweeps_keep_the_state_consistent() {
    let c = toy();
    for mode in [EmissionMode::Uniform, EmissionMode::CharLm] {
        for exact in [true, false] {
            for kind in [SamplerKind::Lex, SamplerKind::PypType] {
                let cfg = SamplerConfig {
                    emission: mode,
                    exact_weights: exact,
                    ..config(kind, 3, 5, 11)
                };
                let mut tr = Trainer::new(&c, cfg).unwrap();
                for _ in 0..15 {
                    let stats = tr.step().unwrap();
                    assert!(stats.log_joint.is_finite());
                    tr.model().check_invariants(&c).unwrap();
                }
                let m = tr.model();
                for (ts, ws) in m.tags().iter().zip(c.sentences()) {
                    for (&t, &w) in ts.iter().zip(ws) {
                        assert!(m.lexicon().class_of(w).contains(t));
                    }
                }
                if kind == SamplerKind::PypType {
                    assert!(m.lexicon().classes().iter().all(|&cl| cl == AmbiguityClass::full(3)));
                }
            }
        }
    }
}

#[test]
fn one_tag_forces_everything() {
    let c = toy();
    let mut tr = Trainer::new(&c, config(SamplerKind::Lex, 1, 4, 1)).unwrap();
    for _ in 0..3 {
        let s = tr.step().unwrap();
        assert_eq!(s.mean_class_size, 1.0);
        assert_eq!(s.class_change_rate, 0.0);
    }
    assert!(tr.model().tags_flat().iter().all(|&t| t == 0));
}

#[test]
fn local_sweeps_keep_the_state_consistent() {
    let c = toy();
    for exact in [true, false] {
        for mode in [EmissionMode::Uniform, EmissionMode::CharLm] {
            let cfg = SamplerConfig { emission: mode, exact_weights: exact, ..config(SamplerKind::Local, 3, 1, 4) };
            let mut tr = Trainer::new(&c, cfg).unwrap();
            for _ in 0..20 {
                tr.step().unwrap();
                tr.model().check_invariants(&c).unwrap();
            }
        }
    }
}

#[test]
fn local_single_site_marginal_is_symmetric() {
    let c = corpus(&["w"]);
    let mut tr = Trainer::new(&c, config(SamplerKind::Local, 2, 1, 9)).unwrap();
    let n = 20_000;
    let mut zeros = 0;
    for _ in 0..n {
        tr.step().unwrap();
        zeros += usize::from(tr.model().tags()[0][0] == 0);
    }
    let f = zeros as f64 / f64::from(n);
    assert!((f - 0.5).abs() < 0.02, "{f}");
}

#[test]
fn runs_are_reproducible_and_thread_independent() {
    let c = toy();
    for kind in [SamplerKind::Lex, SamplerKind::PypType, SamplerKind::Local] {
        let run = |threads| {
            let cfg = SamplerConfig { threads, iterations: 6, hyper_every: 2, ..config(kind, 3, 4, 21) };
            let out = run_training(&c, cfg, |_, _| {}).unwrap();
            let lj: Vec<f64> = out.diagnostics.iter().map(|d| d.log_joint).collect();
            (out.model, lj)
        };
        let (a, la) = run(1);
        let (b, lb) = run(1);
        let (d, ld) = run(3);
        assert_eq!(a, b);
        assert_eq!(a, d);
        assert_eq!(la, lb);
        assert_eq!(la, ld);
    }
}

#[test]
fn resume_matches_uninterrupted_run() {
    let c = toy();
    let cfg = SamplerConfig { iterations: 8, hyper_every: 3, ..config(SamplerKind::Lex, 3, 4, 31) };
    let full = run_training(&c, cfg.clone(), |_, _| {}).unwrap();

    let mut tr = Trainer::new(&c, cfg.clone()).unwrap();
    for _ in 0..5 {
        tr.step().unwrap();
    }
    let mut bytes = Vec::new();
    tr.checkpoint().write_to(&mut bytes).unwrap();
    drop(tr);
    let ck = crate::model::Checkpoint::read_from(&bytes[..]).unwrap();
    let mut resumed = Trainer::resume(&c, cfg.clone(), &ck).unwrap();
    while resumed.iteration() < 8 {
        resumed.step().unwrap();
    }
    assert_eq!(resumed.model(), &full.model);

    let other = SamplerConfig { seed: 32, ..cfg };
    assert!(matches!(Trainer::resume(&c, other, &ck), Err(InferenceError::Config(_))));
}

#[test]
fn config_validation() {
    assert!(config(SamplerKind::Lex, 3, 0, 1).validate().is_err());
    assert!(config(SamplerKind::Lex, 0, 1, 1).validate().is_err());
    assert!(SamplerConfig { resample_threshold: 1.5, ..SamplerConfig::default() }.validate().is_err());
    assert!(SamplerConfig::default().validate().is_ok());
    assert_eq!("pyp-type".parse::<SamplerKind>().unwrap(), SamplerKind::PypType);
    assert!("gibbs".parse::<SamplerKind>().is_err());
}

#[test]
fn hyperparameter_resampling_leaves_counts_alone() {
    let c = toy();
    let mut m = random_model(&c, 3, EmissionMode::CharLm, 6);
    let before = m.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    resample_hyperparameters(&mut m, &HyperPrior::default(), &mut rng);
    assert_eq!(m.franchise(), before.franchise());
    assert_eq!(m.tags(), before.tags());
    assert_ne!(m.hyper(), before.hyper());
    assert_eq!(m.hyper().class, before.hyper().class);
    m.check_invariants(&c).unwrap();
}

// Exact posterior by enumerating every seating path.

/// All ways to seat `dish` along `chain`, with their probabilities.
fn seat_outcomes(store: &Franchise<u32>, chain: &[Level], dish: u32, base: f64) -> Vec<(f64, Franchise<u32>)> {
    let Some((lvl, rest)) = chain.split_first() else {
        return vec![(base, store.clone())];
    };
    let (a, b) = (lvl.params.discount, lvl.params.strength);
    let (n, k) = store.totals(lvl.rest);
    let mut opened = store.clone();
    opened.apply(Move { rest: lvl.rest, dish, from: 0, to: 1 });
    let mut out = Vec::new();
    let p_open = if n == 0 { 1.0 } else { (f64::from(k) * a + b) / (f64::from(n) + b) };
    for (p, s) in seat_outcomes(&opened, rest, dish, base) {
        out.push((p_open * p, s));
    }
    if let Some(t) = store.dish(lvl.rest, dish) {
        for &(size, count) in t.sizes() {
            let mut s = store.clone();
            s.apply(Move { rest: lvl.rest, dish, from: size, to: size + 1 });
            out.push(((f64::from(size) - a) * f64::from(count) / (f64::from(n) + b), s));
        }
    }
    out
}

/// A customer's chain, dish and terminal base probability.
struct Customer(Vec<Level>, u32, f64);

fn marginal(store: &Franchise<u32>, customers: &[Customer]) -> f64 {
    let Some((Customer(chain, dish, base), rest)) = customers.split_first() else {
        return 1.0;
    };
    seat_outcomes(store, chain, *dish, *base)
        .into_iter()
        .map(|(p, s)| p * marginal(&s, rest))
        .sum()
}

/// Unnormalized probability of classes and tags with seatings summed out.
fn exact_joint(s: &Structure, c: &Corpus, classes: &[AmbiguityClass], tags: &[Vec<Tag>], lex: bool) -> f64 {
    let n = s.tagset().size();
    let mut p = 1.0;
    if lex {
        // Class CRP, sequentially over types. With at most two types the
        // second customer's seating is forced, so predictives are exact.
        assert!(classes.len() <= 2);
        let mut lexicon = crate::model::Lexicon::new(c.num_types(), n, s.hyper().class, s.hyper().p_geom);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (w, &cl) in classes.iter().enumerate() {
            p *= lexicon.class_prior_prob(cl);
            lexicon.attach(w as TypeId, cl, &mut rng);
        }
    }
    let counts: Vec<u32> = (0..n as Tag)
        .map(|t| classes.iter().filter(|cl| cl.contains(t)).count() as u32)
        .collect();
    let mut customers = Vec::new();
    for (ts, ws) in tags.iter().zip(c.sentences()) {
        for tr in sentence_transitions(ts, s.tagset().boundary()) {
            customers.push(Customer(s.transition_chain(tr.prev1, tr.prev2).to_vec(), tr.next, s.transition_base()));
        }
        for (&t, &w) in ts.iter().zip(ws) {
            if !classes[w as usize].contains(t) {
                return 0.0;
            }
            customers.push(Customer(s.emission_chain(t).to_vec(), w, 1.0 / f64::from(counts[t as usize])));
        }
    }
    p * marginal(&Franchise::new(s.num_restaurants()), &customers)
}

type State = (Vec<AmbiguityClass>, Vec<Tag>);

fn all_tag_vectors(len: usize, n: usize) -> Vec<Vec<Tag>> {
    (0..n.pow(len as u32))
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let t = (code % n) as Tag;
                    code /= n;
                    t
                })
                .collect()
        })
        .collect()
}

fn exact_posterior(c: &Corpus, n: usize, lex: bool) -> BTreeMap<State, f64> {
    let m = Model::new(c, n, EmissionMode::Uniform, hyper()).unwrap();
    let s = m.structure();
    let class_sets: Vec<Vec<AmbiguityClass>> = if lex {
        let options: Vec<AmbiguityClass> = (1..(1u128 << n)).map(AmbiguityClass::from_bits).collect();
        all_tag_vectors(c.num_types(), options.len())
            .into_iter()
            .map(|v| v.into_iter().map(|i| options[i as usize]).collect())
            .collect()
    } else {
        vec![vec![AmbiguityClass::full(n); c.num_types()]]
    };
    let mut post = BTreeMap::new();
    let mut total = 0.0;
    for classes in class_sets {
        for flat in all_tag_vectors(c.num_tokens(), n) {
            let mut it = flat.iter().copied();
            let tags: Vec<Vec<Tag>> = c.sentences().iter().map(|s| s.iter().map(|_| it.next().unwrap()).collect()).collect();
            let p = exact_joint(s, c, &classes, &tags, lex);
            if p > 0.0 {
                total += p;
                post.insert((classes.clone(), flat), p);
            }
        }
    }
    for v in post.values_mut() {
        *v /= total;
    }
    post
}

fn empirical(c: &Corpus, cfg: SamplerConfig, sweeps: usize) -> BTreeMap<State, f64> {
    let mut tr = Trainer::new(c, cfg).unwrap();
    for _ in 0..100 {
        tr.step().unwrap();
    }
    let mut counts: BTreeMap<State, f64> = BTreeMap::new();
    for _ in 0..sweeps {
        tr.step().unwrap();
        let m = tr.model();
        *counts.entry((m.lexicon().classes().to_vec(), m.tags_flat())).or_default() += 1.0;
    }
    for v in counts.values_mut() {
        *v /= sweeps as f64;
    }
    counts
}

fn max_gap(a: &BTreeMap<State, f64>, b: &BTreeMap<State, f64>) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn exact_joint_oracle_matches_model_joint_when_seating_is_forced() {
    // With one customer per restaurant chain the seating is deterministic,
    // so the enumerated marginal must equal the model's log joint.
    let c = corpus(&["a"]);
    let mut m = Model::new(&c, 2, EmissionMode::Uniform, hyper()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    m.initialize(&c, vec![AmbiguityClass::singleton(1)], vec![vec![1]], &mut rng).unwrap();
    let p = exact_joint(m.structure(), &c, &[AmbiguityClass::singleton(1)], &[vec![1]], true);
    assert!((p.ln() - m.log_joint()).abs() < 1e-12);
}

#[test]
fn pinned_samplers_match_exact_posterior() {
    let c = corpus(&["a b a", "b"]);
    let exact = exact_posterior(&c, 2, false);
    let sweeps = 60_000;
    for (kind, particles) in [(SamplerKind::Local, 1), (SamplerKind::PypType, 3)] {
        let got = empirical(&c, config(kind, 2, particles, 77), sweeps);
        let gap = max_gap(&exact, &got);
        assert!(gap < 0.012, "{kind:?}: largest state probability gap {gap}");
    }
}

#[test]
fn lexicon_sampler_matches_exact_posterior() {
    let c = corpus(&["a b a"]);
    let exact = exact_posterior(&c, 2, true);
    let got = empirical(&c, config(SamplerKind::Lex, 2, 4, 78), 120_000);
    let gap = max_gap(&exact, &got);
    assert!(gap < 0.012, "largest state probability gap {gap}");
}

#[test]
fn block_plan_agrees_with_site_lookup() {
    let c = toy();
    let m = random_model(&c, 3, EmissionMode::Uniform, 3);
    for w in 0..c.num_types() as TypeId {
        let sites = c.sites_of_type(w).unwrap();
        let plans = site::block_plan(&c, m.tags(), m.tagset().boundary(), sites);
        assert_eq!(plans.len(), sites.len());
        for (p, st) in plans.iter().zip(sites) {
            assert_eq!(p.word, c.word_at(*st));
        }
    }
}

