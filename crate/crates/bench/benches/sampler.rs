use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lexhmm::pyp::{predictive, seat, unseat, Franchise, Level, PypParams, SeatingDelta};
use lexhmm::{SamplerConfig, SamplerKind, Trainer};
use lexhmm_bench::synthetic_corpus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sweeps(c: &mut Criterion) {
    let corpus = synthetic_corpus(3_000, 12, 40, 1);
    let mut group = c.benchmark_group("iteration");
    group.sample_size(10);
    for kind in [SamplerKind::Lex, SamplerKind::PypType] {
        let config = SamplerConfig {
            num_tags: 12,
            particles: 10,
            kind,
            ..SamplerConfig::default()
        };
        // Start from a few iterations in, where lexicon classes are sparse.
        let mut warm = Trainer::new(&corpus, config.clone()).unwrap();
        for _ in 0..3 {
            warm.step().unwrap();
        }
        let model = warm.into_model();
        group.bench_function(kind.name(), |b| {
            b.iter_batched(
                || Trainer::with_model(&corpus, config.clone(), model.clone(), 3).unwrap(),
                |mut t| black_box(t.step().unwrap()),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn restaurants(c: &mut Criterion) {
    let p = PypParams::new(0.5, 1.0).unwrap();
    let chain = [Level::new(0, p), Level::new(1, p), Level::new(2, p)];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f: Franchise<u32> = Franchise::new(3);
    for _ in 0..10_000 {
        let dish = rng.random_range(0..50);
        seat(&mut f, &chain, dish, 1.0 / 50.0, &mut rng, &mut SeatingDelta::new());
    }
    c.bench_function("predictive", |b| {
        let mut d = 0u32;
        b.iter(|| {
            d = (d + 7) % 50;
            black_box(predictive(&f, &chain, d, 1.0 / 50.0))
        })
    });
    c.bench_function("seat+unseat", |b| {
        let mut d = 0u32;
        b.iter(|| {
            d = (d + 7) % 50;
            let mut j = SeatingDelta::new();
            seat(&mut f, &chain, d, 1.0 / 50.0, &mut rng, &mut j);
            unseat(&mut f, &chain, d, &mut rng, &mut j);
        })
    });
}

criterion_group!(benches, sweeps, restaurants);
criterion_main!(benches);
