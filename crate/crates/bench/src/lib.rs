//! Synthetic workloads for the benchmarks.

use lexhmm::{Corpus, CorpusBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Corpus sampled from a random first-order HMM over `num_tags` tags. Each
/// tag owns `words_per_tag` words drawn with Zipfian weights; roughly one
/// word in ten is shared with the next tag. Sentences have 8 to 20 tokens.
pub fn synthetic_corpus(tokens: usize, num_tags: usize, words_per_tag: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions: Vec<Vec<f64>> = (0..num_tags)
        .map(|_| (0..num_tags).map(|_| rng.random::<f64>().powi(3)).collect())
        .collect();
    let zipf: Vec<f64> = (1..=words_per_tag).map(|r| 1.0 / r as f64).collect();
    let word = |t: usize, r: usize| {
        if r % 10 == 9 {
            format!("w{}_{r}", (t + 1) % num_tags)
        } else {
            format!("w{t}_{r}")
        }
    };
    let mut b = CorpusBuilder::new();
    let mut produced = 0;
    while produced < tokens {
        let len = rng.random_range(8..=20).min(tokens - produced);
        let mut t = rng.random_range(0..num_tags);
        let mut sentence = Vec::with_capacity(len);
        for _ in 0..len {
            let r = draw(&zipf, &mut rng);
            sentence.push((word(t, r), format!("T{t}")));
            t = draw(&transitions[t], &mut rng);
        }
        b.push_sentence(sentence.iter().map(|(w, g)| (w.as_str(), Some(g.as_str()))))
            .expect("well-formed sentence");
        produced += len;
    }
    b.build().expect("nonempty corpus")
}

fn draw<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}
