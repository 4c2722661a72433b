//! Seeded corpora for the benchmarks.

use germen_core::RawDocument;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n_docs` documents over `n_desc` descriptors drawn from eight topics of
/// 30 descriptors each, 5 to 15 terms per document.
pub fn topic_corpus(n_docs: usize, n_desc: usize, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics: Vec<Vec<usize>> = (0..8)
        .map(|_| (0..30).map(|_| rng.gen_range(0..n_desc)).collect())
        .collect();
    (0..n_docs)
        .map(|i| {
            let topic = &topics[rng.gen_range(0..topics.len())];
            let mut terms = std::collections::BTreeMap::new();
            for _ in 0..rng.gen_range(5..=15) {
                let d = if rng.gen_bool(0.8) {
                    topic[rng.gen_range(0..topic.len())]
                } else {
                    rng.gen_range(0..n_desc)
                };
                *terms.entry(format!("t{d}")).or_insert(0) += rng.gen_range(1..=3u32);
            }
            RawDocument::new(format!("doc{i}"), terms)
        })
        .collect()
}
