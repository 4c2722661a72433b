//! Presentation-order check: ingest a corpus in shuffled orders and compare
//! every document's heads, density bits and category with the file order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::corpus::RawDocument;
use crate::engine::{Engine, NodeFingerprint};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// 1-based index of the failing permutation.
    pub permutation: usize,
    pub doc_id: String,
    pub field: &'static str,
    pub expected: String,
    pub got: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermutationOutcome {
    pub permutations: usize,
    pub documents: usize,
    pub divergence: Option<Divergence>,
}

impl PermutationOutcome {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

pub fn fingerprint_of(docs: &[&RawDocument], config: &Config) -> Result<BTreeMap<String, NodeFingerprint>> {
    let mut engine = Engine::new(config.clone())?;
    for doc in docs {
        engine.ingest(doc)?;
    }
    Ok(engine.fingerprint())
}

/// First difference between two fingerprints, in doc id order.
pub fn compare(
    expected: &BTreeMap<String, NodeFingerprint>,
    got: &BTreeMap<String, NodeFingerprint>,
    permutation: usize,
) -> Option<Divergence> {
    let div = |doc_id: &str, field, e: String, g: String| Divergence {
        permutation,
        doc_id: doc_id.to_owned(),
        field,
        expected: e,
        got: g,
    };
    for (doc_id, e) in expected {
        let Some(g) = got.get(doc_id) else {
            return Some(div(doc_id, "presence", "present".into(), "missing".into()));
        };
        if e.heads != g.heads {
            return Some(div(doc_id, "heads", format!("{:?}", e.heads), format!("{:?}", g.heads)));
        }
        if e.density_bits != g.density_bits {
            let show = |b: u64| format!("{:e} ({b:#018x})", f64::from_bits(b));
            return Some(div(doc_id, "density", show(e.density_bits), show(g.density_bits)));
        }
        if e.category != g.category {
            return Some(div(doc_id, "category", format!("{:?}", e.category), format!("{:?}", g.category)));
        }
    }
    got.keys()
        .find(|d| !expected.contains_key(*d))
        .map(|d| div(d, "presence", "missing".into(), "present".into()))
}

/// Runs `n` seeded shuffles of `docs` against the file order.
pub fn permutation_test(docs: &[RawDocument], config: &Config, n: usize, seed: u64) -> Result<PermutationOutcome> {
    let mut order: Vec<&RawDocument> = docs.iter().collect();
    let baseline = fingerprint_of(&order, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in 1..=n {
        order.shuffle(&mut rng);
        let got = fingerprint_of(&order, config)?;
        if let Some(divergence) = compare(&baseline, &got, p) {
            return Ok(PermutationOutcome {
                permutations: p,
                documents: docs.len(),
                divergence: Some(divergence),
            });
        }
    }
    Ok(PermutationOutcome {
        permutations: n,
        documents: docs.len(),
        divergence: None,
    })
}
