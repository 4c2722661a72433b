//! Shared fixtures: corpus generators and a from-scratch batch oracle.
//!
//! The oracle recomputes everything by brute force from the documents: the
//! tied K-NN lists by sorting all candidates, densities from the
//! 1-neighborhoods, and head lists by a single sweep in decreasing density,
//! which is valid because a node only inherits from denser (or, on a plateau,
//! older) in-neighbors.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use germen_core::{
    exact_sum, Config, DensityKind, Engine, NodeId, RawDocument, Rule, SurplombantMode,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Topic-mixture corpus. Roughly one document in twelve is an exact copy of
/// an earlier one under a new id, so density plateaus occur.
pub fn synthetic_corpus(n_docs: usize, n_desc: usize, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_topics = 6;
    let topics: Vec<Vec<usize>> = (0..n_topics)
        .map(|_| (0..25).map(|_| rng.gen_range(0..n_desc)).collect())
        .collect();
    let mut docs: Vec<RawDocument> = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let doc_id = format!("doc{i:04}");
        if i > 3 && rng.gen_ratio(1, 12) {
            let src = docs[rng.gen_range(0..docs.len())].terms.clone();
            docs.push(RawDocument { doc_id, terms: src });
            continue;
        }
        let main = rng.gen_range(0..n_topics);
        let other = rng.gen_range(0..n_topics);
        let mut terms: Vec<(String, u32)> = Vec::new();
        let mut used = BTreeSet::new();
        for _ in 0..rng.gen_range(4..=10) {
            let d = match rng.gen_range(0..10) {
                0..=6 => *topics[main].choose(&mut rng).unwrap(),
                7..=8 => *topics[other].choose(&mut rng).unwrap(),
                _ => rng.gen_range(0..n_desc),
            };
            if used.insert(d) {
                terms.push((format!("t{d:03}"), rng.gen_range(1..=4)));
            }
        }
        docs.push(RawDocument { doc_id, terms });
    }
    docs
}

/// Three planar discs of integer points `(x, y)`, one radius each, with a
/// constant third coordinate. Returns the documents and each one's disc.
pub fn three_clouds(per_cloud: usize, radii: [i64; 3], bias: u32, seed: u64) -> (Vec<RawDocument>, HashMap<String, usize>) {
    let centers = [(200i64, 40i64), (120, 120), (40, 200)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut cloud = HashMap::new();
    for (c, (&(cx, cy), &radius)) in centers.iter().zip(&radii).enumerate() {
        let mut seen = BTreeSet::new();
        while seen.len() < per_cloud {
            let x = cx + rng.gen_range(-radius..=radius);
            let y = cy + rng.gen_range(-radius..=radius);
            if (x - cx).pow(2) + (y - cy).pow(2) > radius * radius || !seen.insert((x, y)) {
                continue;
            }
            let doc_id = format!("c{c}-{x}-{y}");
            cloud.insert(doc_id.clone(), c);
            docs.push(RawDocument::new(
                doc_id,
                [("x", x as u32), ("y", y as u32), ("bias", bias)],
            ));
        }
    }
    docs.shuffle(&mut rng);
    (docs, cloud)
}

/// Small documents over a handful of descriptors: many exact ties.
pub fn tie_heavy_docs(max_len: usize) -> impl Strategy<Value = Vec<RawDocument>> {
    prop::collection::vec(
        prop::collection::btree_map(0u8..6, 1u32..=3, 1..=4),
        1..=max_len,
    )
    .prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, terms)| RawDocument::new(format!("d{i}"), terms.into_iter().map(|(t, c)| (format!("w{t}"), c))))
            .collect()
    })
}

pub fn any_config() -> impl Strategy<Value = Config> {
    (
        1usize..=4,
        prop_oneof![Just(0.1), Just(0.0), Just(0.5)],
        prop_oneof![Just(Rule::A), Just(Rule::B)],
        prop_oneof![Just(DensityKind::Sum), Just(DensityKind::Coefficient)],
        prop_oneof![Just(SurplombantMode::StrictGreater), Just(SurplombantMode::DominatesNeighborhood)],
    )
        .prop_map(|(k, sim_threshold, rule, density, surplombant)| Config {
            k,
            sim_threshold,
            rule,
            density,
            surplombant,
            plateau_oldest: false,
        })
}

pub fn ingest(docs: &[RawDocument], config: &Config) -> Engine {
    let mut engine = Engine::new(config.clone()).unwrap();
    for d in docs {
        engine.ingest(d).unwrap();
    }
    engine
}

/// Brute-force state over nodes `0..n`, indices matching arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchState {
    pub out: Vec<Vec<(usize, f64)>>,
    pub density: Vec<f64>,
    pub heads: Vec<Vec<usize>>,
}

/// Pairwise similarities of the engine's first `n` documents.
pub fn similarity_matrix(engine: &Engine, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let s = germen_core::similarity(engine.vector(NodeId(i)), engine.vector(NodeId(j)));
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    m
}

pub fn tied_knn(sims: &[Vec<f64>], n: usize, u: usize, config: &Config) -> Vec<(usize, f64)> {
    let mut cands: Vec<(usize, f64)> = (0..n)
        .filter(|&v| v != u && sims[u][v] > config.sim_threshold)
        .map(|v| (v, sims[u][v]))
        .collect();
    cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    if cands.len() > config.k {
        let cutoff = cands[config.k - 1].1;
        cands.retain(|&(_, s)| s >= cutoff);
    }
    cands.sort_by_key(|&(v, _)| v);
    cands
}

pub fn neighborhood(out: &[Vec<(usize, f64)>], v: usize) -> BTreeSet<usize> {
    let mut hood = BTreeSet::from([v]);
    hood.extend(out[v].iter().map(|&(w, _)| w));
    for (u, links) in out.iter().enumerate() {
        if links.iter().any(|&(w, _)| w == v) {
            hood.insert(u);
        }
    }
    hood
}

pub fn batch_density(out: &[Vec<(usize, f64)>], v: usize, kind: DensityKind) -> f64 {
    let hood = neighborhood(out, v);
    let total = exact_sum(
        hood.iter()
            .flat_map(|&a| out[a].iter().filter(|(b, _)| hood.contains(b)).map(|&(_, s)| s)),
    );
    match kind {
        DensityKind::Sum => total,
        DensityKind::Coefficient => {
            let n = hood.len();
            if n < 2 {
                0.0
            } else {
                total / (n * (n - 1)) as f64
            }
        }
    }
}

pub fn batch_heads(out: &[Vec<(usize, f64)>], density: &[f64], config: &Config) -> Vec<Vec<usize>> {
    let n = out.len();
    let mut inn: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, links) in out.iter().enumerate() {
        for &(w, _) in links {
            inn[w].push(u);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| density[b].partial_cmp(&density[a]).unwrap().then(a.cmp(&b)));
    let mut heads: Vec<Option<Vec<usize>>> = vec![None; n];
    for v in order {
        let hood: Vec<usize> = inn[v].iter().chain(out[v].iter().map(|(w, _)| w)).copied().collect();
        let mut over: Vec<usize> = inn[v]
            .iter()
            .copied()
            .filter(|&u| density[u] > density[v])
            .filter(|&u| match config.surplombant {
                SurplombantMode::StrictGreater => true,
                SurplombantMode::DominatesNeighborhood => {
                    hood.iter().all(|&w| w == u || density[w] < density[u])
                }
            })
            .collect();
        if over.is_empty() && config.plateau_oldest {
            over = inn[v].iter().copied().filter(|&u| u < v && density[u] == density[v]).collect();
        }
        let list = if over.is_empty() {
            vec![v]
        } else {
            match config.rule {
                Rule::A => {
                    let top = *over
                        .iter()
                        .min_by(|&&a, &&b| density[b].partial_cmp(&density[a]).unwrap().then(a.cmp(&b)))
                        .unwrap();
                    heads[top].clone().expect("denser node labeled first")
                }
                Rule::B => {
                    let set: BTreeSet<usize> = over
                        .iter()
                        .flat_map(|&u| heads[u].clone().expect("denser node labeled first"))
                        .collect();
                    set.into_iter().collect()
                }
            }
        };
        heads[v] = Some(list);
    }
    heads.into_iter().map(Option::unwrap).collect()
}

pub fn batch_state(sims: &[Vec<f64>], n: usize, config: &Config) -> BatchState {
    let out: Vec<Vec<(usize, f64)>> = (0..n).map(|u| tied_knn(sims, n, u, config)).collect();
    let density: Vec<f64> = (0..n).map(|v| batch_density(&out, v, config.density)).collect();
    let heads = batch_heads(&out, &density, config);
    BatchState { out, density, heads }
}

pub fn engine_state(engine: &Engine) -> BatchState {
    let n = engine.len();
    let graph = engine.graph();
    BatchState {
        out: (0..n)
            .map(|u| graph.out_links(NodeId(u)).iter().map(|l| (l.peer.0, l.similarity)).collect())
            .collect(),
        density: engine.densities().to_vec(),
        heads: (0..n).map(|v| engine.heads(NodeId(v)).iter().map(|h| h.0).collect()).collect(),
    }
}

/// First field where two states differ bitwise.
pub fn state_diff(a: &BatchState, b: &BatchState) -> Option<String> {
    if a.out.len() != b.out.len() {
        return Some(format!("sizes {} vs {}", a.out.len(), b.out.len()));
    }
    for v in 0..a.out.len() {
        let la: Vec<(usize, u64)> = a.out[v].iter().map(|&(w, s)| (w, s.to_bits())).collect();
        let lb: Vec<(usize, u64)> = b.out[v].iter().map(|&(w, s)| (w, s.to_bits())).collect();
        if la != lb {
            return Some(format!("out-links of {v}: {:?} vs {:?}", a.out[v], b.out[v]));
        }
        if a.density[v].to_bits() != b.density[v].to_bits() {
            return Some(format!("density of {v}: {} vs {}", a.density[v], b.density[v]));
        }
        if a.heads[v] != b.heads[v] {
            return Some(format!("heads of {v}: {:?} vs {:?}", a.heads[v], b.heads[v]));
        }
    }
    None
}
