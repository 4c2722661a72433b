//! Incrementally maintained directed K-nearest-neighbor graph.
//!
//! A link `u -> v` exists when `v` is among the K most similar nodes of `u`
//! and the similarity is strictly above the threshold. Ties at the K-th
//! similarity are all kept, so a node may have more than K out-links. The
//! graph is not symmetric; in-links are kept as the exact transpose.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};

/// Node handle: the arrival index of a document in the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One end of a valued link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub peer: NodeId,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Adjacency {
    out: Vec<Link>,
    inc: Vec<Link>,
}

/// Nodes whose out- or in-link set changed during one insertion.
pub type PerturbationSet = BTreeSet<NodeId>;

/// What one call to [`NeighborGraph::insert_node`] changed.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub node: NodeId,
    pub perturbed: PerturbationSet,
    pub created: Vec<(NodeId, NodeId)>,
    /// Links `u -> w` dropped because the new node displaced `w` from the
    /// tied K-NN of `u`.
    pub deleted: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborGraph {
    adj: Vec<Adjacency>,
}

/// Keeps the candidates above `threshold` whose similarity reaches the K-th
/// largest one (counted with multiplicity). Output is sorted by peer id.
pub fn select_tied_knn(mut candidates: Vec<Link>, k: usize, threshold: f64) -> Vec<Link> {
    candidates.retain(|l| l.similarity > threshold);
    if candidates.len() > k {
        let mut sims: Vec<f64> = candidates.iter().map(|l| l.similarity).collect();
        sims.sort_unstable_by(|a, b| b.total_cmp(a));
        let cutoff = sims[k - 1];
        candidates.retain(|l| l.similarity >= cutoff);
    }
    candidates.sort_unstable_by_key(|l| l.peer);
    candidates
}

fn kth_largest(links: &[Link], k: usize) -> f64 {
    let mut sims: Vec<f64> = links.iter().map(|l| l.similarity).collect();
    sims.sort_unstable_by(|a, b| b.total_cmp(a));
    sims[k - 1]
}

impl NeighborGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a graph from per-node out-links, deriving the in-links.
    pub fn from_out_links(out: Vec<Vec<Link>>) -> Result<Self> {
        let n = out.len();
        let mut adj: Vec<Adjacency> = vec![Adjacency::default(); n];
        for (u, links) in out.into_iter().enumerate() {
            let mut prev: Option<NodeId> = None;
            for link in &links {
                if link.peer.0 >= n || link.peer.0 == u {
                    return Err(Error::Snapshot(format!("node {u} has an invalid link to {}", link.peer)));
                }
                if prev.is_some_and(|p| p >= link.peer) {
                    return Err(Error::Snapshot(format!("out-links of node {u} are not strictly ascending")));
                }
                prev = Some(link.peer);
                adj[link.peer.0].inc.push(Link {
                    peer: NodeId(u),
                    similarity: link.similarity,
                });
            }
            adj[u].out = links;
        }
        Ok(Self { adj })
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.0 < self.adj.len()
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownNode(v.0))
        }
    }

    /// Out-links of `v`, ascending by target. Panics on an unknown node.
    pub fn out_links(&self, v: NodeId) -> &[Link] {
        &self.adj[v.0].out
    }

    /// In-links of `v`, ascending by source. Panics on an unknown node.
    pub fn in_links(&self, v: NodeId) -> &[Link] {
        &self.adj[v.0].inc
    }

    pub fn link_count(&self) -> usize {
        self.adj.iter().map(|a| a.out.len()).sum()
    }

    /// All links `(source, target, similarity)` in ascending (source, target) order.
    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, a)| {
            a.out.iter().map(move |l| (NodeId(u), l.peer, l.similarity))
        })
    }

    pub fn has_link(&self, from: NodeId, to: NodeId) -> bool {
        self.contains(from)
            && self.adj[from.0]
                .out
                .binary_search_by_key(&to, |l| l.peer)
                .is_ok()
    }

    /// `{v}` plus every node within `depth` hops along in- or out-links.
    pub fn neighborhood(&self, v: NodeId, depth: usize) -> Result<BTreeSet<NodeId>> {
        self.check(v)?;
        let mut reached = BTreeSet::from([v]);
        let mut frontier = vec![v];
        for _ in 0..depth {
            let mut next = Vec::new();
            for u in frontier {
                let a = &self.adj[u.0];
                for l in a.out.iter().chain(&a.inc) {
                    if reached.insert(l.peer) {
                        next.push(l.peer);
                    }
                }
            }
            frontier = next;
        }
        Ok(reached)
    }

    /// Adds node `node` whose similarities to every prior node are
    /// `similarities[0..node]`, and repairs the K-NN lists of prior nodes.
    pub fn insert_node(
        &mut self,
        node: NodeId,
        similarities: &[f64],
        config: &Config,
    ) -> Result<Insertion> {
        let expected = self.adj.len();
        if node.0 != expected {
            return Err(Error::ArrivalOutOfOrder {
                expected,
                got: node.0,
            });
        }
        assert_eq!(similarities.len(), expected, "one similarity per prior node");
        let (k, threshold) = (config.k, config.sim_threshold);

        let candidates = similarities
            .iter()
            .enumerate()
            .map(|(u, &s)| Link {
                peer: NodeId(u),
                similarity: s,
            })
            .collect();
        let own_out = select_tied_knn(candidates, k, threshold);

        let mut insertion = Insertion {
            node,
            perturbed: PerturbationSet::new(),
            created: Vec::new(),
            deleted: Vec::new(),
        };
        // Prior nodes whose tied K-NN the new node enters, with the links they lose.
        let mut admitted: Vec<(NodeId, Vec<Link>, Vec<NodeId>)> = Vec::new();
        for (u, &s) in similarities.iter().enumerate() {
            if s <= threshold {
                continue;
            }
            let out = &self.adj[u].out;
            if out.len() >= k && s < kth_largest(out, k) {
                continue;
            }
            let mut candidates = out.clone();
            candidates.push(Link {
                peer: node,
                similarity: s,
            });
            let kept = select_tied_knn(candidates, k, threshold);
            let dropped = out
                .iter()
                .filter(|l| kept.binary_search_by_key(&l.peer, |k| k.peer).is_err())
                .map(|l| l.peer)
                .collect();
            admitted.push((NodeId(u), kept, dropped));
        }

        self.adj.push(Adjacency::default());
        for link in &own_out {
            self.adj[link.peer.0].inc.push(Link {
                peer: node,
                similarity: link.similarity,
            });
            insertion.created.push((node, link.peer));
            insertion.perturbed.insert(link.peer);
        }
        self.adj[node.0].out = own_out;

        for (u, kept, dropped) in admitted {
            let s = similarities[u.0];
            self.adj[node.0].inc.push(Link {
                peer: u,
                similarity: s,
            });
            insertion.created.push((u, node));
            insertion.perturbed.insert(u);
            for w in dropped {
                let inc = &mut self.adj[w.0].inc;
                let pos = inc
                    .binary_search_by_key(&u, |l| l.peer)
                    .expect("in-links mirror out-links");
                inc.remove(pos);
                insertion.deleted.push((u, w));
                insertion.perturbed.insert(w);
            }
            self.adj[u.0].out = kept;
        }
        if !insertion.created.is_empty() {
            insertion.perturbed.insert(node);
        }
        Ok(insertion)
    }
}
