//! Class-head assignment over the density landscape.
//!
//! Every node inherits class heads from its overhanging in-neighbors (those
//! of strictly greater density); a node with none founds its own class.
//! Because inheritance only ever flows from denser to less dense nodes, the
//! labeling of a given graph and landscape is a unique fixed point, reached
//! here by a worklist that processes nodes in decreasing density.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::{Config, Rule, SurplombantMode};
use crate::error::{Error, Result};
use crate::knn_graph::{NeighborGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeCategory {
    /// Strict member of a class with at least two strict members (head included).
    NoyauMember,
    /// Lone head that anchors only multivalent nodes.
    Nodule,
    /// Lone head with nothing attached.
    Isole,
    /// Node with two or more heads.
    Multivalent,
}

/// Head lists of every node, sorted ascending and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelingState {
    heads: Vec<Vec<NodeId>>,
}

/// Outcome of one [`LabelingState::propagate`] run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Propagation {
    pub changed: BTreeSet<NodeId>,
    pub passes: usize,
    pub evaluations: usize,
}

fn by_density_then_age(densities: &[f64], a: NodeId, b: NodeId) -> std::cmp::Ordering {
    densities[b.0]
        .total_cmp(&densities[a.0])
        .then(a.cmp(&b))
}

/// In-neighbors of `v` that overhang it, most overhanging first
/// (descending density, then oldest).
pub fn surplombants(
    graph: &NeighborGraph,
    densities: &[f64],
    v: NodeId,
    mode: SurplombantMode,
) -> Vec<(NodeId, f64)> {
    let dv = densities[v.0];
    let mut found: Vec<(NodeId, f64)> = graph
        .in_links(v)
        .iter()
        .map(|l| (l.peer, densities[l.peer.0]))
        .filter(|&(_, du)| du > dv)
        .collect();
    if mode == SurplombantMode::DominatesNeighborhood {
        let hood: Vec<NodeId> = graph
            .in_links(v)
            .iter()
            .chain(graph.out_links(v))
            .map(|l| l.peer)
            .collect();
        found.retain(|&(u, du)| hood.iter().all(|&w| w == u || densities[w.0] < du));
    }
    found.sort_by(|a, b| by_density_then_age(densities, a.0, b.0));
    found
}

fn inheritance_sources(
    graph: &NeighborGraph,
    densities: &[f64],
    v: NodeId,
    config: &Config,
) -> Vec<NodeId> {
    let over = surplombants(graph, densities, v, config.surplombant);
    if !over.is_empty() || !config.plateau_oldest {
        return over.into_iter().map(|(u, _)| u).collect();
    }
    let dv = densities[v.0].to_bits();
    graph
        .in_links(v)
        .iter()
        .map(|l| l.peer)
        .filter(|&u| u < v && densities[u.0].to_bits() == dv)
        .collect()
}

/// Nodes whose head list may depend on the head list of `v`.
fn dependents<'a>(
    graph: &'a NeighborGraph,
    densities: &'a [f64],
    v: NodeId,
    config: &'a Config,
) -> impl Iterator<Item = NodeId> + 'a {
    let dv = densities[v.0];
    graph.out_links(v).iter().map(|l| l.peer).filter(move |&w| {
        let dw = densities[w.0];
        dw < dv || (config.plateau_oldest && w > v && dw.to_bits() == dv.to_bits())
    })
}

impl LabelingState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Takes head lists as stored; each must be sorted and duplicate-free.
    pub fn from_heads(heads: Vec<Vec<NodeId>>) -> Result<Self> {
        let n = heads.len();
        for (v, list) in heads.iter().enumerate() {
            if list.is_empty()
                || list.windows(2).any(|w| w[0] >= w[1])
                || list.iter().any(|h| h.0 >= n)
            {
                return Err(Error::Snapshot(format!("bad head list for node {v}")));
            }
        }
        Ok(Self { heads })
    }

    /// Registers a new node as its own head.
    pub fn push_node(&mut self) -> NodeId {
        let v = NodeId(self.heads.len());
        self.heads.push(vec![v]);
        v
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn heads(&self, v: NodeId) -> &[NodeId] {
        &self.heads[v.0]
    }

    pub fn all_heads(&self) -> &[Vec<NodeId>] {
        &self.heads
    }

    pub fn is_head(&self, v: NodeId) -> bool {
        self.heads[v.0] == [v]
    }

    /// Nodes that are their own sole head, ascending.
    pub fn head_nodes(&self) -> Vec<NodeId> {
        (0..self.heads.len())
            .map(NodeId)
            .filter(|&v| self.is_head(v))
            .collect()
    }

    /// Head list `v` would receive from its current sources.
    pub fn apply_rule(
        &self,
        graph: &NeighborGraph,
        densities: &[f64],
        v: NodeId,
        config: &Config,
    ) -> Vec<NodeId> {
        let sources = inheritance_sources(graph, densities, v, config);
        let Some(&first) = sources.first() else {
            return vec![v];
        };
        match config.rule {
            Rule::A => self.heads[first.0].clone(),
            Rule::B => {
                let union: BTreeSet<NodeId> = sources
                    .iter()
                    .flat_map(|u| self.heads[u.0].iter().copied())
                    .collect();
                union.into_iter().collect()
            }
        }
    }

    /// Re-evaluates the seeded nodes, pass after pass, until no head list
    /// changes. Each pass visits its nodes by decreasing density and queues
    /// the dependents of every node whose heads changed.
    pub fn propagate(
        &mut self,
        graph: &NeighborGraph,
        densities: &[f64],
        seed: BTreeSet<NodeId>,
        config: &Config,
    ) -> Result<Propagation> {
        let n = self.heads.len();
        let max_passes = (n * n).max(1);
        let mut outcome = Propagation::default();
        let mut pending = seed;
        while !pending.is_empty() {
            if outcome.passes == max_passes {
                return Err(Error::NonTermination(outcome.passes));
            }
            outcome.passes += 1;
            let mut order: Vec<NodeId> = pending.into_iter().collect();
            order.sort_by(|&a, &b| by_density_then_age(densities, a, b));
            let mut next = BTreeSet::new();
            for v in order {
                outcome.evaluations += 1;
                let fresh = self.apply_rule(graph, densities, v, config);
                if fresh != self.heads[v.0] {
                    self.heads[v.0] = fresh;
                    outcome.changed.insert(v);
                    next.extend(dependents(graph, densities, v, config));
                }
            }
            pending = next;
        }
        Ok(outcome)
    }

    /// Labels every node from scratch.
    pub fn settle(graph: &NeighborGraph, densities: &[f64], config: &Config) -> Result<Self> {
        let mut state = Self {
            heads: (0..graph.len()).map(|v| vec![NodeId(v)]).collect(),
        };
        let all = (0..graph.len()).map(NodeId).collect();
        state.propagate(graph, densities, all, config)?;
        Ok(state)
    }

    pub fn categories(&self) -> Vec<NodeCategory> {
        let n = self.heads.len();
        let mut strict_members = vec![0usize; n];
        let mut anchors_multivalent = vec![false; n];
        for (v, list) in self.heads.iter().enumerate() {
            match list.as_slice() {
                [h] if h.0 != v => strict_members[h.0] += 1,
                [_] => {}
                many => many.iter().for_each(|h| anchors_multivalent[h.0] = true),
            }
        }
        self.heads
            .iter()
            .enumerate()
            .map(|(v, list)| match list.as_slice() {
                [h] if h.0 != v => NodeCategory::NoyauMember,
                [_] if strict_members[v] > 0 => NodeCategory::NoyauMember,
                [_] if anchors_multivalent[v] => NodeCategory::Nodule,
                [_] => NodeCategory::Isole,
                _ => NodeCategory::Multivalent,
            })
            .collect()
    }

    pub fn categorize(&self, v: NodeId) -> NodeCategory {
        self.categories()[v.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn_graph::Link;

    fn graph(out: &[&[usize]]) -> NeighborGraph {
        NeighborGraph::from_out_links(
            out.iter()
                .map(|links| links.iter().map(|&p| Link { peer: NodeId(p), similarity: 0.5 }).collect())
                .collect(),
        )
        .unwrap()
    }

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn rule(rule: Rule) -> Config {
        Config { rule, ..Config::default() }
    }

    #[test]
    fn surplombants_examples() {
        let g = graph(&[&[2], &[2], &[], &[]]);
        let d = [2.0, 0.5, 1.0, 0.0];
        assert!(surplombants(&g, &d, NodeId(3), SurplombantMode::StrictGreater).is_empty());
        let s = surplombants(&g, &d, NodeId(2), SurplombantMode::StrictGreater);
        assert_eq!(s, vec![(NodeId(0), 2.0)]);
    }

    #[test]
    fn equal_density_surplombants_are_ordered_oldest_first() {
        // nodes 3 and 7 both point at node 0
        let mut out: Vec<&[usize]> = vec![&[]; 8];
        out[3] = &[0];
        out[7] = &[0];
        let g = graph(&out);
        let mut d = [0.0; 8];
        d[0] = 1.0;
        d[3] = 2.0;
        d[7] = 2.0;
        let s = surplombants(&g, &d, NodeId(0), SurplombantMode::StrictGreater);
        assert_eq!(s, vec![(NodeId(3), 2.0), (NodeId(7), 2.0)]);
        assert_eq!(LabelingState::settle(&g, &d, &rule(Rule::A)).unwrap().heads(NodeId(0)), ids(&[3]));
    }

    #[test]
    fn no_surplombant_founds_a_class() {
        let g = graph(&[&[]]);
        let state = LabelingState::from_heads(vec![ids(&[0])]).unwrap();
        assert_eq!(state.apply_rule(&g, &[0.0], NodeId(0), &rule(Rule::B)), ids(&[0]));
    }

    #[test]
    fn rule_b_takes_union_and_rule_a_takes_most_surplombant() {
        // 0 and 1 overhang 2; heads(0) = {0}, heads(1) = {0, 1}
        let g = graph(&[&[2], &[2], &[]]);
        let d = [3.0, 2.0, 1.0];
        let state = LabelingState::from_heads(vec![ids(&[0]), ids(&[0, 1]), ids(&[2])]).unwrap();
        assert_eq!(state.apply_rule(&g, &d, NodeId(2), &rule(Rule::B)), ids(&[0, 1]));
        assert_eq!(state.apply_rule(&g, &d, NodeId(2), &rule(Rule::A)), ids(&[0]));
    }

    #[test]
    fn chain_under_rule_a() {
        let g = graph(&[&[1], &[2], &[]]);
        let d = [3.0, 2.0, 1.0];
        let mut state = LabelingState::from_heads(vec![ids(&[0]), ids(&[1]), ids(&[2])]).unwrap();
        // seed only the bottom of the chain and the middle: two passes
        let p = state
            .propagate(&g, &d, BTreeSet::from([NodeId(1)]), &rule(Rule::A))
            .unwrap();
        assert_eq!(p.passes, 2);
        assert_eq!(state.all_heads(), &[ids(&[0]), ids(&[0]), ids(&[0])]);
    }

    #[test]
    fn valley_between_two_peaks_is_multivalent() {
        let g = graph(&[&[2], &[2], &[]]);
        let d = [3.0, 2.5, 1.0];
        let state = LabelingState::settle(&g, &d, &rule(Rule::B)).unwrap();
        assert_eq!(state.heads(NodeId(2)), ids(&[0, 1]));
        assert_eq!(state.categorize(NodeId(2)), NodeCategory::Multivalent);
        assert_eq!(state.categorize(NodeId(0)), NodeCategory::Nodule);
    }

    #[test]
    fn unchanged_seed_leaves_state_untouched() {
        let g = graph(&[&[1], &[0]]);
        let d = [1.0, 1.0];
        let mut state = LabelingState::settle(&g, &d, &rule(Rule::B)).unwrap();
        let before = state.clone();
        let p = state
            .propagate(&g, &d, BTreeSet::from([NodeId(0), NodeId(1)]), &rule(Rule::B))
            .unwrap();
        assert!(p.changed.is_empty());
        assert_eq!(state, before);
    }

    #[test]
    fn plateau_oldest_gives_plateau_to_oldest_node() {
        let g = graph(&[&[1], &[0]]);
        let d = [1.0, 1.0];
        let strict = LabelingState::settle(&g, &d, &rule(Rule::B)).unwrap();
        assert_eq!(strict.head_nodes(), ids(&[0, 1]));
        let plateau = Config { plateau_oldest: true, ..Config::default() };
        let tied = LabelingState::settle(&g, &d, &plateau).unwrap();
        assert_eq!(tied.head_nodes(), ids(&[0]));
        assert_eq!(tied.heads(NodeId(1)), ids(&[0]));
    }

    #[test]
    fn dominates_mode_requires_neighborhood_maximum() {
        // 0 -> 2 (d 2.0), 1 -> 2 (d 3.0), 2 -> 3 where 3 has density 4.0
        let g = graph(&[&[2], &[2], &[3], &[]]);
        let d = [2.0, 3.0, 1.0, 4.0];
        let strict = surplombants(&g, &d, NodeId(2), SurplombantMode::StrictGreater);
        assert_eq!(strict.len(), 2);
        let dominating = surplombants(&g, &d, NodeId(2), SurplombantMode::DominatesNeighborhood);
        assert!(dominating.is_empty());
    }

    #[test]
    fn categories() {
        // 0 <- 1 <- ... a three-member noyau headed by 0; 3 isolated;
        // 5 bivalent between heads 0 and 4; 4 is a nodule
        let heads = vec![ids(&[0]), ids(&[0]), ids(&[0]), ids(&[3]), ids(&[4]), ids(&[0, 4])];
        let state = LabelingState::from_heads(heads).unwrap();
        use NodeCategory::*;
        assert_eq!(
            state.categories(),
            vec![NoyauMember, NoyauMember, NoyauMember, Isole, Nodule, Multivalent]
        );
    }
}
