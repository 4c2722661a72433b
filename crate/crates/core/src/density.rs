//! Density landscape over the K-NN graph.
//!
//! The density of a node is the sum of the similarities of every oriented
//! link whose two ends lie in the node's 1-neighborhood (the node itself and
//! its in- and out-neighbors). A reciprocal pair counts twice.

use std::collections::BTreeSet;

use crate::config::DensityKind;
use crate::error::Result;
use crate::knn_graph::{NeighborGraph, NodeId, PerturbationSet};
use crate::sum::ExactSum;

fn link_sum(graph: &NeighborGraph, hood: &BTreeSet<NodeId>) -> f64 {
    let mut acc = ExactSum::new();
    for &a in hood {
        for link in graph.out_links(a) {
            if hood.contains(&link.peer) {
                acc.add(link.similarity);
            }
        }
    }
    acc.value()
}

pub fn density(graph: &NeighborGraph, v: NodeId) -> Result<f64> {
    let hood = graph.neighborhood(v, 1)?;
    Ok(link_sum(graph, &hood))
}

/// [`density`] divided by the number `n (n - 1)` of possible oriented links
/// in the 1-neighborhood; zero when the neighborhood has fewer than 2 nodes.
pub fn clustering_coefficient_density(graph: &NeighborGraph, v: NodeId) -> Result<f64> {
    let hood = graph.neighborhood(v, 1)?;
    let n = hood.len();
    if n < 2 {
        return Ok(0.0);
    }
    Ok(link_sum(graph, &hood) / (n * (n - 1)) as f64)
}

pub fn density_of_kind(graph: &NeighborGraph, v: NodeId, kind: DensityKind) -> Result<f64> {
    match kind {
        DensityKind::Sum => density(graph, v),
        DensityKind::Coefficient => clustering_coefficient_density(graph, v),
    }
}

/// Per-node densities, kept current as the graph grows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityLandscape {
    values: Vec<f64>,
}

impl DensityLandscape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Registers a freshly inserted node with density 0.
    pub fn push_node(&mut self) -> NodeId {
        self.values.push(0.0);
        NodeId(self.values.len() - 1)
    }

    pub fn get(&self, v: NodeId) -> f64 {
        self.values[v.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Recomputes the density of every perturbed node and of every node in
    /// the 1-neighborhood of a perturbed node. Returns the nodes whose value
    /// changed bitwise.
    pub fn update(
        &mut self,
        graph: &NeighborGraph,
        perturbed: &PerturbationSet,
        kind: DensityKind,
    ) -> Result<BTreeSet<NodeId>> {
        let mut touched = BTreeSet::new();
        for &v in perturbed {
            touched.extend(graph.neighborhood(v, 1)?);
        }
        let mut changed = BTreeSet::new();
        for v in touched {
            let fresh = density_of_kind(graph, v, kind)?;
            if fresh.to_bits() != self.values[v.0].to_bits() {
                self.values[v.0] = fresh;
                changed.insert(v);
            }
        }
        Ok(changed)
    }
}
