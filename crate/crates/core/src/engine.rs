//! The streaming engine: one document in, graph, densities and labels
//! repaired locally, one [`IngestReport`] out.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::corpus::RawDocument;
use crate::density::{density_of_kind, DensityLandscape};
use crate::error::{Error, Result};
use crate::knn_graph::{Link, NeighborGraph, NodeId};
use crate::labeling::{LabelingState, NodeCategory};
use crate::vector_space::{
    normalize, similarity, DescriptorId, DescriptorRegistry, DocumentVector, NormalizedVector,
};

/// Summary of one ingestion, emitted as a JSON line in the dynamics log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub doc_id: String,
    pub node: NodeId,
    /// Size of the perturbation set (nodes whose links changed).
    pub perturbed: usize,
    pub density_changed: usize,
    pub label_changed: Vec<String>,
    pub created_heads: Vec<String>,
    pub vanished_heads: Vec<String>,
    pub passes: usize,
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: Config,
    registry: DescriptorRegistry,
    documents: Vec<DocumentVector>,
    vectors: Vec<NormalizedVector>,
    graph: NeighborGraph,
    densities: DensityLandscape,
    labels: LabelingState,
    by_doc_id: HashMap<String, NodeId>,
}

/// Per-document state keyed by doc id, independent of arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeFingerprint {
    pub heads: Vec<String>,
    pub density_bits: u64,
    pub category: NodeCategory,
}

impl Engine {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            registry: DescriptorRegistry::new(),
            documents: Vec::new(),
            vectors: Vec::new(),
            graph: NeighborGraph::new(),
            densities: DensityLandscape::new(),
            labels: LabelingState::new(),
            by_doc_id: HashMap::new(),
        })
    }

    fn check_raw(&self, raw: &RawDocument) -> Result<()> {
        let doc_id = || raw.doc_id.clone();
        if self.by_doc_id.contains_key(&raw.doc_id) {
            return Err(Error::DuplicateDocument(doc_id()));
        }
        if raw.terms.is_empty() {
            return Err(Error::EmptyDocument(doc_id()));
        }
        let mut seen = HashSet::new();
        for (term, count) in &raw.terms {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::EmptyDescriptor(doc_id()));
            }
            if *count == 0 {
                return Err(Error::ZeroCount {
                    doc_id: doc_id(),
                    term: term.to_owned(),
                });
            }
            if !seen.insert(term) {
                return Err(Error::DuplicateDescriptor {
                    doc_id: doc_id(),
                    term: term.to_owned(),
                });
            }
        }
        Ok(())
    }

    /// Adds one document to the stream.
    ///
    /// Inserts the node into the K-NN graph, recomputes the densities around
    /// every node whose links changed, then propagates head changes from the
    /// perturbed nodes, the nodes whose density moved, and their neighbors.
    pub fn ingest(&mut self, raw: &RawDocument) -> Result<IngestReport> {
        self.check_raw(raw)?;
        let node = NodeId(self.documents.len());
        let counts = raw
            .terms
            .iter()
            .map(|(t, c)| (self.registry.intern(t), *c))
            .collect();
        let doc = DocumentVector::new(raw.doc_id.clone(), node, counts)?;
        let vector = normalize(&doc);
        let sims: Vec<f64> = self.vectors.iter().map(|v| similarity(&vector, v)).collect();
        let insertion = self.graph.insert_node(node, &sims, &self.config)?;

        self.by_doc_id.insert(raw.doc_id.clone(), node);
        self.documents.push(doc);
        self.vectors.push(vector);
        self.densities.push_node();
        self.labels.push_node();

        let changed = self
            .densities
            .update(&self.graph, &insertion.perturbed, self.config.density)?;

        let mut seed: BTreeSet<NodeId> = insertion.perturbed.clone();
        seed.insert(node);
        for &v in &changed {
            seed.extend(self.graph.neighborhood(v, 1)?);
        }
        let before: BTreeMap<NodeId, bool> = seed.iter().map(|&v| (v, self.labels.is_head(v))).collect();
        let propagation =
            self.labels
                .propagate(&self.graph, self.densities.values(), seed, &self.config)?;

        let mut created_heads = Vec::new();
        let mut vanished_heads = Vec::new();
        let mut label_changed = Vec::new();
        let mut seen = BTreeSet::new();
        for &v in propagation.changed.iter().chain(std::iter::once(&node)) {
            if !seen.insert(v) {
                continue;
            }
            if propagation.changed.contains(&v) {
                label_changed.push(self.doc_id(v).to_owned());
            }
            // dependents outside the seed were not heads: they had an overhanging neighbor
            let was_head = v != node && before.get(&v).copied().unwrap_or(false);
            let is_head = self.labels.is_head(v);
            if is_head && !was_head {
                created_heads.push(self.doc_id(v).to_owned());
            } else if was_head && !is_head {
                vanished_heads.push(self.doc_id(v).to_owned());
            }
        }

        Ok(IngestReport {
            doc_id: raw.doc_id.clone(),
            node,
            perturbed: insertion.perturbed.len(),
            density_changed: changed.len(),
            label_changed,
            created_heads,
            vanished_heads,
            passes: propagation.passes,
        })
    }

    pub fn ingest_all<'a, I>(&mut self, docs: I) -> Result<Vec<IngestReport>>
    where
        I: IntoIterator<Item = &'a RawDocument>,
    {
        docs.into_iter().map(|d| self.ingest(d)).collect()
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn registry(&self) -> &DescriptorRegistry {
        &self.registry
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    pub fn document(&self, v: NodeId) -> &DocumentVector {
        &self.documents[v.0]
    }

    pub fn vector(&self, v: NodeId) -> &NormalizedVector {
        &self.vectors[v.0]
    }

    pub fn doc_id(&self, v: NodeId) -> &str {
        self.documents[v.0].doc_id()
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.doc_id().to_owned()).collect()
    }

    pub fn node(&self, doc_id: &str) -> Option<NodeId> {
        self.by_doc_id.get(doc_id).copied()
    }

    pub fn require_node(&self, doc_id: &str) -> Result<NodeId> {
        self.node(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))
    }

    pub fn density(&self, v: NodeId) -> f64 {
        self.densities.get(v)
    }

    pub fn densities(&self) -> &[f64] {
        self.densities.values()
    }

    pub fn labels(&self) -> &LabelingState {
        &self.labels
    }

    pub fn heads(&self, v: NodeId) -> &[NodeId] {
        self.labels.heads(v)
    }

    pub fn categories(&self) -> Vec<NodeCategory> {
        self.labels.categories()
    }

    /// Category of the document `doc_id`. Panics on an unknown id.
    pub fn categorize_doc(&self, doc_id: &str) -> NodeCategory {
        let v = self.node(doc_id).expect("known document");
        self.labels.categorize(v)
    }

    pub fn fingerprint(&self) -> BTreeMap<String, NodeFingerprint> {
        let categories = self.categories();
        (0..self.len())
            .map(NodeId)
            .map(|v| {
                let mut heads: Vec<String> =
                    self.heads(v).iter().map(|&h| self.doc_id(h).to_owned()).collect();
                heads.sort();
                let fp = NodeFingerprint {
                    heads,
                    density_bits: self.density(v).to_bits(),
                    category: categories[v.0],
                };
                (self.doc_id(v).to_owned(), fp)
            })
            .collect()
    }

    /// Checks stored link similarities, densities and labels against a
    /// recomputation from the documents and the stored graph.
    pub fn verify(&self) -> Result<()> {
        for (u, v, s) in self.graph.links() {
            let fresh = similarity(&self.vectors[u.0], &self.vectors[v.0]);
            if fresh.to_bits() != s.to_bits() {
                return Err(Error::Snapshot(format!("link {u} -> {v} has similarity {s}, expected {fresh}")));
            }
        }
        for v in (0..self.len()).map(NodeId) {
            let fresh = density_of_kind(&self.graph, v, self.config.density)?;
            if fresh.to_bits() != self.density(v).to_bits() {
                return Err(Error::Snapshot(format!("node {v} has density {}, expected {fresh}", self.density(v))));
            }
        }
        let settled = LabelingState::settle(&self.graph, self.densities.values(), &self.config)?;
        if settled != self.labels {
            return Err(Error::Snapshot("head lists are not the fixed point of the landscape".into()));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        let nodes = (0..self.len())
            .map(NodeId)
            .map(|v| NodeRecord {
                arrival: v,
                doc_id: self.doc_id(v).to_owned(),
                counts: self.documents[v.0].counts().to_vec(),
                density: self.density(v),
                heads: self.heads(v).to_vec(),
                out_links: self
                    .graph
                    .out_links(v)
                    .iter()
                    .map(|l| (l.peer, l.similarity))
                    .collect(),
            })
            .collect();
        EngineSnapshot {
            format: SNAPSHOT_FORMAT,
            config: self.config.clone(),
            descriptors: self.registry.names().to_vec(),
            nodes,
        }
    }

    pub fn from_snapshot(snapshot: EngineSnapshot) -> Result<Self> {
        if snapshot.format != SNAPSHOT_FORMAT {
            return Err(Error::Snapshot(format!("unsupported format {}", snapshot.format)));
        }
        snapshot.config.validate()?;
        let registry = DescriptorRegistry::from_names(snapshot.descriptors)?;
        let n = snapshot.nodes.len();
        let mut documents = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n);
        let mut by_doc_id = HashMap::with_capacity(n);
        let mut densities = Vec::with_capacity(n);
        let mut heads = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for (i, record) in snapshot.nodes.into_iter().enumerate() {
            if record.arrival != NodeId(i) {
                return Err(Error::Snapshot(format!("node {i} recorded as {}", record.arrival)));
            }
            if record.counts.iter().any(|&(d, _)| d.index() >= registry.len()) {
                return Err(Error::Snapshot(format!("node {i} uses an unknown descriptor")));
            }
            if by_doc_id.insert(record.doc_id.clone(), record.arrival).is_some() {
                return Err(Error::DuplicateDocument(record.doc_id));
            }
            let doc = DocumentVector::new(record.doc_id, record.arrival, record.counts)?;
            vectors.push(normalize(&doc));
            documents.push(doc);
            densities.push(record.density);
            heads.push(record.heads);
            out.push(
                record
                    .out_links
                    .into_iter()
                    .map(|(peer, similarity)| Link { peer, similarity })
                    .collect(),
            );
        }
        Ok(Self {
            config: snapshot.config,
            registry,
            documents,
            vectors,
            graph: NeighborGraph::from_out_links(out)?,
            densities: DensityLandscape::from_values(densities),
            labels: LabelingState::from_heads(heads)?,
            by_doc_id,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_snapshot(serde_json::from_str(text)?)
    }

    /// Engine-internal descriptor id of `term`, if it has been seen.
    pub fn descriptor(&self, term: &str) -> Option<DescriptorId> {
        self.registry.get(term)
    }
}

pub const SNAPSHOT_FORMAT: u32 = 1;

/// Serialized engine state. Nodes are in arrival order and out-links in
/// ascending target order, so equal states serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub format: u32,
    pub config: Config,
    pub descriptors: Vec<String>,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub arrival: NodeId,
    pub doc_id: String,
    pub counts: Vec<(DescriptorId, u32)>,
    pub density: f64,
    pub heads: Vec<NodeId>,
    pub out_links: Vec<(NodeId, f64)>,
}
