//! Aggregation of noyaux into human-sized groups.
//!
//! Multivalent documents of a chosen valence link the noyaux whose heads
//! they carry. Connected components of that noyau graph are offered to an
//! expert in decreasing order of documents involved; the expert validates or
//! invalidates components, groups noyaux inside a component under a label,
//! and exports the result as a reference classification.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Classification, LabeledGroup};
use crate::knn_graph::NodeId;
use crate::labeling::{LabelingState, NodeCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValenceMode {
    /// Only documents with exactly `valence` heads link noyaux.
    #[default]
    Exact,
    /// Documents with `valence` heads or more link noyaux.
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Noyau {
    pub head: NodeId,
    /// The head plus its strict members.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoyauEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub documents: Vec<NodeId>,
}

/// Undirected graph on class heads; `a < b` on every edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoyauGraph {
    pub valence: usize,
    pub mode: ValenceMode,
    pub vertices: Vec<Noyau>,
    pub edges: Vec<NoyauEdge>,
}

pub fn build_noyau_graph(lcc: &[Vec<NodeId>], valence: usize, mode: ValenceMode) -> Result<NoyauGraph> {
    if valence < 2 {
        return Err(Error::InvalidValence(valence));
    }
    let mut sizes: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (v, heads) in lcc.iter().enumerate() {
        if let [h] = heads.as_slice() {
            *sizes.entry(*h).or_default() += 1;
            debug_assert!(h.0 == v || lcc[h.0] == [*h]);
        }
    }
    let mut edges: BTreeMap<(NodeId, NodeId), Vec<NodeId>> = BTreeMap::new();
    for (v, heads) in lcc.iter().enumerate() {
        let selected = match mode {
            ValenceMode::Exact => heads.len() == valence,
            ValenceMode::AtLeast => heads.len() >= valence,
        };
        if !selected {
            continue;
        }
        for (i, &a) in heads.iter().enumerate() {
            for &b in &heads[i + 1..] {
                edges.entry((a, b)).or_default().push(NodeId(v));
            }
        }
    }
    Ok(NoyauGraph {
        valence,
        mode,
        vertices: sizes.into_iter().map(|(head, size)| Noyau { head, size }).collect(),
        edges: edges
            .into_iter()
            .map(|((a, b), documents)| NoyauEdge { a, b, documents })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: ComponentId,
    /// Heads of the component's noyaux, ascending.
    pub noyaux: Vec<NodeId>,
    /// Multivalent documents supporting the component's edges, ascending.
    pub supporting: Vec<NodeId>,
    /// Noyau members plus supporting documents, each counted once.
    pub documents: usize,
}

/// Connected components, by descending document count and then ascending
/// smallest head. Component ids are positions in that order.
pub fn components(graph: &NoyauGraph) -> Vec<Component> {
    components_by_key(graph, |h| h)
}

/// As [`components`], with ties on document count broken by the smallest
/// `key` of a component's heads. Keying by doc id gives a listing that does
/// not depend on arrival order.
pub fn components_by_key<K: Ord>(graph: &NoyauGraph, key: impl Fn(NodeId) -> K) -> Vec<Component> {
    let index: HashMap<NodeId, usize> = graph
        .vertices
        .iter()
        .enumerate()
        .map(|(i, n)| (n.head, i))
        .collect();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph.vertices.len()];
    for (e, edge) in graph.edges.iter().enumerate() {
        let (a, b) = (index[&edge.a], index[&edge.b]);
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
    }
    let mut seen = vec![false; graph.vertices.len()];
    let mut found = Vec::new();
    for start in 0..graph.vertices.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        let mut supporting = BTreeSet::new();
        while let Some(i) = queue.pop_front() {
            members.push(graph.vertices[i]);
            for &(j, e) in &adjacency[i] {
                supporting.extend(graph.edges[e].documents.iter().copied());
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let documents = members.iter().map(|n| n.size).sum::<usize>() + supporting.len();
        let mut noyaux: Vec<NodeId> = members.iter().map(|n| n.head).collect();
        noyaux.sort_unstable();
        found.push(Component {
            id: ComponentId(0),
            noyaux,
            supporting: supporting.into_iter().collect(),
            documents,
        });
    }
    let mut keyed: Vec<(K, Component)> = found
        .into_iter()
        .map(|c| (c.noyaux.iter().map(|&h| key(h)).min().expect("non-empty component"), c))
        .collect();
    keyed.sort_by(|a, b| b.1.documents.cmp(&a.1.documents).then_with(|| a.0.cmp(&b.0)));
    let mut found: Vec<Component> = keyed.into_iter().map(|(_, c)| c).collect();
    for (i, c) in found.iter_mut().enumerate() {
        c.id = ComponentId(i);
    }
    found
}

/// Number of noyaux of each size (head plus strict members).
pub fn size_distribution(lcc: &[Vec<NodeId>]) -> BTreeMap<usize, usize> {
    let mut sizes: BTreeMap<NodeId, usize> = BTreeMap::new();
    for heads in lcc {
        if let [h] = heads.as_slice() {
            *sizes.entry(*h).or_default() += 1;
        }
    }
    let mut histogram = BTreeMap::new();
    for size in sizes.into_values() {
        *histogram.entry(size).or_default() += 1;
    }
    histogram
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentStatus {
    #[default]
    Pending,
    Validated,
    Invalidated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionComponent {
    #[serde(flatten)]
    pub component: Component,
    pub status: ComponentStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualGroup {
    pub component: ComponentId,
    pub noyaux: BTreeSet<NodeId>,
    pub label: String,
}

/// Curation action in node-id terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CurationAction {
    Merge { noyaux: Vec<NodeId>, label: String },
    SetStatus { component: ComponentId, status: ComponentStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExportOptions {
    /// Export validated components only; otherwise pending ones too.
    #[serde(default)]
    pub validated_only: bool,
    /// Leave out documents that are isolated (the expert's "marais").
    #[serde(default)]
    pub drop_isolated: bool,
    /// Assign a multivalent document to a group when all its heads lie in it.
    #[serde(default)]
    pub include_multivalent: bool,
}

/// Expert curation over the components of one noyau graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurationSession {
    pub valence: usize,
    pub mode: ValenceMode,
    components: Vec<SessionComponent>,
    groups: Vec<ManualGroup>,
    #[serde(skip)]
    component_of: HashMap<NodeId, ComponentId>,
}

impl CurationSession {
    pub fn new(lcc: &[Vec<NodeId>], valence: usize, mode: ValenceMode) -> Result<Self> {
        let graph = build_noyau_graph(lcc, valence, mode)?;
        Ok(Self::from_components(components(&graph), valence, mode))
    }

    /// Session whose component ids break ties by head doc id.
    pub fn with_doc_ids(lcc: &[Vec<NodeId>], doc_ids: &[String], valence: usize, mode: ValenceMode) -> Result<Self> {
        let graph = build_noyau_graph(lcc, valence, mode)?;
        let listed = components_by_key(&graph, |h| doc_ids[h.0].as_str());
        Ok(Self::from_components(listed, valence, mode))
    }

    fn from_components(listed: Vec<Component>, valence: usize, mode: ValenceMode) -> Self {
        let components: Vec<SessionComponent> = listed
            .into_iter()
            .map(|component| SessionComponent {
                component,
                status: ComponentStatus::Pending,
            })
            .collect();
        let component_of = components
            .iter()
            .flat_map(|c| c.component.noyaux.iter().map(move |&h| (h, c.component.id)))
            .collect();
        Self {
            valence,
            mode,
            components,
            groups: Vec::new(),
            component_of,
        }
    }

    pub fn components(&self) -> &[SessionComponent] {
        &self.components
    }

    pub fn component(&self, id: ComponentId) -> Result<&SessionComponent> {
        self.components.get(id.0).ok_or(Error::UnknownComponent(id.0))
    }

    pub fn component_of(&self, head: NodeId) -> Option<ComponentId> {
        self.component_of.get(&head).copied()
    }

    pub fn groups(&self) -> &[ManualGroup] {
        &self.groups
    }

    /// Groups the given noyaux under `label`. Groups already sharing a noyau
    /// with the request are folded into the new group, which takes the label.
    pub fn merge(&mut self, noyaux: &[NodeId], label: &str) -> Result<()> {
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::EmptyLabel);
        }
        let mut component = None;
        for &h in noyaux {
            let c = self.component_of(h).ok_or(Error::NotAHead(h.0))?;
            if component.is_some_and(|prev| prev != c) {
                return Err(Error::CrossComponentMerge(noyaux.iter().map(|n| n.0).collect()));
            }
            component = Some(c);
        }
        let Some(component) = component else {
            return Err(Error::CrossComponentMerge(Vec::new()));
        };
        if self.components[component.0].status == ComponentStatus::Invalidated {
            return Err(Error::InvalidatedComponent(component.0));
        }
        let mut merged: BTreeSet<NodeId> = noyaux.iter().copied().collect();
        self.groups.retain(|g| {
            if g.component == component && !g.noyaux.is_disjoint(&merged) {
                merged.extend(g.noyaux.iter().copied());
                false
            } else {
                true
            }
        });
        self.groups.push(ManualGroup {
            component,
            noyaux: merged,
            label: label.to_owned(),
        });
        self.groups.sort_by(|a, b| {
            a.component
                .cmp(&b.component)
                .then_with(|| a.noyaux.first().cmp(&b.noyaux.first()))
        });
        Ok(())
    }

    /// Sets a component's status. Invalidating a component discards its
    /// manual groups.
    pub fn set_status(&mut self, component: ComponentId, status: ComponentStatus) -> Result<()> {
        let entry = self
            .components
            .get_mut(component.0)
            .ok_or(Error::UnknownComponent(component.0))?;
        entry.status = status;
        if status == ComponentStatus::Invalidated {
            self.groups.retain(|g| g.component != component);
        }
        Ok(())
    }

    pub fn apply(&mut self, action: &CurationAction) -> Result<()> {
        match action {
            CurationAction::Merge { noyaux, label } => self.merge(noyaux, label),
            CurationAction::SetStatus { component, status } => self.set_status(*component, *status),
        }
    }

    /// Builds the curated classification. Each manual group becomes one
    /// labeled entry; the ungrouped noyaux of an exported component form an
    /// entry labeled `component-<id>`. Invalidated components are skipped.
    pub fn export(
        &self,
        labels: &LabelingState,
        doc_ids: &[String],
        options: ExportOptions,
    ) -> Result<Classification> {
        let lcc = labels.all_heads();
        let categories = labels.categories();
        let mut strict: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        let mut multivalent: Vec<(NodeId, &[NodeId])> = Vec::new();
        for (v, heads) in lcc.iter().enumerate() {
            match heads.as_slice() {
                [h] => strict.entry(*h).or_default().push(NodeId(v)),
                many => multivalent.push((NodeId(v), many)),
            }
        }

        let mut entries = Vec::new();
        for sc in &self.components {
            let included = match sc.status {
                ComponentStatus::Invalidated => false,
                ComponentStatus::Pending => !options.validated_only,
                ComponentStatus::Validated => true,
            };
            if !included {
                continue;
            }
            let id = sc.component.id;
            let mut blocks: Vec<(String, BTreeSet<NodeId>)> = Vec::new();
            let mut grouped = BTreeSet::new();
            for g in self.groups.iter().filter(|g| g.component == id) {
                if g.label.trim().is_empty() {
                    return Err(Error::EmptyLabel);
                }
                grouped.extend(g.noyaux.iter().copied());
                blocks.push((g.label.clone(), g.noyaux.clone()));
            }
            let rest: BTreeSet<NodeId> = sc
                .component
                .noyaux
                .iter()
                .copied()
                .filter(|h| !grouped.contains(h))
                .collect();
            if !rest.is_empty() {
                blocks.push((format!("component-{}", id.0), rest));
            }
            for (label, noyaux) in blocks {
                let mut docs: Vec<NodeId> = noyaux
                    .iter()
                    .flat_map(|h| strict.get(h).into_iter().flatten().copied())
                    .collect();
                if options.include_multivalent {
                    docs.extend(
                        multivalent
                            .iter()
                            .filter(|(_, heads)| heads.iter().all(|h| noyaux.contains(h)))
                            .map(|&(v, _)| v),
                    );
                }
                if options.drop_isolated {
                    docs.retain(|v| categories[v.0] != NodeCategory::Isole);
                }
                if docs.is_empty() {
                    continue;
                }
                let mut doc_ids: Vec<String> = docs.iter().map(|v| doc_ids[v.0].clone()).collect();
                doc_ids.sort();
                entries.push(LabeledGroup { label, doc_ids });
            }
        }
        Ok(Classification(entries))
    }
}

/// Journal action in document-id terms, as written to disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum JournalAction {
    Merge { noyaux: Vec<String>, label: String },
    SetStatus { component: ComponentId, status: ComponentStatus },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub valence: usize,
    #[serde(default)]
    pub mode: ValenceMode,
    #[serde(flatten)]
    pub action: JournalAction,
}

/// Append-only JSON-lines log of curation actions.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<()> {
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<JournalEntry>> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut entries = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                entries.push(serde_json::from_str(&line)?);
            }
        }
        Ok(entries)
    }
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
