//! Sparse descriptor vectors on the Hellinger sphere.
//!
//! Raw descriptor counts `x_i` of a document with total `x` are mapped to
//! `y_i = sqrt(x_i / x)`. The resulting vectors have unit norm, and the dot
//! product of two of them is the distributional cosine, tied to the
//! Hellinger distance by `D^2 = 2 (1 - cos)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn_graph::NodeId;
use crate::sum::ExactSum;

/// Dense id of a descriptor, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DescriptorId(pub u32);

impl DescriptorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijection between descriptor strings and [`DescriptorId`]s. Only grows.
#[derive(Debug, Clone, Default)]
pub struct DescriptorRegistry {
    names: Vec<String>,
    ids: HashMap<String, DescriptorId>,
}

impl DescriptorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a registry from names listed in id order.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut registry = Self::new();
        for name in names {
            let trimmed = name.trim();
            if trimmed.is_empty() || trimmed != name || registry.get(trimmed).is_some() {
                return Err(Error::Snapshot(format!("bad descriptor entry `{name}`")));
            }
            registry.intern(trimmed);
        }
        Ok(registry)
    }

    /// Returns the id of `term` (trimmed), registering it if unseen.
    pub fn intern(&mut self, term: &str) -> DescriptorId {
        let term = term.trim();
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = DescriptorId(self.names.len() as u32);
        self.names.push(term.to_owned());
        self.ids.insert(term.to_owned(), id);
        id
    }

    pub fn get(&self, term: &str) -> Option<DescriptorId> {
        self.ids.get(term.trim()).copied()
    }

    pub fn name(&self, id: DescriptorId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Raw descriptor counts of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVector {
    doc_id: String,
    arrival: NodeId,
    counts: Vec<(DescriptorId, u32)>,
    total: u64,
}

impl DocumentVector {
    /// Builds a document from `(descriptor, count)` pairs in any order.
    ///
    /// Rejects empty documents, zero counts and repeated descriptors.
    pub fn new(
        doc_id: impl Into<String>,
        arrival: NodeId,
        mut counts: Vec<(DescriptorId, u32)>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        if counts.is_empty() {
            return Err(Error::EmptyDocument(doc_id));
        }
        counts.sort_unstable_by_key(|&(id, _)| id);
        for pair in counts.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateDescriptor {
                    doc_id,
                    term: format!("#{}", pair[0].0 .0),
                });
            }
        }
        if let Some(&(id, _)) = counts.iter().find(|&&(_, c)| c == 0) {
            return Err(Error::ZeroCount {
                doc_id,
                term: format!("#{}", id.0),
            });
        }
        let total = counts.iter().map(|&(_, c)| u64::from(c)).sum();
        Ok(Self {
            doc_id,
            arrival,
            counts,
            total,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn arrival(&self) -> NodeId {
        self.arrival
    }

    /// Counts sorted by ascending descriptor id.
    pub fn counts(&self) -> &[(DescriptorId, u32)] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Unit vector `y_i = sqrt(x_i / x)` over the support of a document.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedVector {
    components: Vec<(DescriptorId, f64)>,
}

impl NormalizedVector {
    /// Components sorted by ascending descriptor id.
    pub fn components(&self) -> &[(DescriptorId, f64)] {
        &self.components
    }

    pub fn get(&self, id: DescriptorId) -> Option<f64> {
        self.components
            .binary_search_by_key(&id, |&(d, _)| d)
            .ok()
            .map(|i| self.components[i].1)
    }

    pub fn norm_squared(&self) -> f64 {
        self.components.iter().map(|&(_, y)| y * y).collect::<ExactSum>().value()
    }
}

pub fn normalize(doc: &DocumentVector) -> NormalizedVector {
    let total = doc.total as f64;
    let components = doc
        .counts
        .iter()
        .map(|&(id, c)| (id, (f64::from(c) / total).sqrt()))
        .collect();
    NormalizedVector { components }
}

/// Distributional cosine of two normalized vectors, in `[0, 1]`.
///
/// Sums the products over the shared support with [`ExactSum`], so the
/// result does not depend on how descriptor ids were numbered.
pub fn similarity(u: &NormalizedVector, v: &NormalizedVector) -> f64 {
    let (a, b) = (&u.components, &v.components);
    let mut acc = ExactSum::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc.add(a[i].1 * b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    acc.value().min(1.0)
}

pub fn hellinger_distance(u: &NormalizedVector, v: &NormalizedVector) -> f64 {
    (2.0 * (1.0 - similarity(u, v))).max(0.0).sqrt()
}
