//! Salient descriptors of a class.
//!
//! Each intra-class link `t -> t'` splits its similarity among the
//! descriptors both documents share. Descriptor `i` receives
//! `sqrt(d(t) d(t')) * y_it * y_it'`, the density weighting favouring the
//! dense core over low-density multivalent members. A descriptor's weight in
//! class `k` is its share of the total over all intra-class links.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::knn_graph::NodeId;
use crate::sum::ExactSum;
use crate::vector_space::{DescriptorId, NormalizedVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraLink {
    pub source: NodeId,
    pub target: NodeId,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMember {
    pub node: NodeId,
    pub doc_id: String,
    pub density: f64,
    pub heads_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub head: NodeId,
    pub head_doc_id: String,
    /// Members by descending density, then arrival.
    pub members: Vec<ClassMember>,
    /// Descriptor weights by descending weight; sums to 1 when non-empty.
    pub terms: Vec<TermWeight>,
}

/// One intra-class link as seen by [`link_contributions`]: the densities of
/// both ends and their normalized vectors.
pub struct WeightedLink<'a> {
    pub source_density: f64,
    pub target_density: f64,
    pub source: &'a NormalizedVector,
    pub target: &'a NormalizedVector,
}

/// Relative contribution of every descriptor to a set of links. Empty when
/// the links carry no weight at all.
pub fn link_contributions(links: &[WeightedLink<'_>]) -> BTreeMap<DescriptorId, f64> {
    let mut per_descriptor: BTreeMap<DescriptorId, ExactSum> = BTreeMap::new();
    let mut total = ExactSum::new();
    for link in links {
        let weight = (link.source_density * link.target_density).sqrt();
        let (a, b) = (link.source.components(), link.target.components());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let c = weight * a[i].1 * b[j].1;
                    per_descriptor.entry(a[i].0).or_default().add(c);
                    total.add(c);
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    let total = total.value();
    if total <= 0.0 {
        return BTreeMap::new();
    }
    per_descriptor
        .into_iter()
        .map(|(d, acc)| (d, acc.value() / total))
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

fn require_head(engine: &Engine, head: NodeId) -> Result<()> {
    if head.0 >= engine.len() || !engine.labels().is_head(head) {
        return Err(Error::NotAHead(head.0));
    }
    Ok(())
}

/// Nodes carrying `head` among their heads, ascending.
pub fn class_members(engine: &Engine, head: NodeId) -> Result<Vec<NodeId>> {
    require_head(engine, head)?;
    Ok((0..engine.len())
        .map(NodeId)
        .filter(|&v| engine.heads(v).binary_search(&head).is_ok())
        .collect())
}

/// Graph links whose two ends both belong to class `head`.
pub fn intra_class_links(engine: &Engine, head: NodeId) -> Result<Vec<IntraLink>> {
    let members = class_members(engine, head)?;
    let graph = engine.graph();
    let mut links = Vec::new();
    for &t in &members {
        for l in graph.out_links(t) {
            if members.binary_search(&l.peer).is_ok() {
                links.push(IntraLink {
                    source: t,
                    target: l.peer,
                    similarity: l.similarity,
                });
            }
        }
    }
    Ok(links)
}

pub fn term_contributions(engine: &Engine, head: NodeId) -> Result<ClassProfile> {
    let members = class_members(engine, head)?;
    let links = intra_class_links(engine, head)?;
    let weighted: Vec<WeightedLink<'_>> = links
        .iter()
        .map(|l| WeightedLink {
            source_density: engine.density(l.source),
            target_density: engine.density(l.target),
            source: engine.vector(l.source),
            target: engine.vector(l.target),
        })
        .collect();
    let registry = engine.registry();
    let mut terms: Vec<TermWeight> = link_contributions(&weighted)
        .into_iter()
        .map(|(d, weight)| TermWeight {
            term: registry.name(d).to_owned(),
            weight,
        })
        .collect();
    terms.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));

    let mut members: Vec<ClassMember> = members
        .into_iter()
        .map(|v| ClassMember {
            node: v,
            doc_id: engine.doc_id(v).to_owned(),
            density: engine.density(v),
            heads_count: engine.heads(v).len(),
        })
        .collect();
    members.sort_by(|a, b| b.density.total_cmp(&a.density).then(a.node.cmp(&b.node)));

    Ok(ClassProfile {
        head,
        head_doc_id: engine.doc_id(head).to_owned(),
        members,
        terms,
    })
}

/// Class heads ordered by descending member count, then arrival.
pub fn classes_by_size(engine: &Engine) -> Vec<(NodeId, usize)> {
    let mut sizes: BTreeMap<NodeId, usize> = engine
        .labels()
        .head_nodes()
        .into_iter()
        .map(|h| (h, 0))
        .collect();
    for v in (0..engine.len()).map(NodeId) {
        for h in engine.heads(v) {
            *sizes.get_mut(h).expect("heads are head nodes") += 1;
        }
    }
    let mut ordered: Vec<(NodeId, usize)> = sizes.into_iter().collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ordered
}

/// Weight rendered in per-mille, rounded half away from zero.
pub fn per_mille(weight: f64) -> i64 {
    (weight * 1000.0).round() as i64
}

/// Plain-text class report: members grouped by number of heads with their
/// density, and the salient terms in per-mille.
pub fn render_class_report(profile: &ClassProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Class {} (node {})", profile.head_doc_id, profile.head);
    type Section = (&'static str, fn(usize) -> bool);
    let sections: [Section; 3] = [
        ("Noyau", |h| h == 1),
        ("Bivalent documents", |h| h == 2),
        ("Trivalent documents and more", |h| h >= 3),
    ];
    for (i, (title, keep)) in sections.iter().enumerate() {
        let rows: Vec<&ClassMember> = profile.members.iter().filter(|m| keep(m.heads_count)).collect();
        if !rows.is_empty() {
            let _ = writeln!(out, "{title}:");
            for m in rows {
                let _ = writeln!(out, "  {:>2}  {:<24} {:.7}", m.heads_count, m.doc_id, m.density);
            }
        }
        if i == 0 && !profile.terms.is_empty() {
            let _ = writeln!(out, "Illustrative terms:");
            for t in &profile.terms {
                let _ = writeln!(out, "  {:>4}  {}", per_mille(t.weight), t.term);
            }
        }
    }
    out
}
