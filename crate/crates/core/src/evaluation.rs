//! Recall and precision of a predicted grouping against a reference one.
//!
//! Each reference class is matched to the predicted group sharing the most
//! documents with it. Predicted documents the reference does not mention are
//! dropped first, since the reference deliberately leaves them out.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledGroup {
    pub label: String,
    pub doc_ids: Vec<String>,
}

/// Labeled document groups; the export and evaluation exchange format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Classification(pub Vec<LabeledGroup>);

impl Classification {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("classification serializes");
        out.push('\n');
        out
    }

    pub fn document_count(&self) -> usize {
        self.0.iter().map(|g| g.doc_ids.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    /// Position of the class in the reference.
    pub class: usize,
    pub label: String,
    pub size: usize,
    /// Index of the matched predicted group, if any shares a document.
    pub matched: Option<usize>,
    pub matched_label: Option<String>,
    pub found: usize,
    pub correct: usize,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cum_docs: usize,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<ClassScore>,
    pub curve: Vec<CurvePoint>,
}

impl EvaluationReport {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("cum_docs,recall,precision\n");
        for p in &self.curve {
            writeln!(out, "{},{},{}", p.cum_docs, p.recall, p.precision).unwrap();
        }
        out
    }
}

pub fn evaluate(reference: &Classification, predicted: &Classification) -> Result<EvaluationReport> {
    let reference_docs: HashSet<&str> = reference
        .0
        .iter()
        .flat_map(|g| g.doc_ids.iter().map(String::as_str))
        .collect();
    if reference_docs.is_empty() {
        return Err(Error::EmptyReference);
    }
    let groups: Vec<HashSet<&str>> = predicted
        .0
        .iter()
        .map(|g| {
            g.doc_ids
                .iter()
                .map(String::as_str)
                .filter(|d| reference_docs.contains(d))
                .collect()
        })
        .collect();
    let mut group_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        for d in g {
            group_of.entry(d).or_default().push(i);
        }
    }

    let mut classes = Vec::with_capacity(reference.0.len());
    for (c, class) in reference.0.iter().enumerate() {
        let members: HashSet<&str> = class.doc_ids.iter().map(String::as_str).collect();
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for d in &members {
            for &g in group_of.get(d).into_iter().flatten() {
                *overlap.entry(g).or_default() += 1;
            }
        }
        let best = overlap
            .into_iter()
            .max_by(|&(ga, na), &(gb, nb)| {
                na.cmp(&nb)
                    .then(groups[ga].len().cmp(&groups[gb].len()))
                    .then(gb.cmp(&ga))
            });
        let (matched, correct, found) = match best {
            Some((g, n)) => (Some(g), n, groups[g].len()),
            None => (None, 0, 0),
        };
        let size = members.len();
        classes.push(ClassScore {
            class: c,
            label: class.label.clone(),
            size,
            matched,
            matched_label: matched.map(|g| predicted.0[g].label.clone()),
            found,
            correct,
            recall: if size == 0 { 0.0 } else { correct as f64 / size as f64 },
            precision: if found == 0 { 0.0 } else { correct as f64 / found as f64 },
        });
    }

    let mut order: Vec<&ClassScore> = classes.iter().collect();
    order.sort_by(|a, b| {
        b.precision
            .total_cmp(&a.precision)
            .then(b.recall.total_cmp(&a.recall))
            .then(a.class.cmp(&b.class))
    });
    let mut cum_docs = 0;
    let curve = order
        .into_iter()
        .map(|s| {
            cum_docs += s.size;
            CurvePoint {
                cum_docs,
                recall: s.recall,
                precision: s.precision,
            }
        })
        .collect();
    Ok(EvaluationReport { classes, curve })
}
