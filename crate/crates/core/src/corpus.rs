//! Line-record corpus format.
//!
//! One document per line: `doc_id<TAB>term=count<TAB>term=count...`.
//! Terms are trimmed; counts are positive integers; a term may not repeat
//! within a line. Blank lines are skipped.

use std::collections::HashSet;
use std::io::BufRead;

use crate::error::{Error, Result};

/// A document as read from the corpus, before descriptor interning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub terms: Vec<(String, u32)>,
}

impl RawDocument {
    pub fn new<S: Into<String>>(doc_id: impl Into<String>, terms: impl IntoIterator<Item = (S, u32)>) -> Self {
        Self {
            doc_id: doc_id.into(),
            terms: terms.into_iter().map(|(t, c)| (t.into(), c)).collect(),
        }
    }

    /// Renders the document back into its corpus line.
    pub fn to_line(&self) -> String {
        let mut line = self.doc_id.clone();
        for (term, count) in &self.terms {
            line.push('\t');
            line.push_str(term);
            line.push('=');
            line.push_str(&count.to_string());
        }
        line
    }
}

/// Parses one corpus line; `Ok(None)` for a blank line.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<RawDocument>> {
    let err = |message: String| Error::Corpus {
        line: line_no,
        message,
    };
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let mut fields = line.split('\t');
    let doc_id = fields.next().unwrap_or_default().trim();
    if doc_id.is_empty() {
        return Err(err("missing document id".into()));
    }
    let mut seen = HashSet::new();
    let mut terms = Vec::new();
    for field in fields {
        let (term, count) = field
            .rsplit_once('=')
            .ok_or_else(|| err(format!("field `{field}` is not term=count")))?;
        let term = term.trim();
        if term.is_empty() {
            return Err(err(format!("empty term in field `{field}`")));
        }
        let count: u32 = count
            .trim()
            .parse()
            .map_err(|_| err(format!("count of `{term}` is not a positive integer")))?;
        if count == 0 {
            return Err(err(format!("count of `{term}` is zero")));
        }
        if !seen.insert(term.to_owned()) {
            return Err(err(format!("term `{term}` repeated")));
        }
        terms.push((term.to_owned(), count));
    }
    if terms.is_empty() {
        return Err(err(format!("document `{doc_id}` has no terms")));
    }
    Ok(Some(RawDocument {
        doc_id: doc_id.to_owned(),
        terms,
    }))
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<RawDocument>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(doc) = parse_line(&line?, i + 1)? {
            docs.push(doc);
        }
    }
    Ok(docs)
}
