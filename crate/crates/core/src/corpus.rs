//! Corpus and relevance-judgment input formats.
//!
//! A corpus is JSON-lines: one document per line with an id, raw text, and
//! entity mentions given as character-offset spans (`start` inclusive, `end`
//! exclusive, counted in Unicode scalar values). Judgments are TAB-separated
//! `query_id  tuple  grade` rows with graded relevance.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::query::EntityTuple;

/// One linked entity mention inside a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity_id: String,
    /// Character offset of the first character of the mention.
    pub start: usize,
    /// Character offset one past the last character of the mention.
    pub end: usize,
}

/// A document with entity annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub mentions: Vec<EntityMention>,
}

/// Entity ids flow into TAB-separated and pipe-joined file formats, so the
/// delimiters themselves (and newlines) cannot appear in an id.
pub fn validate_entity_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() {
        return Err("entity id is empty".to_string());
    }
    if let Some(bad) = id.chars().find(|c| matches!(c, '|' | '\t' | '\n' | '\r')) {
        return Err(format!("entity id {id:?} contains forbidden character {bad:?}"));
    }
    Ok(())
}

impl AnnotatedDocument {
    /// Check span sanity and sort mentions by start offset.
    ///
    /// Spans must be non-empty, lie inside the text (in characters), and not
    /// overlap one another. Ties on start offset are broken by end offset so
    /// the order is total.
    pub fn normalize(&mut self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::Document {
                doc_id: "<empty>".to_string(),
                msg: "doc_id is empty".to_string(),
            });
        }
        let char_len = self.text.chars().count();
        self.mentions.sort_by_key(|m| (m.start, m.end));
        let mut prev_end = 0usize;
        for m in &self.mentions {
            validate_entity_id(&m.entity_id).map_err(|msg| Error::Document {
                doc_id: self.doc_id.clone(),
                msg,
            })?;
            if m.start >= m.end || m.end > char_len {
                return Err(Error::Document {
                    doc_id: self.doc_id.clone(),
                    msg: format!(
                        "mention span {}..{} out of range for text of {} characters",
                        m.start, m.end, char_len
                    ),
                });
            }
            if m.start < prev_end {
                return Err(Error::Document {
                    doc_id: self.doc_id.clone(),
                    msg: format!(
                        "mention span {}..{} overlaps the previous span",
                        m.start, m.end
                    ),
                });
            }
            prev_end = m.end;
        }
        Ok(())
    }

    /// The mention's surface text.
    pub fn mention_text(&self, m: &EntityMention) -> String {
        self.text
            .chars()
            .skip(m.start)
            .take(m.end - m.start)
            .collect()
    }
}

/// Load a JSON-lines corpus. Every non-empty line must parse and validate;
/// mentions come back sorted by span.
pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedDocument>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: AnnotatedDocument = serde_json::from_str(&line).map_err(|e| {
            Error::parse(path.display().to_string(), lineno + 1, e.to_string())
        })?;
        doc.normalize().map_err(|e| {
            Error::parse(path.display().to_string(), lineno + 1, e.to_string())
        })?;
        if !seen_ids.insert(doc.doc_id.clone()) {
            return Err(Error::parse(
                path.display().to_string(),
                lineno + 1,
                format!("duplicate doc_id {:?}", doc.doc_id),
            ));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Write a corpus as JSON-lines, one document per line.
pub fn save_corpus(path: &Path, docs: &[AnnotatedDocument]) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// One graded judgment: this tuple has relevance `grade` for `query_id`.
/// Grade 0 is an explicit non-relevant judgment; grades >= 1 are relevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelRecord {
    pub query_id: String,
    pub tuple: EntityTuple,
    pub grade: u32,
}

/// Judgments grouped by query id; tuples are direction-normalized on load.
pub type Qrels = BTreeMap<String, Vec<QrelRecord>>;

/// Load TAB-separated judgments: `query_id  A|B[|C]  grade`.
///
/// Tuples are normalized so either direction of a chain names the same
/// judgment; a duplicate (query, tuple) row or mixed tuple arity within one
/// query is an error.
pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut qrels: Qrels = BTreeMap::new();
    let mut seen: std::collections::BTreeSet<(String, EntityTuple)> =
        std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path.display().to_string(),
                lineno + 1,
                format!("expected 3 TAB-separated fields, got {}", fields.len()),
            ));
        }
        let query_id = fields[0].trim().to_string();
        if query_id.is_empty() {
            return Err(Error::parse(
                path.display().to_string(),
                lineno + 1,
                "query_id is empty".to_string(),
            ));
        }
        let tuple = EntityTuple::parse(fields[1].trim()).ok_or_else(|| {
            Error::parse(
                path.display().to_string(),
                lineno + 1,
                format!("malformed tuple {:?}", fields[1]),
            )
        })?;
        let tuple = tuple.normalized();
        let grade: u32 = fields[2].trim().parse().map_err(|_| {
            Error::parse(
                path.display().to_string(),
                lineno + 1,
                format!("malformed grade {:?}", fields[2]),
            )
        })?;
        if !seen.insert((query_id.clone(), tuple.clone())) {
            return Err(Error::parse(
                path.display().to_string(),
                lineno + 1,
                format!("duplicate judgment for query {query_id:?} tuple {tuple}"),
            ));
        }
        let entry = qrels.entry(query_id.clone()).or_default();
        if let Some(first) = entry.first() {
            if first.tuple.arity() != tuple.arity() {
                return Err(Error::parse(
                    path.display().to_string(),
                    lineno + 1,
                    format!("mixed tuple arity within query {query_id:?}"),
                ));
            }
        }
        entry.push(QrelRecord {
            query_id,
            tuple,
            grade,
        });
    }
    Ok(qrels)
}

/// Write judgments in the same TAB-separated format `load_qrels` reads.
pub fn save_qrels(path: &Path, qrels: &Qrels) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for records in qrels.values() {
        for r in records {
            writeln!(w, "{}\t{}\t{}", r.query_id, r.tuple, r.grade)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
