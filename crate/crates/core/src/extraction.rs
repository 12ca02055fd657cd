//! Turning annotated documents into per-entity and per-pair term extractions.
//!
//! For every entity mention we extract the tokenized sentence the mention sits
//! in; for every pair of distinct entities co-occurring in one sentence we
//! extract the tokenized text separating the two mentions (or, in the
//! full-sentence variant, the whole sentence). These extractions are what the
//! meta-document indexes aggregate.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::corpus::{AnnotatedDocument, EntityMention};

/// Lowercase and split on any non-alphanumeric character (Unicode-aware);
/// empty fragments are dropped. Digits are kept as tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

/// A sentence as a character-offset range (`start` inclusive, `end` exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

/// Split text into sentences at `.`, `!`, or `?` followed by whitespace.
///
/// The boundary sits immediately after the terminator. A boundary that would
/// fall strictly inside a mention span is suppressed, so an annotated span
/// like "Dr. Smith" never gets cut in half. The trailing text after the last
/// terminator is its own sentence; spans cover the whole text.
pub fn segment_sentences(text: &str, mentions: &[EntityMention]) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = 0usize;
    for i in 0..n {
        if !matches!(chars[i], '.' | '!' | '?') {
            continue;
        }
        let Some(&next) = chars.get(i + 1) else { continue };
        if !next.is_whitespace() {
            continue;
        }
        let boundary = i + 1;
        let inside_mention = mentions
            .iter()
            .any(|m| m.start < boundary && boundary < m.end);
        if inside_mention {
            continue;
        }
        spans.push(SentenceSpan { start, end: boundary });
        start = boundary;
    }
    if start < n {
        spans.push(SentenceSpan { start, end: n });
    }
    spans
}

/// An unordered pair of distinct entity ids, stored with the
/// lexicographically smaller id first so both orientations of a
/// co-occurrence collapse onto one key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    a: String,
    b: String,
}

impl Pair {
    /// Build the normalized pair; `None` when the two ids are equal.
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Option<Pair> {
        let x = x.into();
        let y = y.into();
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(Pair { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(Pair { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(&self) -> &str {
        &self.a
    }

    pub fn second(&self) -> &str {
        &self.b
    }

    /// Parse an `A|B` key; `None` unless it has exactly two distinct,
    /// non-empty members.
    pub fn parse(s: &str) -> Option<Pair> {
        let (x, y) = s.split_once('|')?;
        if x.is_empty() || y.is_empty() || y.contains('|') {
            return None;
        }
        Pair::new(x, y)
    }

    /// Whether `id` is one of the two members.
    pub fn contains(&self, id: &str) -> bool {
        self.a == id || self.b == id
    }

    /// Given one member, return the other; `None` if `id` is not a member.
    pub fn other(&self, id: &str) -> Option<&str> {
        if self.a == id {
            Some(&self.b)
        } else if self.b == id {
            Some(&self.a)
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.a, self.b)
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (x, y) = s
            .split_once('|')
            .ok_or_else(|| format!("pair key {s:?} is missing the '|' separator"))?;
        if x.is_empty() || y.is_empty() || y.contains('|') {
            return Err(format!("malformed pair key {s:?}"));
        }
        Pair::new(x, y).ok_or_else(|| format!("pair key {s:?} repeats one entity"))
    }
}

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Pair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// One entity extraction: the tokenized sentence around one mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityExtraction {
    pub entity_id: String,
    pub doc_id: String,
    pub terms: Vec<String>,
}

/// One relationship extraction: the tokenized context for one same-sentence
/// co-occurrence of a pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipExtraction {
    pub pair: Pair,
    pub doc_id: String,
    pub terms: Vec<String>,
}

/// What text represents a co-occurring pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationshipStyle {
    /// The text strictly between the two mention spans.
    Separating,
    /// The whole sentence both mentions sit in.
    FullSentence,
}

fn slice_chars(chars: &[char], start: usize, end: usize) -> String {
    chars[start..end].iter().collect()
}

/// One extraction per mention: the tokenized sentence containing it. A
/// sentence that tokenizes to nothing still yields a (termless) extraction,
/// so the number of records always equals the number of mentions.
pub fn extract_entities(doc: &AnnotatedDocument) -> Vec<EntityExtraction> {
    let chars: Vec<char> = doc.text.chars().collect();
    let sentences = segment_sentences(&doc.text, &doc.mentions);
    let mut out = Vec::with_capacity(doc.mentions.len());
    for m in &doc.mentions {
        let sentence = sentences
            .iter()
            .find(|s| s.start <= m.start && m.start < s.end)
            .copied()
            .unwrap_or(SentenceSpan { start: 0, end: chars.len() });
        let terms = tokenize(&slice_chars(&chars, sentence.start, sentence.end));
        out.push(EntityExtraction {
            entity_id: m.entity_id.clone(),
            doc_id: doc.doc_id.clone(),
            terms,
        });
    }
    out
}

/// One extraction per ordered-by-position mention pair with distinct entity
/// ids inside one sentence. The pair key is direction-normalized; the terms
/// come from the separating text (or the full sentence, per `style`).
pub fn extract_relationships(
    doc: &AnnotatedDocument,
    style: RelationshipStyle,
) -> Vec<RelationshipExtraction> {
    let chars: Vec<char> = doc.text.chars().collect();
    let sentences = segment_sentences(&doc.text, &doc.mentions);
    let mut out = Vec::new();
    for sentence in &sentences {
        let in_sentence: Vec<&EntityMention> = doc
            .mentions
            .iter()
            .filter(|m| sentence.start <= m.start && m.start < sentence.end)
            .collect();
        for i in 0..in_sentence.len() {
            for j in (i + 1)..in_sentence.len() {
                let (mi, mj) = (in_sentence[i], in_sentence[j]);
                let Some(pair) = Pair::new(mi.entity_id.clone(), mj.entity_id.clone()) else {
                    continue;
                };
                let text = match style {
                    RelationshipStyle::Separating => {
                        slice_chars(&chars, mi.end.min(mj.start), mj.start)
                    }
                    RelationshipStyle::FullSentence => {
                        slice_chars(&chars, sentence.start, sentence.end)
                    }
                };
                out.push(RelationshipExtraction {
                    pair,
                    doc_id: doc.doc_id.clone(),
                    terms: tokenize(&text),
                });
            }
        }
    }
    out
}

/// A line of the optional extraction dump: a uniform view over both
/// extraction kinds, suitable for inspection or downstream tooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub kind: String,
    pub key: String,
    pub doc_id: String,
    pub terms: Vec<String>,
}

impl From<&EntityExtraction> for ExtractionRecord {
    fn from(e: &EntityExtraction) -> Self {
        ExtractionRecord {
            kind: "entity".to_string(),
            key: e.entity_id.clone(),
            doc_id: e.doc_id.clone(),
            terms: e.terms.clone(),
        }
    }
}

impl From<&RelationshipExtraction> for ExtractionRecord {
    fn from(r: &RelationshipExtraction) -> Self {
        ExtractionRecord {
            kind: "relationship".to_string(),
            key: r.pair.to_string(),
            doc_id: r.doc_id.clone(),
            terms: r.terms.clone(),
        }
    }
}
