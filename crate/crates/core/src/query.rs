//! Relational query model: a chain of alternating entity and relationship
//! sub-queries, answered by tuples of entities.
//!
//! A query of length `|Q| = 3` (entity, relationship, entity) is answered by
//! entity pairs; `|Q| = 5` by triples. Sub-queries arrive already decomposed,
//! one TAB-separated field per sub-query.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::extraction::tokenize;

/// Largest supported chain length. Pairs and triples are the tuple shapes
/// with full join and feature coverage; longer chains are rejected.
pub const MAX_QUERY_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartKind {
    Entity,
    Relationship,
}

/// One sub-query: a non-empty token list targeting either an entity
/// description or a relationship description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPart {
    pub kind: PartKind,
    pub terms: Vec<String>,
}

/// An entity-relationship query: `query_id` plus an odd-length chain of
/// parts that strictly alternates entity, relationship, entity, ...
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ERQuery {
    pub query_id: String,
    pub parts: Vec<QueryPart>,
}

impl ERQuery {
    /// Number of sub-queries in the chain.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Arity of the answer tuples: `(|Q| + 1) / 2`.
    pub fn tuple_arity(&self) -> usize {
        self.parts.len().div_ceil(2)
    }

    /// Entity sub-queries in chain order.
    pub fn entity_parts(&self) -> impl Iterator<Item = &QueryPart> {
        self.parts.iter().filter(|p| p.kind == PartKind::Entity)
    }

    /// Relationship sub-queries in chain order.
    pub fn relationship_parts(&self) -> impl Iterator<Item = &QueryPart> {
        self.parts
            .iter()
            .filter(|p| p.kind == PartKind::Relationship)
    }

    /// Check the chain shape: odd length in 3..=MAX_QUERY_LEN, strict
    /// entity/relationship alternation, and no empty part.
    pub fn validate(&self) -> Result<()> {
        let n = self.parts.len();
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Query {
                query_id: self.query_id.clone(),
                msg: format!("chain length must be odd and >= 3, got {n}"),
            });
        }
        if n > MAX_QUERY_LEN {
            return Err(Error::Query {
                query_id: self.query_id.clone(),
                msg: format!("chain length {n} exceeds supported maximum {MAX_QUERY_LEN}"),
            });
        }
        for (i, part) in self.parts.iter().enumerate() {
            let expected = if i % 2 == 0 {
                PartKind::Entity
            } else {
                PartKind::Relationship
            };
            if part.kind != expected {
                return Err(Error::Query {
                    query_id: self.query_id.clone(),
                    msg: format!("part {i} breaks the entity/relationship alternation"),
                });
            }
            if part.terms.is_empty() {
                return Err(Error::Query {
                    query_id: self.query_id.clone(),
                    msg: format!("part {i} is empty after tokenization"),
                });
            }
        }
        Ok(())
    }
}

/// A candidate answer: an ordered list of entity ids whose arity matches the
/// query's entity sub-query count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityTuple(pub Vec<String>);

impl EntityTuple {
    pub fn pair(a: impl Into<String>, b: impl Into<String>) -> Self {
        EntityTuple(vec![a.into(), b.into()])
    }

    pub fn triple(a: impl Into<String>, b: impl Into<String>, c: impl Into<String>) -> Self {
        EntityTuple(vec![a.into(), b.into(), c.into()])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn entities(&self) -> &[String] {
        &self.0
    }

    /// Direction-normalized form: the chain read forwards or backwards,
    /// whichever is lexicographically smaller. Relationships are symmetric,
    /// so a reversed chain names the same answer. For pairs this is plain
    /// sorted order; for triples it keeps the middle entity in the middle.
    pub fn normalized(&self) -> EntityTuple {
        let mut rev = self.0.clone();
        rev.reverse();
        if rev < self.0 {
            EntityTuple(rev)
        } else {
            self.clone()
        }
    }

    /// Parse "A|B" or "A|B|C".
    pub fn parse(s: &str) -> Option<EntityTuple> {
        let ids: Vec<String> = s.split('|').map(|p| p.to_string()).collect();
        if !(2..=3).contains(&ids.len()) || ids.iter().any(|id| id.is_empty()) {
            return None;
        }
        Some(EntityTuple(ids))
    }
}

impl fmt::Display for EntityTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join("|"))
    }
}

/// Parse one query-file line: `query_id<TAB>entity sub-query<TAB>relationship
/// sub-query<TAB>entity sub-query[...]`. Sub-query strings are tokenized with
/// the corpus tokenizer.
pub fn parse_query(line: &str) -> Result<ERQuery> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 2 {
        return Err(Error::Query {
            query_id: line.chars().take(40).collect(),
            msg: "expected TAB-separated query_id and sub-queries".to_string(),
        });
    }
    let query_id = fields[0].trim().to_string();
    if query_id.is_empty() {
        return Err(Error::Query {
            query_id: "<empty>".to_string(),
            msg: "query_id is empty".to_string(),
        });
    }
    let parts: Vec<QueryPart> = fields[1..]
        .iter()
        .enumerate()
        .map(|(i, raw)| QueryPart {
            kind: if i % 2 == 0 {
                PartKind::Entity
            } else {
                PartKind::Relationship
            },
            terms: tokenize(raw),
        })
        .collect();
    let query = ERQuery { query_id, parts };
    query.validate()?;
    Ok(query)
}

/// Load a query file: one query per non-empty line.
pub fn load_queries(path: &std::path::Path) -> Result<Vec<ERQuery>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut queries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q = parse_query(line).map_err(|e| {
            Error::parse(path.display().to_string(), lineno + 1, e.to_string())
        })?;
        queries.push(q);
    }
    Ok(queries)
}
