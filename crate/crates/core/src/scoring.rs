//! Feature functions over meta-documents: Dirichlet-smoothed language-model
//! and BM25 scores for unigrams, exact ordered bigrams, and unordered
//! window-8 bigrams, plus the two non-textual compatibility features used for
//! entity-relationship and relationship-relationship edges.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::extraction::Pair;
use crate::index::{CollectionStats, MetaDoc, DEFAULT_WINDOW};

/// Numerator floor for language-model scores when both the document and the
/// collection have zero mass for a term, keeping every score finite and every
/// candidate comparable over the same term set.
pub const LM_EPSILON: f64 = 1e-10;

/// Which family of textual feature functions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetrievalModel {
    Lm,
    Bm25,
}

/// Scoring parameters. The Dirichlet priors default to the average
/// meta-document length of the index being scored when left unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    #[serde(rename = "mu_E", default, skip_serializing_if = "Option::is_none")]
    pub mu_entity: Option<f64>,
    #[serde(rename = "mu_R", default, skip_serializing_if = "Option::is_none")]
    pub mu_relationship: Option<f64>,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    /// Mixing weight between pair membership and entity popularity in
    /// [`f_er_s`]; 0 = membership only.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Unordered co-occurrence window width used at index build time.
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_k1() -> f64 {
    1.2
}

fn default_b() -> f64 {
    0.75
}

fn default_alpha() -> f64 {
    0.1
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            mu_entity: None,
            mu_relationship: None,
            k1: default_k1(),
            b: default_b(),
            alpha: default_alpha(),
            window: default_window(),
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [("mu_E", self.mu_entity), ("mu_R", self.mu_relationship)] {
            if let Some(v) = mu {
                if v <= 0.0 || v.is_nan() {
                    return Err(Error::Index(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        if self.k1 <= 0.0 || self.k1.is_nan() {
            return Err(Error::Index(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Index(format!("b must be in [0,1], got {}", self.b)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Index(format!(
                "alpha must be in [0,1], got {}",
                self.alpha
            )));
        }
        if self.window < 2 {
            return Err(Error::Index(format!(
                "window must be >= 2, got {}",
                self.window
            )));
        }
        Ok(())
    }

    /// Dirichlet prior for the entity index: explicit value or the index's
    /// average meta-document length (1.0 on a degenerate empty index).
    pub fn resolve_mu_entity(&self, stats: &CollectionStats) -> f64 {
        self.mu_entity.unwrap_or(fallback_mu(stats))
    }

    /// Dirichlet prior for the relationship index, same resolution rule.
    pub fn resolve_mu_relationship(&self, stats: &CollectionStats) -> f64 {
        self.mu_relationship.unwrap_or(fallback_mu(stats))
    }
}

fn fallback_mu(stats: &CollectionStats) -> f64 {
    if stats.avg_len > 0.0 {
        stats.avg_len
    } else {
        1.0
    }
}

/// Read a JSON params file; missing fields keep their defaults.
pub fn load_params(path: &Path) -> Result<ScoringParams> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let params: ScoringParams = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
    params.validate()?;
    Ok(params)
}

/// Shared Dirichlet-smoothed log-score: `ln((tf + μ·cf/|C|) / (|D| + μ))`,
/// floored via [`LM_EPSILON`] when the numerator has no mass at all.
fn lm_event(tf: u64, cf: u64, total_terms: u64, doc_len: u64, mu: f64) -> f64 {
    let background = if total_terms > 0 {
        cf as f64 / total_terms as f64
    } else {
        0.0
    };
    let mut numerator = tf as f64 + mu * background;
    if numerator <= 0.0 {
        numerator = LM_EPSILON;
    }
    (numerator / (doc_len as f64 + mu)).ln()
}

/// Shared BM25 score with the idf floored at zero so absence is never
/// rewarded when a term appears in more than half of the meta-docs.
fn bm25_event(tf: u64, df: u64, stats: &CollectionStats, doc_len: u64, k1: f64, b: f64) -> f64 {
    if tf == 0 || stats.num_docs == 0 {
        return 0.0;
    }
    let n = stats.num_docs as f64;
    let idf = ((n - df as f64 + 0.5) / (df as f64 + 0.5)).ln().max(0.0);
    let len_ratio = if stats.avg_len > 0.0 {
        doc_len as f64 / stats.avg_len
    } else {
        0.0
    };
    let tf = tf as f64;
    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_ratio))
}

pub fn lm_unigram(term: &str, doc: &MetaDoc, stats: &CollectionStats, mu: f64) -> f64 {
    lm_event(doc.tf(term), stats.cf(term), stats.total_terms, doc.length, mu)
}

pub fn lm_ordered(t1: &str, t2: &str, doc: &MetaDoc, stats: &CollectionStats, mu: f64) -> f64 {
    lm_event(
        doc.tf_ordered(t1, t2),
        stats.cf_ordered(t1, t2),
        stats.total_terms,
        doc.length,
        mu,
    )
}

pub fn lm_unordered(t1: &str, t2: &str, doc: &MetaDoc, stats: &CollectionStats, mu: f64) -> f64 {
    lm_event(
        doc.tf_window(t1, t2),
        stats.cf_window(t1, t2),
        stats.total_terms,
        doc.length,
        mu,
    )
}

pub fn bm25_unigram(term: &str, doc: &MetaDoc, stats: &CollectionStats, k1: f64, b: f64) -> f64 {
    bm25_event(doc.tf(term), stats.df(term), stats, doc.length, k1, b)
}

pub fn bm25_ordered(
    t1: &str,
    t2: &str,
    doc: &MetaDoc,
    stats: &CollectionStats,
    k1: f64,
    b: f64,
) -> f64 {
    bm25_event(
        doc.tf_ordered(t1, t2),
        stats.df_ordered(t1, t2),
        stats,
        doc.length,
        k1,
        b,
    )
}

pub fn bm25_unordered(
    t1: &str,
    t2: &str,
    doc: &MetaDoc,
    stats: &CollectionStats,
    k1: f64,
    b: f64,
) -> f64 {
    bm25_event(
        doc.tf_window(t1, t2),
        stats.df_window(t1, t2),
        stats,
        doc.length,
        k1,
        b,
    )
}

/// Unigram feature for one sub-query: sum over its terms.
pub fn part_unigram(
    terms: &[String],
    doc: &MetaDoc,
    stats: &CollectionStats,
    model: RetrievalModel,
    mu: f64,
    k1: f64,
    b: f64,
) -> f64 {
    terms
        .iter()
        .map(|t| match model {
            RetrievalModel::Lm => lm_unigram(t, doc, stats, mu),
            RetrievalModel::Bm25 => bm25_unigram(t, doc, stats, k1, b),
        })
        .sum()
}

/// Ordered-bigram feature for one sub-query: sum over consecutive term pairs
/// within the sub-query (none for single-term parts).
pub fn part_ordered(
    terms: &[String],
    doc: &MetaDoc,
    stats: &CollectionStats,
    model: RetrievalModel,
    mu: f64,
    k1: f64,
    b: f64,
) -> f64 {
    terms
        .windows(2)
        .map(|w| match model {
            RetrievalModel::Lm => lm_ordered(&w[0], &w[1], doc, stats, mu),
            RetrievalModel::Bm25 => bm25_ordered(&w[0], &w[1], doc, stats, k1, b),
        })
        .sum()
}

/// Unordered-window feature for one sub-query: sum over the same consecutive
/// term pairs, scored against the window-8 counts.
pub fn part_unordered(
    terms: &[String],
    doc: &MetaDoc,
    stats: &CollectionStats,
    model: RetrievalModel,
    mu: f64,
    k1: f64,
    b: f64,
) -> f64 {
    terms
        .windows(2)
        .map(|w| match model {
            RetrievalModel::Lm => lm_unordered(&w[0], &w[1], doc, stats, mu),
            RetrievalModel::Bm25 => bm25_unordered(&w[0], &w[1], doc, stats, k1, b),
        })
        .sum()
}

/// Entity-relationship compatibility: a smoothed membership test mixing
/// "does the entity belong to the pair" with the entity's popularity across
/// relationship meta-docs: `(1−α)·m + α·n(E)/N^R`.
pub fn f_er_s(entity_id: &str, pair: &Pair, stats_r: &CollectionStats, alpha: f64) -> f64 {
    let membership = if pair.contains(entity_id) { 1.0 } else { 0.0 };
    let popularity = if stats_r.num_docs > 0 {
        stats_r.membership(entity_id) as f64 / stats_r.num_docs as f64
    } else {
        0.0
    };
    (1.0 - alpha) * membership + alpha * popularity
}

/// Relationship-relationship compatibility: 1 iff the entity is shared by
/// both pairs.
pub fn f_rer_s(entity_id: &str, left: &Pair, right: &Pair) -> f64 {
    if left.contains(entity_id) && right.contains(entity_id) {
        1.0
    } else {
        0.0
    }
}
