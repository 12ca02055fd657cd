//! Fused meta-document indexes.
//!
//! The entity index holds one meta-document per entity id — all tokenized
//! sentences its mentions appear in, fused. The relationship index holds one
//! meta-document per normalized entity pair — all co-occurrence contexts,
//! fused. Each meta-document carries unigram counts, exact adjacent-bigram
//! counts, and unordered window-8 bigram counts; the collection keeps the
//! matching collection/document frequencies for language-model smoothing and
//! BM25.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::extraction::{EntityExtraction, Pair, RelationshipExtraction};

/// Serialize bigram-keyed maps as arrays of `[t1, t2, count]`, since JSON
/// object keys must be strings.
mod bigram_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(String, String), u64>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<(&str, &str, u64)> = map
            .iter()
            .map(|((a, b), n)| (a.as_str(), b.as_str(), *n))
            .collect();
        rows.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<(String, String), u64>, D::Error> {
        let rows: Vec<(String, String, u64)> = Vec::deserialize(deserializer)?;
        Ok(rows.into_iter().map(|(a, b, n)| ((a, b), n)).collect())
    }
}

/// Default unordered window width: two terms at most 8 positions apart
/// end-to-end, i.e. up to 6 terms between them.
pub const DEFAULT_WINDOW: usize = 8;

/// Normalized key for an unordered term co-occurrence.
pub fn window_key(t1: &str, t2: &str) -> (String, String) {
    if t1 <= t2 {
        (t1.to_string(), t2.to_string())
    } else {
        (t2.to_string(), t1.to_string())
    }
}

/// One fused meta-document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaDoc {
    /// Term → pseudo-frequency: total occurrences across all fused extractions.
    pub tf: BTreeMap<String, u64>,
    /// (t1, t2) → count of exact adjacent occurrences, within one extraction.
    #[serde(with = "bigram_map")]
    pub tf_ordered: BTreeMap<(String, String), u64>,
    /// {t1, t2} (stored min-first) → count of position pairs at distance
    /// < window, within one extraction.
    #[serde(with = "bigram_map")]
    pub tf_window8: BTreeMap<(String, String), u64>,
    /// Total term count |D|.
    pub length: u64,
    /// Documents contributing at least one extraction.
    pub source_docs: BTreeSet<String>,
}

impl MetaDoc {
    /// Fuse one extraction's token sequence in. Bigram and window counts
    /// never cross extraction boundaries.
    pub fn add_extraction(&mut self, terms: &[String], doc_id: &str, window: usize) {
        for t in terms {
            *self.tf.entry(t.clone()).or_insert(0) += 1;
        }
        for w in terms.windows(2) {
            *self
                .tf_ordered
                .entry((w[0].clone(), w[1].clone()))
                .or_insert(0) += 1;
        }
        for i in 0..terms.len() {
            let hi = terms.len().min(i + window);
            for j in (i + 1)..hi {
                *self
                    .tf_window8
                    .entry(window_key(&terms[i], &terms[j]))
                    .or_insert(0) += 1;
            }
        }
        self.length += terms.len() as u64;
        self.source_docs.insert(doc_id.to_string());
    }

    pub fn tf(&self, term: &str) -> u64 {
        self.tf.get(term).copied().unwrap_or(0)
    }

    pub fn tf_ordered(&self, t1: &str, t2: &str) -> u64 {
        self.tf_ordered
            .get(&(t1.to_string(), t2.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn tf_window(&self, t1: &str, t2: &str) -> u64 {
        self.tf_window8.get(&window_key(t1, t2)).copied().unwrap_or(0)
    }
}

/// Collection-level statistics for one index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    /// Number of meta-documents N.
    pub num_docs: u64,
    /// Total term count |C| across all meta-documents.
    pub total_terms: u64,
    /// Average meta-document length (0 when the index is empty).
    pub avg_len: f64,
    pub cf: BTreeMap<String, u64>,
    pub df: BTreeMap<String, u64>,
    #[serde(with = "bigram_map")]
    pub cf_ordered: BTreeMap<(String, String), u64>,
    #[serde(with = "bigram_map")]
    pub df_ordered: BTreeMap<(String, String), u64>,
    #[serde(with = "bigram_map")]
    pub cf_window8: BTreeMap<(String, String), u64>,
    #[serde(with = "bigram_map")]
    pub df_window8: BTreeMap<(String, String), u64>,
    /// Entity id → number of relationship meta-docs whose pair contains it
    /// (empty for the entity index).
    pub entity_pair_membership: BTreeMap<String, u64>,
}

impl CollectionStats {
    pub fn cf(&self, term: &str) -> u64 {
        self.cf.get(term).copied().unwrap_or(0)
    }

    pub fn df(&self, term: &str) -> u64 {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn cf_ordered(&self, t1: &str, t2: &str) -> u64 {
        self.cf_ordered
            .get(&(t1.to_string(), t2.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn df_ordered(&self, t1: &str, t2: &str) -> u64 {
        self.df_ordered
            .get(&(t1.to_string(), t2.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn cf_window(&self, t1: &str, t2: &str) -> u64 {
        self.cf_window8.get(&window_key(t1, t2)).copied().unwrap_or(0)
    }

    pub fn df_window(&self, t1: &str, t2: &str) -> u64 {
        self.df_window8.get(&window_key(t1, t2)).copied().unwrap_or(0)
    }

    /// n(E): how many relationship meta-docs contain this entity.
    pub fn membership(&self, entity_id: &str) -> u64 {
        self.entity_pair_membership
            .get(entity_id)
            .copied()
            .unwrap_or(0)
    }
}

/// Options for index construction.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Unordered co-occurrence window width.
    pub window: usize,
    /// Maximum number of extractions fused per key; `None` = uncapped.
    /// Capping keeps the first extractions in stream order, so a capped
    /// build is deterministic for a given stream but not order-independent.
    pub cap: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            window: DEFAULT_WINDOW,
            cap: None,
        }
    }
}

/// A built, immutable index: meta-documents plus collection statistics.
/// `K` is `String` (entity ids) or [`Pair`] (normalized entity pairs).
#[derive(Debug, Clone, PartialEq)]
pub struct Index<K: Ord> {
    pub docs: BTreeMap<K, MetaDoc>,
    pub stats: CollectionStats,
    /// term → keys of meta-docs containing it (rebuilt, never persisted).
    postings: BTreeMap<String, Vec<K>>,
}

pub type EntityIndex = Index<String>;
pub type RelationshipIndex = Index<Pair>;

#[derive(Serialize, Deserialize)]
struct MetaDocRecord<K> {
    key: K,
    metadoc: MetaDoc,
}

impl<K: Ord + Clone + Display + Serialize + DeserializeOwned> Index<K> {
    fn finalize(docs: BTreeMap<K, MetaDoc>, membership: BTreeMap<String, u64>) -> Index<K> {
        let mut stats = CollectionStats {
            num_docs: docs.len() as u64,
            entity_pair_membership: membership,
            ..CollectionStats::default()
        };
        for doc in docs.values() {
            stats.total_terms += doc.length;
            for (t, n) in &doc.tf {
                *stats.cf.entry(t.clone()).or_insert(0) += n;
                *stats.df.entry(t.clone()).or_insert(0) += 1;
            }
            for (k, n) in &doc.tf_ordered {
                *stats.cf_ordered.entry(k.clone()).or_insert(0) += n;
                *stats.df_ordered.entry(k.clone()).or_insert(0) += 1;
            }
            for (k, n) in &doc.tf_window8 {
                *stats.cf_window8.entry(k.clone()).or_insert(0) += n;
                *stats.df_window8.entry(k.clone()).or_insert(0) += 1;
            }
        }
        if stats.num_docs > 0 {
            stats.avg_len = stats.total_terms as f64 / stats.num_docs as f64;
        }
        let postings = build_postings(&docs);
        Index {
            docs,
            stats,
            postings,
        }
    }

    /// Exact-key retrieval.
    pub fn lookup(&self, key: &K) -> Option<&MetaDoc> {
        self.docs.get(key)
    }

    /// First-stage candidate retrieval: meta-docs containing at least one
    /// sub-query term, ranked by a disjunctive tf-idf overlap score
    /// Σ_matching tf(t,D)·ln(N/n(t)), ties broken by key ascending, truncated
    /// to `k`.
    pub fn match_candidates(&self, terms: &[String], k: usize) -> Vec<(&K, &MetaDoc)> {
        let unique: BTreeSet<&String> = terms.iter().collect();
        let n = self.stats.num_docs as f64;
        let mut scores: BTreeMap<&K, f64> = BTreeMap::new();
        for term in unique {
            let Some(keys) = self.postings.get(term.as_str()) else {
                continue;
            };
            let idf = (n / self.stats.df(term) as f64).ln();
            for key in keys {
                let tf = self.docs[key].tf(term) as f64;
                *scores.entry(key).or_insert(0.0) += tf * idf;
            }
        }
        let mut ranked: Vec<(&K, f64)> = scores.into_iter().collect();
        ranked.sort_by(|(ka, sa), (kb, sb)| {
            sb.total_cmp(sa).then_with(|| ka.cmp(kb))
        });
        ranked
            .into_iter()
            .take(k)
            .map(|(key, _)| (key, &self.docs[key]))
            .collect()
    }

    /// Consistency check used by tests: structural invariants of every
    /// meta-doc and of the collection statistics.
    pub fn validate(&self) -> Result<()> {
        let mut total = 0u64;
        for (key, doc) in &self.docs {
            let tf_sum: u64 = doc.tf.values().sum();
            if tf_sum != doc.length {
                return Err(Error::Index(format!(
                    "meta-doc {key}: length {} != sum of tf {}",
                    doc.length, tf_sum
                )));
            }
            for ((t1, t2), n) in &doc.tf_ordered {
                let cap = doc.tf(t1).min(doc.tf(t2));
                if *n > cap {
                    return Err(Error::Index(format!(
                        "meta-doc {key}: ordered bigram ({t1},{t2}) count {n} exceeds unigram minimum {cap}"
                    )));
                }
                let both_ways = doc.tf_ordered(t1, t2) + doc.tf_ordered(t2, t1);
                let window = doc.tf_window(t1, t2);
                if window < if t1 == t2 { *n } else { both_ways } {
                    return Err(Error::Index(format!(
                        "meta-doc {key}: window count for ({t1},{t2}) below adjacent-bigram count"
                    )));
                }
            }
            total += doc.length;
        }
        if total != self.stats.total_terms {
            return Err(Error::Index(format!(
                "total_terms {} != sum of meta-doc lengths {total}",
                self.stats.total_terms
            )));
        }
        if self.stats.num_docs != self.docs.len() as u64 {
            return Err(Error::Index("num_docs does not match doc count".to_string()));
        }
        Ok(())
    }

    /// Persist into `dir` as `stats.json` plus `metadocs.jsonl`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let stats_path = dir.join("stats.json");
        let stats_json = serde_json::to_string_pretty(&self.stats)
            .map_err(|e| Error::Index(e.to_string()))?;
        std::fs::write(&stats_path, stats_json + "\n")
            .map_err(|e| Error::io(stats_path.display().to_string(), e))?;
        let docs_path = dir.join("metadocs.jsonl");
        let file = std::fs::File::create(&docs_path)
            .map_err(|e| Error::io(docs_path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        for (key, metadoc) in &self.docs {
            let record = MetaDocRecord {
                key: key.clone(),
                metadoc: metadoc.clone(),
            };
            let line =
                serde_json::to_string(&record).map_err(|e| Error::Index(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(docs_path.display().to_string(), e))?;
        }
        w.flush()
            .map_err(|e| Error::io(docs_path.display().to_string(), e))?;
        Ok(())
    }

    /// Load an index previously written by [`Index::save`].
    pub fn load(dir: &Path) -> Result<Index<K>> {
        let stats_path = dir.join("stats.json");
        let stats_json = std::fs::read_to_string(&stats_path)
            .map_err(|e| Error::io(stats_path.display().to_string(), e))?;
        let stats: CollectionStats = serde_json::from_str(&stats_json)
            .map_err(|e| Error::parse(stats_path.display().to_string(), 0, e.to_string()))?;
        let docs_path = dir.join("metadocs.jsonl");
        let file = std::fs::File::open(&docs_path)
            .map_err(|e| Error::io(docs_path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut docs = BTreeMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(docs_path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: MetaDocRecord<K> = serde_json::from_str(&line).map_err(|e| {
                Error::parse(docs_path.display().to_string(), lineno + 1, e.to_string())
            })?;
            if docs.insert(record.key.clone(), record.metadoc).is_some() {
                return Err(Error::parse(
                    docs_path.display().to_string(),
                    lineno + 1,
                    format!("duplicate meta-doc key {}", record.key),
                ));
            }
        }
        let postings = build_postings(&docs);
        Ok(Index {
            docs,
            stats,
            postings,
        })
    }
}

fn build_postings<K: Ord + Clone>(docs: &BTreeMap<K, MetaDoc>) -> BTreeMap<String, Vec<K>> {
    let mut postings: BTreeMap<String, Vec<K>> = BTreeMap::new();
    for (key, doc) in docs {
        for term in doc.tf.keys() {
            postings.entry(term.clone()).or_default().push(key.clone());
        }
    }
    postings
}

/// Fuse entity extractions into the entity index. Meta-doc statistics are
/// plain sums over extraction occurrences (binary document-association
/// weights); bigrams never span extraction boundaries.
pub fn build_entity_index(
    extractions: impl IntoIterator<Item = EntityExtraction>,
    opts: BuildOptions,
) -> EntityIndex {
    let mut docs: BTreeMap<String, MetaDoc> = BTreeMap::new();
    let mut fused: BTreeMap<String, usize> = BTreeMap::new();
    for ex in extractions {
        let count = fused.entry(ex.entity_id.clone()).or_insert(0);
        if opts.cap.is_some_and(|cap| *count >= cap) {
            continue;
        }
        *count += 1;
        docs.entry(ex.entity_id.clone())
            .or_default()
            .add_extraction(&ex.terms, &ex.doc_id, opts.window);
    }
    Index::finalize(docs, BTreeMap::new())
}

/// Fuse relationship extractions into the pair index, tracking for every
/// entity how many pair meta-docs contain it.
pub fn build_relationship_index(
    extractions: impl IntoIterator<Item = RelationshipExtraction>,
    opts: BuildOptions,
) -> RelationshipIndex {
    let mut docs: BTreeMap<Pair, MetaDoc> = BTreeMap::new();
    let mut fused: BTreeMap<Pair, usize> = BTreeMap::new();
    for ex in extractions {
        let count = fused.entry(ex.pair.clone()).or_insert(0);
        if opts.cap.is_some_and(|cap| *count >= cap) {
            continue;
        }
        *count += 1;
        docs.entry(ex.pair.clone())
            .or_default()
            .add_extraction(&ex.terms, &ex.doc_id, opts.window);
    }
    let mut membership: BTreeMap<String, u64> = BTreeMap::new();
    for pair in docs.keys() {
        *membership.entry(pair.first().to_string()).or_insert(0) += 1;
        *membership.entry(pair.second().to_string()).or_insert(0) += 1;
    }
    Index::finalize(docs, membership)
}
