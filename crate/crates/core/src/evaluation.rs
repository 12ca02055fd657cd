//! Rank-based evaluation of tuple runs against graded judgments: average
//! precision at 100, precision at 10, reciprocal rank, and NDCG at 20, each
//! per query, macro-averaged over queries with at least one relevant tuple.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::Qrels;
use crate::error::{Error, Result};
use crate::query::EntityTuple;

/// Rank cutoff for average precision.
pub const AP_CUTOFF: usize = 100;
/// Rank cutoff for precision.
pub const P_CUTOFF: usize = 10;
/// Rank cutoff for NDCG.
pub const NDCG_CUTOFF: usize = 20;

/// Graded relevance for one query, keyed by direction-normalized tuple.
pub type RelevanceMap = BTreeMap<EntityTuple, u32>;

/// A run: for each query id, the retrieved tuples in rank order.
pub type Run = BTreeMap<String, Vec<EntityTuple>>;

fn grade(rel: &RelevanceMap, tuple: &EntityTuple) -> u32 {
    rel.get(tuple).copied().unwrap_or(0)
}

fn total_relevant(rel: &RelevanceMap) -> usize {
    rel.values().filter(|g| **g >= 1).count()
}

/// Average precision over the top `cutoff`: `(1/R)·Σ_{k relevant} P@k`, with
/// `R` the number of relevant tuples in the judgments (retrieved or not).
/// `None` when the query has no relevant tuples at all.
pub fn average_precision(
    ranked: &[EntityTuple],
    rel: &RelevanceMap,
    cutoff: usize,
) -> Option<f64> {
    let r = total_relevant(rel);
    if r == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, tuple) in ranked.iter().take(cutoff).enumerate() {
        if grade(rel, tuple) >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / r as f64)
}

/// Precision at `k` with the denominator fixed at `k` even for shorter runs.
pub fn precision_at(ranked: &[EntityTuple], rel: &RelevanceMap, k: usize) -> f64 {
    let hits = ranked
        .iter()
        .take(k)
        .filter(|t| grade(rel, t) >= 1)
        .count();
    hits as f64 / k as f64
}

/// Reciprocal of the rank of the first relevant tuple; 0 if none retrieved.
pub fn reciprocal_rank(ranked: &[EntityTuple], rel: &RelevanceMap) -> f64 {
    for (i, tuple) in ranked.iter().enumerate() {
        if grade(rel, tuple) >= 1 {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG at `k` with gain `2^grade − 1` and discount `log2(rank + 1)`; the
/// ideal ranking comes from the judged grades sorted descending. `None` when
/// the ideal gain is zero (no relevant tuples).
pub fn ndcg_at(ranked: &[EntityTuple], rel: &RelevanceMap, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = rel.values().copied().filter(|g| *g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return None;
    }
    let got = dcg(ranked.iter().take(k).map(|t| grade(rel, t)));
    Some(got / idcg)
}

/// Metrics for one evaluated query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub map: f64,
    pub p10: f64,
    pub mrr: f64,
    pub ndcg20: f64,
    pub retrieved: usize,
    pub relevant_total: usize,
    pub relevant_retrieved: usize,
}

/// Full evaluation output: per-query metrics, their unweighted means, and
/// the queries excluded for lack of relevant judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub mean_map: f64,
    pub mean_p10: f64,
    pub mean_mrr: f64,
    pub mean_ndcg20: f64,
    /// Queries present in the run or judgments but excluded from the macro
    /// average because they have no relevant tuples.
    pub flagged: Vec<String>,
}

impl MetricReport {
    pub fn evaluated(&self) -> usize {
        self.per_query.len()
    }

    /// Render as TSV. Metric values use six decimal places; flagged queries
    /// appear as trailing comment lines.
    pub fn to_tsv(&self, per_query: bool) -> String {
        let mut out = String::new();
        out.push_str(
            "query_id\tmap@100\tp@10\tmrr\tndcg@20\tretrieved\trelevant_total\trelevant_retrieved\n",
        );
        if per_query {
            for (qid, m) in &self.per_query {
                writeln!(
                    out,
                    "{qid}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                    m.map, m.p10, m.mrr, m.ndcg20, m.retrieved, m.relevant_total,
                    m.relevant_retrieved
                )
                .expect("writing to a String cannot fail");
            }
        }
        let (retrieved, rel_total, rel_ret) = self.per_query.values().fold(
            (0usize, 0usize, 0usize),
            |(a, b, c), m| (a + m.retrieved, b + m.relevant_total, c + m.relevant_retrieved),
        );
        writeln!(
            out,
            "MEAN({})\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{retrieved}\t{rel_total}\t{rel_ret}",
            self.evaluated(),
            self.mean_map,
            self.mean_p10,
            self.mean_mrr,
            self.mean_ndcg20,
        )
        .expect("writing to a String cannot fail");
        for qid in &self.flagged {
            writeln!(out, "# flagged (no relevant judgments): {qid}")
                .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Build the per-query relevance map from grouped judgment records.
pub fn relevance_maps(qrels: &Qrels) -> BTreeMap<String, RelevanceMap> {
    qrels
        .iter()
        .map(|(qid, records)| {
            let map: RelevanceMap = records
                .iter()
                .map(|r| (r.tuple.normalized(), r.grade))
                .collect();
            (qid.clone(), map)
        })
        .collect()
}

/// Evaluate a run against judgments.
///
/// The evaluated universe is every query — from the run or the judgments —
/// that has at least one relevant tuple; a judged query missing from the run
/// scores zero everywhere, and retrieved-but-unjudged tuples count as
/// non-relevant. Queries with no relevant judgments are flagged and excluded
/// from the macro average. Duplicate tuples within one query's ranking are
/// rejected.
pub fn evaluate(run: &Run, qrels: &Qrels) -> Result<MetricReport> {
    let rels = relevance_maps(qrels);
    let empty_ranked: Vec<EntityTuple> = Vec::new();
    let empty_rel = RelevanceMap::new();
    let mut universe: Vec<&String> = run.keys().chain(rels.keys()).collect();
    universe.sort();
    universe.dedup();

    let mut per_query = BTreeMap::new();
    let mut flagged = Vec::new();
    for qid in universe {
        let ranked = run.get(qid).unwrap_or(&empty_ranked);
        let mut seen = std::collections::BTreeSet::new();
        for t in ranked {
            if !seen.insert(t.normalized()) {
                return Err(Error::Evaluation(format!(
                    "query {qid}: duplicate tuple {t} in run"
                )));
            }
        }
        let normalized: Vec<EntityTuple> = ranked.iter().map(|t| t.normalized()).collect();
        let rel = rels.get(qid).unwrap_or(&empty_rel);
        let Some(map) = average_precision(&normalized, rel, AP_CUTOFF) else {
            flagged.push(qid.clone());
            continue;
        };
        let ndcg20 = ndcg_at(&normalized, rel, NDCG_CUTOFF)
            .expect("ideal gain is positive whenever relevant tuples exist");
        per_query.insert(
            qid.clone(),
            QueryMetrics {
                map,
                p10: precision_at(&normalized, rel, P_CUTOFF),
                mrr: reciprocal_rank(&normalized, rel),
                ndcg20,
                retrieved: normalized.len(),
                relevant_total: total_relevant(rel),
                relevant_retrieved: normalized.iter().filter(|t| grade(rel, t) >= 1).count(),
            },
        );
    }
    let n = per_query.len() as f64;
    let mean = |f: fn(&QueryMetrics) -> f64| -> f64 {
        if per_query.is_empty() {
            0.0
        } else {
            per_query.values().map(f).sum::<f64>() / n
        }
    };
    Ok(MetricReport {
        mean_map: mean(|m| m.map),
        mean_p10: mean(|m| m.p10),
        mean_mrr: mean(|m| m.mrr),
        mean_ndcg20: mean(|m| m.ndcg20),
        per_query,
        flagged,
    })
}
