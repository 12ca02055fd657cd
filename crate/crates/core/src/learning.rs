//! Weight learning: coordinate ascent on the simplex maximizing training
//! MAP, with random restarts and k-fold cross-validation.
//!
//! Training re-ranks cached feature vectors — candidates are retrieved and
//! featurized once per query up front, so the optimizer's inner loop never
//! touches an index.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluation::{
    average_precision, ndcg_at, precision_at, reciprocal_rank, RelevanceMap, AP_CUTOFF,
    NDCG_CUTOFF, P_CUTOFF,
};
use crate::query::EntityTuple;
use crate::ranking::{LambdaWeights, NUM_FEATURES};

/// One candidate tuple with its cached feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tuple: EntityTuple,
    pub features: [f64; NUM_FEATURES],
}

/// Everything the optimizer needs for one query: featurized candidates
/// (possibly both orientations of a tuple) plus the judged grades keyed by
/// normalized tuple. Relevant tuples missing from the candidates still count
/// in the metric denominator — reweighting cannot recover them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
    pub relevance: RelevanceMap,
}

impl TrainingInstance {
    fn has_relevant_candidate(&self) -> bool {
        self.candidates
            .iter()
            .any(|c| self.relevance.get(&c.tuple.normalized()).copied().unwrap_or(0) >= 1)
    }

    fn has_relevant_judgment(&self) -> bool {
        self.relevance.values().any(|g| *g >= 1)
    }
}

/// Rank an instance's candidates under the given weights: descending score,
/// ties by tuple id, then orientation-deduplicated (the better-scoring
/// orientation survives) into normalized tuples.
pub fn rank_instance(inst: &TrainingInstance, weights: &LambdaWeights) -> Vec<EntityTuple> {
    let scores: Vec<f64> = inst
        .candidates
        .iter()
        .map(|c| weights.dot(&c.features))
        .collect();
    let mut order: Vec<usize> = (0..inst.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| inst.candidates[a].tuple.cmp(&inst.candidates[b].tuple))
    });
    let mut seen: BTreeSet<EntityTuple> = BTreeSet::new();
    let mut ranked = Vec::new();
    for i in order {
        let normalized = inst.candidates[i].tuple.normalized();
        if seen.insert(normalized.clone()) {
            ranked.push(normalized);
        }
    }
    ranked
}

/// All four rank metrics of one instance under the given weights; `None`
/// when the instance has no relevant judgments.
pub fn instance_metrics(
    inst: &TrainingInstance,
    weights: &LambdaWeights,
) -> Option<(f64, f64, f64, f64)> {
    let ranked = rank_instance(inst, weights);
    let map = average_precision(&ranked, &inst.relevance, AP_CUTOFF)?;
    let p10 = precision_at(&ranked, &inst.relevance, P_CUTOFF);
    let mrr = reciprocal_rank(&ranked, &inst.relevance);
    let ndcg = ndcg_at(&ranked, &inst.relevance, NDCG_CUTOFF)
        .expect("ideal gain positive whenever relevant judgments exist");
    Some((map, p10, mrr, ndcg))
}

/// Macro-averaged training MAP over instances with relevant judgments.
pub fn training_map(instances: &[TrainingInstance], weights: &LambdaWeights) -> f64 {
    let aps: Vec<f64> = instances
        .par_iter()
        .filter_map(|inst| {
            let ranked = rank_instance(inst, weights);
            average_precision(&ranked, &inst.relevance, AP_CUTOFF)
        })
        .collect();
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: LambdaWeights,
    /// Training MAP achieved by the returned weights.
    pub map: f64,
    /// Training MAP at initialization followed by every accepted step, for
    /// the winning restart. Non-decreasing by construction.
    pub history: Vec<f64>,
}

/// Multiplicative line-search steps tried for a non-zero coordinate.
const STEP_FACTORS: [f64; 6] = [0.05, 0.5, 0.9, 1.1, 2.0, 20.0];
/// Value tried when a coordinate sits at zero (multiplicative steps would
/// never leave it).
const ZERO_STEP: f64 = 0.05;
/// Sweep cap per restart.
const MAX_SWEEPS: usize = 50;
/// Default number of restarts: one uniform start plus random starts.
pub const DEFAULT_RESTARTS: usize = 3;

fn with_coordinate(weights: &LambdaWeights, coord: usize, value: f64) -> Option<LambdaWeights> {
    let mut a = weights.as_array();
    a[coord] = value;
    LambdaWeights::from_array(a).normalized().ok()
}

fn ascend_from(start: LambdaWeights, instances: &[TrainingInstance]) -> TrainOutcome {
    let mut weights = start;
    let mut best = training_map(instances, &weights);
    let mut history = vec![best];
    for _sweep in 0..MAX_SWEEPS {
        let mut improved = false;
        for coord in 0..NUM_FEATURES {
            let current = weights.as_array()[coord];
            let candidates: Vec<f64> = if current > 0.0 {
                STEP_FACTORS.iter().map(|f| current * f).collect()
            } else {
                vec![ZERO_STEP]
            };
            let mut coord_best: Option<(f64, LambdaWeights)> = None;
            for value in candidates {
                let Some(w) = with_coordinate(&weights, coord, value) else {
                    continue;
                };
                let score = training_map(instances, &w);
                let beats = match &coord_best {
                    Some((s, _)) => score > *s,
                    None => score > best,
                };
                if beats {
                    coord_best = Some((score, w));
                }
            }
            if let Some((score, w)) = coord_best {
                weights = w;
                best = score;
                history.push(score);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    TrainOutcome {
        weights,
        map: best,
        history,
    }
}

/// Draw a uniform point on the simplex (symmetric Dirichlet with unit
/// concentration) from exponential spacings.
fn dirichlet_point(rng: &mut ChaCha8Rng) -> LambdaWeights {
    let mut a = [0.0; NUM_FEATURES];
    for v in &mut a {
        // 1 - gen ∈ (0, 1], keeping the logarithm finite.
        let u: f64 = 1.0 - rng.gen::<f64>();
        *v = -u.ln();
    }
    LambdaWeights::from_array(a)
        .normalized()
        .expect("exponential draws sum to a positive value")
}

/// Learn weights by coordinate ascent maximizing training MAP.
///
/// Restart 0 starts from the uniform simplex point; further restarts start
/// from seeded random simplex points. Within a restart, coordinates are
/// visited in a fixed round-robin; each is line-searched over multiplicative
/// steps (or a fixed small value when at zero), renormalized onto the
/// simplex, and updated only on strict improvement. A restart stops after a
/// sweep with no accepted step, or after 50 sweeps. The best restart by
/// (MAP, then lowest restart index) wins.
pub fn coordinate_ascent(
    instances: &[TrainingInstance],
    restarts: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    if instances.is_empty() {
        return Err(Error::Training("no training instances".to_string()));
    }
    if !instances.iter().any(|i| i.has_relevant_judgment()) {
        return Err(Error::Training(
            "no instance has relevant judgments; MAP is undefined".to_string(),
        ));
    }
    if !instances.iter().any(|i| i.has_relevant_candidate()) {
        return Err(Error::Training(
            "no relevant candidate retrieved for any instance; MAP is identically zero"
                .to_string(),
        ));
    }
    let restarts = restarts.max(1);
    let starts: Vec<LambdaWeights> = (0..restarts)
        .map(|r| {
            if r == 0 {
                LambdaWeights::uniform()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
                dirichlet_point(&mut rng)
            }
        })
        .collect();
    let outcomes: Vec<TrainOutcome> = starts
        .into_par_iter()
        .map(|start| ascend_from(start, instances))
        .collect();
    let winner = outcomes
        .into_iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.map.total_cmp(&b.map).then_with(|| ib.cmp(ia)))
        .map(|(_, outcome)| outcome)
        .expect("at least one restart");
    winner.weights.validate()?;
    Ok(winner)
}

/// Deterministic fold assignment: the query ids are sorted, shuffled with
/// the seeded generator, and cut into `folds` near-equal contiguous chunks.
/// A pure function of (ids, folds, seed) — any caller with the same inputs
/// gets the same folds.
pub fn fold_assignment(ids: &[String], folds: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if folds == 0 {
        return Err(Error::Training("folds must be >= 1".to_string()));
    }
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    sorted.dedup();
    if folds > sorted.len() {
        return Err(Error::Training(format!(
            "cannot split {} queries into {folds} folds",
            sorted.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates on the sorted ids.
    for i in (1..sorted.len()).rev() {
        let j = rng.gen_range(0..=i);
        sorted.swap(i, j);
    }
    let n = sorted.len();
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut offset = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(sorted[offset..offset + size].to_vec());
        offset += size;
    }
    Ok(out)
}

/// One fold's outcome: the held-out queries, the weights learned on the
/// rest, and the macro metrics over the held-out queries.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub test_queries: Vec<String>,
    pub weights: LambdaWeights,
    pub map: f64,
    pub p10: f64,
    pub mrr: f64,
    pub ndcg20: f64,
}

/// Cross-validation output: per-fold reports plus the macro average of the
/// fold means.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean_map: f64,
    pub mean_p10: f64,
    pub mean_mrr: f64,
    pub mean_ndcg20: f64,
}

impl CvReport {
    /// TSV rendering: one row per fold plus a MEAN row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("fold\ttest_queries\tmap@100\tp@10\tmrr\tndcg@20\n");
        for f in &self.folds {
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                f.fold,
                f.test_queries.len(),
                f.map,
                f.p10,
                f.mrr,
                f.ndcg20
            )
            .expect("writing to a String cannot fail");
        }
        let total: usize = self.folds.iter().map(|f| f.test_queries.len()).sum();
        writeln!(
            out,
            "MEAN\t{total}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.mean_map, self.mean_p10, self.mean_mrr, self.mean_ndcg20
        )
        .expect("writing to a String cannot fail");
        out
    }
}

/// K-fold cross-validation: assign folds from the instance query ids, train
/// on each fold's complement, evaluate on the held-out queries, and
/// macro-average the fold means.
pub fn cross_validate(
    instances: &[TrainingInstance],
    folds: usize,
    restarts: usize,
    seed: u64,
) -> Result<CvReport> {
    let ids: Vec<String> = instances.iter().map(|i| i.query_id.clone()).collect();
    let assignment = fold_assignment(&ids, folds, seed)?;
    let mut reports = Vec::with_capacity(folds);
    for (fold, test_ids) in assignment.iter().enumerate() {
        let test_set: BTreeSet<&String> = test_ids.iter().collect();
        let (test, train): (Vec<&TrainingInstance>, Vec<&TrainingInstance>) = instances
            .iter()
            .partition(|i| test_set.contains(&i.query_id));
        let train_owned: Vec<TrainingInstance> = train.into_iter().cloned().collect();
        let outcome = coordinate_ascent(&train_owned, restarts, seed)?;
        let metrics: Vec<(f64, f64, f64, f64)> = test
            .iter()
            .filter_map(|inst| instance_metrics(inst, &outcome.weights))
            .collect();
        let n = metrics.len() as f64;
        let mean = |sel: fn(&(f64, f64, f64, f64)) -> f64| -> f64 {
            if metrics.is_empty() {
                0.0
            } else {
                metrics.iter().map(sel).sum::<f64>() / n
            }
        };
        reports.push(FoldReport {
            fold,
            test_queries: test_ids.clone(),
            weights: outcome.weights,
            map: mean(|m| m.0),
            p10: mean(|m| m.1),
            mrr: mean(|m| m.2),
            ndcg20: mean(|m| m.3),
        });
    }
    let k = reports.len() as f64;
    let mean = |sel: fn(&FoldReport) -> f64| -> f64 {
        reports.iter().map(sel).sum::<f64>() / k
    };
    Ok(CvReport {
        mean_map: mean(|f| f.map),
        mean_p10: mean(|f| f.p10),
        mean_mrr: mean(|f| f.mrr),
        mean_ndcg20: mean(|f| f.ndcg20),
        folds: reports,
    })
}
