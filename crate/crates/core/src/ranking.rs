//! Candidate-tuple generation and ranking.
//!
//! Candidates come from joining per-sub-query result lists under the chain's
//! membership constraints. Tuples are then scored either by early fusion
//! (sum of unigram scores over all sub-queries) or by the learned model: a
//! weighted sum of eight features — unigram/ordered/unordered scores for the
//! entity and relationship sides plus two compatibility features. Three
//! entity-retrieval baselines for pair queries round out the module.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::extraction::Pair;
use crate::index::{EntityIndex, RelationshipIndex};
use crate::query::{ERQuery, EntityTuple, QueryPart};
use crate::scoring::{
    f_er_s, f_rer_s, part_ordered, part_unigram, part_unordered, RetrievalModel, ScoringParams,
};

/// Feature names in canonical order: entity unigram/ordered/unordered,
/// relationship unigram/ordered/unordered, entity-relationship
/// compatibility, relationship-relationship compatibility.
pub const FEATURE_NAMES: [&str; 8] = [
    "e_t", "e_o", "e_u", "r_t", "r_o", "r_u", "er_s", "rer_s",
];

/// Number of model features.
pub const NUM_FEATURES: usize = 8;

/// Conventional weights for the three-component sequential-dependence score
/// used by the baselines: unigram, ordered, unordered.
pub const SDM_WEIGHTS: (f64, f64, f64) = (0.85, 0.10, 0.05);

/// Feature weights constrained to the probability simplex: non-negative,
/// summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaWeights {
    pub e_t: f64,
    pub e_o: f64,
    pub e_u: f64,
    pub r_t: f64,
    pub r_o: f64,
    pub r_u: f64,
    pub er_s: f64,
    pub rer_s: f64,
}

/// Tolerance for simplex validation.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

impl LambdaWeights {
    pub fn uniform() -> Self {
        LambdaWeights::from_array([1.0 / NUM_FEATURES as f64; NUM_FEATURES])
    }

    /// Equal mass on the two unigram features only — the weighting under
    /// which the learned model reduces to early fusion.
    pub fn unigram_only() -> Self {
        let mut a = [0.0; NUM_FEATURES];
        a[0] = 0.5;
        a[3] = 0.5;
        LambdaWeights::from_array(a)
    }

    pub fn as_array(&self) -> [f64; NUM_FEATURES] {
        [
            self.e_t, self.e_o, self.e_u, self.r_t, self.r_o, self.r_u, self.er_s, self.rer_s,
        ]
    }

    pub fn from_array(a: [f64; NUM_FEATURES]) -> Self {
        LambdaWeights {
            e_t: a[0],
            e_o: a[1],
            e_u: a[2],
            r_t: a[3],
            r_o: a[4],
            r_u: a[5],
            er_s: a[6],
            rer_s: a[7],
        }
    }

    pub fn dot(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        self.as_array()
            .iter()
            .zip(features.iter())
            .map(|(w, f)| w * f)
            .sum()
    }

    /// Check the simplex constraints within [`SIMPLEX_TOLERANCE`].
    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        for (name, v) in FEATURE_NAMES.iter().zip(a.iter()) {
            if *v < -SIMPLEX_TOLERANCE || !v.is_finite() {
                return Err(Error::Training(format!(
                    "weight {name} = {v} violates non-negativity"
                )));
            }
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Training(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Sum normalization onto the simplex: negative components are clamped
    /// to zero, then everything divides by the total.
    pub fn normalized(&self) -> Result<LambdaWeights> {
        let mut a = self.as_array();
        for v in &mut a {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = a.iter().sum();
        if sum <= 0.0 || sum.is_nan() {
            return Err(Error::Training(
                "cannot normalize weights with non-positive sum".to_string(),
            ));
        }
        for v in &mut a {
            *v /= sum;
        }
        Ok(LambdaWeights::from_array(a))
    }
}

/// Read a weights JSON file (a map with exactly the eight feature names) and
/// validate the simplex constraints.
pub fn load_weights(path: &Path) -> Result<LambdaWeights> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let weights: LambdaWeights = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
    weights.validate()?;
    Ok(weights)
}

pub fn save_weights(path: &Path, weights: &LambdaWeights) -> Result<()> {
    let json = serde_json::to_string_pretty(weights)
        .map_err(|e| Error::Training(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

/// A candidate tuple with its total score and the per-feature breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTuple {
    pub tuple: EntityTuple,
    pub total: f64,
    pub features: BTreeMap<String, f64>,
}

/// Join per-sub-query candidate lists into answer tuples.
///
/// Pair queries: `(e1, e2)` such that `e1` appears in the first entity list,
/// `e2` in the second, and the normalized pair `{e1, e2}` in the relationship
/// list — both orientations are emitted when both qualify; orientation
/// deduplication happens after scoring. Triple queries additionally require
/// the two pairs to share the middle entity.
pub fn join_candidates(
    query: &ERQuery,
    entity_cands: &[Vec<String>],
    rel_cands: &[Vec<Pair>],
) -> Result<Vec<EntityTuple>> {
    let n_entity = query.entity_parts().count();
    let n_rel = query.relationship_parts().count();
    if entity_cands.len() != n_entity || rel_cands.len() != n_rel {
        return Err(Error::Query {
            query_id: query.query_id.clone(),
            msg: format!(
                "candidate lists ({}, {}) do not match query shape ({n_entity}, {n_rel})",
                entity_cands.len(),
                rel_cands.len()
            ),
        });
    }
    let entity_sets: Vec<BTreeSet<&String>> = entity_cands
        .iter()
        .map(|list| list.iter().collect())
        .collect();
    let mut out: BTreeSet<EntityTuple> = BTreeSet::new();
    match n_entity {
        2 => {
            for pair in &rel_cands[0] {
                for (e1, e2) in [
                    (pair.first(), pair.second()),
                    (pair.second(), pair.first()),
                ] {
                    if entity_sets[0].contains(&e1.to_string())
                        && entity_sets[1].contains(&e2.to_string())
                    {
                        out.insert(EntityTuple::pair(e1, e2));
                    }
                }
            }
        }
        3 => {
            let right: BTreeSet<&Pair> = rel_cands[1].iter().collect();
            for p12 in &rel_cands[0] {
                for e2 in [p12.first(), p12.second()] {
                    let e1 = p12.other(e2).expect("member of its own pair");
                    for p23 in &right {
                        let Some(e3) = p23.other(e2) else { continue };
                        if entity_sets[0].contains(&e1.to_string())
                            && entity_sets[1].contains(&e2.to_string())
                            && entity_sets[2].contains(&e3.to_string())
                        {
                            out.insert(EntityTuple::triple(e1, e2, e3));
                        }
                    }
                }
            }
        }
        _ => {
            return Err(Error::Query {
                query_id: query.query_id.clone(),
                msg: format!("unsupported tuple arity {n_entity}"),
            })
        }
    }
    Ok(out.into_iter().collect())
}

/// The adjacent (entity, relationship-part) assignments of a tuple under a
/// query chain: for each relationship part j the pair is formed from tuple
/// entities j and j+1.
fn tuple_pairs(tuple: &EntityTuple) -> Option<Vec<Pair>> {
    tuple
        .entities()
        .windows(2)
        .map(|w| Pair::new(w[0].clone(), w[1].clone()))
        .collect()
}

fn entity_parts_of(query: &ERQuery) -> Vec<&QueryPart> {
    query.entity_parts().collect()
}

fn relationship_parts_of(query: &ERQuery) -> Vec<&QueryPart> {
    query.relationship_parts().collect()
}

/// Early-fusion scoring: the tuple total is the sum of unigram scores of
/// every entity sub-query against its entity meta-doc plus every
/// relationship sub-query against its pair meta-doc. Returns `None` (and
/// logs) when a meta-doc backing the tuple is missing from the index.
pub fn score_ef(
    tuple: &EntityTuple,
    query: &ERQuery,
    entity_index: &EntityIndex,
    rel_index: &RelationshipIndex,
    params: &ScoringParams,
    model: RetrievalModel,
) -> Option<ScoredTuple> {
    let e_parts = entity_parts_of(query);
    let r_parts = relationship_parts_of(query);
    debug_assert_eq!(e_parts.len(), tuple.arity());
    let pairs = tuple_pairs(tuple)?;
    let mu_e = params.resolve_mu_entity(&entity_index.stats);
    let mu_r = params.resolve_mu_relationship(&rel_index.stats);

    let mut e_t = 0.0;
    for (part, entity) in e_parts.iter().zip(tuple.entities()) {
        let Some(doc) = entity_index.lookup(entity) else {
            log::warn!("dropping {tuple}: entity {entity} missing from entity index");
            return None;
        };
        e_t += part_unigram(
            &part.terms,
            doc,
            &entity_index.stats,
            model,
            mu_e,
            params.k1,
            params.b,
        );
    }
    let mut r_t = 0.0;
    for (part, pair) in r_parts.iter().zip(&pairs) {
        let Some(doc) = rel_index.lookup(pair) else {
            log::warn!("dropping {tuple}: pair {pair} missing from relationship index");
            return None;
        };
        r_t += part_unigram(
            &part.terms,
            doc,
            &rel_index.stats,
            model,
            mu_r,
            params.k1,
            params.b,
        );
    }
    let mut features = BTreeMap::new();
    features.insert("e_t".to_string(), e_t);
    features.insert("r_t".to_string(), r_t);
    Some(ScoredTuple {
        tuple: tuple.clone(),
        total: e_t + r_t,
        features,
    })
}

/// Compute the eight-feature vector for a tuple under a query, in
/// [`FEATURE_NAMES`] order. Returns `None` when a backing meta-doc is
/// missing.
pub fn erdm_features(
    tuple: &EntityTuple,
    query: &ERQuery,
    entity_index: &EntityIndex,
    rel_index: &RelationshipIndex,
    params: &ScoringParams,
    model: RetrievalModel,
) -> Option<[f64; NUM_FEATURES]> {
    let e_parts = entity_parts_of(query);
    let r_parts = relationship_parts_of(query);
    let pairs = tuple_pairs(tuple)?;
    let mu_e = params.resolve_mu_entity(&entity_index.stats);
    let mu_r = params.resolve_mu_relationship(&rel_index.stats);
    let (k1, b) = (params.k1, params.b);

    let (mut e_t, mut e_o, mut e_u) = (0.0, 0.0, 0.0);
    for (part, entity) in e_parts.iter().zip(tuple.entities()) {
        let Some(doc) = entity_index.lookup(entity) else {
            log::warn!("dropping {tuple}: entity {entity} missing from entity index");
            return None;
        };
        let stats = &entity_index.stats;
        e_t += part_unigram(&part.terms, doc, stats, model, mu_e, k1, b);
        e_o += part_ordered(&part.terms, doc, stats, model, mu_e, k1, b);
        e_u += part_unordered(&part.terms, doc, stats, model, mu_e, k1, b);
    }

    let (mut r_t, mut r_o, mut r_u) = (0.0, 0.0, 0.0);
    for (part, pair) in r_parts.iter().zip(&pairs) {
        let Some(doc) = rel_index.lookup(pair) else {
            log::warn!("dropping {tuple}: pair {pair} missing from relationship index");
            return None;
        };
        let stats = &rel_index.stats;
        r_t += part_unigram(&part.terms, doc, stats, model, mu_r, k1, b);
        r_o += part_ordered(&part.terms, doc, stats, model, mu_r, k1, b);
        r_u += part_unordered(&part.terms, doc, stats, model, mu_r, k1, b);
    }

    // Entity-relationship compatibility: each relationship part pairs with
    // its two adjacent entities.
    let mut er_s = 0.0;
    for (j, pair) in pairs.iter().enumerate() {
        er_s += f_er_s(&tuple.entities()[j], pair, &rel_index.stats, params.alpha);
        er_s += f_er_s(&tuple.entities()[j + 1], pair, &rel_index.stats, params.alpha);
    }

    // Relationship-relationship compatibility: consecutive pairs must share
    // the middle entity (only meaningful for triples).
    let mut rer_s = 0.0;
    if pairs.len() == 2 {
        rer_s = f_rer_s(&tuple.entities()[1], &pairs[0], &pairs[1]);
    }

    Some([e_t, e_o, e_u, r_t, r_o, r_u, er_s, rer_s])
}

/// Score a tuple with the learned model: `total = Σ_c λ_c · f_c`.
pub fn score_erdm(
    tuple: &EntityTuple,
    query: &ERQuery,
    entity_index: &EntityIndex,
    rel_index: &RelationshipIndex,
    params: &ScoringParams,
    weights: &LambdaWeights,
    model: RetrievalModel,
) -> Option<ScoredTuple> {
    let features = erdm_features(tuple, query, entity_index, rel_index, params, model)?;
    Some(ScoredTuple {
        tuple: tuple.clone(),
        total: weights.dot(&features),
        features: features_map(&features),
    })
}

/// Name → value map for a feature vector in canonical order.
pub fn features_map(features: &[f64; NUM_FEATURES]) -> BTreeMap<String, f64> {
    FEATURE_NAMES
        .iter()
        .zip(features.iter())
        .map(|(n, v)| (n.to_string(), *v))
        .collect()
}

/// Collapse the two orientations of each tuple onto its direction-normalized
/// form, keeping the orientation with the higher total (ties: the
/// lexicographically smaller orientation's scoring).
pub fn dedup_orientations(scored: Vec<ScoredTuple>) -> Vec<ScoredTuple> {
    let mut sorted = scored;
    sorted.sort_by(|a, b| a.tuple.cmp(&b.tuple));
    let mut best: BTreeMap<EntityTuple, ScoredTuple> = BTreeMap::new();
    for s in sorted {
        let key = s.tuple.normalized();
        match best.get(&key) {
            Some(existing) if s.total <= existing.total => {}
            _ => {
                let mut winner = s;
                winner.tuple = key.clone();
                best.insert(key, winner);
            }
        }
    }
    best.into_values().collect()
}

/// Order by descending total, ties broken by tuple id ascending, truncated
/// to `cutoff`.
pub fn rank(mut scored: Vec<ScoredTuple>, cutoff: usize) -> Vec<ScoredTuple> {
    scored.sort_by(|a, b| b.total.total_cmp(&a.total).then_with(|| a.tuple.cmp(&b.tuple)));
    scored.truncate(cutoff);
    scored
}

/// Three-component sequential-dependence score of one term sequence against
/// one meta-doc, with the conventional (0.85, 0.10, 0.05) weights and
/// language-model features.
fn sdm_score(
    terms: &[String],
    doc: &crate::index::MetaDoc,
    stats: &crate::index::CollectionStats,
    mu: f64,
    k1: f64,
    b: f64,
) -> f64 {
    let (wt, wo, wu) = SDM_WEIGHTS;
    let model = RetrievalModel::Lm;
    wt * part_unigram(terms, doc, stats, model, mu, k1, b)
        + wo * part_ordered(terms, doc, stats, model, mu, k1, b)
        + wu * part_unordered(terms, doc, stats, model, mu, k1, b)
}

fn require_pair_query(query: &ERQuery) -> Result<()> {
    if query.len() != 3 {
        return Err(Error::Query {
            query_id: query.query_id.clone(),
            msg: format!(
                "baselines support only 3-part queries, got {} parts",
                query.len()
            ),
        });
    }
    Ok(())
}

fn concat_terms(parts: &[&QueryPart]) -> Vec<String> {
    parts.iter().flat_map(|p| p.terms.clone()).collect()
}

/// Baseline: two concatenated queries (first entity + relationship,
/// relationship + second entity) against the entity index; tuple score is
/// the sum of the two entities' sequential-dependence scores over the cross
/// product.
pub fn baseline_base_ee(
    query: &ERQuery,
    entity_index: &EntityIndex,
    params: &ScoringParams,
    k: usize,
) -> Result<Vec<ScoredTuple>> {
    require_pair_query(query)?;
    let e_parts = entity_parts_of(query);
    let r_parts = relationship_parts_of(query);
    let q1 = concat_terms(&[e_parts[0], r_parts[0]]);
    let q2 = concat_terms(&[r_parts[0], e_parts[1]]);
    let mu = params.resolve_mu_entity(&entity_index.stats);
    let score_list = |terms: &[String]| -> Vec<(String, f64)> {
        entity_index
            .match_candidates(terms, k)
            .into_iter()
            .map(|(key, doc)| {
                (
                    key.clone(),
                    sdm_score(terms, doc, &entity_index.stats, mu, params.k1, params.b),
                )
            })
            .collect()
    };
    let left = score_list(&q1);
    let right = score_list(&q2);
    let mut scored = Vec::new();
    for (e1, s1) in &left {
        for (e2, s2) in &right {
            if e1 == e2 {
                continue;
            }
            let mut features = BTreeMap::new();
            features.insert("sdm_left".to_string(), *s1);
            features.insert("sdm_right".to_string(), *s2);
            scored.push(ScoredTuple {
                tuple: EntityTuple::pair(e1.clone(), e2.clone()),
                total: s1 + s2,
                features,
            });
        }
    }
    Ok(rank(dedup_orientations(scored), usize::MAX))
}

/// Baseline: one query from all sub-query terms against the entity index;
/// candidate pairs are the cross product of the result list with itself.
pub fn baseline_base_e(
    query: &ERQuery,
    entity_index: &EntityIndex,
    params: &ScoringParams,
    k: usize,
) -> Result<Vec<ScoredTuple>> {
    require_pair_query(query)?;
    let all_terms = concat_terms(&query.parts.iter().collect::<Vec<_>>());
    let mu = params.resolve_mu_entity(&entity_index.stats);
    let list: Vec<(String, f64)> = entity_index
        .match_candidates(&all_terms, k)
        .into_iter()
        .map(|(key, doc)| {
            (
                key.clone(),
                sdm_score(&all_terms, doc, &entity_index.stats, mu, params.k1, params.b),
            )
        })
        .collect();
    let mut scored = Vec::new();
    for (i, (e1, s1)) in list.iter().enumerate() {
        for (j, (e2, s2)) in list.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut features = BTreeMap::new();
            features.insert("sdm_left".to_string(), *s1);
            features.insert("sdm_right".to_string(), *s2);
            scored.push(ScoredTuple {
                tuple: EntityTuple::pair(e1.clone(), e2.clone()),
                total: s1 + s2,
                features,
            });
        }
    }
    Ok(rank(dedup_orientations(scored), usize::MAX))
}

/// Baseline: one query from all sub-query terms against the full-sentence
/// pair index; the matched pairs are the ranking.
pub fn baseline_base_r(
    query: &ERQuery,
    fullsentence_pair_index: &RelationshipIndex,
    params: &ScoringParams,
    k: usize,
) -> Result<Vec<ScoredTuple>> {
    require_pair_query(query)?;
    let all_terms = concat_terms(&query.parts.iter().collect::<Vec<_>>());
    let mu = params.resolve_mu_relationship(&fullsentence_pair_index.stats);
    let scored: Vec<ScoredTuple> = fullsentence_pair_index
        .match_candidates(&all_terms, k)
        .into_iter()
        .map(|(pair, doc)| {
            let s = sdm_score(
                &all_terms,
                doc,
                &fullsentence_pair_index.stats,
                mu,
                params.k1,
                params.b,
            );
            let mut features = BTreeMap::new();
            features.insert("sdm".to_string(), s);
            ScoredTuple {
                tuple: EntityTuple::pair(pair.first(), pair.second()),
                total: s,
                features,
            }
        })
        .collect();
    Ok(rank(scored, usize::MAX))
}
