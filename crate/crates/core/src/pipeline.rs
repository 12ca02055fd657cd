//! End-to-end orchestration: extract and build indexes from a corpus,
//! persist and reload them, run any retrieval model over a query set, and
//! assemble training instances for weight learning.

use rayon::prelude::*;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{AnnotatedDocument, Qrels};
use crate::error::{Error, Result};
use crate::evaluation::RelevanceMap;
use crate::extraction::{
    extract_entities, extract_relationships, ExtractionRecord, Pair, RelationshipStyle,
};
use crate::index::{
    build_entity_index, build_relationship_index, BuildOptions, EntityIndex, Index,
    RelationshipIndex, DEFAULT_WINDOW,
};
use crate::learning::{
    coordinate_ascent, cross_validate, Candidate, CvReport, TrainOutcome, TrainingInstance,
};
use crate::query::{ERQuery, EntityTuple};
use crate::ranking::{
    baseline_base_e, baseline_base_ee, baseline_base_r, dedup_orientations, erdm_features,
    join_candidates, rank, score_ef, score_erdm, LambdaWeights, ScoredTuple,
};
use crate::scoring::{RetrievalModel, ScoringParams};

/// Default candidate depth per sub-query at the matching stage.
pub const DEFAULT_CANDIDATES: usize = 20000;
/// Default number of results kept per query.
pub const DEFAULT_CUTOFF: usize = 100;

/// Retrieval model selector, as spelled on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    EfLm,
    EfBm25,
    ErdmLm,
    ErdmBm25,
    BaseEe,
    BaseE,
    BaseR,
}

impl Model {
    pub const ALL: [Model; 7] = [
        Model::EfLm,
        Model::EfBm25,
        Model::ErdmLm,
        Model::ErdmBm25,
        Model::BaseEe,
        Model::BaseE,
        Model::BaseR,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Model::EfLm => "ef-lm",
            Model::EfBm25 => "ef-bm25",
            Model::ErdmLm => "erdm-lm",
            Model::ErdmBm25 => "erdm-bm25",
            Model::BaseEe => "base-ee",
            Model::BaseE => "base-e",
            Model::BaseR => "base-r",
        }
    }

    /// The term-level retrieval function, for models that have one.
    pub fn retrieval(&self) -> Option<RetrievalModel> {
        match self {
            Model::EfLm | Model::ErdmLm => Some(RetrievalModel::Lm),
            Model::EfBm25 | Model::ErdmBm25 => Some(RetrievalModel::Bm25),
            _ => None,
        }
    }

    pub fn is_erdm(&self) -> bool {
        matches!(self, Model::ErdmLm | Model::ErdmBm25)
    }

    pub fn needs_full_sentence_index(&self) -> bool {
        matches!(self, Model::BaseR)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Model::ALL.iter().map(|m| m.name()).collect();
                Error::Index(format!(
                    "unknown model {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How to build the indexes from a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildConfig {
    /// Unordered co-occurrence window width (terms).
    pub window: usize,
    /// Optional cap on extractions fused per key.
    pub cap: Option<usize>,
    /// Also build the full-sentence pair index (needed by base-r).
    pub full_sentence_pairs: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            window: DEFAULT_WINDOW,
            cap: None,
            full_sentence_pairs: false,
        }
    }
}

/// The built indexes: entity meta-docs, separating-string pair meta-docs,
/// and optionally the full-sentence pair variant.
pub struct IndexBundle {
    pub entity: EntityIndex,
    pub relationship: RelationshipIndex,
    pub relationship_full: Option<RelationshipIndex>,
}

impl IndexBundle {
    fn full_sentence(&self) -> Result<&RelationshipIndex> {
        self.relationship_full.as_ref().ok_or_else(|| {
            Error::Index(
                "full-sentence pair index not present; rebuild the index with \
                 full-sentence pairs enabled"
                    .to_string(),
            )
        })
    }
}

/// Extract all documents and build the index bundle. When `dump` is given,
/// every entity and separating-string extraction is appended to it as one
/// JSON record per line, in corpus order.
pub fn build_indexes(
    docs: &[AnnotatedDocument],
    cfg: &BuildConfig,
    dump: Option<&Path>,
) -> Result<IndexBundle> {
    let mut entity_ex = Vec::new();
    let mut rel_ex = Vec::new();
    let mut full_ex = Vec::new();
    for doc in docs {
        entity_ex.extend(extract_entities(doc));
        rel_ex.extend(extract_relationships(doc, RelationshipStyle::Separating));
        if cfg.full_sentence_pairs {
            full_ex.extend(extract_relationships(doc, RelationshipStyle::FullSentence));
        }
    }
    if let Some(path) = dump {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        let records = entity_ex
            .iter()
            .map(ExtractionRecord::from)
            .chain(rel_ex.iter().map(ExtractionRecord::from));
        for record in records {
            let line =
                serde_json::to_string(&record).map_err(|e| Error::Index(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        w.flush()
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    let opts = BuildOptions {
        window: cfg.window,
        cap: cfg.cap,
    };
    let entity = build_entity_index(entity_ex, opts);
    let relationship = build_relationship_index(rel_ex, opts);
    let relationship_full = if cfg.full_sentence_pairs {
        Some(build_relationship_index(full_ex, opts))
    } else {
        None
    };
    entity.validate()?;
    relationship.validate()?;
    if let Some(full) = &relationship_full {
        full.validate()?;
    }
    Ok(IndexBundle {
        entity,
        relationship,
        relationship_full,
    })
}

/// Persist the bundle under `dir` as `entity/`, `relationship/`, and (when
/// built) `relationship_full/` sub-directories.
pub fn save_indexes(bundle: &IndexBundle, dir: &Path) -> Result<()> {
    bundle.entity.save(&dir.join("entity"))?;
    bundle.relationship.save(&dir.join("relationship"))?;
    if let Some(full) = &bundle.relationship_full {
        full.save(&dir.join("relationship_full"))?;
    }
    Ok(())
}

/// Load a bundle saved by [`save_indexes`]. The full-sentence variant is
/// loaded when present.
pub fn load_indexes(dir: &Path) -> Result<IndexBundle> {
    let entity = Index::load(&dir.join("entity"))?;
    let relationship = Index::load(&dir.join("relationship"))?;
    let full_dir = dir.join("relationship_full");
    let relationship_full = if full_dir.is_dir() {
        Some(Index::load(&full_dir)?)
    } else {
        None
    };
    Ok(IndexBundle {
        entity,
        relationship,
        relationship_full,
    })
}

/// Everything a search run needs besides the indexes.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub model: Model,
    /// Candidate depth per sub-query.
    pub k: usize,
    /// Results kept per query.
    pub cutoff: usize,
    pub params: ScoringParams,
    /// Feature weights; used by the ERDM models only.
    pub weights: LambdaWeights,
}

impl SearchOptions {
    pub fn new(model: Model) -> Self {
        SearchOptions {
            model,
            k: DEFAULT_CANDIDATES,
            cutoff: DEFAULT_CUTOFF,
            params: ScoringParams::default(),
            weights: LambdaWeights::uniform(),
        }
    }
}

/// Match candidates for every sub-query and join them into tuples.
fn generate_candidates(
    bundle: &IndexBundle,
    query: &ERQuery,
    k: usize,
) -> Result<Vec<EntityTuple>> {
    let mut entity_cands: Vec<Vec<String>> = Vec::new();
    let mut rel_cands: Vec<Vec<Pair>> = Vec::new();
    for part in &query.parts {
        match part.kind {
            crate::query::PartKind::Entity => entity_cands.push(
                bundle
                    .entity
                    .match_candidates(&part.terms, k)
                    .into_iter()
                    .map(|(key, _)| key.clone())
                    .collect(),
            ),
            crate::query::PartKind::Relationship => rel_cands.push(
                bundle
                    .relationship
                    .match_candidates(&part.terms, k)
                    .into_iter()
                    .map(|(key, _)| key.clone())
                    .collect(),
            ),
        }
    }
    join_candidates(query, &entity_cands, &rel_cands)
}

/// Run one query under the selected model, returning the ranked tuples.
pub fn search_query(
    bundle: &IndexBundle,
    query: &ERQuery,
    opts: &SearchOptions,
) -> Result<Vec<ScoredTuple>> {
    query.validate()?;
    opts.params.validate()?;
    match opts.model {
        Model::EfLm | Model::EfBm25 => {
            let retrieval = opts.model.retrieval().expect("EF has a retrieval model");
            let tuples = generate_candidates(bundle, query, opts.k)?;
            let scored: Vec<ScoredTuple> = tuples
                .par_iter()
                .filter_map(|t| {
                    score_ef(
                        t,
                        query,
                        &bundle.entity,
                        &bundle.relationship,
                        &opts.params,
                        retrieval,
                    )
                })
                .collect();
            Ok(rank(dedup_orientations(scored), opts.cutoff))
        }
        Model::ErdmLm | Model::ErdmBm25 => {
            let retrieval = opts.model.retrieval().expect("ERDM has a retrieval model");
            opts.weights.validate()?;
            let tuples = generate_candidates(bundle, query, opts.k)?;
            let scored: Vec<ScoredTuple> = tuples
                .par_iter()
                .filter_map(|t| {
                    score_erdm(
                        t,
                        query,
                        &bundle.entity,
                        &bundle.relationship,
                        &opts.params,
                        &opts.weights,
                        retrieval,
                    )
                })
                .collect();
            Ok(rank(dedup_orientations(scored), opts.cutoff))
        }
        Model::BaseEe => {
            let mut ranked = baseline_base_ee(query, &bundle.entity, &opts.params, opts.k)?;
            ranked.truncate(opts.cutoff);
            Ok(ranked)
        }
        Model::BaseE => {
            let mut ranked = baseline_base_e(query, &bundle.entity, &opts.params, opts.k)?;
            ranked.truncate(opts.cutoff);
            Ok(ranked)
        }
        Model::BaseR => {
            let full = bundle.full_sentence()?;
            let mut ranked = baseline_base_r(query, full, &opts.params, opts.k)?;
            ranked.truncate(opts.cutoff);
            Ok(ranked)
        }
    }
}

/// Run every query in order. Queries are processed in parallel; output
/// order and content are independent of thread scheduling.
pub fn search_all(
    bundle: &IndexBundle,
    queries: &[ERQuery],
    opts: &SearchOptions,
) -> Result<Vec<(String, Vec<ScoredTuple>)>> {
    queries
        .par_iter()
        .map(|q| Ok((q.query_id.clone(), search_query(bundle, q, opts)?)))
        .collect()
}

/// Assemble one training instance per query for an ERDM model: candidates
/// are generated and featurized once (both orientations kept — the better
/// one under the current weights survives ranking), and judged grades are
/// attached by normalized tuple.
pub fn build_training_instances(
    bundle: &IndexBundle,
    queries: &[ERQuery],
    qrels: &Qrels,
    opts: &SearchOptions,
) -> Result<Vec<TrainingInstance>> {
    if !opts.model.is_erdm() {
        return Err(Error::Training(format!(
            "training applies to the erdm models, not {}",
            opts.model
        )));
    }
    let retrieval = opts.model.retrieval().expect("ERDM has a retrieval model");
    for query in queries {
        query.validate()?;
        if let Some(records) = qrels.get(&query.query_id) {
            for r in records {
                if r.tuple.arity() != query.tuple_arity() {
                    return Err(Error::Training(format!(
                        "query {}: judged tuple {} has arity {}, query expects {}",
                        query.query_id,
                        r.tuple,
                        r.tuple.arity(),
                        query.tuple_arity()
                    )));
                }
            }
        }
    }
    queries
        .par_iter()
        .map(|query| {
            let tuples = generate_candidates(bundle, query, opts.k)?;
            let candidates: Vec<Candidate> = tuples
                .iter()
                .filter_map(|t| {
                    erdm_features(
                        t,
                        query,
                        &bundle.entity,
                        &bundle.relationship,
                        &opts.params,
                        retrieval,
                    )
                    .map(|features| Candidate {
                        tuple: t.clone(),
                        features,
                    })
                })
                .collect();
            let mut relevance = RelevanceMap::new();
            if let Some(records) = qrels.get(&query.query_id) {
                for r in records {
                    relevance.insert(r.tuple.normalized(), r.grade);
                }
            }
            Ok(TrainingInstance {
                query_id: query.query_id.clone(),
                candidates,
                relevance,
            })
        })
        .collect()
}

/// Training configuration for the full train flow.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: Model,
    pub folds: usize,
    pub seed: u64,
    pub restarts: usize,
    pub k: usize,
    pub params: ScoringParams,
}

/// Output of the train flow: the cross-validation report plus weights
/// trained on all queries.
pub struct TrainArtifacts {
    pub cv: CvReport,
    pub full: TrainOutcome,
}

/// Cross-validate and then fit final weights on every query.
pub fn train(
    bundle: &IndexBundle,
    queries: &[ERQuery],
    qrels: &Qrels,
    cfg: &TrainConfig,
) -> Result<TrainArtifacts> {
    let opts = SearchOptions {
        model: cfg.model,
        k: cfg.k,
        cutoff: DEFAULT_CUTOFF,
        params: cfg.params,
        weights: LambdaWeights::uniform(),
    };
    let instances = build_training_instances(bundle, queries, qrels, &opts)?;
    let cv = cross_validate(&instances, cfg.folds, cfg.restarts, cfg.seed)?;
    let full = coordinate_ascent(&instances, cfg.restarts, cfg.seed)?;
    Ok(TrainArtifacts { cv, full })
}

/// Write train artifacts into `dir`: `weights.json` (fit on all queries),
/// `fold_<i>.json` per cross-validation fold, and `cv_report.tsv`.
pub fn write_train_artifacts(dir: &Path, artifacts: &TrainArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    crate::ranking::save_weights(&dir.join("weights.json"), &artifacts.full.weights)?;
    for fold in &artifacts.cv.folds {
        crate::ranking::save_weights(
            &dir.join(format!("fold_{}.json", fold.fold)),
            &fold.weights,
        )?;
    }
    let report_path = dir.join("cv_report.tsv");
    std::fs::write(&report_path, artifacts.cv.to_tsv())
        .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    Ok(())
}
