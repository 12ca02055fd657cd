//! Entity-relationship retrieval over entity-annotated text.
//!
//! The pipeline: annotated documents → per-entity and per-pair term
//! extractions → fused meta-document indexes → candidate generation and
//! tuple ranking (early fusion or the learned eight-feature model) →
//! TREC-style run files → rank-based evaluation, with coordinate-ascent
//! weight learning and cross-validation on top.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod index;
pub mod learning;
pub mod pipeline;
pub mod query;
pub mod ranking;
pub mod run_file;
pub mod scoring;
pub mod synth;

pub use corpus::{AnnotatedDocument, EntityMention, QrelRecord, Qrels};
pub use error::{Error, Result};
pub use evaluation::{evaluate, MetricReport, QueryMetrics, RelevanceMap, Run};
pub use extraction::{
    EntityExtraction, ExtractionRecord, Pair, RelationshipExtraction, RelationshipStyle,
};
pub use index::{
    build_entity_index, build_relationship_index, BuildOptions, CollectionStats, EntityIndex,
    Index, MetaDoc, RelationshipIndex,
};
pub use learning::{
    coordinate_ascent, cross_validate, fold_assignment, Candidate, CvReport, FoldReport,
    TrainOutcome, TrainingInstance,
};
pub use pipeline::{
    build_indexes, load_indexes, save_indexes, search_all, search_query, BuildConfig,
    IndexBundle, Model, SearchOptions, TrainArtifacts, TrainConfig,
};
pub use query::{ERQuery, EntityTuple, PartKind, QueryPart};
pub use ranking::{LambdaWeights, ScoredTuple, FEATURE_NAMES, NUM_FEATURES};
pub use run_file::{read_run, write_run, RunEntry};
pub use scoring::{RetrievalModel, ScoringParams};
pub use synth::{generate, BenchmarkPaths, BenchmarkSpec, GeneratedBenchmark};
