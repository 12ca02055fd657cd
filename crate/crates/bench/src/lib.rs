//! Shared fixtures for the criterion benchmarks: a mid-sized deterministic
//! synthetic benchmark and its prebuilt index bundle.

use tuplerank_core::pipeline::{build_indexes, BuildConfig, IndexBundle};
use tuplerank_core::query::ERQuery;
use tuplerank_core::synth::{generate, BenchmarkSpec, GeneratedBenchmark};

/// Benchmark corpus scale: large enough that per-query work dominates,
/// small enough to keep criterion runs under a minute per group.
pub fn fixture_spec() -> BenchmarkSpec {
    BenchmarkSpec {
        seed: 97,
        num_entities: 120,
        num_facts: 30,
        vocab_size: 300,
        noise_sentences: 2,
        num_docs: 150,
    }
}

pub fn fixture() -> GeneratedBenchmark {
    generate(&fixture_spec()).expect("fixture generation succeeds")
}

pub fn fixture_bundle(bench: &GeneratedBenchmark) -> IndexBundle {
    build_indexes(
        &bench.documents,
        &BuildConfig {
            full_sentence_pairs: true,
            ..BuildConfig::default()
        },
        None,
    )
    .expect("fixture index builds")
}

/// The first `n` fixture queries, cycled if the fixture has fewer.
pub fn queries(bench: &GeneratedBenchmark, n: usize) -> Vec<ERQuery> {
    bench.queries.iter().cycle().take(n).cloned().collect()
}
