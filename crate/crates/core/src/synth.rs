//! Seeded synthetic benchmark generation: a corpus with planted
//! entity-relationship facts, the matching descriptor/relation queries, and
//! qrels marking the planted pairs relevant.
//!
//! Every planted fact appears in one sentence of the shape
//! `<descriptor-A> <entity-A> <relation phrase> <entity-B> <descriptor-B>`,
//! so the relation phrase is exactly the separating string between the two
//! mentions. Around each fact the generator plants two kinds of confounders:
//! full decoys, in which an unrelated pair from the same entity categories
//! co-occurs with the relation phrase *outside* the gap between the
//! mentions — bait for models that score whole sentences instead of
//! separating strings — and half decoys, in which an entity matching only
//! one side's descriptor co-occurs with the relation phrase and an entity
//! from an uninvolved category — bait for models that pair up per-side
//! entity result lists without a co-occurrence constraint. Each entity
//! additionally gets a profile sentence tying its name to its category
//! descriptor, and every document is padded with random-vocabulary noise
//! sentences.
//!
//! Generation is single-threaded and fully determined by the seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::corpus::{save_corpus, save_qrels, AnnotatedDocument, EntityMention, QrelRecord, Qrels};
use crate::error::{Error, Result};
use crate::query::{parse_query, ERQuery};

/// Confounder sentences planted per fact.
const DECOYS_PER_FACT: usize = 2;
/// Words per noise sentence (min..=max).
const NOISE_WORDS: (usize, usize) = (6, 12);
/// Entities per category (approximate; at least two categories).
const CATEGORY_SIZE: usize = 10;

/// Shape of one generated benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub num_entities: usize,
    pub num_facts: usize,
    /// Distinct random words available for noise sentences.
    pub vocab_size: usize,
    /// Noise sentences added to every document.
    pub noise_sentences: usize,
    pub num_docs: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            seed: 7,
            num_entities: 200,
            num_facts: 50,
            vocab_size: 500,
            noise_sentences: 3,
            num_docs: 500,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_entities < 2 {
            return Err(Error::Benchmark(
                "need at least two entities".to_string(),
            ));
        }
        if self.num_facts == 0 {
            return Err(Error::Benchmark("need at least one fact".to_string()));
        }
        if self.num_docs == 0 {
            return Err(Error::Benchmark("need at least one document".to_string()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Benchmark(
                "need a non-empty noise vocabulary".to_string(),
            ));
        }
        let categories = categories_for(self.num_entities);
        let relations = relations_for(self.num_facts);
        let combos = categories * (categories - 1) * relations;
        if self.num_facts > combos {
            return Err(Error::Benchmark(format!(
                "{} facts exceed the {combos} distinct (category, relation, category) \
                 combinations available for {} entities",
                self.num_facts, self.num_entities
            )));
        }
        Ok(())
    }
}

fn categories_for(num_entities: usize) -> usize {
    (num_entities / CATEGORY_SIZE).max(2)
}

fn relations_for(num_facts: usize) -> usize {
    num_facts.div_ceil(4).clamp(3, 12)
}

/// A generated benchmark held in memory before being written out.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedBenchmark {
    pub documents: Vec<AnnotatedDocument>,
    pub queries: Vec<ERQuery>,
    /// Raw query-file lines (id TAB entity part TAB relation part TAB entity part).
    pub query_lines: Vec<String>,
    pub qrels: Qrels,
}

/// File paths produced by [`GeneratedBenchmark::write_to_dir`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkPaths {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
}

impl GeneratedBenchmark {
    /// Write `corpus.jsonl`, `queries.tsv`, and `qrels.tsv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<BenchmarkPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let paths = BenchmarkPaths {
            corpus: dir.join("corpus.jsonl"),
            queries: dir.join("queries.tsv"),
            qrels: dir.join("qrels.tsv"),
        };
        save_corpus(&paths.corpus, &self.documents)?;
        let mut query_text = self.query_lines.join("\n");
        query_text.push('\n');
        std::fs::write(&paths.queries, query_text)
            .map_err(|e| Error::io(paths.queries.display().to_string(), e))?;
        save_qrels(&paths.qrels, &self.qrels)?;
        Ok(paths)
    }
}

/// Pseudo-word factory: pronounceable syllable strings, unique across every
/// pool so names, descriptors, relation phrases, and noise never collide.
struct WordFactory {
    used: BTreeSet<String>,
}

const ONSETS: [&str; 20] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr",
    "pl", "tr",
];
const VOWELS: [&str; 9] = ["a", "e", "i", "o", "u", "ai", "au", "ea", "ou"];
const CODAS: [&str; 8] = ["", "n", "r", "s", "t", "l", "k", "m"];

impl WordFactory {
    fn new() -> Self {
        let mut used = BTreeSet::new();
        // Reserve the fixed glue words so generated words never shadow them.
        for w in ["is", "and", "near"] {
            used.insert(w.to_string());
        }
        WordFactory { used }
    }

    fn word(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
                w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
            }
            w.push_str(CODAS[rng.gen_range(0..CODAS.len())]);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word(rng)).collect()
    }

    fn phrase(&mut self, rng: &mut ChaCha8Rng, n: usize) -> String {
        self.words(rng, n).join(" ")
    }
}

struct EntityPlan {
    id: String,
    name: String,
    category: usize,
}

struct FactPlan {
    a: usize,
    b: usize,
    relation: usize,
}

/// One sentence plus the mentions it carries, with offsets local to the
/// sentence (shifted when documents are assembled).
struct PlannedSentence {
    text: String,
    mentions: Vec<EntityMention>,
}

/// Incremental sentence builder tracking mention character offsets.
struct SentenceBuilder {
    text: String,
    chars: usize,
    mentions: Vec<EntityMention>,
}

impl SentenceBuilder {
    fn new() -> Self {
        SentenceBuilder {
            text: String::new(),
            chars: 0,
            mentions: Vec::new(),
        }
    }

    fn push_raw(&mut self, s: &str) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn push_mention(&mut self, entity: &EntityPlan) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        let start = self.chars;
        self.text.push_str(&entity.name);
        self.chars += entity.name.chars().count();
        self.mentions.push(EntityMention {
            entity_id: entity.id.clone(),
            start,
            end: self.chars,
        });
    }

    fn finish(mut self) -> PlannedSentence {
        self.text.push('.');
        PlannedSentence {
            text: self.text,
            mentions: self.mentions,
        }
    }
}

/// Generate the benchmark for a spec. Deterministic: the same spec always
/// yields the same documents, queries, and qrels.
pub fn generate(spec: &BenchmarkSpec) -> Result<GeneratedBenchmark> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut factory = WordFactory::new();

    // Pools, in a fixed draw order.
    let noise_vocab = factory.words(&mut rng, spec.vocab_size);
    let num_categories = categories_for(spec.num_entities);
    let descriptors: Vec<String> = (0..num_categories)
        .map(|_| factory.phrase(&mut rng, 2))
        .collect();
    let num_relations = relations_for(spec.num_facts);
    let relations: Vec<String> = (0..num_relations)
        .map(|_| factory.phrase(&mut rng, 3))
        .collect();
    let entities: Vec<EntityPlan> = (0..spec.num_entities)
        .map(|i| EntityPlan {
            id: format!("E{i:04}"),
            name: factory.phrase(&mut rng, 2),
            category: i % num_categories,
        })
        .collect();
    let by_category: Vec<Vec<usize>> = (0..num_categories)
        .map(|c| {
            entities
                .iter()
                .enumerate()
                .filter(|(_, e)| e.category == c)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    // Facts: unique (category-A, relation, category-B) combinations with
    // distinct categories, so each query pins down exactly one planted pair.
    let mut used_combos: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut facts: Vec<FactPlan> = Vec::with_capacity(spec.num_facts);
    for f in 0..spec.num_facts {
        let relation = f % num_relations;
        let (cat_a, cat_b) = loop {
            let ca = rng.gen_range(0..num_categories);
            let cb = rng.gen_range(0..num_categories);
            if ca != cb && used_combos.insert((ca, relation, cb)) {
                break (ca, cb);
            }
        };
        let a = by_category[cat_a][rng.gen_range(0..by_category[cat_a].len())];
        let b = by_category[cat_b][rng.gen_range(0..by_category[cat_b].len())];
        facts.push(FactPlan { a, b, relation });
    }

    // Structured sentences: facts, then confounders, then entity profiles.
    let mut structured: Vec<PlannedSentence> = Vec::new();
    for fact in &facts {
        let ea = &entities[fact.a];
        let eb = &entities[fact.b];
        let mut s = SentenceBuilder::new();
        s.push_raw(&descriptors[ea.category]);
        s.push_mention(ea);
        s.push_raw(&relations[fact.relation]);
        s.push_mention(eb);
        s.push_raw(&descriptors[eb.category]);
        structured.push(s.finish());
    }
    for fact in &facts {
        let ea = &entities[fact.a];
        let eb = &entities[fact.b];
        for _ in 0..DECOYS_PER_FACT {
            let cand_a = &by_category[ea.category];
            let cand_b = &by_category[eb.category];
            let c = pick_other(&mut rng, cand_a, fact.a);
            let d = pick_other(&mut rng, cand_b, fact.b);
            if c == fact.a && d == fact.b {
                // Single-member categories on both sides: a confounder would
                // restate the fact, so skip it.
                continue;
            }
            let mut s = SentenceBuilder::new();
            s.push_raw(&descriptors[ea.category]);
            s.push_mention(&entities[c]);
            s.push_raw("and");
            s.push_mention(&entities[d]);
            s.push_raw(&relations[fact.relation]);
            s.push_raw(&descriptors[eb.category]);
            s.push_raw("near");
            s.push_raw(&descriptors[ea.category]);
            structured.push(s.finish());
        }
    }
    if num_categories >= 3 {
        for fact in &facts {
            let ea = &entities[fact.a];
            let eb = &entities[fact.b];
            // Left half decoy: one-side descriptor plus the relation phrase,
            // partnered with an entity from an uninvolved category.
            let c2 = pick_other(&mut rng, &by_category[ea.category], fact.a);
            let d2_cat = pick_category_excluding(&mut rng, num_categories, ea.category, eb.category);
            let d2 = by_category[d2_cat][rng.gen_range(0..by_category[d2_cat].len())];
            let mut s = SentenceBuilder::new();
            s.push_raw(&descriptors[ea.category]);
            s.push_mention(&entities[c2]);
            s.push_raw(&relations[fact.relation]);
            s.push_mention(&entities[d2]);
            structured.push(s.finish());
            // Right half decoy, mirrored.
            let d3 = pick_other(&mut rng, &by_category[eb.category], fact.b);
            let c3_cat = pick_category_excluding(&mut rng, num_categories, ea.category, eb.category);
            let c3 = by_category[c3_cat][rng.gen_range(0..by_category[c3_cat].len())];
            let mut s = SentenceBuilder::new();
            s.push_mention(&entities[c3]);
            s.push_raw(&relations[fact.relation]);
            s.push_mention(&entities[d3]);
            s.push_raw(&descriptors[eb.category]);
            structured.push(s.finish());
        }
    }
    for e in &entities {
        let mut s = SentenceBuilder::new();
        s.push_mention(e);
        s.push_raw("is");
        s.push_raw(&descriptors[e.category]);
        structured.push(s.finish());
    }

    // Assemble documents: structured sentences round-robin across docs, each
    // doc padded with noise, order shuffled per doc.
    let mut doc_sentences: Vec<Vec<PlannedSentence>> = (0..spec.num_docs).map(|_| Vec::new()).collect();
    for (i, sentence) in structured.into_iter().enumerate() {
        doc_sentences[i % spec.num_docs].push(sentence);
    }
    for doc in doc_sentences.iter_mut() {
        let pad = if spec.noise_sentences == 0 && doc.is_empty() {
            1 // never emit an empty document
        } else {
            spec.noise_sentences
        };
        for _ in 0..pad {
            let n = rng.gen_range(NOISE_WORDS.0..=NOISE_WORDS.1);
            let mut s = SentenceBuilder::new();
            for _ in 0..n {
                s.push_raw(&noise_vocab[rng.gen_range(0..noise_vocab.len())]);
            }
            doc.push(s.finish());
        }
        // Fisher-Yates so structured sentences sit at varied positions.
        for i in (1..doc.len()).rev() {
            let j = rng.gen_range(0..=i);
            doc.swap(i, j);
        }
    }
    let documents: Vec<AnnotatedDocument> = doc_sentences
        .into_iter()
        .enumerate()
        .map(|(i, sentences)| {
            let mut text = String::new();
            let mut chars = 0usize;
            let mut mentions = Vec::new();
            for s in sentences {
                if !text.is_empty() {
                    text.push(' ');
                    chars += 1;
                }
                for m in &s.mentions {
                    mentions.push(EntityMention {
                        entity_id: m.entity_id.clone(),
                        start: chars + m.start,
                        end: chars + m.end,
                    });
                }
                text.push_str(&s.text);
                chars += s.text.chars().count();
            }
            let mut doc = AnnotatedDocument {
                doc_id: format!("D{i:04}"),
                text,
                mentions,
            };
            doc.normalize()
                .expect("generated mentions are valid by construction");
            doc
        })
        .collect();

    // Queries and qrels: one query per fact.
    let mut query_lines = Vec::with_capacity(spec.num_facts);
    let mut queries = Vec::with_capacity(spec.num_facts);
    let mut qrels: Qrels = Qrels::new();
    for (f, fact) in facts.iter().enumerate() {
        let ea = &entities[fact.a];
        let eb = &entities[fact.b];
        let qid = format!("Q{f:04}");
        let line = format!(
            "{qid}\t{}\t{}\t{}",
            descriptors[ea.category], relations[fact.relation], descriptors[eb.category]
        );
        queries.push(parse_query(&line)?);
        query_lines.push(line);
        let tuple = crate::query::EntityTuple::pair(ea.id.clone(), eb.id.clone()).normalized();
        qrels.entry(qid.clone()).or_default().push(QrelRecord {
            query_id: qid,
            tuple,
            grade: 1,
        });
    }

    Ok(GeneratedBenchmark {
        documents,
        queries,
        query_lines,
        qrels,
    })
}

/// Pick a category member other than `avoid` when the category has more
/// than one member; otherwise return `avoid` itself.
fn pick_other(rng: &mut ChaCha8Rng, members: &[usize], avoid: usize) -> usize {
    if members.len() <= 1 {
        return avoid;
    }
    loop {
        let pick = members[rng.gen_range(0..members.len())];
        if pick != avoid {
            return pick;
        }
    }
}

/// Pick a category index different from both excluded ones. Callers ensure
/// at least three categories exist.
fn pick_category_excluding(
    rng: &mut ChaCha8Rng,
    num_categories: usize,
    skip_a: usize,
    skip_b: usize,
) -> usize {
    loop {
        let c = rng.gen_range(0..num_categories);
        if c != skip_a && c != skip_b {
            return c;
        }
    }
}
