//! TREC-style run files: one ranked tuple per line,
//! `query_id TAB entityA|entityB[|entityC] TAB rank TAB score TAB run_tag`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::Run;
use crate::query::EntityTuple;
use crate::ranking::ScoredTuple;

/// One run-file line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub query_id: String,
    pub tuple: EntityTuple,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Turn per-query rankings into run entries with 1-based ranks.
pub fn entries_from_rankings(
    rankings: &[(String, Vec<ScoredTuple>)],
    tag: &str,
) -> Vec<RunEntry> {
    let mut entries = Vec::new();
    for (query_id, ranked) in rankings {
        for (i, s) in ranked.iter().enumerate() {
            entries.push(RunEntry {
                query_id: query_id.clone(),
                tuple: s.tuple.clone(),
                rank: i + 1,
                score: s.total,
                tag: tag.to_string(),
            });
        }
    }
    entries
}

/// Write run entries in their given order. Scores are fixed to six decimal
/// places so identical rankings always serialize to identical bytes.
pub fn write_run(path: &Path, entries: &[RunEntry]) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    for e in entries {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{}",
            e.query_id, e.tuple, e.rank, e.score, e.tag
        )
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    }
    out.flush()
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    Ok(())
}

/// Read a run file back into raw entries, validating line shape.
pub fn read_run_entries(path: &Path) -> Result<Vec<RunEntry>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let display = path.display().to_string();
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(display.clone(), e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 5 tab-separated fields, got {}", fields.len()),
            ));
        }
        let tuple = EntityTuple::parse(fields[1]).ok_or_else(|| {
            Error::parse(&display, lineno, format!("invalid tuple {:?}", fields[1]))
        })?;
        let rank: usize = fields[2].parse().map_err(|_| {
            Error::parse(&display, lineno, format!("invalid rank {:?}", fields[2]))
        })?;
        if rank == 0 {
            return Err(Error::parse(&display, lineno, "rank must be >= 1"));
        }
        let score: f64 = fields[3].parse().map_err(|_| {
            Error::parse(&display, lineno, format!("invalid score {:?}", fields[3]))
        })?;
        entries.push(RunEntry {
            query_id: fields[0].to_string(),
            tuple,
            rank,
            score,
            tag: fields[4].to_string(),
        });
    }
    Ok(entries)
}

/// Read a run file into per-query rankings ordered by the rank field
/// (ties by file order), ready for evaluation.
pub fn read_run(path: &Path) -> Result<Run> {
    let entries = read_run_entries(path)?;
    let mut grouped: BTreeMap<String, Vec<(usize, usize, EntityTuple)>> = BTreeMap::new();
    for (pos, e) in entries.into_iter().enumerate() {
        grouped
            .entry(e.query_id)
            .or_default()
            .push((e.rank, pos, e.tuple));
    }
    let mut run = Run::new();
    for (query_id, mut rows) in grouped {
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        run.insert(query_id, rows.into_iter().map(|(_, _, t)| t).collect());
    }
    Ok(run)
}
