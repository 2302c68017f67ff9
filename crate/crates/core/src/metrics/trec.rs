//! TREC-format file parsing and writing.
//!
//! Run lines: `qid Q0 doc_id rank score tag` (rank is ignored on read and
//! recomputed from scores). Qrels lines: `qid 0 doc_id rel`. The paired
//! manifest is JSONL with run paths resolved relative to the manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::{MetricsError, PairedEntry, PairedEval, Qrels, RunFile};

fn io_err(path: &Path, source: std::io::Error) -> MetricsError {
    MetricsError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> MetricsError {
    MetricsError::MalformedLine {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a TREC run file and re-ranks it per the tie-break rule.
pub fn read_run(path: impl AsRef<Path>) -> Result<RunFile, MetricsError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(malformed(
                path,
                line_no,
                format!("expected 6 whitespace-separated fields, got {}", fields.len()),
            ));
        }
        let score: f64 = fields[4]
            .parse()
            .map_err(|e| malformed(path, line_no, format!("bad score: {e}")))?;
        if !score.is_finite() {
            return Err(malformed(path, line_no, "non-finite score"));
        }
        entries.push((fields[0].to_string(), fields[2].to_string(), score));
    }
    RunFile::from_entries(entries)
}

/// Writes a run file with recomputed 1-based ranks and a fixed tag.
pub fn write_run(path: impl AsRef<Path>, run: &RunFile, tag: &str) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let mut writer = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for qid in run.qids().map(str::to_string).collect::<Vec<_>>() {
        for (i, doc) in run.ranking(&qid)?.iter().enumerate() {
            writeln!(writer, "{qid} Q0 {} {} {} {tag}", doc.doc_id, i + 1, doc.score)
                .map_err(|e| io_err(path, e))?;
        }
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Reads TREC qrels.
pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels, MetricsError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed(
                path,
                line_no,
                format!("expected 4 whitespace-separated fields, got {}", fields.len()),
            ));
        }
        let rel: u32 = fields[3]
            .parse()
            .map_err(|e| malformed(path, line_no, format!("bad relevance: {e}")))?;
        entries.push((fields[0].to_string(), fields[2].to_string(), rel));
    }
    Qrels::from_entries(entries)
}

#[derive(Deserialize)]
struct ManifestLine {
    qid: String,
    run_og: String,
    run_new: String,
    target_doc_id: String,
}

/// Loads a paired-evaluation manifest: JSONL of
/// `{"qid", "run_og", "run_new", "target_doc_id"}` with run paths relative
/// to the manifest file. Each referenced run is read once.
pub fn load_paired(manifest_path: impl AsRef<Path>) -> Result<PairedEval, MetricsError> {
    let manifest_path = manifest_path.as_ref();
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let reader =
        BufReader::new(File::open(manifest_path).map_err(|e| io_err(manifest_path, e))?);
    let mut run_cache: std::collections::BTreeMap<String, RunFile> = Default::default();
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(manifest_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ManifestLine = serde_json::from_str(&line)
            .map_err(|e| malformed(manifest_path, line_no, e.to_string()))?;
        if parsed.target_doc_id.is_empty() {
            return Err(malformed(manifest_path, line_no, "empty target_doc_id"));
        }
        let mut slice_of = |rel_path: &str| -> Result<Vec<String>, MetricsError> {
            if !run_cache.contains_key(rel_path) {
                let run = read_run(base.join(rel_path))?;
                run_cache.insert(rel_path.to_string(), run);
            }
            let run = &run_cache[rel_path];
            Ok(run
                .ranking(&parsed.qid)?
                .iter()
                .map(|d| d.doc_id.clone())
                .collect())
        };
        entries.push(PairedEntry {
            og_ranking: slice_of(&parsed.run_og)?,
            new_ranking: slice_of(&parsed.run_new)?,
            qid: parsed.qid,
            target_doc_id: parsed.target_doc_id,
        });
    }
    Ok(PairedEval { entries })
}
