//! Canonical data model for instruction-retrieval records plus JSONL persistence.
//!
//! The on-disk format is JSON Lines: one record per line, exact field names
//! as serialized below. `record_id` may be omitted in input files, in which
//! case it defaults to the record's [`content_hash`].

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A retrievable document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.doc_id.is_empty() {
            return Err("document has empty doc_id".into());
        }
        if self.text.is_empty() {
            return Err(format!("document {} has empty text", self.doc_id));
        }
        Ok(())
    }
}

/// Seed record: a query with its instruction, positive document, and negatives.
///
/// Negatives are split by provenance: `instruction_negatives` match the bare
/// query but are excluded by the instruction; `hard_negatives` are plain
/// lexical/semantic distractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TripletWire")]
pub struct InstructTriplet {
    pub record_id: String,
    pub query: String,
    pub instruction: String,
    pub is_instruct: bool,
    pub positive: Document,
    pub instruction_negatives: Vec<Document>,
    pub hard_negatives: Vec<Document>,
}

#[derive(Deserialize)]
struct TripletWire {
    #[serde(default)]
    record_id: Option<String>,
    query: String,
    #[serde(default)]
    instruction: String,
    #[serde(default)]
    is_instruct: bool,
    positive: Document,
    #[serde(default)]
    instruction_negatives: Vec<Document>,
    #[serde(default)]
    hard_negatives: Vec<Document>,
}

/// Marker prefix that lets [`classify_parse_error`] tell invariant failures
/// apart from plain JSON schema errors after they pass through serde.
const INVARIANT_MARKER: &str = "invariant violated in record ";

impl TryFrom<TripletWire> for InstructTriplet {
    type Error = String;

    fn try_from(wire: TripletWire) -> Result<Self, String> {
        let mut triplet = InstructTriplet {
            record_id: wire.record_id.unwrap_or_default(),
            query: wire.query,
            instruction: wire.instruction,
            is_instruct: wire.is_instruct,
            positive: wire.positive,
            instruction_negatives: wire.instruction_negatives,
            hard_negatives: wire.hard_negatives,
        };
        if triplet.record_id.is_empty() {
            triplet.record_id = content_hash(&triplet);
        }
        triplet
            .validate()
            .map_err(|reason| format!("{INVARIANT_MARKER}{}: {reason}", triplet.record_id))?;
        Ok(triplet)
    }
}

impl InstructTriplet {
    /// Checks all type invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.record_id.is_empty() {
            return Err("empty record_id".into());
        }
        if self.query.is_empty() {
            return Err("empty query".into());
        }
        if self.is_instruct && self.instruction.is_empty() {
            return Err("is_instruct record with empty instruction".into());
        }
        self.positive.validate()?;
        let mut seen = HashSet::new();
        for doc in self.negatives() {
            doc.validate()?;
            if doc.doc_id == self.positive.doc_id {
                return Err(format!(
                    "positive doc_id {} also appears as a negative",
                    doc.doc_id
                ));
            }
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(format!("doc_id {} duplicated across negatives", doc.doc_id));
            }
        }
        Ok(())
    }

    /// All negatives, instruction negatives first.
    pub fn negatives(&self) -> impl Iterator<Item = &Document> {
        self.instruction_negatives
            .iter()
            .chain(self.hard_negatives.iter())
    }
}

/// A seed triplet paired with its polarity-reversed complement.
///
/// The reversed view promotes one instruction negative to positive, demotes
/// the original positive to an instruction negative, and keeps every other
/// negative excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DualViewWire")]
pub struct DualViewRecord {
    pub source_id: String,
    pub swapped_negative_id: String,
    pub original_view: InstructTriplet,
    pub reversed_view: InstructTriplet,
}

#[derive(Deserialize)]
struct DualViewWire {
    source_id: String,
    swapped_negative_id: String,
    original_view: InstructTriplet,
    reversed_view: InstructTriplet,
}

impl TryFrom<DualViewWire> for DualViewRecord {
    type Error = String;

    fn try_from(wire: DualViewWire) -> Result<Self, String> {
        let record = DualViewRecord {
            source_id: wire.source_id,
            swapped_negative_id: wire.swapped_negative_id,
            original_view: wire.original_view,
            reversed_view: wire.reversed_view,
        };
        record
            .validate()
            .map_err(|reason| format!("{INVARIANT_MARKER}{}: {reason}", record.source_id))?;
        Ok(record)
    }
}

impl DualViewRecord {
    /// Checks the label-swap structure on top of both views' own invariants.
    pub fn validate(&self) -> Result<(), String> {
        self.original_view.validate()?;
        self.reversed_view.validate()?;
        if self.reversed_view.positive.doc_id != self.swapped_negative_id {
            return Err(format!(
                "reversed positive {} does not match swapped_negative_id {}",
                self.reversed_view.positive.doc_id, self.swapped_negative_id
            ));
        }
        let reversed_ids: HashSet<&str> = self
            .reversed_view
            .instruction_negatives
            .iter()
            .map(|d| d.doc_id.as_str())
            .collect();
        if !reversed_ids.contains(self.original_view.positive.doc_id.as_str()) {
            return Err(format!(
                "original positive {} is not an instruction negative of the reversed view",
                self.original_view.positive.doc_id
            ));
        }
        for doc in &self.original_view.instruction_negatives {
            if doc.doc_id != self.swapped_negative_id && !reversed_ids.contains(doc.doc_id.as_str())
            {
                return Err(format!(
                    "remaining negative {} missing from the reversed view",
                    doc.doc_id
                ));
            }
        }
        if self.original_view.query != self.reversed_view.query {
            return Err("query differs between the two views".into());
        }
        if self.original_view.instruction == self.reversed_view.instruction {
            return Err("reversed instruction equals the original instruction".into());
        }
        Ok(())
    }
}

/// Errors from corpus file operations.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("invariant violation in record {record_id}: {reason}")]
    Invariant { record_id: String, reason: String },
    #[error("duplicate record_id {record_id} at line {line}")]
    DuplicateRecordId { record_id: String, line: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Stable 64-bit content hash over (query, instruction, positive text, all
/// negative texts, in order), rendered as 16 hex digits.
///
/// Identical across runs and platforms; used as cache key material and as the
/// default `record_id`.
pub fn content_hash(triplet: &InstructTriplet) -> String {
    let mut hasher = Sha256::new();
    let mut feed = |text: &str| {
        hasher.update((text.len() as u64).to_le_bytes());
        hasher.update(text.as_bytes());
    };
    feed(&triplet.query);
    feed(&triplet.instruction);
    feed(&triplet.positive.text);
    for doc in triplet.negatives() {
        feed(&doc.text);
    }
    let digest = hasher.finalize();
    hex_prefix(&digest, 8)
}

/// Stable hex digest of an arbitrary byte string, truncated to `bytes` bytes.
pub fn stable_hex_digest(data: &[u8], bytes: usize) -> String {
    let digest = Sha256::digest(data);
    hex_prefix(&digest, bytes)
}

fn hex_prefix(digest: &[u8], bytes: usize) -> String {
    digest[..bytes].iter().map(|b| format!("{b:02x}")).collect()
}

fn read_jsonl<T, F>(path: &Path, describe: F) -> Result<Vec<T>, CorpusError>
where
    T: serde::de::DeserializeOwned,
    F: Fn(&T) -> &str,
{
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| classify_parse_error(line_no, e))?;
        let id = describe(&record).to_string();
        if !seen_ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateRecordId {
                record_id: id,
                line: line_no,
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Invariant failures surface through serde's custom-error path; split them
/// back out so callers see the record id rather than a JSON position.
fn classify_parse_error(line: usize, err: serde_json::Error) -> CorpusError {
    let message = err.to_string();
    if let Some(rest) = message.split(INVARIANT_MARKER).nth(1) {
        if let Some((record_id, reason)) = rest.split_once(": ") {
            let reason = reason
                .rfind(" at line ")
                .map_or(reason, |cut| &reason[..cut]);
            return CorpusError::Invariant {
                record_id: record_id.to_string(),
                reason: reason.to_string(),
            };
        }
    }
    CorpusError::MalformedLine { line, message }
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<usize, CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| CorpusError::MalformedLine {
            line: 0,
            message: e.to_string(),
        })?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(records.len())
}

/// Loads instruction triplets from a JSONL file, in file order.
pub fn load_triplets(path: impl AsRef<Path>) -> Result<Vec<InstructTriplet>, CorpusError> {
    read_jsonl(path.as_ref(), |t: &InstructTriplet| &t.record_id)
}

/// Writes instruction triplets as JSONL. Every record is validated before
/// anything is written.
pub fn write_triplets(
    path: impl AsRef<Path>,
    records: &[InstructTriplet],
) -> Result<usize, CorpusError> {
    for record in records {
        record.validate().map_err(|reason| CorpusError::Invariant {
            record_id: record.record_id.clone(),
            reason,
        })?;
    }
    write_jsonl(path.as_ref(), records)
}

/// Loads dual-view records from a JSONL file, in file order.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<DualViewRecord>, CorpusError> {
    read_jsonl(path.as_ref(), |r: &DualViewRecord| &r.source_id)
}

/// Writes dual-view records as JSONL. Every record is validated before
/// anything is written, so a bad record rejects the whole batch.
pub fn write_records(
    path: impl AsRef<Path>,
    records: &[DualViewRecord],
) -> Result<usize, CorpusError> {
    for record in records {
        record.validate().map_err(|reason| CorpusError::Invariant {
            record_id: record.source_id.clone(),
            reason,
        })?;
    }
    write_jsonl(path.as_ref(), records)
}
