//! Structural validation of synthesized instructions.
//!
//! Advisory by default: reports are emitted but nothing is dropped. Strict
//! mode (a CLI concern) drops exactly the records whose report fails.

use serde::{Deserialize, Serialize};

use crate::corpus::DualViewRecord;

/// Default token-Jaccard threshold below which two instructions count as
/// distinct. Permits topical overlap while rejecting near-copies.
pub const DEFAULT_DISTINCTNESS_THRESHOLD: f64 = 0.6;

/// Substrings that indicate meta-task language leaked into an instruction.
pub const DEFAULT_BANNED_PATTERNS: &[&str] = &[
    "passage",
    "p+",
    "n*",
    "meta-task",
    "instruction negative",
    "the above",
    "this task",
];

/// Abbreviations whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "u.s.", "etc."];

/// Outcome of one named check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub passed: bool,
    pub detail: String,
}

/// Per-record validation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub source_id: String,
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
}

impl ValidationReport {
    fn from_checks(source_id: String, checks: Vec<CheckResult>) -> Self {
        let overall_pass = checks.iter().all(|c| c.passed);
        Self {
            source_id,
            checks,
            overall_pass,
        }
    }
}

/// Tunable knobs for the checks; defaults mirror the constants above.
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub distinctness_threshold: f64,
    pub banned_patterns: Vec<String>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            distinctness_threshold: DEFAULT_DISTINCTNESS_THRESHOLD,
            banned_patterns: DEFAULT_BANNED_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Counts sentences with a cheap splitter: `.`, `!`, `?` followed by
/// whitespace or end-of-string end a sentence, except after a known
/// abbreviation. Passes iff the count is 1 or 2.
pub fn check_sentence_count(instruction: &str) -> (usize, bool) {
    let chars: Vec<char> = instruction.chars().collect();
    let mut count = 0;
    let mut segment_start = 0;
    let mut has_trailing = false;
    for (i, &c) in chars.iter().enumerate() {
        let segment_nonempty = chars[segment_start..=i].iter().any(|c| !c.is_whitespace());
        if matches!(c, '.' | '!' | '?')
            && chars.get(i + 1).is_none_or(|n| n.is_whitespace())
            && !ends_with_abbreviation(&chars[..=i])
        {
            if segment_nonempty {
                count += 1;
            }
            segment_start = i + 1;
            has_trailing = false;
        } else if !c.is_whitespace() {
            has_trailing = true;
        }
    }
    if has_trailing {
        count += 1;
    }
    (count, (1..=2).contains(&count))
}

fn ends_with_abbreviation(prefix: &[char]) -> bool {
    let lowered: String = prefix.iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| lowered.ends_with(abbr))
}

/// Token-Jaccard similarity between two instructions over lowercased
/// alphanumeric tokens. Passes iff similarity is below `threshold`.
pub fn check_distinctness(
    original: &str,
    synthesized: &str,
    threshold: f64,
) -> Result<(f64, bool), String> {
    if original.is_empty() || synthesized.is_empty() {
        return Err("distinctness check requires non-empty instructions".into());
    }
    let a = token_set(original);
    let b = token_set(synthesized);
    let intersection = a.intersection(&b).count();
    let union = a.union(&b).count();
    let jaccard = if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    };
    Ok((jaccard, jaccard < threshold))
}

fn token_set(text: &str) -> std::collections::BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// A banned-pattern hit, with the byte offset of the match in the
/// lowercased instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub pattern: String,
    pub offset: usize,
}

/// Case-insensitive substring scan against the banned list. Every
/// occurrence of every pattern is reported.
pub fn check_banned_content(instruction: &str, banned: &[String]) -> Vec<Violation> {
    let lowered = instruction.to_lowercase();
    let mut violations = Vec::new();
    for pattern in banned {
        let needle = pattern.to_lowercase();
        if needle.is_empty() {
            continue;
        }
        let mut start = 0;
        while let Some(pos) = lowered[start..].find(&needle) {
            violations.push(Violation {
                pattern: pattern.clone(),
                offset: start + pos,
            });
            start += pos + needle.len();
        }
    }
    violations.sort_by(|a, b| a.offset.cmp(&b.offset).then(a.pattern.cmp(&b.pattern)));
    violations
}

/// Runs every check against one dual-view record.
///
/// Checks: structural invariants of the record, sentence count of the
/// synthesized instruction, distinctness versus the original instruction,
/// and the banned-content scan.
pub fn validate_record(record: &DualViewRecord, config: &ValidationConfig) -> ValidationReport {
    let mut checks = Vec::new();

    let structure = record.validate();
    checks.push(CheckResult {
        check_name: "structure".into(),
        passed: structure.is_ok(),
        detail: structure.err().unwrap_or_else(|| "ok".into()),
    });

    let instruction = &record.reversed_view.instruction;
    let (sentences, sentences_ok) = check_sentence_count(instruction);
    checks.push(CheckResult {
        check_name: "sentence_count".into(),
        passed: sentences_ok,
        detail: format!("{sentences} sentence(s)"),
    });

    match check_distinctness(
        &record.original_view.instruction,
        instruction,
        config.distinctness_threshold,
    ) {
        Ok((jaccard, passed)) => checks.push(CheckResult {
            check_name: "distinctness".into(),
            passed,
            detail: format!(
                "token jaccard {jaccard:.3} (threshold {})",
                config.distinctness_threshold
            ),
        }),
        Err(reason) => checks.push(CheckResult {
            check_name: "distinctness".into(),
            passed: false,
            detail: reason,
        }),
    }

    let violations = check_banned_content(instruction, &config.banned_patterns);
    checks.push(CheckResult {
        check_name: "banned_content".into(),
        passed: violations.is_empty(),
        detail: if violations.is_empty() {
            "no banned patterns".into()
        } else {
            violations
                .iter()
                .map(|v| format!("{:?} at offset {}", v.pattern, v.offset))
                .collect::<Vec<_>>()
                .join(", ")
        },
    });

    ValidationReport::from_checks(record.source_id.clone(), checks)
}

/// Validates a batch and returns the reports plus the pass rate in [0, 1].
pub fn validate_batch(
    records: &[DualViewRecord],
    config: &ValidationConfig,
) -> (Vec<ValidationReport>, f64) {
    let reports: Vec<ValidationReport> = records
        .iter()
        .map(|r| validate_record(r, config))
        .collect();
    let pass_rate = if reports.is_empty() {
        1.0
    } else {
        reports.iter().filter(|r| r.overall_pass).count() as f64 / reports.len() as f64
    };
    (reports, pass_rate)
}
