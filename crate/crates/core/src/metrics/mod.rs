//! Ranking metrics over TREC-format runs and qrels, plus the
//! paired-instruction p-MRR.
//!
//! Metric kernels are generic over [`Scalar`] and return values in [0, 1]
//! (p-MRR excepted: it is reported ×100 by convention). The report layer
//! scales classical metrics by 100 to match the usual table convention.

mod report;
mod trec;

pub use report::{render_table, MetricReport, SubsetMetric};
pub use trec::{load_paired, read_qrels, read_run, write_run};

use std::collections::BTreeMap;

use crate::scalar::{from_count, Scalar};

/// Default rank assigned to documents missing from a run (`cutoff + 1`).
pub const DEFAULT_CUTOFF: usize = 1000;

/// Errors from metric computation and TREC file handling.
#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed line {line} in {path}: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate document {doc_id} for query {qid}")]
    DuplicateDoc { qid: String, doc_id: String },
    #[error("non-finite score for document {doc_id} in query {qid}")]
    NonFiniteScore { qid: String, doc_id: String },
    #[error("unknown query id {qid}")]
    UnknownQid { qid: String },
    #[error("cutoff k must be >= 1")]
    InvalidCutoff,
    #[error("paired evaluation set is empty")]
    EmptyPairedSet,
    #[error("expected {expected} subset values, got {got}")]
    WrongArity { expected: usize, got: usize },
}

/// A ranked document with its retrieval score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// System rankings per query, held in final tie-broken order: descending
/// score, then ascending doc_id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    rankings: BTreeMap<String, Vec<ScoredDoc>>,
}

impl RunFile {
    /// Builds a run from (qid, doc_id, score) entries, applying the
    /// tie-break rule. Rejects duplicate documents within a query and
    /// non-finite scores.
    pub fn from_entries<I>(entries: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut rankings: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
        for (qid, doc_id, score) in entries {
            if !score.is_finite() {
                return Err(MetricsError::NonFiniteScore { qid, doc_id });
            }
            let list = rankings.entry(qid.clone()).or_default();
            if list.iter().any(|d| d.doc_id == doc_id) {
                return Err(MetricsError::DuplicateDoc { qid, doc_id });
            }
            list.push(ScoredDoc { doc_id, score });
        }
        for list in rankings.values_mut() {
            rerank(list);
        }
        Ok(Self { rankings })
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(|s| s.as_str())
    }

    /// Ranked documents for one query, best first.
    pub fn ranking(&self, qid: &str) -> Result<&[ScoredDoc], MetricsError> {
        self.rankings
            .get(qid)
            .map(|v| v.as_slice())
            .ok_or_else(|| MetricsError::UnknownQid { qid: qid.into() })
    }

    /// 1-based rank of a document, or `None` if it was not retrieved.
    pub fn rank_of(&self, qid: &str, doc_id: &str) -> Result<Option<usize>, MetricsError> {
        Ok(self
            .ranking(qid)?
            .iter()
            .position(|d| d.doc_id == doc_id)
            .map(|p| p + 1))
    }
}

fn rerank(list: &mut [ScoredDoc]) {
    list.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
}

/// Graded relevance judgments keyed by (qid, doc_id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn from_entries<I>(entries: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (String, String, u32)>,
    {
        let mut judgments: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (qid, doc_id, rel) in entries {
            let per_query = judgments.entry(qid.clone()).or_default();
            if per_query.insert(doc_id.clone(), rel).is_some() {
                return Err(MetricsError::DuplicateDoc { qid, doc_id });
            }
        }
        Ok(Self { judgments })
    }

    /// Graded relevance for a document; unjudged documents are 0.
    pub fn relevance(&self, qid: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(qid)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// All positive judgments for a query, in doc_id order.
    pub fn relevant_docs(&self, qid: &str) -> Vec<(&str, u32)> {
        self.judgments
            .get(qid)
            .map(|m| {
                m.iter()
                    .filter(|(_, &rel)| rel > 0)
                    .map(|(d, &rel)| (d.as_str(), rel))
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// One paired-instruction evaluation case: the same query ranked under the
/// original and the changed instruction, plus the document whose relevance
/// flips between them.
#[derive(Debug, Clone)]
pub struct PairedEntry {
    pub qid: String,
    /// Doc ids in final rank order under the original instruction.
    pub og_ranking: Vec<String>,
    /// Doc ids in final rank order under the changed instruction.
    pub new_ranking: Vec<String>,
    pub target_doc_id: String,
}

/// The full paired evaluation set.
#[derive(Debug, Clone, Default)]
pub struct PairedEval {
    pub entries: Vec<PairedEntry>,
}

/// DCG gain function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainScheme {
    /// gain = rel
    #[default]
    Linear,
    /// gain = 2^rel - 1
    Exponential,
}

fn gain<S: Scalar>(scheme: GainScheme, rel: u32) -> S {
    match scheme {
        GainScheme::Linear => S::from_u32(rel).expect("relevance fits scalar"),
        GainScheme::Exponential => {
            let two = S::from_u32(2).unwrap();
            two.powi(rel as i32) - S::one()
        }
    }
}

/// Per-query p-MRR kernel over the two ranks of the target document.
///
/// Positive when the document moved up under the changed instruction
/// (r_og > r_new), negative when it moved down, zero iff the ranks are
/// equal. Not yet scaled by 100.
pub fn p_mrr_pair<S: Scalar>(rank_og: usize, rank_new: usize) -> S {
    let og = from_count::<S>(rank_og);
    let new = from_count::<S>(rank_new);
    if rank_og > rank_new {
        og / new - S::one()
    } else {
        S::one() - new / og
    }
}

/// Paired-instruction rank-shift metric, reported ×100.
///
/// Documents missing from a run take rank `cutoff + 1`.
pub fn p_mrr<S: Scalar>(paired: &PairedEval, cutoff: usize) -> Result<S, MetricsError> {
    if paired.entries.is_empty() {
        return Err(MetricsError::EmptyPairedSet);
    }
    let missing = cutoff + 1;
    let mut total = S::zero();
    for entry in &paired.entries {
        let rank_og = rank_in(&entry.og_ranking, &entry.target_doc_id).unwrap_or(missing);
        let rank_new = rank_in(&entry.new_ranking, &entry.target_doc_id).unwrap_or(missing);
        total += p_mrr_pair::<S>(rank_og, rank_new);
    }
    let hundred = S::from_u32(100).unwrap();
    Ok(hundred * total / from_count::<S>(paired.entries.len()))
}

fn rank_in(ranking: &[String], doc_id: &str) -> Option<usize> {
    ranking.iter().position(|d| d == doc_id).map(|p| p + 1)
}

/// nDCG@k with the configured gain and a log2(i + 1) discount. Returns 0
/// when the query has no relevant documents.
pub fn ndcg_at_k<S: Scalar>(
    run: &RunFile,
    qrels: &Qrels,
    qid: &str,
    k: usize,
    scheme: GainScheme,
) -> Result<S, MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidCutoff);
    }
    let ranking = run.ranking(qid)?;
    let dcg = dcg_at_k::<S>(
        ranking.iter().map(|d| qrels.relevance(qid, &d.doc_id)),
        k,
        scheme,
    );
    let mut ideal_rels: Vec<u32> = qrels.relevant_docs(qid).iter().map(|(_, r)| *r).collect();
    ideal_rels.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k::<S>(ideal_rels.into_iter(), k, scheme);
    if idcg == S::zero() {
        return Ok(S::zero());
    }
    Ok(dcg / idcg)
}

fn dcg_at_k<S: Scalar, I: Iterator<Item = u32>>(rels: I, k: usize, scheme: GainScheme) -> S {
    let mut dcg = S::zero();
    for (i, rel) in rels.take(k).enumerate() {
        let position = from_count::<S>(i + 2); // discount log2(rank + 1)
        dcg += gain::<S>(scheme, rel) / position.log2();
    }
    dcg
}

/// MAP@k: mean precision at each relevant hit within the top k, normalized
/// by min(k, number of relevant documents).
pub fn map_at_k<S: Scalar>(
    run: &RunFile,
    qrels: &Qrels,
    qid: &str,
    k: usize,
) -> Result<S, MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidCutoff);
    }
    let ranking = run.ranking(qid)?;
    let total_relevant = qrels.relevant_docs(qid).len();
    if total_relevant == 0 {
        return Ok(S::zero());
    }
    let mut hits = 0usize;
    let mut precision_sum = S::zero();
    for (i, doc) in ranking.iter().take(k).enumerate() {
        if qrels.relevance(qid, &doc.doc_id) > 0 {
            hits += 1;
            precision_sum += from_count::<S>(hits) / from_count::<S>(i + 1);
        }
    }
    Ok(precision_sum / from_count::<S>(total_relevant.min(k)))
}

/// Reciprocal rank of the first relevant document; 0 if none retrieved.
pub fn mrr<S: Scalar>(run: &RunFile, qrels: &Qrels, qid: &str) -> Result<S, MetricsError> {
    let ranking = run.ranking(qid)?;
    for (i, doc) in ranking.iter().enumerate() {
        if qrels.relevance(qid, &doc.doc_id) > 0 {
            return Ok(S::one() / from_count::<S>(i + 1));
        }
    }
    Ok(S::zero())
}

/// Macro-average over exactly three subset values.
pub fn followir_score<S: Scalar>(subset_values: &[S]) -> Result<S, MetricsError> {
    if subset_values.len() != 3 {
        return Err(MetricsError::WrongArity {
            expected: 3,
            got: subset_values.len(),
        });
    }
    let sum = subset_values
        .iter()
        .fold(S::zero(), |acc, &v| acc + v);
    Ok(sum / from_count::<S>(3))
}

/// Mean of a per-query metric over every query in the run.
pub fn mean_over_run<S, F>(run: &RunFile, mut per_query: F) -> Result<S, MetricsError>
where
    S: Scalar,
    F: FnMut(&str) -> Result<S, MetricsError>,
{
    let qids: Vec<&str> = run.qids().collect();
    if qids.is_empty() {
        return Ok(S::zero());
    }
    let mut total = S::zero();
    for qid in &qids {
        total += per_query(qid)?;
    }
    Ok(total / from_count::<S>(qids.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run_one(qid: &str, docs: &[(&str, f64)]) -> RunFile {
        RunFile::from_entries(
            docs.iter()
                .map(|(d, s)| (qid.to_string(), d.to_string(), *s)),
        )
        .unwrap()
    }

    fn qrels_one(qid: &str, docs: &[(&str, u32)]) -> Qrels {
        Qrels::from_entries(
            docs.iter()
                .map(|(d, r)| (qid.to_string(), d.to_string(), *r)),
        )
        .unwrap()
    }

    #[test]
    fn tie_break_orders_by_ascending_doc_id() {
        let run = run_one("q", &[("b", 1.0), ("c", 2.0), ("a", 1.0)]);
        let order: Vec<&str> = run
            .ranking("q")
            .unwrap()
            .iter()
            .map(|d| d.doc_id.as_str())
            .collect();
        assert_eq!(order, vec!["c", "a", "b"]);
    }

    #[test]
    fn duplicate_doc_rejected() {
        let err = RunFile::from_entries(vec![
            ("q".into(), "a".into(), 1.0),
            ("q".into(), "a".into(), 0.5),
        ])
        .unwrap_err();
        assert!(matches!(err, MetricsError::DuplicateDoc { .. }));
    }

    #[test]
    fn rank_of_head_absent_and_tied() {
        let run = run_one("q", &[("b", 1.0), ("a", 1.0), ("top", 9.0)]);
        assert_eq!(run.rank_of("q", "top").unwrap(), Some(1));
        assert_eq!(run.rank_of("q", "a").unwrap(), Some(2));
        assert_eq!(run.rank_of("q", "missing").unwrap(), None);
        assert!(run.rank_of("nope", "a").is_err());
    }

    #[test]
    fn p_mrr_identical_runs_is_zero() {
        let ranking = vec!["a".to_string(), "b".to_string()];
        let paired = PairedEval {
            entries: vec![PairedEntry {
                qid: "q".into(),
                og_ranking: ranking.clone(),
                new_ranking: ranking,
                target_doc_id: "b".into(),
            }],
        };
        assert_eq!(p_mrr::<f64>(&paired, DEFAULT_CUTOFF).unwrap(), 0.0);
    }

    #[test]
    fn p_mrr_hand_cases() {
        // Target moves 2 -> 1: +100. Target moves 1 -> 2: -100.
        assert_eq!(p_mrr_pair::<f64>(2, 1) * 100.0, 100.0);
        assert_eq!(p_mrr_pair::<f64>(1, 2) * 100.0, -100.0);
    }

    #[test]
    fn p_mrr_missing_doc_takes_cutoff_plus_one() {
        let paired = PairedEval {
            entries: vec![PairedEntry {
                qid: "q".into(),
                og_ranking: vec!["x".into()],
                new_ranking: vec!["t".into(), "x".into()],
                target_doc_id: "t".into(),
            }],
        };
        // r_og = 11 (missing, cutoff 10), r_new = 1 -> 11/1 - 1 = 10 -> 1000.
        assert_eq!(p_mrr::<f64>(&paired, 10).unwrap(), 1000.0);
    }

    #[test]
    fn p_mrr_empty_set_errors() {
        let err = p_mrr::<f64>(&PairedEval::default(), 10).unwrap_err();
        assert!(matches!(err, MetricsError::EmptyPairedSet));
    }

    #[test]
    fn p_mrr_pair_antisymmetry_sweep() {
        let mut rng_state = 0x2545F4914F6CDD1Du64;
        for _ in 0..1000 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let a = (rng_state >> 33) as usize % 1001 + 1;
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let b = (rng_state >> 33) as usize % 1001 + 1;
            let fwd = p_mrr_pair::<f64>(a, b);
            let rev = p_mrr_pair::<f64>(b, a);
            assert_eq!(fwd, -rev, "ranks {a}, {b}");
            assert_eq!(fwd == 0.0, a == b);
            if a != b {
                assert_eq!(fwd.signum(), (a as f64 - b as f64).signum(), "ranks {a}, {b}");
            }
        }
    }

    #[test]
    fn ndcg_perfect_ranking_is_one() {
        let run = run_one("q", &[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let qrels = qrels_one("q", &[("a", 3), ("b", 2), ("c", 1)]);
        let v = ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Linear).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_hand_computed_binary_case() {
        // Relevant docs at ranks 1 and 3, two relevant total, k = 10.
        let run = run_one("q", &[("r1", 3.0), ("x", 2.0), ("r2", 1.0)]);
        let qrels = qrels_one("q", &[("r1", 1), ("r2", 1)]);
        let v = ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Linear).unwrap();
        let expected = (1.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.9197).abs() < 1e-4);
    }

    #[test]
    fn ndcg_no_relevant_is_zero() {
        let run = run_one("q", &[("a", 1.0)]);
        let qrels = Qrels::default();
        assert_eq!(
            ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Linear).unwrap(),
            0.0
        );
    }

    #[test]
    fn exponential_gain_differs_from_linear_on_graded_rels() {
        let run = run_one("q", &[("a", 2.0), ("b", 1.0)]);
        let qrels = qrels_one("q", &[("b", 3)]);
        let lin = ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Linear).unwrap();
        let exp = ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Exponential).unwrap();
        // Single relevant doc: both normalize to the same ratio.
        assert!((lin - exp).abs() < 1e-12);
        let qrels = qrels_one("q", &[("a", 1), ("b", 3)]);
        let lin = ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Linear).unwrap();
        let exp = ndcg_at_k::<f64>(&run, &qrels, "q", 10, GainScheme::Exponential).unwrap();
        assert!((lin - exp).abs() > 1e-3);
    }

    #[test]
    fn map_and_mrr_single_relevant_at_head() {
        let run = run_one("q", &[("a", 2.0), ("b", 1.0)]);
        let qrels = qrels_one("q", &[("a", 1)]);
        assert_eq!(map_at_k::<f64>(&run, &qrels, "q", 10).unwrap(), 1.0);
        assert_eq!(mrr::<f64>(&run, &qrels, "q").unwrap(), 1.0);
    }

    #[test]
    fn map_hand_computed_two_relevant() {
        // Relevant at ranks 2 and 4 of 4, two relevant total.
        let run = run_one("q", &[("x1", 4.0), ("r1", 3.0), ("x2", 2.0), ("r2", 1.0)]);
        let qrels = qrels_one("q", &[("r1", 1), ("r2", 1)]);
        let v = map_at_k::<f64>(&run, &qrels, "q", 10).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn map_no_relevant_retrieved_is_zero() {
        let run = run_one("q", &[("x", 1.0)]);
        let qrels = qrels_one("q", &[("gone", 1)]);
        assert_eq!(map_at_k::<f64>(&run, &qrels, "q", 10).unwrap(), 0.0);
        assert_eq!(mrr::<f64>(&run, &qrels, "q").unwrap(), 0.0);
    }

    #[test]
    fn k_below_one_is_an_error() {
        let run = run_one("q", &[("a", 1.0)]);
        let qrels = qrels_one("q", &[("a", 1)]);
        assert!(ndcg_at_k::<f64>(&run, &qrels, "q", 0, GainScheme::Linear).is_err());
        assert!(map_at_k::<f64>(&run, &qrels, "q", 0).is_err());
    }

    #[test]
    fn followir_score_is_arithmetic_mean() {
        let v = followir_score::<f64>(&[20.0, 20.0, 24.0]).unwrap();
        assert!((v - 64.0 / 3.0).abs() < 1e-12);
        let permuted = followir_score::<f64>(&[24.0, 20.0, 20.0]).unwrap();
        assert_eq!(v, permuted);
        assert!(followir_score::<f64>(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn kernels_agree_across_precisions() {
        let run = run_one("q", &[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let qrels = qrels_one("q", &[("b", 2), ("c", 1)]);
        let d = ndcg_at_k::<f64>(&run, &qrels, "q", 3, GainScheme::Linear).unwrap();
        let s = ndcg_at_k::<f32>(&run, &qrels, "q", 3, GainScheme::Linear).unwrap();
        assert!((d - s as f64).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn metric_bounds_hold(
            scores in proptest::collection::vec(0.0f64..100.0, 1..15),
            rel_mask in proptest::collection::vec(0u32..3, 1..15),
            k in 1usize..12,
        ) {
            let n = scores.len().min(rel_mask.len());
            let run = RunFile::from_entries(
                (0..n).map(|i| ("q".to_string(), format!("d{i}"), scores[i])),
            ).unwrap();
            let qrels = Qrels::from_entries(
                (0..n).map(|i| ("q".to_string(), format!("d{i}"), rel_mask[i])),
            ).unwrap();
            let ndcg = ndcg_at_k::<f64>(&run, &qrels, "q", k, GainScheme::Linear).unwrap();
            let map = map_at_k::<f64>(&run, &qrels, "q", k).unwrap();
            let rr = mrr::<f64>(&run, &qrels, "q").unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ndcg));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&map));
            prop_assert!((0.0..=1.0).contains(&rr));
        }
    }
}
