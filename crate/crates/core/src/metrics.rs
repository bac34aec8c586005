//! Word error rate, order-insensitive concept error rate and intent F1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Utterance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no intent pairs to score")]
    EmptyPairs,
    #[error("hypothesis corpus has no utterance with id `{0}`")]
    MissingHypothesis(String),
    #[error("hypothesis `{0}` has no reference")]
    UnexpectedHypothesis(String),
    #[error("id `{0}` occurs more than once")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Match,
    Sub,
    Del,
    Ins,
}

/// Minimal-cost alignment of a hypothesis against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    /// Percentage. With an empty reference this is `insertions × 100`.
    pub wer: f64,
}

impl Alignment {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn empty_reference(&self) -> bool {
        self.ref_len == 0
    }

    /// Applies the edit script to `reference`, taking inserted and substituted items from `hyp`.
    pub fn replay<T: Clone>(&self, reference: &[T], hyp: &[T]) -> Vec<T> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(hyp.len());
        for op in &self.ops {
            match op {
                EditOp::Match | EditOp::Sub => {
                    out.push(hyp[j].clone());
                    i += 1;
                    j += 1;
                }
                EditOp::Del => i += 1,
                EditOp::Ins => {
                    out.push(hyp[j].clone());
                    j += 1;
                }
            }
        }
        debug_assert_eq!(i, reference.len());
        out
    }
}

fn rate(errors: usize, n: usize) -> f64 {
    if n == 0 {
        errors as f64 * 100.0
    } else {
        errors as f64 / n as f64 * 100.0
    }
}

/// Levenshtein alignment with unit costs.
///
/// Backtrace prefers match, then substitution, then deletion, then insertion.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T]) -> Alignment {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for (j, cell) in d.iter_mut().take(w).enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }
    let (mut i, mut j) = (n, m);
    let mut ops = Vec::with_capacity(n.max(m));
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            let diag = d[(i - 1) * w + j - 1];
            if same && here == diag {
                ops.push(EditOp::Match);
                i -= 1;
                j -= 1;
                continue;
            }
            if !same && here == diag + 1 {
                ops.push(EditOp::Sub);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            ops.push(EditOp::Del);
            i -= 1;
        } else {
            ops.push(EditOp::Ins);
            j -= 1;
        }
    }
    ops.reverse();
    let count = |k: EditOp| ops.iter().filter(|&&o| o == k).count();
    let (substitutions, deletions, insertions) =
        (count(EditOp::Sub), count(EditOp::Del), count(EditOp::Ins));
    Alignment {
        wer: rate(substitutions + deletions + insertions, n),
        ops,
        substitutions,
        deletions,
        insertions,
        ref_len: n,
    }
}

/// Word-level alignment of two whitespace-separated strings.
pub fn word_alignment(reference: &str, hyp: &str) -> Alignment {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hyp.split_whitespace().collect();
    align(&r, &h)
}

/// Character-level alignment, ignoring no characters.
pub fn char_alignment(reference: &str, hyp: &str) -> Alignment {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hyp.chars().collect();
    align(&r, &h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CerResult {
    pub matched: usize,
    pub substituted: usize,
    pub deleted: usize,
    pub inserted: usize,
    pub ref_len: usize,
    /// Percentage. With an empty reference this is `inserted × 100`.
    pub cer: f64,
}

impl CerResult {
    pub fn errors(&self) -> usize {
        self.substituted + self.deleted + self.inserted
    }

    pub fn empty_reference(&self) -> bool {
        self.ref_len == 0
    }
}

/// Concept error rate ignoring label order.
///
/// Matches are the multiset intersection; leftovers pair up as substitutions,
/// the rest are deletions (reference side) or insertions (hypothesis side).
pub fn cer<S: Ord>(reference: &[S], hyp: &[S]) -> CerResult {
    let mut counts: BTreeMap<&S, (usize, usize)> = BTreeMap::new();
    for r in reference {
        counts.entry(r).or_default().0 += 1;
    }
    for h in hyp {
        counts.entry(h).or_default().1 += 1;
    }
    let matched: usize = counts.values().map(|&(r, h)| r.min(h)).sum();
    let ref_left = reference.len() - matched;
    let hyp_left = hyp.len() - matched;
    let substituted = ref_left.min(hyp_left);
    let deleted = ref_left - substituted;
    let inserted = hyp_left - substituted;
    CerResult {
        matched,
        substituted,
        deleted,
        inserted,
        ref_len: reference.len(),
        cer: rate(substituted + deleted + inserted, reference.len()),
    }
}

/// Concept error rate over an utterance pair, by label or by label and value.
pub fn utterance_cer(reference: &Utterance, hyp: &Utterance, with_values: bool) -> CerResult {
    if with_values {
        let key = |u: &Utterance| -> Vec<(String, String)> {
            u.slots
                .iter()
                .map(|s| (s.label.clone(), s.value.clone()))
                .collect()
        };
        cer(&key(reference), &key(hyp))
    } else {
        cer(&reference.slot_labels(), &hyp.slot_labels())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: ClassCounts) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest intent counts with micro and macro averages (fractions in [0, 1]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentConfusion {
    pub per_class: BTreeMap<String, ClassCounts>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub n: usize,
}

impl IntentConfusion {
    pub fn from_pairs<R: AsRef<str>, H: AsRef<str>>(
        pairs: &[(R, H)],
    ) -> Result<IntentConfusion, MetricsError> {
        if pairs.is_empty() {
            return Err(MetricsError::EmptyPairs);
        }
        let mut per_class: BTreeMap<String, ClassCounts> = BTreeMap::new();
        for (r, h) in pairs {
            let (r, h) = (r.as_ref(), h.as_ref());
            if r == h {
                per_class.entry(r.to_string()).or_default().tp += 1;
            } else {
                per_class.entry(r.to_string()).or_default().fn_ += 1;
                per_class.entry(h.to_string()).or_default().fp += 1;
            }
        }
        let total = per_class.values().fold(ClassCounts::default(), |acc, c| ClassCounts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        });
        let micro = Prf::from_counts(total);
        let scored: Vec<Prf> = per_class.values().map(|&c| Prf::from_counts(c)).collect();
        let k = scored.len() as f64;
        let precision = scored.iter().map(|s| s.precision).sum::<f64>() / k;
        let recall = scored.iter().map(|s| s.recall).sum::<f64>() / k;
        let macro_f1 = scored.iter().map(|s| s.f1).sum::<f64>() / k;
        Ok(IntentConfusion {
            per_class,
            micro,
            macro_: Prf {
                precision,
                recall,
                f1: macro_f1,
            },
            n: pairs.len(),
        })
    }
}

/// Per-utterance scores; the JSONL record consumed by correlation studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub id: String,
    pub wer: f64,
    pub ref_words: usize,
    pub word_errors: usize,
    pub cer: f64,
    pub ref_concepts: usize,
    pub concept_errors: usize,
    pub ref_intent: String,
    pub hyp_intent: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl UtteranceScore {
    /// Meta keys of both sides are kept; the reference wins on conflicts.
    pub fn compute(reference: &Utterance, hyp: &Utterance, with_values: bool) -> UtteranceScore {
        let a = align(&reference.tokens, &hyp.tokens);
        let c = utterance_cer(reference, hyp, with_values);
        UtteranceScore {
            id: reference.id.clone(),
            wer: a.wer,
            ref_words: a.ref_len,
            word_errors: a.errors(),
            cer: c.cer,
            ref_concepts: c.ref_len,
            concept_errors: c.errors(),
            ref_intent: reference.intent.clone(),
            hyp_intent: hyp.intent.clone(),
            meta: hyp
                .meta
                .iter()
                .chain(&reference.meta)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Looks up a numeric score by name: `wer`, `cer`, `ref_words`, `ref_concepts`,
    /// `word_errors`, `concept_errors`.
    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "wer" => self.wer,
            "cer" => self.cer,
            "ref_words" => self.ref_words as f64,
            "ref_concepts" => self.ref_concepts as f64,
            "word_errors" => self.word_errors as f64,
            "concept_errors" => self.concept_errors as f64,
            _ => return None,
        })
    }
}

/// Pairs reference and hypothesis utterances by id, in reference order.
pub fn pair_by_id<'a>(
    refs: &'a [Utterance],
    hyps: &'a [Utterance],
) -> Result<Vec<(&'a Utterance, &'a Utterance)>, MetricsError> {
    let mut by_id: BTreeMap<&str, &Utterance> = BTreeMap::new();
    for h in hyps {
        if by_id.insert(h.id.as_str(), h).is_some() {
            return Err(MetricsError::DuplicateId(h.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        if !seen.insert(r.id.as_str()) {
            return Err(MetricsError::DuplicateId(r.id.clone()));
        }
        let h = by_id
            .get(r.id.as_str())
            .ok_or_else(|| MetricsError::MissingHypothesis(r.id.clone()))?;
        out.push((r, *h));
    }
    if let Some(extra) = hyps.iter().find(|h| !seen.contains(h.id.as_str())) {
        return Err(MetricsError::UnexpectedHypothesis(extra.id.clone()));
    }
    Ok(out)
}

/// Scores every reference utterance against the hypothesis with the same id.
pub fn score_corpus(
    refs: &[Utterance],
    hyps: &[Utterance],
    with_values: bool,
) -> Result<Vec<UtteranceScore>, MetricsError> {
    Ok(pair_by_id(refs, hyps)?
        .into_iter()
        .map(|(r, h)| UtteranceScore::compute(r, h, with_values))
        .collect())
}

/// One line of an evaluation report. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub group: String,
    pub wer: f64,
    pub cer: f64,
    pub f1: f64,
    pub macro_f1: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

pub const ALL_GROUP: &str = "All";

impl EvalReport {
    /// Aggregates per-utterance scores.
    ///
    /// WER and CER are pooled: total errors over total reference items.
    /// Utterances without reference concepts do not contribute to CER.
    /// With `group_by`, one row per distinct value of that meta key is emitted
    /// (utterances lacking the key go to `-`), followed by an `All` row.
    pub fn from_scores(model: &str, scores: &[UtteranceScore], group_by: Option<&str>) -> EvalReport {
        let mut rows = Vec::new();
        if let Some(key) = group_by {
            let mut groups: BTreeMap<&str, Vec<&UtteranceScore>> = BTreeMap::new();
            for s in scores {
                let g = s.meta.get(key).map(String::as_str).unwrap_or("-");
                groups.entry(g).or_default().push(s);
            }
            for (g, members) in groups {
                rows.push(Self::row(model, g, &members));
            }
        }
        let all: Vec<&UtteranceScore> = scores.iter().collect();
        rows.push(Self::row(model, ALL_GROUP, &all));
        EvalReport { rows }
    }

    fn row(model: &str, group: &str, scores: &[&UtteranceScore]) -> ReportRow {
        let words: usize = scores.iter().map(|s| s.ref_words).sum();
        let word_errors: usize = scores.iter().map(|s| s.word_errors).sum();
        let concepts: usize = scores.iter().map(|s| s.ref_concepts).sum();
        let concept_errors: usize = scores
            .iter()
            .filter(|s| s.ref_concepts > 0)
            .map(|s| s.concept_errors)
            .sum();
        let pairs: Vec<(&str, &str)> = scores
            .iter()
            .map(|s| (s.ref_intent.as_str(), s.hyp_intent.as_str()))
            .collect();
        let (f1, macro_f1) = match IntentConfusion::from_pairs(&pairs) {
            Ok(c) => (c.micro.f1 * 100.0, c.macro_.f1 * 100.0),
            Err(_) => (0.0, 0.0),
        };
        let pooled = |e: usize, n: usize| if n == 0 { 0.0 } else { e as f64 / n as f64 * 100.0 };
        ReportRow {
            model: model.to_string(),
            group: group.to_string(),
            wer: pooled(word_errors, words),
            cer: pooled(concept_errors, concepts),
            f1,
            macro_f1,
            n: scores.len(),
        }
    }

    pub fn all(&self) -> &ReportRow {
        self.rows.last().expect("report always has an All row")
    }

    /// Tab-separated table with columns Model, Group, WER, CER, F1, N.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Model\tGroup\tWER\tCER\tF1\tN\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{}",
                r.model, r.group, r.wer, r.cer, r.f1, r.n
            );
        }
        out
    }
}

/// Scores a hypothesis corpus and aggregates it in one step.
pub fn corpus_report(
    model: &str,
    refs: &[Utterance],
    hyps: &[Utterance],
    group_by: Option<&str>,
    with_values: bool,
) -> Result<EvalReport, MetricsError> {
    let scores = score_corpus(refs, hyps, with_values)?;
    Ok(EvalReport::from_scores(model, &scores, group_by))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn word_alignment_counts() {
        let a = word_alignment("allume la lumière", "allume les lumières");
        assert_eq!((a.substitutions, a.deletions, a.insertions, a.ref_len), (2, 0, 0, 3));
        assert!(close(a.wer, 200.0 / 3.0));
        assert_eq!(a.ops, [EditOp::Match, EditOp::Sub, EditOp::Sub]);
    }

    #[test]
    fn trivial_alignments() {
        let a = word_alignment("a b c", "a b c");
        assert_eq!(a.wer, 0.0);
        let a = word_alignment("a b c", "");
        assert_eq!((a.deletions, a.wer), (3, 100.0));
        let a = word_alignment("", "");
        assert!(a.empty_reference());
        assert_eq!(a.wer, 0.0);
        let a = word_alignment("", "x y");
        assert_eq!((a.insertions, a.wer), (2, 200.0));
    }

    #[test]
    fn backtrace_takes_substitution_first_from_the_end() {
        let a = align(&['a', 'b'], &['c']);
        assert_eq!(a.ops, [EditOp::Del, EditOp::Sub]);
        let a = align(&['a'], &['b', 'c']);
        assert_eq!(a.ops, [EditOp::Ins, EditOp::Sub]);
    }

    #[test]
    fn replay_reconstructs_hypothesis() {
        let r: Vec<char> = "kitten".chars().collect();
        let h: Vec<char> = "sitting".chars().collect();
        let a = align(&r, &h);
        assert_eq!(a.errors(), 3);
        assert_eq!(a.replay(&r, &h), h);
    }

    #[test]
    fn lost_concept_cer() {
        let c = cer(&["action", "device"], &["action"]);
        assert_eq!((c.matched, c.deleted, c.substituted, c.inserted), (1, 1, 0, 0));
        assert_eq!(c.cer, 50.0);
        assert_eq!(cer(&["action", "device"], &["device", "action"]).cer, 0.0);
        let c = cer(&["action", "device"], &["action", "location-room"]);
        assert_eq!((c.matched, c.substituted), (1, 1));
        assert_eq!(c.cer, 50.0);
        let c = cer::<&str>(&[], &["action"]);
        assert!(c.empty_reference());
        assert_eq!(c.cer, 100.0);
    }

    #[test]
    fn cer_with_values() {
        let r = Utterance::from_text("x", "allume la lumière", "set_device")
            .with_slot("action", 0, 1)
            .with_slot("device", 1, 3);
        let h = Utterance::from_text("x", "allume la lampe", "set_device")
            .with_slot("action", 0, 1)
            .with_slot("device", 1, 3);
        assert_eq!(utterance_cer(&r, &h, false).cer, 0.0);
        assert_eq!(utterance_cer(&r, &h, true).cer, 50.0);
    }

    #[test]
    fn intent_scores() {
        let c = IntentConfusion::from_pairs(&[("a", "a"), ("b", "b")]).unwrap();
        assert_eq!(c.micro.f1, 1.0);
        assert_eq!(c.macro_.f1, 1.0);

        let pairs = [("a", "a"), ("a", "a"), ("b", "a"), ("b", "a")];
        let c = IntentConfusion::from_pairs(&pairs).unwrap();
        assert!(close(c.micro.f1, 0.5));
        assert_eq!(c.per_class["a"], ClassCounts { tp: 2, fp: 2, fn_: 0 });
        assert_eq!(c.per_class["b"], ClassCounts { tp: 0, fp: 0, fn_: 2 });
        // class a: P=0.5 R=1
        assert!(close(Prf::from_counts(c.per_class["a"]).f1, 2.0 / 3.0));
        assert!(close(c.macro_.f1, 1.0 / 3.0));

        assert_eq!(
            IntentConfusion::from_pairs::<&str, &str>(&[]).unwrap_err(),
            MetricsError::EmptyPairs
        );
    }

    fn corpus() -> Vec<Utterance> {
        vec![
            Utterance::from_text("1", "allume la lumière", "set_device")
                .with_slot("action", 0, 1)
                .with_slot("device", 1, 3)
                .with_meta("noise", "V"),
            Utterance::from_text("2", "ferme la porte", "set_device")
                .with_slot("action", 0, 1)
                .with_slot("device", 1, 3)
                .with_meta("noise", "F"),
            Utterance::from_text("3", "quelle heure est-il", "get_world_property")
                .with_slot("world-property", 1, 2)
                .with_meta("noise", "RT"),
        ]
    }

    #[test]
    fn identical_corpora_are_perfect() {
        let c = corpus();
        let r = corpus_report("ref", &c, &c, Some("noise"), false).unwrap();
        let groups: Vec<&str> = r.rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, ["F", "RT", "V", "All"]);
        for row in &r.rows {
            assert_eq!((row.wer, row.cer, row.f1), (0.0, 0.0, 100.0));
        }
        assert_eq!(r.all().n, 3);
        let tsv = r.to_tsv();
        assert!(tsv.starts_with("Model\tGroup\tWER\tCER\tF1\tN\n"));
        assert!(tsv.contains("ref\tAll\t0.00\t0.00\t100.00\t3\n"));
    }

    #[test]
    fn single_utterance_report_equals_utterance_scores() {
        let r = vec![corpus().remove(0)];
        let h = vec![Utterance::from_text("1", "allume les lumières", "set_device").with_slot("action", 0, 1)];
        let scores = score_corpus(&r, &h, false).unwrap();
        let report = EvalReport::from_scores("m", &scores, None);
        assert_eq!(report.rows.len(), 1);
        assert!(close(report.all().wer, scores[0].wer));
        assert_eq!(report.all().cer, scores[0].cer);
        assert_eq!(report.all().cer, 50.0);
    }

    #[test]
    fn id_mismatches() {
        let c = corpus();
        assert_eq!(
            pair_by_id(&c, &c[..2]).unwrap_err(),
            MetricsError::MissingHypothesis("3".into())
        );
        assert_eq!(
            pair_by_id(&c[..2], &c).unwrap_err(),
            MetricsError::UnexpectedHypothesis("3".into())
        );
        let dup = vec![c[0].clone(), c[0].clone()];
        assert!(matches!(pair_by_id(&c, &dup), Err(MetricsError::DuplicateId(_))));
    }

    #[test]
    fn zero_concept_utterances_skip_cer() {
        let r = vec![Utterance::from_text("0", "bonjour", "none"), corpus().remove(0)];
        let mut h = r.clone();
        h[0] = Utterance::from_text("0", "bonjour", "none").with_slot("device", 0, 1);
        let report = corpus_report("m", &r, &h, None, false).unwrap();
        assert_eq!(report.all().cer, 0.0);
    }
}
