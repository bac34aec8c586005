//! Seeded noisy channel over enriched transcriptions, and the WER/CER correlation study built on it.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{lex, CodecError, EnrichedRecord, EnrichedTranscript, Lexeme, SymbolTable};
use crate::corpus::Utterance;
use crate::metrics::UtteranceScore;
use crate::stats::CorrelationReport;

/// Shipped sweep of noise profiles for the demo correlation study.
pub const DEMO_SWEEP: &str = include_str!("../data/noise_sweep.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("{field} = {value} is not a probability")]
    BadProbability { field: &'static str, value: f64 },
    #[error("p_sub + p_del = {0} exceeds 1")]
    SubDelOverflow(f64),
    #[error("confusion word {0:?} contains whitespace or a delimiter symbol")]
    ReservedWord(String),
    #[error("the study needs at least {needed} utterances with a concept, got {got}")]
    TooFewUtterances { needed: usize, got: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Per-token corruption rates and the substitution pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub p_sub: f64,
    #[serde(default)]
    pub p_del: f64,
    #[serde(default)]
    pub p_ins: f64,
    #[serde(default)]
    pub symbol_del: f64,
    /// Substitution and insertion candidates; empty means the reference corpus vocabulary.
    #[serde(default)]
    pub confusion_vocab: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseProfile {
    pub fn clean(seed: u64) -> Self {
        NoiseProfile {
            name: "clean".into(),
            p_sub: 0.0,
            p_del: 0.0,
            p_ins: 0.0,
            symbol_del: 0.0,
            confusion_vocab: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self, st: &SymbolTable) -> Result<(), ChannelError> {
        for (field, value) in [
            ("p_sub", self.p_sub),
            ("p_del", self.p_del),
            ("p_ins", self.p_ins),
            ("symbol_del", self.symbol_del),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ChannelError::BadProbability { field, value });
            }
        }
        if self.p_sub + self.p_del > 1.0 {
            return Err(ChannelError::SubDelOverflow(self.p_sub + self.p_del));
        }
        if let Some(w) = self
            .confusion_vocab
            .iter()
            .find(|w| w.is_empty() || w.chars().any(|c| c.is_whitespace() || st.is_symbol(c)))
        {
            return Err(ChannelError::ReservedWord(w.clone()));
        }
        Ok(())
    }

    /// Expected number of word events per word token.
    pub fn word_event_rate(&self) -> f64 {
        self.p_sub + self.p_del + self.p_ins
    }
}

/// Loads a sweep: a JSON list of profiles.
pub fn parse_sweep(json: &str) -> Result<Vec<NoiseProfile>, serde_json::Error> {
    serde_json::from_str(json)
}

/// Per-utterance generator, independent of corpus order.
pub fn utterance_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Counts of the events applied to one transcription.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionEvents {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub symbol_deletions: usize,
}

impl CorruptionEvents {
    pub fn word_events(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Word runs in the vocabulary of a set of transcriptions, with delimiters stripped.
pub fn transcript_vocabulary<'a>(
    transcripts: impl IntoIterator<Item = &'a EnrichedTranscript>,
    st: &SymbolTable,
) -> Vec<String> {
    let mut vocab = BTreeSet::new();
    for t in transcripts {
        for (lexeme, _) in lex(t.as_str(), st) {
            if let Lexeme::Word(w) = lexeme {
                vocab.insert(w);
            }
        }
    }
    vocab.into_iter().collect()
}

/// Corrupts one transcription with an explicit generator.
pub fn corrupt_transcript<R: Rng>(
    t: &EnrichedTranscript,
    profile: &NoiseProfile,
    vocab: &[String],
    st: &SymbolTable,
    rng: &mut R,
) -> (EnrichedTranscript, CorruptionEvents) {
    let mut events = CorruptionEvents::default();
    let mut out: Vec<(String, bool)> = Vec::new();
    let mut pending_space = false;
    let push = |out: &mut Vec<(String, bool)>, text: String, space: bool, pending: &mut bool| {
        out.push((text, space || *pending));
        *pending = false;
    };
    for (lexeme, space) in lex(t.as_str(), st) {
        match lexeme {
            Lexeme::Symbol(c) => {
                if rng.gen_bool(profile.symbol_del) {
                    events.symbol_deletions += 1;
                    pending_space |= space;
                } else {
                    push(&mut out, c.to_string(), space, &mut pending_space);
                }
            }
            Lexeme::Word(w) => {
                let u: f64 = rng.gen();
                if u < profile.p_del {
                    events.deletions += 1;
                    pending_space |= space;
                } else if u < profile.p_del + profile.p_sub {
                    let candidates: Vec<&String> = vocab.iter().filter(|v| **v != w).collect();
                    match candidates.choose(rng) {
                        Some(r) => {
                            events.substitutions += 1;
                            push(&mut out, (*r).clone(), space, &mut pending_space);
                        }
                        None => push(&mut out, w, space, &mut pending_space),
                    }
                } else {
                    push(&mut out, w, space, &mut pending_space);
                }
                if rng.gen_bool(profile.p_ins) {
                    if let Some(r) = vocab.choose(rng) {
                        events.insertions += 1;
                        push(&mut out, r.clone(), true, &mut pending_space);
                    }
                }
            }
        }
    }
    let mut text = String::new();
    for (piece, space) in out {
        if space && !text.is_empty() {
            text.push(' ');
        }
        text.push_str(&piece);
    }
    (EnrichedTranscript::new(text), events)
}

/// Corrupts a corpus; each record's generator is keyed by (seed, id).
///
/// A non-empty profile name is recorded under the `noise` meta key.
pub fn corrupt(
    corpus: &[EnrichedRecord],
    profile: &NoiseProfile,
    st: &SymbolTable,
) -> Result<Vec<EnrichedRecord>, ChannelError> {
    profile.validate(st)?;
    let vocab = if profile.confusion_vocab.is_empty() {
        transcript_vocabulary(corpus.iter().map(|r| &r.enriched), st)
    } else {
        let set: BTreeSet<String> = profile.confusion_vocab.iter().cloned().collect();
        set.into_iter().collect()
    };
    Ok(corpus
        .iter()
        .map(|r| {
            let mut rng = utterance_rng(profile.seed, &r.id);
            let (enriched, _) = corrupt_transcript(&r.enriched, profile, &vocab, st, &mut rng);
            let mut meta = r.meta.clone();
            if !profile.name.is_empty() {
                meta.insert("noise".into(), profile.name.clone());
            }
            EnrichedRecord {
                id: r.id.clone(),
                enriched,
                meta,
            }
        })
        .collect())
}

/// Encodes an annotated corpus and corrupts it.
pub fn corrupt_utterances(
    corpus: &[Utterance],
    profile: &NoiseProfile,
    st: &SymbolTable,
) -> Result<Vec<EnrichedRecord>, ChannelError> {
    let records = corpus
        .iter()
        .map(|u| EnrichedRecord::from_utterance(u, st))
        .collect::<Result<Vec<_>, _>>()?;
    corrupt(&records, profile, st)
}

pub const MIN_STUDY_UTTERANCES: usize = 100;

/// Correlation of per-utterance WER and CER under one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub profile: String,
    pub n: usize,
    pub mean_wer: f64,
    pub mean_cer: f64,
    /// `None` when either score is constant under the profile.
    pub report: Option<CorrelationReport>,
}

/// Per-utterance scores of a reference corpus against its corrupted version.
pub fn noisy_scores(
    reference: &[Utterance],
    profile: &NoiseProfile,
    st: &SymbolTable,
) -> Result<Vec<UtteranceScore>, ChannelError> {
    let hyps = corrupt_utterances(reference, profile, st)?;
    Ok(reference
        .iter()
        .zip(&hyps)
        .map(|(r, h)| UtteranceScore::compute(r, &h.decode(st).utterance, false))
        .collect())
}

/// Runs every profile of a sweep and correlates per-utterance WER with CER.
pub fn wer_cer_study(
    reference: &[Utterance],
    profiles: &[NoiseProfile],
    st: &SymbolTable,
) -> Result<Vec<StudyRow>, ChannelError> {
    let with_concepts: Vec<Utterance> = reference.iter().filter(|u| !u.slots.is_empty()).cloned().collect();
    if with_concepts.len() < MIN_STUDY_UTTERANCES {
        return Err(ChannelError::TooFewUtterances {
            needed: MIN_STUDY_UTTERANCES,
            got: with_concepts.len(),
        });
    }
    profiles
        .iter()
        .map(|p| {
            let scores = noisy_scores(&with_concepts, p, st)?;
            let wer: Vec<f64> = scores.iter().map(|s| s.wer).collect();
            let cer: Vec<f64> = scores.iter().map(|s| s.cer).collect();
            let report = match CorrelationReport::compute(&wer, &cer) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("profile `{}`: {e}", p.name);
                    None
                }
            };
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok(StudyRow {
                profile: p.name.clone(),
                n: scores.len(),
                mean_wer: mean(&wer),
                mean_cer: mean(&cer),
                report,
            })
        })
        .collect()
}

/// Tab-separated study table: profile, n, mean WER and CER, then r and r_s with markers.
pub fn study_to_tsv(rows: &[StudyRow]) -> String {
    let mut out = String::from("profile\tn\tmean_wer\tmean_cer\tr\tr_s\tp_r\tp_rs\n");
    for row in rows {
        let cells = match &row.report {
            Some(r) => format!(
                "{:.2}{}\t{:.2}{}\t{:.3e}\t{:.3e}",
                r.pearson.coef, r.pearson.stars, r.spearman.coef, r.spearman.stars, r.pearson.p, r.spearman.p
            ),
            None => "-\t-\t-\t-".to_string(),
        };
        out.push_str(&format!(
            "{}\t{}\t{:.2}\t{:.2}\t{cells}\n",
            row.profile, row.n, row.mean_wer, row.mean_cer
        ));
    }
    out
}
