//! Staged training slices for concept-then-intent transfer learning.
//!
//! | stage     | content                                                       |
//! |-----------|---------------------------------------------------------------|
//! | data2     | whole corpus, concept delimiters only                         |
//! | data3     | utterances with an under-represented concept, duplicated      |
//! | data4     | whole corpus, intent and concept delimiters                   |
//! | data4_star| data4 with out-of-slot words masked                           |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode, encode_concepts, mask_utterance, CodecError, EnrichedRecord, SymbolTable};
use crate::corpus::Utterance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurriculumError {
    #[error("duplication factor must be at least 1")]
    ZeroFactor,
    #[error("threshold must be a non-negative number, got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Occurrences of each slot label.
pub fn concept_histogram<'a>(corpus: impl IntoIterator<Item = &'a Utterance>) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for u in corpus {
        for s in &u.slots {
            *h.entry(s.label.clone()).or_default() += 1;
        }
    }
    h
}

/// Median label frequency divided by ten.
pub fn default_threshold(histogram: &BTreeMap<String, usize>) -> f64 {
    let mut counts: Vec<usize> = histogram.values().copied().collect();
    if counts.is_empty() {
        return 0.0;
    }
    counts.sort_unstable();
    let n = counts.len();
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
    };
    median / 10.0
}

/// Labels whose frequency is below `threshold`.
pub fn underrepresented(histogram: &BTreeMap<String, usize>, threshold: f64) -> Vec<String> {
    histogram
        .iter()
        .filter(|(_, &c)| (c as f64) < threshold)
        .map(|(l, _)| l.clone())
        .collect()
}

/// Utterances carrying at least one label whose corpus frequency is below `threshold`.
pub fn select_underrepresented(corpus: &[Utterance], threshold: f64) -> Vec<Utterance> {
    let hist = concept_histogram(corpus);
    corpus
        .iter()
        .filter(|u| u.slots.iter().any(|s| (hist[&s.label] as f64) < threshold))
        .cloned()
        .collect()
}

/// Repeats every utterance `factor` times; copies after the first get ids `<id>~<k>`.
pub fn duplicate_balance(slice: &[Utterance], factor: usize) -> Result<Vec<Utterance>, CurriculumError> {
    if factor == 0 {
        return Err(CurriculumError::ZeroFactor);
    }
    let mut out = Vec::with_capacity(slice.len() * factor);
    for u in slice {
        out.push(u.clone());
        for k in 2..=factor {
            let mut copy = u.clone();
            copy.id = format!("{}~{k}", u.id);
            out.push(copy);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    /// Labels rarer than this are under-represented; `None` uses [`default_threshold`].
    #[serde(default)]
    pub concept_frequency_threshold: Option<f64>,
    #[serde(default = "default_factor")]
    pub duplication_factor: usize,
    /// Free-form training settings copied into the manifest.
    #[serde(default)]
    pub training_settings: BTreeMap<String, serde_json::Value>,
}

fn default_factor() -> usize {
    3
}

impl Default for StagePlan {
    fn default() -> Self {
        StagePlan {
            concept_frequency_threshold: None,
            duplication_factor: default_factor(),
            training_settings: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub name: String,
    pub utterances: usize,
    pub concept_histogram: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub threshold: f64,
    pub underrepresented: Vec<String>,
    pub duplication_factor: usize,
    pub stages: Vec<StageSummary>,
    pub training_settings: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stages {
    pub data2: Vec<EnrichedRecord>,
    pub data3: Vec<EnrichedRecord>,
    pub data4: Vec<EnrichedRecord>,
    pub data4_star: Vec<EnrichedRecord>,
    pub manifest: StageManifest,
}

impl Stages {
    pub const NAMES: [&'static str; 4] = ["data2", "data3", "data4", "data4_star"];

    pub fn by_name(&self) -> [(&'static str, &[EnrichedRecord]); 4] {
        [
            ("data2", &self.data2),
            ("data3", &self.data3),
            ("data4", &self.data4),
            ("data4_star", &self.data4_star),
        ]
    }
}

fn records(
    corpus: &[Utterance],
    st: &SymbolTable,
    f: impl Fn(&Utterance, &SymbolTable) -> Result<crate::codec::EnrichedTranscript, CodecError>,
) -> Result<Vec<EnrichedRecord>, CodecError> {
    corpus
        .iter()
        .map(|u| {
            Ok(EnrichedRecord {
                id: u.id.clone(),
                enriched: f(u, st)?,
                meta: u.meta.clone(),
            })
        })
        .collect()
}

/// Builds the four stage slices and their manifest.
pub fn stage_emit(corpus: &[Utterance], plan: &StagePlan, st: &SymbolTable) -> Result<Stages, CurriculumError> {
    if plan.duplication_factor == 0 {
        return Err(CurriculumError::ZeroFactor);
    }
    let hist = concept_histogram(corpus);
    let threshold = plan
        .concept_frequency_threshold
        .unwrap_or_else(|| default_threshold(&hist));
    if threshold.is_nan() || threshold < 0.0 {
        return Err(CurriculumError::BadThreshold(threshold));
    }
    let rare = select_underrepresented(corpus, threshold);
    let data3_utts = duplicate_balance(&rare, plan.duplication_factor)?;
    let masked: Vec<Utterance> = corpus.iter().map(|u| mask_utterance(u, st.mask())).collect();

    let data2 = records(corpus, st, encode_concepts)?;
    let data3 = records(&data3_utts, st, encode_concepts)?;
    let data4 = records(corpus, st, encode)?;
    let data4_star = records(&masked, st, encode)?;

    let summary = |name: &str, utts: &[Utterance]| StageSummary {
        name: name.to_string(),
        utterances: utts.len(),
        concept_histogram: concept_histogram(utts),
    };
    let stages = vec![
        summary("data2", corpus),
        summary("data3", &data3_utts),
        summary("data4", corpus),
        summary("data4_star", &masked),
    ];
    for s in &stages {
        if s.utterances == 0 {
            log::warn!("stage {} is empty", s.name);
        }
    }
    Ok(Stages {
        data2,
        data3,
        data4,
        data4_star,
        manifest: StageManifest {
            threshold,
            underrepresented: underrepresented(&hist, threshold),
            duplication_factor: plan.duplication_factor,
            stages,
            training_settings: plan.training_settings.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::extract_symbol_sequence;

    fn toy() -> Vec<Utterance> {
        let mk = |id: &str, text: &str, slots: &[(&str, usize, usize)]| {
            slots
                .iter()
                .fold(Utterance::from_text(id, text, "set_device"), |u, &(l, s, e)| u.with_slot(l, s, e))
        };
        vec![
            mk("a", "allume la lampe", &[("action", 0, 1), ("device", 1, 3)]),
            mk("b", "ferme la porte", &[("action", 0, 1), ("device", 1, 3)]),
            mk("c", "allume la radio du salon", &[("action", 0, 1), ("device", 1, 3), ("location-room", 3, 5)]),
            mk("d", "monte le store", &[("action", 0, 1), ("device", 1, 3)]),
            Utterance::from_text("e", "bonjour", "none"),
        ]
    }

    #[test]
    fn histogram_and_selection() {
        let c = toy();
        let h = concept_histogram(&c);
        assert_eq!(h["action"], 4);
        assert_eq!(h["location-room"], 1);
        assert!(select_underrepresented(&c, 0.0).is_empty());
        assert_eq!(select_underrepresented(&c, f64::INFINITY).len(), 4);
        let rare: Vec<String> = select_underrepresented(&c, 2.0).into_iter().map(|u| u.id).collect();
        assert_eq!(rare, ["c"]);
    }

    #[test]
    fn default_threshold_is_median_over_ten() {
        let h: BTreeMap<String, usize> = [("a", 10), ("b", 30), ("c", 50)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(default_threshold(&h), 3.0);
        let h2: BTreeMap<String, usize> = [("a", 10), ("b", 30)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert_eq!(default_threshold(&h2), 2.0);
    }

    #[test]
    fn duplication() {
        let c = toy();
        assert_eq!(duplicate_balance(&c, 1).unwrap(), c);
        let d = duplicate_balance(&c, 3).unwrap();
        assert_eq!(d.len(), 15);
        assert_eq!(d[1].id, "a~2");
        assert!(duplicate_balance(&[], 3).unwrap().is_empty());
        assert_eq!(duplicate_balance(&c, 0), Err(CurriculumError::ZeroFactor));
        let labels = |x: &[Utterance]| concept_histogram(x).into_keys().collect::<Vec<_>>();
        assert_eq!(labels(&d), labels(&c));
    }

    #[test]
    fn stages() {
        let st = SymbolTable::default();
        let plan = StagePlan {
            concept_frequency_threshold: Some(2.0),
            ..StagePlan::default()
        };
        let s = stage_emit(&toy(), &plan, &st).unwrap();
        assert_eq!(s.data2[0].enriched.as_str(), "^allume^ }la lampe}");
        assert_eq!(s.data4[0].enriched.as_str(), "@ ^allume^ }la lampe} @");
        assert_eq!(s.data3.len(), 3);
        assert_eq!(s.manifest.underrepresented, ["location-room"]);
        assert_eq!(s.manifest.stages[1].concept_histogram["location-room"], 3);
        for (a, b) in s.data4.iter().zip(&s.data4_star) {
            assert_eq!(extract_symbol_sequence(&a.enriched, &st), extract_symbol_sequence(&b.enriched, &st));
        }
        assert_eq!(s.data4_star[4].enriched.as_str(), "*");
        assert_eq!(stage_emit(&toy(), &plan, &st).unwrap(), s);
    }
}
