//! Add-k smoothed n-gram language models, perplexity and OOV counts.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("smoothing constant must be positive and finite, got {0}")]
    BadSmoothing(f64),
    #[error("test corpus has no scorable token")]
    EmptyTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
    /// Predict an end-of-sentence event after each sentence.
    pub sentence_end: bool,
    /// Reserve probability mass for unseen words. Without it, OOV test tokens are skipped.
    pub unk: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 3,
            k: 1.0,
            sentence_end: true,
            unk: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    config: LmConfig,
    vocab: BTreeSet<String>,
    successors: HashMap<Vec<String>, HashMap<String, usize>>,
    context_totals: HashMap<Vec<String>, usize>,
}

impl NGramModel {
    pub fn train<S: AsRef<str>>(corpus: &[Vec<S>], config: LmConfig) -> Result<NGramModel, LmError> {
        if config.order == 0 {
            return Err(LmError::ZeroOrder);
        }
        if !(config.k > 0.0 && config.k.is_finite()) {
            return Err(LmError::BadSmoothing(config.k));
        }
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let mut model = NGramModel {
            config,
            vocab: BTreeSet::new(),
            successors: HashMap::new(),
            context_totals: HashMap::new(),
        };
        for sentence in corpus {
            let words: Vec<&str> = sentence.iter().map(AsRef::as_ref).collect();
            model.vocab.extend(words.iter().map(|w| w.to_string()));
            for (context, word) in model.events(&words) {
                *model
                    .successors
                    .entry(context.clone())
                    .or_default()
                    .entry(word)
                    .or_default() += 1;
                *model.context_totals.entry(context).or_default() += 1;
            }
        }
        Ok(model)
    }

    /// (context, predicted word) pairs of one sentence, with boundary padding.
    fn events(&self, words: &[&str]) -> Vec<(Vec<String>, String)> {
        let n = self.config.order;
        let mut padded: Vec<String> = vec![BOS.to_string(); n - 1];
        padded.extend(words.iter().map(|w| w.to_string()));
        if self.config.sentence_end {
            padded.push(EOS.to_string());
        }
        (n - 1..padded.len())
            .map(|i| (padded[i + 1 - n..i].to_vec(), padded[i].clone()))
            .collect()
    }

    pub fn config(&self) -> LmConfig {
        self.config
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Everything the model can predict: vocabulary, plus UNK and end-of-sentence when enabled.
    pub fn outcomes(&self) -> Vec<String> {
        let mut out: Vec<String> = self.vocab.iter().cloned().collect();
        if self.config.unk {
            out.push(UNK.to_string());
        }
        if self.config.sentence_end {
            out.push(EOS.to_string());
        }
        out
    }

    fn outcome_count(&self) -> usize {
        self.vocab.len() + usize::from(self.config.unk) + usize::from(self.config.sentence_end)
    }

    fn map_word<'a>(&self, w: &'a str) -> &'a str {
        if self.config.unk && w != EOS && w != BOS && !self.vocab.contains(w) {
            UNK
        } else {
            w
        }
    }

    /// Smoothed P(word | context); `context` holds the previous `order − 1` tokens.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let context: Vec<String> = context.iter().map(|w| self.map_word(w).to_string()).collect();
        let word = self.map_word(word);
        let total = self.context_totals.get(&context).copied().unwrap_or(0);
        let count = self
            .successors
            .get(&context)
            .and_then(|m| m.get(word))
            .copied()
            .unwrap_or(0);
        (count as f64 + self.config.k) / (total as f64 + self.config.k * self.outcome_count() as f64)
    }

    /// Every context seen in training.
    pub fn contexts(&self) -> impl Iterator<Item = &Vec<String>> {
        self.context_totals.keys()
    }

    pub fn perplexity<S: AsRef<str>>(&self, test: &[Vec<S>]) -> Result<Perplexity, LmError> {
        let mut log_sum = 0.0;
        let mut scored = 0usize;
        let mut skipped = 0usize;
        for sentence in test {
            let words: Vec<&str> = sentence.iter().map(AsRef::as_ref).collect();
            for (context, word) in self.events(&words) {
                if !self.config.unk && word != EOS && !self.vocab.contains(&word) {
                    skipped += 1;
                    continue;
                }
                let ctx: Vec<&str> = context.iter().map(String::as_str).collect();
                log_sum += self.prob(&ctx, &word).ln();
                scored += 1;
            }
        }
        if scored == 0 {
            return Err(LmError::EmptyTest);
        }
        Ok(Perplexity {
            perplexity: (-log_sum / scored as f64).exp(),
            scored_tokens: scored,
            skipped_oov: skipped,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perplexity {
    pub perplexity: f64,
    pub scored_tokens: usize,
    pub skipped_oov: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovCount {
    pub types: usize,
    pub tokens: usize,
}

/// Test word types and tokens absent from the training vocabulary.
pub fn oov_count<S: AsRef<str>>(train_vocab: &BTreeSet<String>, test: &[Vec<S>]) -> OovCount {
    let mut types = BTreeSet::new();
    let mut tokens = 0;
    for w in test.iter().flatten().map(AsRef::as_ref) {
        if !train_vocab.contains(w) {
            tokens += 1;
            types.insert(w);
        }
    }
    OovCount {
        types: types.len(),
        tokens,
    }
}

/// One corpus-comparison row: size of the test corpus and how well the training model covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub utterances: usize,
    pub words: usize,
    pub perplexity: f64,
    pub oov_types: usize,
    pub oov_tokens: usize,
}

impl CorpusStats {
    pub fn compute<S: AsRef<str>, T: AsRef<str>>(
        train: &[Vec<S>],
        test: &[Vec<T>],
        config: LmConfig,
    ) -> Result<CorpusStats, LmError> {
        let model = NGramModel::train(train, config)?;
        let pp = model.perplexity(test)?;
        let oov = oov_count(model.vocab(), test);
        Ok(CorpusStats {
            utterances: test.len(),
            words: test.iter().map(Vec::len).sum(),
            perplexity: pp.perplexity,
            oov_types: oov.types,
            oov_tokens: oov.tokens,
        })
    }

    pub const TSV_HEADER: &'static str = "utterances\twords\tperplexity\toov_types\toov_tokens";

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{:.2}\t{}\t{}",
            self.utterances, self.words, self.perplexity, self.oov_types, self.oov_tokens
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sents(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn config_errors() {
        let c = sents(&["a b"]);
        let cfg = |order, k| LmConfig { order, k, ..LmConfig::default() };
        assert_eq!(NGramModel::train(&c, cfg(0, 1.0)).unwrap_err(), LmError::ZeroOrder);
        assert!(matches!(NGramModel::train(&c, cfg(2, 0.0)), Err(LmError::BadSmoothing(_))));
        assert_eq!(
            NGramModel::train::<String>(&[], LmConfig::default()).unwrap_err(),
            LmError::EmptyCorpus
        );
    }

    #[test]
    fn symmetric_unigram() {
        let m = NGramModel::train(&sents(&["a b"]), LmConfig { order: 1, ..LmConfig::default() }).unwrap();
        assert_eq!(m.prob(&[], "a"), m.prob(&[], "b"));
        // a, b, </s> seen once each; outcomes a, b, <unk>, </s>
        assert!(close(m.prob(&[], "a"), 2.0 / 7.0, 1e-15));
        assert!(close(m.prob(&[], "zzz"), 1.0 / 7.0, 1e-15));
    }

    #[test]
    fn uniform_unigram_perplexity_is_vocab_size() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let cfg = LmConfig {
            order: 1,
            k: 1.0,
            sentence_end: false,
            unk: false,
        };
        let m = NGramModel::train(std::slice::from_ref(&words), cfg).unwrap();
        let test = vec![words[..7].to_vec(), words[3..].to_vec()];
        let pp = m.perplexity(&test).unwrap();
        assert!(close(pp.perplexity, 20.0, 1e-9));
    }

    #[test]
    fn trigram_hand_count() {
        let m = NGramModel::train(&sents(&["a b", "a c"]), LmConfig::default()).unwrap();
        // outcomes: a b c <unk> </s>
        assert!(close(m.prob(&[BOS, BOS], "a"), 3.0 / 7.0, 1e-15));
        assert!(close(m.prob(&[BOS, "a"], "b"), 2.0 / 7.0, 1e-15));
        assert!(close(m.prob(&["a", "b"], EOS), 2.0 / 6.0, 1e-15));
        assert!(close(m.prob(&["b", "a"], "c"), 1.0 / 5.0, 1e-15));
        let pp = m.perplexity(&sents(&["a b"])).unwrap();
        let expected = (3.0f64 / 7.0 * 2.0 / 7.0 * 1.0 / 3.0).powf(-1.0 / 3.0);
        assert!(close(pp.perplexity, expected, 1e-12));
    }

    #[test]
    fn mle_limit_matches_entropy() {
        let train = sents(&["a a b", "a c c"]);
        let cfg = LmConfig {
            order: 1,
            k: 1e-12,
            sentence_end: false,
            unk: false,
        };
        let m = NGramModel::train(&train, cfg).unwrap();
        // frequencies 3/6, 1/6, 2/6
        let h = -(0.5 * 0.5f64.ln() + (1.0 / 6.0) * (1.0f64 / 6.0).ln() + (1.0 / 3.0) * (1.0f64 / 3.0).ln());
        assert!(close(m.perplexity(&train).unwrap().perplexity, h.exp(), 1e-9));
    }

    #[test]
    fn all_oov_test_uses_unk_mass() {
        let m = NGramModel::train(&sents(&["a b c"]), LmConfig { order: 1, ..LmConfig::default() }).unwrap();
        // N = 4 events, outcomes = 5
        let p_unk = 1.0f64 / 9.0;
        let p_eos = 2.0f64 / 9.0;
        let pp = m.perplexity(&sents(&["x y"])).unwrap().perplexity;
        let expected: f64 = (p_unk * p_unk * p_eos).powf(-1.0 / 3.0);
        assert!(close(pp, expected, 1e-12));
    }

    #[test]
    fn distributions_are_normalized() {
        let m = NGramModel::train(&sents(&["a b a c", "b b c", "c"]), LmConfig::default()).unwrap();
        let outcomes = m.outcomes();
        for ctx in m.contexts() {
            let ctx: Vec<&str> = ctx.iter().map(String::as_str).collect();
            let total: f64 = outcomes.iter().map(|w| m.prob(&ctx, w)).sum();
            assert!(close(total, 1.0, 1e-12), "{ctx:?}");
        }
    }

    #[test]
    fn training_data_beats_disjoint_data() {
        let train = sents(&["allume la lampe", "éteins la lampe"]);
        let m = NGramModel::train(&train, LmConfig::default()).unwrap();
        let own = m.perplexity(&train).unwrap().perplexity;
        let other = m.perplexity(&sents(&["quelle heure est-il"])).unwrap().perplexity;
        assert!(own < other);
    }

    #[test]
    fn oov_counts() {
        let vocab: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(oov_count(&vocab, &sents(&["a b a"])), OovCount::default());
        assert_eq!(oov_count(&vocab, &sents(&["x y x"])), OovCount { types: 2, tokens: 3 });
        assert_eq!(oov_count(&vocab, &sents(&["a x", "x z b"])), OovCount { types: 2, tokens: 3 });
    }

    #[test]
    fn stats_row() {
        let s = CorpusStats::compute(&sents(&["a b"]), &sents(&["a b", "c"]), LmConfig::default()).unwrap();
        assert_eq!((s.utterances, s.words, s.oov_types, s.oov_tokens), (2, 3, 1, 1));
        assert!(s.to_tsv_row().starts_with("2\t3\t"));
    }
}
