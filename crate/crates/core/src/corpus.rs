//! Annotated utterances, the word tokenizer, and JSONL corpus I/O.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Intent label carried by utterances that are not voice commands.
pub const NONE_INTENT: &str = "none";

/// French elided clitics split off the following word (`l'ampoule` -> `l'` `ampoule`).
///
/// `s'` is deliberately absent: `s'il vous plaît` is kept as three tokens.
const CLITICS: &[&str] = &[
    "l'", "d'", "j'", "m'", "t'", "n'", "c'", "qu'", "jusqu'", "lorsqu'", "puisqu'",
];

/// Splits raw text into word tokens.
///
/// Whitespace splitting, after mapping typographic apostrophes to `'`, splitting
/// elided clitics and detaching trailing `?`/`!`.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = text.replace(['\u{2019}', '\u{2018}'], "'");
    let mut out = Vec::new();
    for chunk in normalized.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut rest = chunk;
    let mut trailing = Vec::new();
    while let Some(stripped) = rest.strip_suffix(['?', '!']) {
        if stripped.is_empty() {
            break;
        }
        trailing.push(&rest[stripped.len()..]);
        rest = stripped;
    }
    while let Some(len) = clitic_prefix(rest) {
        out.push(rest[..len].to_string());
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out.extend(trailing.into_iter().rev().map(str::to_string));
}

/// Byte length of a clitic at the start of `word`, when more text follows it.
fn clitic_prefix(word: &str) -> Option<usize> {
    let lower = word.to_lowercase();
    CLITICS
        .iter()
        .find(|c| lower.starts_with(*c) && lower.len() > c.len())
        .map(|c| {
            // lowercasing may change byte lengths; count chars instead
            word.char_indices()
                .nth(c.chars().count())
                .map(|(i, _)| i)
                .unwrap_or(word.len())
        })
}

/// Whether `token` is an elided clitic that is written glued to the next word.
pub fn is_clitic(token: &str) -> bool {
    let lower = token.to_lowercase();
    CLITICS.contains(&lower.as_str())
}

/// A labeled, contiguous token span.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotSpan {
    pub label: String,
    pub start: usize,
    pub end: usize,
    pub value: String,
}

/// The unit of every corpus: tokens, one intent and ordered slot spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<String>,
    pub intent: String,
    #[serde(default)]
    pub slots: Vec<SlotSpan>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UtteranceError {
    #[error("utterance {id}: slot {label} [{start}, {end}) is empty or out of bounds ({len} tokens)")]
    SpanBounds {
        id: String,
        label: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("utterance {id}: slot {label} starting at {start} overlaps or precedes the previous slot")]
    Overlap {
        id: String,
        label: String,
        start: usize,
    },
    #[error("utterance {id}: slot {label} value {value:?} does not match tokens {expected:?}")]
    ValueMismatch {
        id: String,
        label: String,
        value: String,
        expected: String,
    },
    #[error("utterance {id}: empty token {index}")]
    EmptyToken { id: String, index: usize },
    #[error("utterance {id}: empty intent")]
    EmptyIntent { id: String },
}

impl Utterance {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, intent: impl Into<String>) -> Self {
        Utterance {
            id: id.into(),
            tokens,
            intent: intent.into(),
            slots: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    /// Builds an utterance from raw text, tokenized with [`tokenize`].
    pub fn from_text(id: impl Into<String>, text: &str, intent: impl Into<String>) -> Self {
        Self::new(id, tokenize(text), intent)
    }

    /// Appends a slot over `tokens[start..end]`, filling in its value.
    ///
    /// Panics if the range is outside the token list.
    pub fn with_slot(mut self, label: impl Into<String>, start: usize, end: usize) -> Self {
        let value = self.tokens[start..end].join(" ");
        self.slots.push(SlotSpan {
            label: label.into(),
            start,
            end,
            value,
        });
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_none_intent(&self) -> bool {
        self.intent == NONE_INTENT
    }

    pub fn slot_labels(&self) -> Vec<&str> {
        self.slots.iter().map(|s| s.label.as_str()).collect()
    }

    /// Index of the slot covering token `i`, if any.
    pub fn slot_at(&self, i: usize) -> Option<usize> {
        self.slots.iter().position(|s| s.start <= i && i < s.end)
    }

    /// Recomputes every slot value from the tokens it covers.
    pub fn refresh_values(&mut self) {
        for slot in &mut self.slots {
            slot.value = self.tokens[slot.start..slot.end].join(" ");
        }
    }

    pub fn validate(&self) -> Result<(), UtteranceError> {
        if self.intent.is_empty() {
            return Err(UtteranceError::EmptyIntent {
                id: self.id.clone(),
            });
        }
        if let Some(index) = self.tokens.iter().position(|t| t.is_empty()) {
            return Err(UtteranceError::EmptyToken {
                id: self.id.clone(),
                index,
            });
        }
        let mut prev_end = 0;
        for slot in &self.slots {
            if slot.start >= slot.end || slot.end > self.tokens.len() {
                return Err(UtteranceError::SpanBounds {
                    id: self.id.clone(),
                    label: slot.label.clone(),
                    start: slot.start,
                    end: slot.end,
                    len: self.tokens.len(),
                });
            }
            if slot.start < prev_end {
                return Err(UtteranceError::Overlap {
                    id: self.id.clone(),
                    label: slot.label.clone(),
                    start: slot.start,
                });
            }
            let expected = self.tokens[slot.start..slot.end].join(" ");
            if expected != slot.value {
                return Err(UtteranceError::ValueMismatch {
                    id: self.id.clone(),
                    label: slot.label.clone(),
                    value: slot.value.clone(),
                    expected,
                });
            }
            prev_end = slot.end;
        }
        Ok(())
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: UtteranceError,
    },
}

/// Reads JSONL records, one per non-blank line.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads and validates an utterance corpus.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Utterance>, CorpusError> {
    let corpus: Vec<Utterance> = read_jsonl(reader)?;
    for (i, u) in corpus.iter().enumerate() {
        u.validate()
            .map_err(|source| CorpusError::Invalid { line: i + 1, source })?;
    }
    Ok(corpus)
}

pub fn write_jsonl<T, W>(mut writer: W, records: &[T]) -> std::io::Result<()>
where
    T: Serialize,
    W: Write,
{
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
