//! Symbol-enriched transcriptions.
//!
//! An utterance is flattened into one string in which the intent is marked by a
//! group of intent symbols at both ends and every slot is wrapped in its concept
//! symbol:
//!
//! ```text
//! @ vocadom ^allume^ }la lumière} @
//! ```
//!
//! Decoding is total: any string can be decoded, and every repair made on a
//! malformed string is reported in [`DecodeDiagnostics`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_clitic, tokenize, SlotSpan, Utterance, UtteranceError, NONE_INTENT};

/// Default table: intent symbols of the seven command intents and one symbol per demo slot label.
pub const DEFAULT_SYMBOLS: &str = include_str!("../data/symbols.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("symbol {symbol:?} is assigned to both `{first}` and `{second}`")]
    DuplicateSymbol {
        symbol: char,
        first: String,
        second: String,
    },
    #[error("symbol {symbol:?} for `{label}` is whitespace or the mask character")]
    ReservedSymbol { symbol: char, label: String },
    #[error("the `none` intent cannot carry a symbol")]
    NoneIntentSymbol,
    #[error("repeat must be 1 or 2, got {0}")]
    BadRepeat(usize),
    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },
    #[error(transparent)]
    InvalidUtterance(#[from] UtteranceError),
    #[error("token {token:?} cannot be written unambiguously")]
    UnencodableToken { token: String },
    #[error("malformed transcript: {0}")]
    Malformed(DecodeDiagnostics),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SymbolTableFile {
    intents: BTreeMap<String, char>,
    concepts: BTreeMap<String, char>,
    #[serde(default = "default_mask")]
    mask: char,
    #[serde(default = "default_repeat")]
    repeat: usize,
}

fn default_mask() -> char {
    '*'
}

fn default_repeat() -> usize {
    1
}

/// Bijective mapping between labels and delimiter characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SymbolTableFile", into = "SymbolTableFile")]
pub struct SymbolTable {
    intents: BTreeMap<String, char>,
    concepts: BTreeMap<String, char>,
    mask: char,
    repeat: usize,
    intent_by_symbol: BTreeMap<char, String>,
    concept_by_symbol: BTreeMap<char, String>,
}

impl TryFrom<SymbolTableFile> for SymbolTable {
    type Error = CodecError;

    fn try_from(f: SymbolTableFile) -> Result<Self, CodecError> {
        SymbolTable::new(f.intents, f.concepts, f.mask, f.repeat)
    }
}

impl From<SymbolTable> for SymbolTableFile {
    fn from(t: SymbolTable) -> Self {
        SymbolTableFile {
            intents: t.intents,
            concepts: t.concepts,
            mask: t.mask,
            repeat: t.repeat,
        }
    }
}

impl Default for SymbolTable {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SYMBOLS).expect("shipped symbol table is valid")
    }
}

impl SymbolTable {
    pub fn new(
        intents: BTreeMap<String, char>,
        concepts: BTreeMap<String, char>,
        mask: char,
        repeat: usize,
    ) -> Result<Self, CodecError> {
        if !(1..=2).contains(&repeat) {
            return Err(CodecError::BadRepeat(repeat));
        }
        if intents.contains_key(NONE_INTENT) {
            return Err(CodecError::NoneIntentSymbol);
        }
        let mut owner: BTreeMap<char, String> = BTreeMap::new();
        for (label, &symbol) in intents.iter().chain(concepts.iter()) {
            if symbol.is_whitespace() || symbol == mask {
                return Err(CodecError::ReservedSymbol {
                    symbol,
                    label: label.clone(),
                });
            }
            if let Some(first) = owner.insert(symbol, label.clone()) {
                return Err(CodecError::DuplicateSymbol {
                    symbol,
                    first,
                    second: label.clone(),
                });
            }
        }
        if mask.is_whitespace() {
            return Err(CodecError::ReservedSymbol {
                symbol: mask,
                label: "mask".into(),
            });
        }
        let intent_by_symbol = intents.iter().map(|(l, &c)| (c, l.clone())).collect();
        let concept_by_symbol = concepts.iter().map(|(l, &c)| (c, l.clone())).collect();
        Ok(SymbolTable {
            intents,
            concepts,
            mask,
            repeat,
            intent_by_symbol,
            concept_by_symbol,
        })
    }

    pub fn with_repeat(self, repeat: usize) -> Result<Self, CodecError> {
        SymbolTable::new(self.intents, self.concepts, self.mask, repeat)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn intent_symbol(&self, intent: &str) -> Option<char> {
        self.intents.get(intent).copied()
    }

    pub fn concept_symbol(&self, concept: &str) -> Option<char> {
        self.concepts.get(concept).copied()
    }

    pub fn mask(&self) -> char {
        self.mask
    }

    pub fn repeat(&self) -> usize {
        self.repeat
    }

    pub fn intents(&self) -> impl Iterator<Item = (&str, char)> {
        self.intents.iter().map(|(l, &c)| (l.as_str(), c))
    }

    pub fn concepts(&self) -> impl Iterator<Item = (&str, char)> {
        self.concepts.iter().map(|(l, &c)| (l.as_str(), c))
    }

    /// True for any intent or concept delimiter.
    pub fn is_symbol(&self, c: char) -> bool {
        self.intent_by_symbol.contains_key(&c) || self.concept_by_symbol.contains_key(&c)
    }

    fn concept_of(&self, c: char) -> Option<&str> {
        self.concept_by_symbol.get(&c).map(String::as_str)
    }

    fn intent_of(&self, c: char) -> Option<&str> {
        self.intent_by_symbol.get(&c).map(String::as_str)
    }
}

/// A flat, symbol-enriched transcription.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnrichedTranscript(String);

impl EnrichedTranscript {
    pub fn new(text: impl Into<String>) -> Self {
        EnrichedTranscript(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for EnrichedTranscript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EnrichedTranscript {
    fn from(s: &str) -> Self {
        EnrichedTranscript(s.to_string())
    }
}

/// Corpus record holding an enriched transcription instead of an annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedRecord {
    pub id: String,
    pub enriched: EnrichedTranscript,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl EnrichedRecord {
    pub fn from_utterance(u: &Utterance, st: &SymbolTable) -> Result<Self, CodecError> {
        Ok(EnrichedRecord {
            id: u.id.clone(),
            enriched: encode(u, st)?,
            meta: u.meta.clone(),
        })
    }

    /// Decodes the transcription, carrying over id and meta.
    pub fn decode(&self, st: &SymbolTable) -> Decoded {
        let mut d = decode(&self.enriched, st);
        d.utterance.id = self.id.clone();
        d.utterance.meta = self.meta.clone();
        d
    }
}

/// One repair made while decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Repair {
    /// A concept region never closed; it was closed at the end of the utterance.
    UnclosedConcept { label: String },
    /// A delimiter pair enclosed no words; no slot was produced.
    EmptyConcept { label: String },
    /// A different concept symbol appeared inside an open region; the open region was closed there.
    NestedConcept { outer: String, inner: String },
    /// A concept delimiter was separated from its words by whitespace.
    LooseDelimiter { label: String },
    /// The intent symbol appeared a number of times other than twice the group size.
    UnbalancedIntent { intent: String, count: usize },
    /// A second intent's symbol appeared; the first intent was kept.
    ConflictingIntent { kept: String, ignored: String },
}

impl fmt::Display for Repair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repair::UnclosedConcept { label } => write!(f, "unclosed {label} region"),
            Repair::EmptyConcept { label } => write!(f, "empty {label} region dropped"),
            Repair::NestedConcept { outer, inner } => write!(f, "{outer} region closed at nested {inner}"),
            Repair::LooseDelimiter { label } => write!(f, "loose {label} delimiter"),
            Repair::UnbalancedIntent { intent, count } => write!(f, "{intent} symbol seen {count} times"),
            Repair::ConflictingIntent { kept, ignored } => write!(f, "kept intent {kept}, ignored {ignored}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecodeDiagnostics(pub Vec<Repair>);

impl DecodeDiagnostics {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Repair> {
        self.0.iter()
    }
}

impl fmt::Display for DecodeDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(Repair::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Result of decoding: the recovered utterance (with an empty id) and the repairs made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub utterance: Utterance,
    pub diagnostics: DecodeDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Lexeme {
    Symbol(char),
    Word(String),
}

/// Splits text into delimiter symbols and maximal word runs, noting whitespace before each.
pub(crate) fn lex(text: &str, st: &SymbolTable) -> Vec<(Lexeme, bool)> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut space_before = false;
    let mut word_space = false;
    for c in text.chars() {
        if c.is_whitespace() || st.is_symbol(c) {
            if !word.is_empty() {
                out.push((Lexeme::Word(std::mem::take(&mut word)), word_space));
                space_before = false;
            }
            if c.is_whitespace() {
                space_before = true;
            } else {
                out.push((Lexeme::Symbol(c), space_before));
                space_before = false;
            }
        } else {
            if word.is_empty() {
                word_space = space_before;
            }
            word.push(c);
        }
    }
    if !word.is_empty() {
        out.push((Lexeme::Word(word), word_space));
    }
    out
}

/// Encodes an annotated utterance as an enriched transcription.
pub fn encode(u: &Utterance, st: &SymbolTable) -> Result<EnrichedTranscript, CodecError> {
    encode_inner(u, st, true)
}

/// Encodes only the concept symbols, leaving the intent unmarked.
pub fn encode_concepts(u: &Utterance, st: &SymbolTable) -> Result<EnrichedTranscript, CodecError> {
    encode_inner(u, st, false)
}

fn encode_inner(
    u: &Utterance,
    st: &SymbolTable,
    with_intent: bool,
) -> Result<EnrichedTranscript, CodecError> {
    u.validate()?;
    let intent_symbol = if u.is_none_intent() {
        None
    } else {
        Some(
            st.intent_symbol(&u.intent)
                .ok_or_else(|| CodecError::UnknownLabel {
                    kind: "intent",
                    label: u.intent.clone(),
                })?,
        )
    };
    for token in &u.tokens {
        if token.chars().any(|c| c.is_whitespace() || st.is_symbol(c))
            || tokenize(token).as_slice() != std::slice::from_ref(token)
        {
            return Err(CodecError::UnencodableToken {
                token: token.clone(),
            });
        }
    }
    let mut opens: Vec<Option<char>> = vec![None; u.tokens.len()];
    let mut closes: Vec<Option<char>> = vec![None; u.tokens.len()];
    for slot in &u.slots {
        let sym = st
            .concept_symbol(&slot.label)
            .ok_or_else(|| CodecError::UnknownLabel {
                kind: "concept",
                label: slot.label.clone(),
            })?;
        opens[slot.start] = Some(sym);
        closes[slot.end - 1] = Some(sym);
    }

    let mut out = String::new();
    let group: Option<String> = intent_symbol
        .filter(|_| with_intent)
        .map(|c| std::iter::repeat_n(c, st.repeat()).collect());
    if let Some(g) = &group {
        out.push_str(g);
    }
    for (i, token) in u.tokens.iter().enumerate() {
        let glued = i > 0
            && is_clitic(&u.tokens[i - 1])
            && closes[i - 1].is_none()
            && opens[i].is_none()
            && tokenize(&format!("{}{}", u.tokens[i - 1], token)) == [u.tokens[i - 1].as_str(), token];
        if !glued && !out.is_empty() {
            out.push(' ');
        }
        if let Some(c) = opens[i] {
            out.push(c);
        }
        out.push_str(token);
        if let Some(c) = closes[i] {
            out.push(c);
        }
    }
    if let Some(g) = &group {
        out.push(' ');
        out.push_str(g);
    }
    Ok(EnrichedTranscript(out))
}

/// Best-effort parse of an enriched transcription. Never fails.
pub fn decode(t: &EnrichedTranscript, st: &SymbolTable) -> Decoded {
    let lexemes = lex(t.as_str(), st);
    let mut tokens: Vec<String> = Vec::new();
    let mut slots: Vec<SlotSpan> = Vec::new();
    let mut repairs = Vec::new();
    let mut intent: Option<(String, char)> = None;
    let mut intent_counts: BTreeMap<char, usize> = BTreeMap::new();
    let mut conflicts: BTreeSet<String> = BTreeSet::new();
    // open region: label, symbol, first token index
    let mut open: Option<(String, char, usize)> = None;

    let close = |label: String, start: usize, tokens: &[String], slots: &mut Vec<SlotSpan>| -> bool {
        if tokens.len() > start {
            slots.push(SlotSpan {
                label,
                start,
                end: tokens.len(),
                value: tokens[start..].join(" "),
            });
            true
        } else {
            false
        }
    };

    for (idx, (lexeme, space_before)) in lexemes.iter().enumerate() {
        match lexeme {
            Lexeme::Word(w) => tokens.extend(tokenize(w)),
            Lexeme::Symbol(c) => {
                if let Some(name) = st.intent_of(*c) {
                    *intent_counts.entry(*c).or_default() += 1;
                    match &intent {
                        None => intent = Some((name.to_string(), *c)),
                        Some((kept, _)) if kept != name => {
                            conflicts.insert(name.to_string());
                        }
                        Some(_) => {}
                    }
                    continue;
                }
                let label = st.concept_of(*c).expect("lexer only emits known symbols");
                match open.take() {
                    None => {
                        let next_is_loose_word = matches!(
                            lexemes.get(idx + 1),
                            Some((Lexeme::Word(_), true))
                        );
                        if next_is_loose_word {
                            repairs.push(Repair::LooseDelimiter {
                                label: label.to_string(),
                            });
                        }
                        open = Some((label.to_string(), *c, tokens.len()));
                    }
                    Some((open_label, sym, start)) if sym == *c => {
                        if *space_before && tokens.len() > start {
                            repairs.push(Repair::LooseDelimiter {
                                label: open_label.clone(),
                            });
                        }
                        if !close(open_label.clone(), start, &tokens, &mut slots) {
                            repairs.push(Repair::EmptyConcept { label: open_label });
                        }
                    }
                    Some((open_label, _, start)) => {
                        repairs.push(Repair::NestedConcept {
                            outer: open_label.clone(),
                            inner: label.to_string(),
                        });
                        close(open_label, start, &tokens, &mut slots);
                        open = Some((label.to_string(), *c, tokens.len()));
                    }
                }
            }
        }
    }
    if let Some((label, _, start)) = open {
        repairs.push(Repair::UnclosedConcept {
            label: label.clone(),
        });
        close(label, start, &tokens, &mut slots);
    }
    let intent_name = match intent {
        Some((name, sym)) => {
            let count = intent_counts[&sym];
            if count != 2 * st.repeat() {
                repairs.push(Repair::UnbalancedIntent {
                    intent: name.clone(),
                    count,
                });
            }
            for ignored in conflicts {
                repairs.push(Repair::ConflictingIntent {
                    kept: name.clone(),
                    ignored,
                });
            }
            name
        }
        None => NONE_INTENT.to_string(),
    };
    Decoded {
        utterance: Utterance {
            id: String::new(),
            tokens,
            intent: intent_name,
            slots,
            meta: BTreeMap::new(),
        },
        diagnostics: DecodeDiagnostics(repairs),
    }
}

/// Replaces every out-of-slot word with the mask character, keeping the wake-up keyword.
///
/// The keyword is the first word after the opening intent group; utterances
/// without an intent have no keyword and are masked entirely outside slots.
pub fn mask_outside_slots(
    t: &EnrichedTranscript,
    st: &SymbolTable,
) -> Result<EnrichedTranscript, CodecError> {
    let decoded = decode(t, st);
    if !decoded.diagnostics.is_empty() {
        return Err(CodecError::Malformed(decoded.diagnostics));
    }
    encode(&mask_utterance(&decoded.utterance, st.mask()), st)
}

/// Utterance-level form of [`mask_outside_slots`].
pub fn mask_utterance(u: &Utterance, mask: char) -> Utterance {
    let mut out = u.clone();
    let keep_first = !u.is_none_intent();
    let mask = mask.to_string();
    for i in 0..out.tokens.len() {
        if (i == 0 && keep_first) || u.slot_at(i).is_some() {
            continue;
        }
        out.tokens[i] = mask.clone();
    }
    out
}

/// Concept labels in order of their opening delimiter, after decode repairs.
pub fn extract_symbol_sequence(t: &EnrichedTranscript, st: &SymbolTable) -> Vec<String> {
    decode(t, st)
        .utterance
        .slots
        .into_iter()
        .map(|s| s.label)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> SymbolTable {
        SymbolTable::default()
    }

    fn light_command() -> Utterance {
        Utterance::from_text("t4", "vocadom allume la lumière", "set_device")
            .with_slot("action", 1, 2)
            .with_slot("device", 2, 4)
    }

    fn bedroom_lamp_command() -> Utterance {
        Utterance::from_text(
            "t6",
            "hestia s'il vous plaît baisser la lampe de la chambre",
            "set_device",
        )
        .with_slot("action", 4, 5)
        .with_slot("device", 5, 7)
        .with_slot("location-room", 7, 10)
    }

    #[test]
    fn default_table_matches_intent_symbols() {
        let st = st();
        let expected = [
            ("check_device", '#'),
            ("contact", '['),
            ("get_room_property", '{'),
            ("get_world_property", ']'),
            ("set_device", '@'),
            ("set_device_property", '_'),
            ("set_room_property", '&'),
        ];
        for (intent, sym) in expected {
            assert_eq!(st.intent_symbol(intent), Some(sym));
        }
        assert_eq!(st.intent_symbol(NONE_INTENT), None);
        assert_eq!(st.concept_symbol("action"), Some('^'));
        assert_eq!(st.concept_symbol("device"), Some('}'));
        assert_eq!(st.concept_symbol("location-room"), Some('>'));
        assert_eq!(st.concept_symbol("device-setting"), Some(','));
        assert_eq!(st.concepts().count(), 14);
        assert_eq!(st.mask(), '*');
        assert_eq!(st.repeat(), 1);
    }

    #[test]
    fn table_validation() {
        let mut intents = BTreeMap::new();
        intents.insert("a".to_string(), '@');
        let mut concepts = BTreeMap::new();
        concepts.insert("b".to_string(), '@');
        assert!(matches!(
            SymbolTable::new(intents.clone(), concepts.clone(), '*', 1),
            Err(CodecError::DuplicateSymbol { symbol: '@', .. })
        ));
        concepts.insert("b".to_string(), '*');
        assert!(matches!(
            SymbolTable::new(intents.clone(), concepts.clone(), '*', 1),
            Err(CodecError::ReservedSymbol { .. })
        ));
        concepts.insert("b".to_string(), ' ');
        assert!(SymbolTable::new(intents.clone(), concepts.clone(), '*', 1).is_err());
        concepts.insert("b".to_string(), '^');
        assert!(matches!(
            SymbolTable::new(intents.clone(), concepts.clone(), '*', 3),
            Err(CodecError::BadRepeat(3))
        ));
        intents.insert(NONE_INTENT.to_string(), '!');
        assert_eq!(
            SymbolTable::new(intents, concepts, '*', 1).unwrap_err(),
            CodecError::NoneIntentSymbol
        );
        let bad = r#"{"intents":{"a":"@"},"concepts":{"b":"@"},"mask":"*","repeat":1}"#;
        assert!(SymbolTable::from_json(bad).is_err());
    }

    #[test]
    fn encodes_single_group_example() {
        assert_eq!(
            encode(&light_command(), &st()).unwrap().as_str(),
            "@ vocadom ^allume^ }la lumière} @"
        );
    }

    #[test]
    fn encodes_double_group_example() {
        let st = st().with_repeat(2).unwrap();
        assert_eq!(
            encode(&bedroom_lamp_command(), &st).unwrap().as_str(),
            "@@ hestia s'il vous plaît ^baisser^ }la lampe} >de la chambre> @@"
        );
        assert_eq!(
            encode_concepts(&bedroom_lamp_command(), &st).unwrap().as_str(),
            "hestia s'il vous plaît ^baisser^ }la lampe} >de la chambre>"
        );
    }

    #[test]
    fn none_intent_is_plain_text() {
        let u = Utterance::from_text("n", "la fenêtre est ouverte", NONE_INTENT);
        assert_eq!(encode(&u, &st()).unwrap().as_str(), "la fenêtre est ouverte");
        let d = decode(&"la fenêtre est ouverte".into(), &st());
        assert_eq!(d.utterance.intent, NONE_INTENT);
        assert!(d.utterance.slots.is_empty());
        assert!(d.diagnostics.is_empty());
    }

    #[test]
    fn elided_clitic_is_glued() {
        let u = Utterance::from_text("e", "vocadom allume l'ampoule de l'entrée", "set_device")
            .with_slot("action", 1, 2)
            .with_slot("device", 2, 4)
            .with_slot("location-room", 4, 7);
        let t = encode(&u, &st()).unwrap();
        assert_eq!(t.as_str(), "@ vocadom ^allume^ }l'ampoule} >de l'entrée> @");
        let mut back = decode(&t, &st()).utterance;
        back.id = u.id.clone();
        assert_eq!(back, u);

        // a clitic at a slot boundary keeps its space
        let u = Utterance::from_text("e2", "allume l'ampoule", "set_device").with_slot("device", 2, 3);
        let t = encode(&u, &st()).unwrap();
        assert_eq!(t.as_str(), "@ allume l' }ampoule} @");
        assert_eq!(decode(&t, &st()).utterance.slots, u.slots);
    }

    #[test]
    fn encode_errors() {
        let u = Utterance::from_text("x", "allume", "dance");
        assert!(matches!(encode(&u, &st()), Err(CodecError::UnknownLabel { kind: "intent", .. })));
        let u = Utterance::from_text("x", "allume", "set_device").with_slot("colour", 0, 1);
        assert!(matches!(encode(&u, &st()), Err(CodecError::UnknownLabel { kind: "concept", .. })));
        let u = light_command().with_slot("device", 3, 4);
        assert!(matches!(encode(&u, &st()), Err(CodecError::InvalidUtterance(_))));
        let u = Utterance::new("x", vec!["a^b".into()], "set_device");
        assert!(matches!(encode(&u, &st()), Err(CodecError::UnencodableToken { .. })));
    }

    #[test]
    fn round_trip_examples() {
        for (u, st) in [(light_command(), st()), (bedroom_lamp_command(), st().with_repeat(2).unwrap())] {
            let d = decode(&encode(&u, &st).unwrap(), &st);
            assert!(d.diagnostics.is_empty());
            let mut back = d.utterance;
            back.id = u.id.clone();
            assert_eq!(back, u);
        }
    }

    #[test]
    fn deleted_device_delimiters() {
        let d = decode(&"@ vocadom ^allume ^ la lumière @".into(), &st());
        assert_eq!(d.utterance.intent, "set_device");
        assert_eq!(d.utterance.slot_labels(), ["action"]);
        assert_eq!(d.utterance.slots[0].value, "allume");
        assert_eq!(
            d.diagnostics.0,
            [Repair::LooseDelimiter {
                label: "action".into()
            }]
        );
    }

    #[test]
    fn repairs_unbalanced_strings() {
        let d = decode(&"@ vocadom ^allume^ }la lumière @".into(), &st());
        assert_eq!(d.utterance.slot_labels(), ["action", "device"]);
        assert_eq!(d.utterance.slots[1].value, "la lumière");
        assert_eq!(d.diagnostics.0, [Repair::UnclosedConcept { label: "device".into() }]);

        let d = decode(&"@ vocadom ^allume^ la lumière} @".into(), &st());
        assert_eq!(d.utterance.slot_labels(), ["action"]);
        assert_eq!(d.diagnostics.0, [Repair::UnclosedConcept { label: "device".into() }]);

        let d = decode(&"^allume }la lumière}".into(), &st());
        assert_eq!(d.utterance.slot_labels(), ["action", "device"]);
        assert_eq!(d.utterance.slots[0].value, "allume");
        assert!(matches!(d.diagnostics.0[0], Repair::NestedConcept { .. }));

        let d = decode(&"@ vocadom ^^ @".into(), &st());
        assert!(d.utterance.slots.is_empty());
        assert_eq!(d.diagnostics.0, [Repair::EmptyConcept { label: "action".into() }]);

        let d = decode(&"@ vocadom # allume".into(), &st());
        assert_eq!(d.utterance.intent, "set_device");
        assert_eq!(d.diagnostics.len(), 2);

        let d = decode(&"vocadom ^allume^ @".into(), &st());
        assert!(matches!(d.diagnostics.0[0], Repair::UnbalancedIntent { count: 1, .. }));
    }

    #[test]
    fn extract_sequences() {
        let st = st();
        assert_eq!(
            extract_symbol_sequence(&"@ vocadom ^allume^ }la lumière} @".into(), &st),
            ["action", "device"]
        );
        assert_eq!(
            extract_symbol_sequence(&"@ vocadom ^allume^ la lumière @".into(), &st),
            ["action"]
        );
        assert!(extract_symbol_sequence(&"vocadom allume la lumière".into(), &st).is_empty());
    }

    #[test]
    fn masks_out_of_slot_words() {
        let st = st().with_repeat(2).unwrap();
        let t = encode(&bedroom_lamp_command(), &st).unwrap();
        let m = mask_outside_slots(&t, &st).unwrap();
        assert_eq!(m.as_str(), "@@ hestia * * * ^baisser^ }la lampe} >de la chambre> @@");
        assert_eq!(mask_outside_slots(&m, &st).unwrap(), m);
        assert_eq!(extract_symbol_sequence(&m, &st), extract_symbol_sequence(&t, &st));
    }

    #[test]
    fn masking_edge_cases() {
        let st = st();
        let all_slot = Utterance::from_text("a", "allume la lumière", "set_device")
            .with_slot("action", 0, 1)
            .with_slot("device", 1, 3);
        let t = encode(&all_slot, &st).unwrap();
        assert_eq!(mask_outside_slots(&t, &st).unwrap(), t);

        let none = encode(&Utterance::from_text("n", "la fenêtre est ouverte", NONE_INTENT), &st).unwrap();
        let m = mask_outside_slots(&none, &st).unwrap();
        assert_eq!(m.as_str(), "* * * *");
        assert_eq!(decode(&m, &st).utterance.slots, decode(&none, &st).utterance.slots);

        assert!(matches!(
            mask_outside_slots(&"@ x ^y @".into(), &st),
            Err(CodecError::Malformed(_))
        ));
    }

    #[test]
    fn table_serializes_to_file_schema() {
        let json = serde_json::to_value(st()).unwrap();
        assert_eq!(json["mask"], "*");
        assert_eq!(json["intents"]["set_device"], "@");
        assert_eq!(json["repeat"], 1);
        let back: SymbolTable = serde_json::from_value(json).unwrap();
        assert_eq!(back, st());
    }
}
