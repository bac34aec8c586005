//! Feature-annotated context-free grammars for generating labeled command corpora.
//!
//! Grammars are written in a small line-oriented format:
//!
//! ```text
//! # comment
//! %start S
//! %intent set_device
//! %concept location
//! %concept location-room < location
//! S      -> KW CMD { intent=set_device }
//! KW     -> "vocadom" | "hestia" @2
//! CMD    -> ACTION DEVICE
//! ACTION -> "allume" { concept=action }
//! DEVICE -> "la lumière" { concept=device }
//! ```
//!
//! Quoted strings are terminals and are tokenized like corpus text. Bare names
//! are nonterminals. Each `|`-separated alternative is its own rule and may carry
//! a feature block and a sampling weight (`@0.5` or `@1/3`, default 1). The
//! `intent` feature sets the utterance intent; `concept` turns the yield of the
//! rule into a slot. The start symbol is `%start`, or the first rule's left side.

mod generate;
mod parse;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use generate::{Enumeration, DEFAULT_MAX_DEPTH};

use crate::corpus::NONE_INTENT;

/// The grammar shipped with the toolkit: seven smart-home command intents, 14 slot labels.
pub const DEMO_GRAMMAR: &str = include_str!("../../data/demo.g");

/// Appendix-style window-opening variants, used as a small worked grammar.
pub const WINDOW_GRAMMAR: &str = include_str!("../../data/window.g");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: undefined {kind} `{symbol}`")]
    UndefinedSymbol {
        kind: SymbolKind,
        symbol: String,
        line: usize,
    },
    #[error("no start symbol: the grammar defines no rules")]
    NoStartSymbol,
    #[error("nonterminals with no finite derivation: {}", .0.join(", "))]
    NonProductive(Vec<String>),
    #[error("line {line}: concept rule for `{nonterminal}` contains another concept")]
    NestedConcept { nonterminal: String, line: usize },
    #[error("concept hierarchy contains a cycle through `{0}`")]
    ConceptCycle(String),
    #[error("derivation depth exceeded {0}; the grammar recurses without bound")]
    DepthExceeded(usize),
    #[error("conflicting intents `{first}` and `{second}` in one derivation")]
    ConflictingIntent { first: String, second: String },
    #[error("`{0}` has no rule with positive weight")]
    NoSampleableRule(String),
    #[error("count must be at least 1")]
    ZeroCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Nonterminal,
    Intent,
    Concept,
}

impl std::fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SymbolKind::Nonterminal => "nonterminal",
            SymbolKind::Intent => "intent",
            SymbolKind::Concept => "concept",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Symbol {
    /// One or more word tokens.
    Terminal(Vec<String>),
    NonTerminal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrammarRule {
    pub lhs: String,
    pub rhs: Vec<Symbol>,
    pub features: BTreeMap<String, String>,
    pub weight: f64,
    pub line: usize,
}

impl GrammarRule {
    pub fn intent(&self) -> Option<&str> {
        self.features.get("intent").map(String::as_str)
    }

    pub fn concept(&self) -> Option<&str> {
        self.features.get("concept").map(String::as_str)
    }
}

/// Intent classes plus a concept hierarchy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticSpace {
    intents: BTreeSet<String>,
    /// concept -> parent
    concepts: BTreeMap<String, Option<String>>,
}

impl SemanticSpace {
    pub fn new() -> Self {
        let mut intents = BTreeSet::new();
        intents.insert(NONE_INTENT.to_string());
        SemanticSpace {
            intents,
            concepts: BTreeMap::new(),
        }
    }

    pub fn add_intent(&mut self, name: impl Into<String>) {
        self.intents.insert(name.into());
    }

    pub fn add_concept(&mut self, name: impl Into<String>, parent: Option<String>) {
        self.concepts.insert(name.into(), parent);
    }

    /// All intents, `none` included.
    pub fn intents(&self) -> impl Iterator<Item = &str> {
        self.intents.iter().map(String::as_str)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.keys().map(String::as_str)
    }

    pub fn has_intent(&self, name: &str) -> bool {
        self.intents.contains(name)
    }

    pub fn has_concept(&self, name: &str) -> bool {
        self.concepts.contains_key(name)
    }

    pub fn parent(&self, concept: &str) -> Option<&str> {
        self.concepts.get(concept).and_then(|p| p.as_deref())
    }

    /// True when `concept` is `ancestor` or lies below it in the hierarchy.
    pub fn is_within(&self, concept: &str, ancestor: &str) -> bool {
        let mut cur = Some(concept);
        let mut steps = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.parent(c);
            steps += 1;
            if steps > self.concepts.len() {
                break;
            }
        }
        false
    }

    fn check_acyclic(&self) -> Result<(), GrammarError> {
        for start in self.concepts.keys() {
            let mut cur = self.parent(start);
            let mut steps = 0;
            while let Some(c) = cur {
                steps += 1;
                if c == start || steps > self.concepts.len() {
                    return Err(GrammarError::ConceptCycle(start.clone()));
                }
                cur = self.parent(c);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Item {
    Terminal(Vec<String>),
    NonTerminal(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledRule {
    pub(crate) rhs: Vec<Item>,
    pub(crate) intent: Option<String>,
    pub(crate) concept: Option<String>,
    pub(crate) weight: f64,
}

/// A validated grammar. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct Grammar {
    rules: Vec<GrammarRule>,
    space: SemanticSpace,
    nonterminals: Vec<String>,
    start: usize,
    /// per nonterminal, its rules in declaration order
    compiled: Vec<Vec<CompiledRule>>,
    reachable: BTreeSet<String>,
}

impl Grammar {
    /// Parses and validates grammar text.
    pub fn load(source: &str) -> Result<Grammar, GrammarError> {
        let parsed = parse::parse(source)?;
        Self::build(parsed)
    }

    pub fn demo() -> Grammar {
        Self::load(DEMO_GRAMMAR).expect("shipped demo grammar is valid")
    }

    fn build(parsed: parse::Parsed) -> Result<Grammar, GrammarError> {
        let parse::Parsed {
            rules,
            space,
            start,
            declared_start_line,
        } = parsed;
        if rules.is_empty() {
            return Err(GrammarError::NoStartSymbol);
        }
        space.check_acyclic()?;

        let mut nonterminals: Vec<String> = Vec::new();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for rule in &rules {
            if !index.contains_key(rule.lhs.as_str()) {
                index.insert(&rule.lhs, nonterminals.len());
                nonterminals.push(rule.lhs.clone());
            }
        }
        let start_name = start.unwrap_or_else(|| rules[0].lhs.clone());
        let start_id = *index
            .get(start_name.as_str())
            .ok_or_else(|| GrammarError::UndefinedSymbol {
                kind: SymbolKind::Nonterminal,
                symbol: start_name.clone(),
                line: declared_start_line,
            })?;

        let mut compiled: Vec<Vec<CompiledRule>> = vec![Vec::new(); nonterminals.len()];
        for rule in &rules {
            if let Some(intent) = rule.intent() {
                if !space.has_intent(intent) {
                    return Err(GrammarError::UndefinedSymbol {
                        kind: SymbolKind::Intent,
                        symbol: intent.to_string(),
                        line: rule.line,
                    });
                }
            }
            if let Some(concept) = rule.concept() {
                if !space.has_concept(concept) {
                    return Err(GrammarError::UndefinedSymbol {
                        kind: SymbolKind::Concept,
                        symbol: concept.to_string(),
                        line: rule.line,
                    });
                }
            }
            let mut rhs = Vec::with_capacity(rule.rhs.len());
            for sym in &rule.rhs {
                rhs.push(match sym {
                    Symbol::Terminal(words) => Item::Terminal(words.clone()),
                    Symbol::NonTerminal(name) => {
                        Item::NonTerminal(*index.get(name.as_str()).ok_or_else(|| {
                            GrammarError::UndefinedSymbol {
                                kind: SymbolKind::Nonterminal,
                                symbol: name.clone(),
                                line: rule.line,
                            }
                        })?)
                    }
                });
            }
            compiled[index[rule.lhs.as_str()]].push(CompiledRule {
                rhs,
                intent: rule.intent().map(str::to_string),
                concept: rule.concept().map(str::to_string),
                weight: rule.weight,
            });
        }

        check_productive(&nonterminals, &compiled)?;
        check_concept_nesting(&nonterminals, &compiled, &rules)?;
        let reachable = reachable_from(start_id, &compiled)
            .into_iter()
            .map(|i| nonterminals[i].clone())
            .collect();

        Ok(Grammar {
            rules,
            space,
            nonterminals,
            start: start_id,
            compiled,
            reachable,
        })
    }

    pub fn rules(&self) -> &[GrammarRule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn start_symbol(&self) -> &str {
        &self.nonterminals[self.start]
    }

    pub fn semantic_space(&self) -> &SemanticSpace {
        &self.space
    }

    /// Nonterminals reachable from the start symbol.
    pub fn reachable(&self) -> &BTreeSet<String> {
        &self.reachable
    }

    /// Concept labels that some rule attaches to a subtree.
    pub fn slot_labels(&self) -> BTreeSet<&str> {
        self.rules.iter().filter_map(GrammarRule::concept).collect()
    }

    /// Intents that some rule assigns.
    pub fn command_intents(&self) -> BTreeSet<&str> {
        self.rules.iter().filter_map(GrammarRule::intent).collect()
    }

    /// Terminal words of the grammar.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .flat_map(|r| r.rhs.iter())
            .filter_map(|s| match s {
                Symbol::Terminal(words) => Some(words.iter().cloned()),
                Symbol::NonTerminal(_) => None,
            })
            .flatten()
            .collect()
    }

    pub(crate) fn compiled(&self) -> &[Vec<CompiledRule>] {
        &self.compiled
    }

    pub(crate) fn start_id(&self) -> usize {
        self.start
    }

    pub(crate) fn nonterminal_name(&self, id: usize) -> &str {
        &self.nonterminals[id]
    }
}

fn check_productive(names: &[String], compiled: &[Vec<CompiledRule>]) -> Result<(), GrammarError> {
    let mut productive = vec![false; names.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (nt, rules) in compiled.iter().enumerate() {
            if productive[nt] {
                continue;
            }
            let ok = rules.iter().any(|r| {
                r.rhs.iter().all(|item| match item {
                    Item::Terminal(_) => true,
                    Item::NonTerminal(id) => productive[*id],
                })
            });
            if ok {
                productive[nt] = true;
                changed = true;
            }
        }
    }
    let dead: Vec<String> = names
        .iter()
        .zip(&productive)
        .filter(|(_, p)| !**p)
        .map(|(n, _)| n.clone())
        .collect();
    if dead.is_empty() {
        Ok(())
    } else {
        Err(GrammarError::NonProductive(dead))
    }
}

fn check_concept_nesting(
    names: &[String],
    compiled: &[Vec<CompiledRule>],
    rules: &[GrammarRule],
) -> Result<(), GrammarError> {
    // yields[nt]: some derivation from nt attaches a concept
    let mut yields = vec![false; names.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (nt, alts) in compiled.iter().enumerate() {
            if yields[nt] {
                continue;
            }
            let hit = alts.iter().any(|r| {
                r.concept.is_some()
                    || r.rhs
                        .iter()
                        .any(|i| matches!(i, Item::NonTerminal(id) if yields[*id]))
            });
            if hit {
                yields[nt] = true;
                changed = true;
            }
        }
    }
    for (nt, alts) in compiled.iter().enumerate() {
        for r in alts.iter().filter(|r| r.concept.is_some()) {
            if r
                .rhs
                .iter()
                .any(|i| matches!(i, Item::NonTerminal(id) if yields[*id]))
            {
                let line = rules
                    .iter()
                    .find(|gr| gr.lhs == names[nt] && gr.concept().is_some())
                    .map_or(0, |gr| gr.line);
                return Err(GrammarError::NestedConcept {
                    nonterminal: names[nt].clone(),
                    line,
                });
            }
        }
    }
    Ok(())
}

fn reachable_from(start: usize, compiled: &[Vec<CompiledRule>]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(nt) = stack.pop() {
        if !seen.insert(nt) {
            continue;
        }
        for r in &compiled[nt] {
            for item in &r.rhs {
                if let Item::NonTerminal(id) = item {
                    stack.push(*id);
                }
            }
        }
    }
    seen
}
