//! Controlled test-set degradations: OOV synonym substitution, syntactic
//! rewrites with disfluencies, and length-based splits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, SlotSpan, Utterance, UtteranceError};
use crate::grammar::SemanticSpace;

/// Pseudo-category for wake-up keywords, which sit outside every slot.
pub const KEYWORDS: &str = "keywords";

/// Categories added at each OOV step; step k activates the first k groups.
pub const OOV_SCHEDULE: [&[&str]; 4] = [&["action", "device-setting"], &["device"], &["location"], &[KEYWORDS]];

/// Shipped substitution plan for the demo grammar (all four steps' words).
pub const DEMO_OOV_PLAN: &str = include_str!("../data/oov_plan.json");

/// Shipped syntax plan for the demo grammar.
pub const DEMO_SYNTAX_PLAN: &str = include_str!("../data/syntax_plan.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerturbError {
    #[error("replacement `{replacement}` for `{word}` ({category}) is already in the training vocabulary")]
    PlanViolation {
        category: String,
        word: String,
        replacement: String,
    },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("substitutions in `{category}` map two words to `{replacement}`")]
    NotInjective { category: String, replacement: String },
    #[error("step must be within {min}..={max}, got {step}")]
    BadStep { step: u8, min: u8, max: u8 },
    #[error("step {step} does not include every category of the previous step")]
    NotCumulative { step: u8 },
    #[error("template {template:?} for `{verb}` must contain exactly one braced word")]
    BadTemplate { verb: String, template: String },
    #[error("empty replacement for `{0}`")]
    EmptyReplacement(String),
    #[error(transparent)]
    Utterance(#[from] UtteranceError),
}

/// Word substitutions by category, with the categories active at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionPlan {
    pub step: u8,
    pub categories: Vec<String>,
    pub substitutions: BTreeMap<String, BTreeMap<String, String>>,
}

impl SubstitutionPlan {
    pub fn empty() -> Self {
        SubstitutionPlan {
            step: 0,
            categories: Vec::new(),
            substitutions: BTreeMap::new(),
        }
    }

    pub fn demo() -> Self {
        serde_json::from_str(DEMO_OOV_PLAN).expect("shipped plan is valid JSON")
    }

    /// The same word lists restricted to the cumulative categories of `step`.
    pub fn at_step(&self, step: u8) -> Result<SubstitutionPlan, PerturbError> {
        if !(1..=4).contains(&step) {
            return Err(PerturbError::BadStep { step, min: 1, max: 4 });
        }
        Ok(SubstitutionPlan {
            step,
            categories: OOV_SCHEDULE[..step as usize]
                .iter()
                .flat_map(|g| g.iter().map(|c| c.to_string()))
                .collect(),
            substitutions: self.substitutions.clone(),
        })
    }

    /// Checks category names, injectivity and replacement novelty.
    pub fn validate(
        &self,
        train_vocab: &BTreeSet<String>,
        space: &SemanticSpace,
    ) -> Result<(), PerturbError> {
        let known = |c: &str| c == KEYWORDS || space.has_concept(c);
        for c in &self.categories {
            if !known(c) {
                return Err(PerturbError::UnknownCategory(c.clone()));
            }
        }
        for (category, map) in &self.substitutions {
            if !known(category) {
                return Err(PerturbError::UnknownCategory(category.clone()));
            }
            let mut seen = BTreeSet::new();
            for (word, replacement) in map {
                let replacement_tokens = tokenize(replacement);
                if replacement_tokens.is_empty() {
                    return Err(PerturbError::EmptyReplacement(word.clone()));
                }
                if !seen.insert(replacement.as_str()) {
                    return Err(PerturbError::NotInjective {
                        category: category.clone(),
                        replacement: replacement.clone(),
                    });
                }
                if let Some(t) = replacement_tokens.iter().find(|t| train_vocab.contains(*t)) {
                    return Err(PerturbError::PlanViolation {
                        category: category.clone(),
                        word: word.clone(),
                        replacement: t.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Plan mapping every replacement back to its original word.
    pub fn inverse(&self) -> Result<SubstitutionPlan, PerturbError> {
        let mut substitutions = BTreeMap::new();
        for (category, map) in &self.substitutions {
            let mut inv = BTreeMap::new();
            for (word, replacement) in map {
                if inv.insert(replacement.clone(), word.clone()).is_some() {
                    return Err(PerturbError::NotInjective {
                        category: category.clone(),
                        replacement: replacement.clone(),
                    });
                }
            }
            substitutions.insert(category.clone(), inv);
        }
        Ok(SubstitutionPlan {
            step: self.step,
            categories: self.categories.clone(),
            substitutions,
        })
    }

    /// Replacement for a token in a slot labeled `label` (or outside slots when `None`).
    fn lookup<'a>(&'a self, label: Option<&str>, token: &str, space: &SemanticSpace) -> Option<&'a str> {
        self.categories.iter().find_map(|category| {
            let applies = match label {
                Some(l) => category != KEYWORDS && space.is_within(l, category),
                None => category == KEYWORDS,
            };
            if !applies {
                return None;
            }
            self.substitutions.get(category)?.get(token).map(String::as_str)
        })
    }
}

/// Checks that each plan's categories contain the previous plan's.
pub fn check_cumulative(plans: &[SubstitutionPlan]) -> Result<(), PerturbError> {
    for pair in plans.windows(2) {
        let prev: BTreeSet<&String> = pair[0].categories.iter().collect();
        let next: BTreeSet<&String> = pair[1].categories.iter().collect();
        if !prev.is_subset(&next) || pair[1].step <= pair[0].step {
            return Err(PerturbError::NotCumulative { step: pair[1].step });
        }
    }
    Ok(())
}

/// The four substitution columns: word types, word tokens, and their shares.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionStats {
    pub step: u8,
    pub word_types: usize,
    pub word_tokens: usize,
    pub pct_types: f64,
    pub pct_tokens: f64,
}

impl SubstitutionStats {
    pub const TSV_HEADER: &'static str = "step\tword_types\twords\tpct_types\tpct_tokens";

    pub fn to_tsv_row(&self) -> String {
        format!(
            "Step {}\t{}\t{}\t{:.2}\t{:.2}",
            self.step, self.word_types, self.word_tokens, self.pct_types, self.pct_tokens
        )
    }
}

/// Rebuilds an utterance from per-token replacement sequences, re-indexing slots.
///
/// `parts[i]` holds the tokens that replace token `i`; `before[i]` holds tokens
/// inserted just before token `i` (outside any slot starting there).
fn rebuild(u: &Utterance, before: &[Vec<String>], parts: &[Vec<String>]) -> Utterance {
    let mut tokens = Vec::new();
    let mut starts = vec![0; u.tokens.len() + 1];
    for i in 0..u.tokens.len() {
        tokens.extend(before[i].iter().cloned());
        starts[i] = tokens.len();
        tokens.extend(parts[i].iter().cloned());
    }
    starts[u.tokens.len()] = tokens.len();
    let slots = u
        .slots
        .iter()
        .map(|s| {
            let end = if s.end == u.tokens.len() {
                tokens.len()
            } else {
                starts[s.end] - before[s.end].len()
            };
            SlotSpan {
                label: s.label.clone(),
                start: starts[s.start],
                end,
                value: tokens[starts[s.start]..end].join(" "),
            }
        })
        .collect();
    Utterance {
        id: u.id.clone(),
        tokens,
        intent: u.intent.clone(),
        slots,
        meta: u.meta.clone(),
    }
}

/// Applies the active substitutions to every utterance.
pub fn apply_oov(
    corpus: &[Utterance],
    plan: &SubstitutionPlan,
    train_vocab: &BTreeSet<String>,
    space: &SemanticSpace,
) -> Result<(Vec<Utterance>, SubstitutionStats), PerturbError> {
    plan.validate(train_vocab, space)?;
    let mut substituted_types = BTreeSet::new();
    let mut substituted_tokens = 0usize;
    let mut all_types = BTreeSet::new();
    let mut all_tokens = 0usize;
    let mut out = Vec::with_capacity(corpus.len());
    for u in corpus {
        u.validate()?;
        all_tokens += u.tokens.len();
        let mut parts = Vec::with_capacity(u.tokens.len());
        for (i, token) in u.tokens.iter().enumerate() {
            all_types.insert(token.as_str());
            let label = u.slot_at(i).map(|s| u.slots[s].label.as_str());
            match plan.lookup(label, token, space) {
                Some(r) => {
                    substituted_types.insert(token.as_str());
                    substituted_tokens += 1;
                    parts.push(tokenize(r));
                }
                None => parts.push(vec![token.clone()]),
            }
        }
        let before = vec![Vec::new(); u.tokens.len()];
        out.push(rebuild(u, &before, &parts));
    }
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 * 100.0 };
    let stats = SubstitutionStats {
        step: plan.step,
        word_types: substituted_types.len(),
        word_tokens: substituted_tokens,
        pct_types: pct(substituted_types.len(), all_types.len()),
        pct_tokens: pct(substituted_tokens, all_tokens),
    };
    Ok((out, stats))
}

/// Disfluencies injected before slots of one concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disfluency {
    pub concept: String,
    /// A leading determiner in this list is moved out of the slot and doubled.
    pub determiners: Vec<String>,
    /// Inserted before the slot when it has no leading determiner.
    pub filler: String,
}

impl Default for Disfluency {
    fn default() -> Self {
        Disfluency {
            concept: "device".into(),
            determiners: ["le", "la", "les", "l'", "du", "de", "des"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            filler: "euh".into(),
        }
    }
}

/// Verb rewrites (step 1) and disfluency injection (step 2).
///
/// A template is a word sequence with exactly one `{braced}` word, which becomes
/// the new action slot: `"pourrais-tu {allumer}"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxPlan {
    pub step: u8,
    pub verb_rewrites: BTreeMap<String, String>,
    #[serde(default)]
    pub disfluency: Disfluency,
    #[serde(default = "default_action")]
    pub action_concept: String,
}

fn default_action() -> String {
    "action".into()
}

struct Template {
    prefix: Vec<String>,
    verb: Vec<String>,
    suffix: Vec<String>,
}

fn parse_template(verb: &str, template: &str) -> Result<Template, PerturbError> {
    let bad = || PerturbError::BadTemplate {
        verb: verb.to_string(),
        template: template.to_string(),
    };
    let open = template.find('{').ok_or_else(bad)?;
    let close = template[open..].find('}').ok_or_else(bad)? + open;
    let rest = &template[close + 1..];
    if rest.contains(['{', '}']) || template[..open].contains('}') {
        return Err(bad());
    }
    let t = Template {
        prefix: tokenize(&template[..open]),
        verb: tokenize(&template[open + 1..close]),
        suffix: tokenize(rest),
    };
    if t.verb.is_empty() {
        return Err(bad());
    }
    Ok(t)
}

impl SyntaxPlan {
    pub fn demo() -> Self {
        serde_json::from_str(DEMO_SYNTAX_PLAN).expect("shipped plan is valid JSON")
    }

    pub fn with_step(mut self, step: u8) -> Result<Self, PerturbError> {
        if !(1..=2).contains(&step) {
            return Err(PerturbError::BadStep { step, min: 1, max: 2 });
        }
        self.step = step;
        Ok(self)
    }

    fn templates(&self) -> Result<BTreeMap<&str, Template>, PerturbError> {
        if !(1..=2).contains(&self.step) {
            return Err(PerturbError::BadStep {
                step: self.step,
                min: 1,
                max: 2,
            });
        }
        self.verb_rewrites
            .iter()
            .map(|(v, t)| Ok((v.as_str(), parse_template(v, t)?)))
            .collect()
    }
}

/// Rewrites one-word action slots and, at step 2, adds disfluencies before device slots.
pub fn apply_syntax(corpus: &[Utterance], plan: &SyntaxPlan) -> Result<Vec<Utterance>, PerturbError> {
    let templates = plan.templates()?;
    corpus
        .iter()
        .map(|u| {
            u.validate()?;
            Ok(syntax_one(u, plan, &templates))
        })
        .collect()
}

fn syntax_one(u: &Utterance, plan: &SyntaxPlan, templates: &BTreeMap<&str, Template>) -> Utterance {
    let n = u.tokens.len();
    let mut before: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut parts: Vec<Vec<String>> = u.tokens.iter().map(|t| vec![t.clone()]).collect();
    for slot in &u.slots {
        if slot.label == plan.action_concept && slot.end - slot.start == 1 {
            if let Some(t) = templates.get(u.tokens[slot.start].as_str()) {
                before[slot.start].extend(t.prefix.iter().cloned());
                parts[slot.start] = t.verb.clone();
                if slot.end < n {
                    before[slot.end].extend(t.suffix.iter().cloned());
                } else {
                    parts[slot.start].extend(t.suffix.iter().cloned());
                }
            }
        }
    }
    let mut shifted = Vec::new();
    if plan.step >= 2 {
        let d = &plan.disfluency;
        for (k, slot) in u.slots.iter().enumerate() {
            if slot.label != d.concept {
                continue;
            }
            let first = &u.tokens[slot.start];
            if slot.end - slot.start > 1 && d.determiners.iter().any(|x| x == first) {
                before[slot.start].push(first.clone());
                before[slot.start].push(first.clone());
                parts[slot.start].clear();
                shifted.push(k);
            } else {
                before[slot.start].push(d.filler.clone());
            }
        }
    }
    let mut out = rebuild(u, &before, &parts);
    // a trailing suffix folded into the verb token must stay outside the slot
    for (slot, orig) in out.slots.iter_mut().zip(&u.slots) {
        if orig.label == plan.action_concept && orig.end - orig.start == 1 {
            if let Some(t) = templates.get(u.tokens[orig.start].as_str()) {
                slot.end = slot.start + t.verb.len();
                slot.value = out.tokens[slot.start..slot.end].join(" ");
            }
        }
    }
    for k in shifted {
        let s = &mut out.slots[k];
        s.value = out.tokens[s.start..s.end].join(" ");
    }
    out
}

/// Splits a corpus into utterances longer than `threshold` words and the rest.
pub fn split_by_length(corpus: &[Utterance], threshold: usize) -> (Vec<Utterance>, Vec<Utterance>) {
    corpus.iter().cloned().partition(|u| u.tokens.len() > threshold)
}
