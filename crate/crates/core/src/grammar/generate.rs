use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CompiledRule, Grammar, GrammarError, Item};
use crate::corpus::{SlotSpan, Utterance, NONE_INTENT};

/// Maximum nonterminal nesting depth before a derivation is declared unbounded.
pub const DEFAULT_MAX_DEPTH: usize = 20;

#[derive(Debug, Clone)]
enum Pending {
    Expand { nt: usize, depth: usize },
    Words(Vec<String>),
    CloseSlot,
}

/// Partial derivation: emitted words plus the still-unexpanded suffix (stack, top = next).
#[derive(Debug, Clone, Default)]
struct State {
    tokens: Vec<String>,
    open: Vec<(String, usize)>,
    slots: Vec<SlotSpan>,
    intent: Option<String>,
    pending: Vec<Pending>,
}

impl State {
    fn apply(&mut self, rule: &CompiledRule, depth: usize) -> Result<(), GrammarError> {
        if let Some(intent) = &rule.intent {
            match &self.intent {
                None => self.intent = Some(intent.clone()),
                Some(cur) if cur != intent => {
                    return Err(GrammarError::ConflictingIntent {
                        first: cur.clone(),
                        second: intent.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(concept) = &rule.concept {
            self.pending.push(Pending::CloseSlot);
            self.open.push((concept.clone(), self.tokens.len()));
        }
        for item in rule.rhs.iter().rev() {
            self.pending.push(match item {
                Item::Terminal(words) => Pending::Words(words.clone()),
                Item::NonTerminal(nt) => Pending::Expand {
                    nt: *nt,
                    depth: depth + 1,
                },
            });
        }
        Ok(())
    }

    fn close_slot(&mut self) {
        let (label, start) = self.open.pop().expect("balanced slot markers");
        let end = self.tokens.len();
        if end > start {
            self.slots.push(SlotSpan {
                value: self.tokens[start..end].join(" "),
                label,
                start,
                end,
            });
        }
    }

    fn finish(self, id: String) -> Utterance {
        let mut slots = self.slots;
        slots.sort_by_key(|s| s.start);
        Utterance {
            id,
            tokens: self.tokens,
            intent: self.intent.unwrap_or_else(|| NONE_INTENT.to_string()),
            slots,
            meta: Default::default(),
        }
    }
}

struct ChoicePoint {
    snapshot: State,
    nt: usize,
    depth: usize,
    next: usize,
}

/// Exhaustive, depth-bounded, duplicate-free enumeration in rule declaration order.
///
/// Yields `Err` once and then stops if a derivation exceeds the depth bound.
pub struct Enumeration<'g> {
    grammar: &'g Grammar,
    max_depth: usize,
    remaining: usize,
    emitted: usize,
    seen: HashSet<Vec<String>>,
    choices: Vec<ChoicePoint>,
    current: Option<State>,
    done: bool,
}

impl<'g> Enumeration<'g> {
    fn new(grammar: &'g Grammar, limit: usize, max_depth: usize) -> Self {
        let start = State {
            pending: vec![Pending::Expand {
                nt: grammar.start_id(),
                depth: 0,
            }],
            ..State::default()
        };
        Enumeration {
            grammar,
            max_depth,
            remaining: limit,
            emitted: 0,
            seen: HashSet::new(),
            choices: Vec::new(),
            current: Some(start),
            done: false,
        }
    }

    /// Runs the current state to completion, recording choice points on the way.
    fn run(&mut self, mut state: State) -> Result<State, GrammarError> {
        while let Some(next) = state.pending.pop() {
            match next {
                Pending::Words(words) => state.tokens.extend(words),
                Pending::CloseSlot => state.close_slot(),
                Pending::Expand { nt, depth } => {
                    if depth > self.max_depth {
                        return Err(GrammarError::DepthExceeded(self.max_depth));
                    }
                    let rules = &self.grammar.compiled()[nt];
                    if rules.len() > 1 {
                        self.choices.push(ChoicePoint {
                            snapshot: state.clone(),
                            nt,
                            depth,
                            next: 1,
                        });
                    }
                    state.apply(&rules[0], depth)?;
                }
            }
        }
        Ok(state)
    }

    fn backtrack(&mut self) -> Result<Option<State>, GrammarError> {
        let Some(mut cp) = self.choices.pop() else {
            return Ok(None);
        };
        let rules = &self.grammar.compiled()[cp.nt];
        let mut state = cp.snapshot.clone();
        state.apply(&rules[cp.next], cp.depth)?;
        cp.next += 1;
        if cp.next < rules.len() {
            self.choices.push(cp);
        }
        Ok(Some(state))
    }
}

impl Iterator for Enumeration<'_> {
    type Item = Result<Utterance, GrammarError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.remaining == 0 {
            return None;
        }
        loop {
            let state = match self.current.take() {
                Some(s) => s,
                None => match self.backtrack() {
                    Ok(Some(s)) => s,
                    Ok(None) => {
                        self.done = true;
                        return None;
                    }
                    Err(e) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                },
            };
            let finished = match self.run(state) {
                Ok(s) => s,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            if self.seen.contains(&finished.tokens) {
                continue;
            }
            self.seen.insert(finished.tokens.clone());
            self.emitted += 1;
            self.remaining -= 1;
            let id = format!("g{:06}", self.emitted);
            return Some(Ok(finished.finish(id)));
        }
    }
}

impl Grammar {
    /// Enumerates up to `limit` distinct utterances with the default depth bound.
    pub fn enumerate(&self, limit: usize) -> Result<Enumeration<'_>, GrammarError> {
        self.enumerate_with_depth(limit, DEFAULT_MAX_DEPTH)
    }

    pub fn enumerate_with_depth(
        &self,
        limit: usize,
        max_depth: usize,
    ) -> Result<Enumeration<'_>, GrammarError> {
        if limit == 0 {
            return Err(GrammarError::ZeroCount);
        }
        Ok(Enumeration::new(self, limit, max_depth))
    }

    /// Collects the whole enumeration (bounded by `usize::MAX`).
    pub fn enumerate_all(&self) -> Result<Vec<Utterance>, GrammarError> {
        self.enumerate(usize::MAX)?.collect()
    }

    /// Draws `n` utterances by weighted top-down expansion.
    ///
    /// Output depends only on the grammar, `n` and `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Utterance>, GrammarError> {
        self.sample_with_depth(n, seed, DEFAULT_MAX_DEPTH)
    }

    pub fn sample_with_depth(
        &self,
        n: usize,
        seed: u64,
        max_depth: usize,
    ) -> Result<Vec<Utterance>, GrammarError> {
        if n == 0 {
            return Err(GrammarError::ZeroCount);
        }
        let samplers = self
            .compiled()
            .iter()
            .enumerate()
            .map(|(nt, rules)| {
                WeightedIndex::new(rules.iter().map(|r| r.weight))
                    .map_err(|_| GrammarError::NoSampleableRule(self.nonterminal_name(nt).to_string()))
            })
            .collect::<Vec<_>>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut state = State {
                pending: vec![Pending::Expand {
                    nt: self.start_id(),
                    depth: 0,
                }],
                ..State::default()
            };
            while let Some(next) = state.pending.pop() {
                match next {
                    Pending::Words(words) => state.tokens.extend(words),
                    Pending::CloseSlot => state.close_slot(),
                    Pending::Expand { nt, depth } => {
                        if depth > max_depth {
                            return Err(GrammarError::DepthExceeded(max_depth));
                        }
                        let dist = samplers[nt].as_ref().map_err(Clone::clone)?;
                        let choice = dist.sample(&mut rng);
                        state.apply(&self.compiled()[nt][choice], depth)?;
                    }
                }
            }
            out.push(state.finish(format!("s{:06}", i + 1)));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::grammar::{Symbol, WINDOW_GRAMMAR};

    fn texts(us: &[Utterance]) -> Vec<String> {
        us.iter().map(Utterance::text).collect()
    }

    #[test]
    fn single_rule_yields_one_utterance() {
        let g = Grammar::load("%intent set_device\nS -> \"stop\" { intent=set_device }").unwrap();
        let all: Vec<_> = g.enumerate(10).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].tokens, ["stop"]);
        assert_eq!(all[0].intent, "set_device");
        assert!(all[0].slots.is_empty());
    }

    #[test]
    fn enumeration_follows_rule_order_and_builds_slots() {
        let src = "%intent set\n%concept action\n%concept device\n\
                   S -> A D { intent=set }\n\
                   A -> \"allume\" { concept=action } | \"éteins\" { concept=action }\n\
                   D -> \"la lumière\" { concept=device } | \"l'ampoule\" { concept=device }\n";
        let g = Grammar::load(src).unwrap();
        let all = g.enumerate_all().unwrap();
        assert_eq!(
            texts(&all),
            [
                "allume la lumière",
                "allume l' ampoule",
                "éteins la lumière",
                "éteins l' ampoule"
            ]
        );
        let u = &all[1];
        assert_eq!(u.slots[0].label, "action");
        assert_eq!((u.slots[1].start, u.slots[1].end), (1, 3));
        assert_eq!(u.slots[1].value, "l' ampoule");
        for u in &all {
            u.validate().unwrap();
        }
    }

    #[test]
    fn duplicates_are_removed() {
        let g = Grammar::load("S -> A | B\nA -> \"x\"\nB -> \"x\" | \"y\"\n").unwrap();
        assert_eq!(texts(&g.enumerate_all().unwrap()), ["x", "y"]);
    }

    #[test]
    fn limit_is_respected() {
        let g = Grammar::demo();
        assert_eq!(g.enumerate(100).unwrap().count(), 100);
        assert_eq!(g.enumerate(0).err(), Some(GrammarError::ZeroCount));
    }

    #[test]
    fn unbounded_recursion_hits_depth_bound() {
        let g = Grammar::load("S -> \"a\" S | \"a\"\n").unwrap();
        let results: Vec<_> = g.enumerate(100).unwrap().collect();
        assert!(matches!(results.last(), Some(Err(GrammarError::DepthExceeded(20)))));
        assert!(results.len() < 100);
        // bounded output is fine
        let first: Vec<_> = g.enumerate(1).unwrap().collect();
        assert!(first[0].is_err());
        let g = Grammar::load("S -> \"a\" | \"a\" S\n").unwrap();
        let ok: Vec<_> = g.enumerate(5).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(ok[4].tokens.len(), 5);
    }

    #[test]
    fn conflicting_intents_are_rejected() {
        let g = Grammar::load("%intent a b\nS -> A { intent=a }\nA -> \"x\" { intent=b }\n").unwrap();
        assert!(matches!(
            g.enumerate(1).unwrap().next(),
            Some(Err(GrammarError::ConflictingIntent { .. }))
        ));
    }

    #[test]
    fn window_grammar_contains_appendix_variants() {
        let g = Grammar::load(WINDOW_GRAMMAR).unwrap();
        let all = g.enumerate_all().unwrap();
        let got: Vec<Vec<String>> = all.iter().map(|u| u.tokens.clone()).collect();
        for variant in [
            "Ouvre la fenêtre",
            "Ouvre la fenêtre s'il vous plaît",
            "Est-ce que tu peux ouvrir la fenêtre?",
            "Est-ce que tu peux ouvrir la fenêtre s'il vous plaît?",
            "Je veux que tu ouvres la fenêtre",
        ] {
            assert!(got.contains(&crate::corpus::tokenize(variant)), "missing {variant}");
        }
    }

    #[test]
    fn demo_enumeration_has_keyword_prefix() {
        let g = Grammar::demo();
        let keywords: Vec<String> = g
            .rules()
            .iter()
            .filter(|r| r.lhs == "KW")
            .flat_map(|r| match &r.rhs[0] {
                Symbol::Terminal(w) => w.clone(),
                Symbol::NonTerminal(_) => vec![],
            })
            .collect();
        assert!(keywords.len() >= 5);
        let first: Vec<Utterance> = g.enumerate(100).unwrap().collect::<Result<_, _>>().unwrap();
        let distinct: HashSet<_> = first.iter().map(|u| u.tokens.clone()).collect();
        assert_eq!(distinct.len(), 100);
        for u in &first {
            assert!(keywords.contains(&u.tokens[0]), "{}", u.text());
            assert_ne!(u.intent, NONE_INTENT);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Grammar::demo();
        assert_eq!(g.sample(10, 42).unwrap(), g.sample(10, 42).unwrap());
        assert_ne!(g.sample(10, 42).unwrap(), g.sample(10, 43).unwrap());
        assert_eq!(g.sample(0, 1).err(), Some(GrammarError::ZeroCount));
    }

    #[test]
    fn sampling_covers_every_intent() {
        let g = Grammar::demo();
        let mut hist: BTreeMap<String, usize> = BTreeMap::new();
        for u in g.sample(1000, 1).unwrap() {
            u.validate().unwrap();
            *hist.entry(u.intent).or_default() += 1;
        }
        let intents: Vec<&str> = g.command_intents().into_iter().collect();
        assert_eq!(hist.keys().map(String::as_str).collect::<Vec<_>>(), intents);
    }

    #[test]
    fn zero_weight_alternatives_are_never_sampled() {
        let g = Grammar::load("S -> \"a\" @0 | \"b\"\n").unwrap();
        assert!(g.sample(50, 3).unwrap().iter().all(|u| u.tokens == ["b"]));
        let g = Grammar::load("S -> \"a\" @0\n").unwrap();
        assert!(matches!(g.sample(1, 3), Err(GrammarError::NoSampleableRule(_))));
    }

    /// Brute-force count of derivations per intent, for grammars without duplicate yields.
    fn count_derivations(g: &Grammar) -> BTreeMap<String, usize> {
        fn expand(g: &Grammar, nt: usize, intent: Option<&str>, out: &mut Vec<Option<String>>) {
            // each element of `out` is the intent of one complete derivation of nt
            let mut results = Vec::new();
            for rule in &g.compiled()[nt] {
                let here = intent.or(rule.intent.as_deref());
                let mut partial: Vec<Option<String>> = vec![here.map(str::to_string)];
                for item in &rule.rhs {
                    if let Item::NonTerminal(child) = item {
                        let mut next = Vec::new();
                        for p in &partial {
                            let mut sub = Vec::new();
                            expand(g, *child, p.as_deref(), &mut sub);
                            next.extend(sub.into_iter().map(|s| s.or_else(|| p.clone())));
                        }
                        partial = next;
                    }
                }
                results.extend(partial);
            }
            out.extend(results);
        }
        let mut all = Vec::new();
        expand(g, g.start_id(), None, &mut all);
        let mut hist = BTreeMap::new();
        for i in all {
            *hist.entry(i.unwrap_or_else(|| NONE_INTENT.into())).or_default() += 1;
        }
        hist
    }

    #[test]
    fn intent_histogram_matches_derivation_count() {
        let src = "%intent a b\nS -> X { intent=a } | Y { intent=b } | \"z\"\n\
                   X -> \"x1\" | \"x2\" | \"x3\" W\nW -> \"w1\" | \"w2\"\nY -> \"y\" W\n";
        let g = Grammar::load(src).unwrap();
        let mut hist: BTreeMap<String, usize> = BTreeMap::new();
        for u in g.enumerate_all().unwrap() {
            *hist.entry(u.intent).or_default() += 1;
        }
        assert_eq!(hist, count_derivations(&g));
        assert_eq!(hist["a"], 4);
    }
}
