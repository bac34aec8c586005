//! Enumerate and sample the built-in home-automation grammar.
//!
//! cargo run --example generate_corpus

use std::collections::BTreeMap;

use slukit::grammar::Grammar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Grammar::demo();
    println!("{} rules, {} words", g.rule_count(), g.vocabulary().len());

    let all = g.enumerate_all()?;
    let mut by_intent: BTreeMap<&str, usize> = BTreeMap::new();
    for u in &all {
        *by_intent.entry(u.intent.as_str()).or_default() += 1;
    }
    println!("{} distinct utterances", all.len());
    for (intent, n) in &by_intent {
        println!("  {intent:<22} {n}");
    }

    for u in g.sample(5, 42)? {
        let slots: Vec<String> = u.slots.iter().map(|s| format!("{}={:?}", s.label, s.value)).collect();
        println!("{:<50} {} [{}]", u.text(), u.intent, slots.join(", "));
    }
    Ok(())
}
