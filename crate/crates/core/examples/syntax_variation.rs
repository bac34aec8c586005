//! Verb rewrites (step 1) and determiner disfluencies (step 2).
//!
//! cargo run --example syntax_variation

use slukit::codec::{encode, SymbolTable};
use slukit::corpus::Utterance;
use slukit::grammar::Grammar;
use slukit::perturb::{apply_syntax, split_by_length, SyntaxPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let st = SymbolTable::default();
    let kettle = Utterance::from_text("k", "vocadom allume la bouilloire", "set_device")
        .with_slot("action", 1, 2)
        .with_slot("device", 2, 4);
    println!("original  {}", encode(&kettle, &st)?);
    for step in [1, 2] {
        let plan = SyntaxPlan::demo().with_step(step)?;
        let out = apply_syntax(std::slice::from_ref(&kettle), &plan)?;
        println!("step {step}    {}", encode(&out[0], &st)?);
    }

    let corpus = Grammar::demo().sample(1000, 3)?;
    let (long, short) = split_by_length(&corpus, 7);
    println!("\n{} utterances: {} long, {} short", corpus.len(), long.len(), short.len());
    Ok(())
}
