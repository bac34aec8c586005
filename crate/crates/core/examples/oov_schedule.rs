//! Cumulative out-of-vocabulary substitution, one row per step.
//!
//! cargo run --release --example oov_schedule

use slukit::codec::{encode, SymbolTable};
use slukit::grammar::Grammar;
use slukit::perturb::{apply_oov, SubstitutionPlan, SubstitutionStats};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Grammar::demo();
    let st = SymbolTable::default();
    let corpus = g.sample(3000, 11)?;
    let full = SubstitutionPlan::demo();

    println!("{}", SubstitutionStats::TSV_HEADER);
    let mut last = Vec::new();
    for step in 1..=4 {
        let (out, stats) = apply_oov(&corpus, &full.at_step(step)?, &g.vocabulary(), g.semantic_space())?;
        println!("{}", stats.to_tsv_row());
        last = out;
    }
    for (before, after) in corpus.iter().zip(&last).take(3) {
        println!("\n{}\n{}", encode(before, &st)?, encode(after, &st)?);
    }
    Ok(())
}
