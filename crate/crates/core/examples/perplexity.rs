//! Corpus size, trigram perplexity and OOV counts of a perturbed test set.
//!
//! cargo run --release --example perplexity

use slukit::grammar::Grammar;
use slukit::lm::{CorpusStats, LmConfig};
use slukit::perturb::{apply_oov, SubstitutionPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Grammar::demo();
    let train: Vec<Vec<String>> = g.sample(5000, 1)?.into_iter().map(|u| u.tokens).collect();
    let test = g.sample(500, 2)?;

    println!("set\t{}", CorpusStats::TSV_HEADER);
    let clean: Vec<Vec<String>> = test.iter().map(|u| u.tokens.clone()).collect();
    println!("clean\t{}", CorpusStats::compute(&train, &clean, LmConfig::default())?.to_tsv_row());
    let plan = SubstitutionPlan::demo().at_step(4)?;
    let (oov, _) = apply_oov(&test, &plan, &g.vocabulary(), g.semantic_space())?;
    let oov: Vec<Vec<String>> = oov.into_iter().map(|u| u.tokens).collect();
    println!("oov\t{}", CorpusStats::compute(&train, &oov, LmConfig::default())?.to_tsv_row());
    Ok(())
}
