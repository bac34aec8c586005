//! Build the four staged training slices and print their manifest.
//!
//! cargo run --example curriculum_stages

use slukit::codec::SymbolTable;
use slukit::curriculum::{stage_emit, StagePlan};
use slukit::grammar::Grammar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Grammar::demo().sample(2000, 5)?;
    let stages = stage_emit(&corpus, &StagePlan::default(), &SymbolTable::default())?;
    for (name, records) in stages.by_name() {
        let first = records.first().map(|r| r.enriched.as_str()).unwrap_or("");
        println!("{name:<11} {:>5}  {first}", records.len());
    }
    println!("{}", serde_json::to_string_pretty(&stages.manifest)?);
    Ok(())
}
