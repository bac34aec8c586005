//! Corrupt a sampled corpus under the built-in noise sweep and correlate WER with CER.
//!
//! cargo run --release --example correlation_study

use slukit::channel::{parse_sweep, study_to_tsv, wer_cer_study, DEMO_SWEEP};
use slukit::codec::SymbolTable;
use slukit::grammar::Grammar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let st = SymbolTable::default();
    let corpus = Grammar::demo().sample(2000, 7)?;
    let sweep = parse_sweep(DEMO_SWEEP)?;
    let rows = wer_cer_study(&corpus, &sweep, &st)?;
    print!("{}", study_to_tsv(&rows));
    Ok(())
}
