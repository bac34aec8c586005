//! Word, concept and intent scores for a hypothesis that lost the device delimiters.
//!
//! cargo run --example score_hypothesis

use slukit::codec::{decode, EnrichedTranscript, SymbolTable};
use slukit::metrics::{corpus_report, word_alignment, UtteranceScore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let st = SymbolTable::default();
    let reference = decode(&EnrichedTranscript::from("@ vocadom ^allume^ }la lumière} @"), &st).utterance;
    let hyp = decode(&EnrichedTranscript::from("@ vocadom ^allume ^ la lumière @"), &st).utterance;

    let s = UtteranceScore::compute(&reference, &hyp, false);
    println!("WER {:.1}  CER {:.1}  intent {} -> {}", s.wer, s.cer, s.ref_intent, s.hyp_intent);

    let a = word_alignment("allume la lumière", "allumez lumière");
    println!("alignment {:?}: S={} D={} I={}", a.ops, a.substitutions, a.deletions, a.insertions);

    let report = corpus_report("demo", &[reference], &[hyp], None, false)?;
    print!("{}", report.to_tsv());
    Ok(())
}
