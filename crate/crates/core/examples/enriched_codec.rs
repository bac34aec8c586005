//! Encode annotated utterances as enriched transcriptions, mask them, and decode noisy strings.
//!
//! cargo run --example enriched_codec

use slukit::codec::{decode, encode, encode_concepts, mask_outside_slots, EnrichedTranscript, SymbolTable};
use slukit::corpus::Utterance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let st = SymbolTable::default();
    let u = Utterance::from_text("1", "hestia s'il vous plaît baisser la lampe de la chambre", "set_device")
        .with_slot("action", 4, 5)
        .with_slot("device", 5, 7)
        .with_slot("location-room", 7, 10);

    let full = encode(&u, &st)?;
    println!("full      {full}");
    println!("concepts  {}", encode_concepts(&u, &st)?);
    println!("masked    {}", mask_outside_slots(&full, &st)?);

    for noisy in [
        "@ hestia ^baisser^ }la lampe >de la chambre> @",
        "@ hestia ^baisser ^ la lampe @",
        "@ hestia baisser }la lampe",
    ] {
        let d = decode(&EnrichedTranscript::from(noisy), &st);
        println!("\n{noisy}");
        println!("  intent {}  slots {:?}", d.utterance.intent, d.utterance.slot_labels());
        for r in d.diagnostics.iter() {
            println!("  repair: {r}");
        }
    }
    Ok(())
}
