//! Parse a small chat log, detect mentions and inspect candidate windows.
//!
//!     cargo run --example corpus_windows

use disentangle::corpus::{build_windows, detect_mentions, load_dialogue};

const LOG: &str = r#"{"id": 1010, "speaker": "regum", "text": "my sound died after the upgrade"}
{"id": 1011, "speaker": "jrib", "text": "anyone know a good irc client"}
{"id": 1012, "speaker": "ikonia", "text": "regum: check alsamixer first"}
{"id": 1013, "speaker": "tomaw", "text": "jrib: hexchat is fine"}
{"id": 1014, "speaker": "regum", "text": "ikonia: everything is unmuted"}
"#;

const LINKS: &str = "1012\t1010\n1013\t1011\n1014\t1012\n";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = load_dialogue(LOG.as_bytes(), LINKS.as_bytes())?;
    let c = 4;
    let mentions = detect_mentions(&d, c);
    println!("mention edges (from, to): {:?}", mentions.edges);

    let windows = build_windows(&d, &mentions, c);
    let w = &windows[4];
    let utts = d.utterances();
    println!("\nwindow for {} (gold slot {}):", utts[w.query].id, w.gold_slot);
    for (slot, cand) in w.candidates.iter().enumerate() {
        let who = cand.map_or("<pad>".to_string(), |p| format!("{} {}", utts[p].id, utts[p].speaker));
        let mask: Vec<&str> = (0..c)
            .map(|q| if w.speaker_mask.at(slot, q) == 0.0 { "0" } else { "-inf" })
            .collect();
        let refs: Vec<usize> = (0..c).filter(|&q| w.references(slot, q)).collect();
        println!("  slot {slot}: {who:<14} mask {mask:?}  referred to by slots {refs:?}");
    }

    let far = &windows[2];
    println!(
        "\nwindow for {}: gold parent {} is in slot {}",
        utts[far.query].id,
        d.gold_links().unwrap()[&utts[far.query].id],
        far.gold_slot
    );
    Ok(())
}
