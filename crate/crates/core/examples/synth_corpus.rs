//! Generate a synthetic tangled chat and write it in the corpus formats.
//!
//!     cargo run --example synth_corpus -- [out-dir] [seed]

use std::collections::BTreeMap;
use std::path::PathBuf;

use disentangle::corpus::{synth_generate, write_links_file, write_utterances_file, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth-data".into()));
    let seed = args.next().map_or(Ok(7), |s| s.parse())?;

    let cfg = SynthConfig {
        n_utterances: 40,
        seed,
        ..Default::default()
    };
    let synth = synth_generate(&cfg)?;
    let d = &synth.dialogue;
    let gold = d.gold_links().expect("generated dialogues carry gold links");

    for (u, t) in d.utterances().iter().zip(&synth.threads).take(12) {
        println!("{:>3} -> {:>3}  [thread {t}] {:<10} {}", u.id, gold[&u.id], u.speaker, u.text);
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in &synth.threads {
        *sizes.entry(t).or_default() += 1;
    }
    println!("thread sizes: {sizes:?}");

    std::fs::create_dir_all(&out)?;
    write_utterances_file(&out.join("utterances.jsonl"), d.utterances())?;
    write_links_file(&out.join("links.tsv"), gold)?;
    println!("wrote {}", out.display());
    Ok(())
}
