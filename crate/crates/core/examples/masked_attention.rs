//! Speaker-masked attention on a toy window: weights between different
//! speakers are exactly zero.
//!
//!     cargo run --example masked_attention

use disentangle::autograd::Graph;
use disentangle::corpus::{build_windows, detect_mentions, Dialogue, Utterance};
use disentangle::encoder::{EncoderConfig, HashedBowEncoder, WindowEncoder};
use disentangle::param::ParamSet;
use disentangle::structure::{MaskedAttentionLayer, RgcnLayer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let utts = vec![
        Utterance::new(0, "ann", "grub shows a blank screen"),
        Utterance::new(1, "bob", "is there a mirror for jammy"),
        Utterance::new(2, "ann", "also tried nomodeset"),
        Utterance::new(3, "cy", "ann: which gpu"),
        Utterance::new(4, "bob", "cy: thanks for the link"),
    ];
    let d = Dialogue::new(utts, None)?;
    let c = 5;
    let w = build_windows(&d, &detect_mentions(&d, c), c).pop().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = ParamSet::new();
    let cfg = EncoderConfig {
        hidden: 8,
        hash_buckets: 64,
        max_tokens: 32,
    };
    let enc = HashedBowEncoder::new(cfg, &mut params, &mut rng)?;
    let att = MaskedAttentionLayer::new(8, 2, &mut params, &mut rng)?;
    let gcn = RgcnLayer::new(8, &mut params, &mut rng);

    let mut g = Graph::new();
    let h1 = enc.encode_window(&mut g, &params, &w, &d)?;
    let out = att.forward(&mut g, &params, h1, &w.speaker_mask)?;
    let speakers: Vec<&str> = w
        .candidates
        .iter()
        .map(|p| p.map_or("-", |p| d.utterances()[p].speaker.as_str()))
        .collect();
    println!("slot speakers: {speakers:?}");
    for (head, a) in out.weights.iter().enumerate() {
        println!("head {head}:");
        for (r, who) in speakers.iter().enumerate().take(c) {
            let row: Vec<String> = g.value(*a).row(r).iter().map(|v| format!("{v:.3}")).collect();
            println!("  {:<4} {}", who, row.join(" "));
        }
    }

    let h3 = gcn.forward(&mut g, &params, out.fused, &w.reference)?;
    println!("r-GCN output shape {:?}", g.value(h3).shape());
    Ok(())
}
