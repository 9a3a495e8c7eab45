//! Train the full model and two ablations (no speaker mask, no reference
//! graph) on the same data and compare held-out accuracy.
//!
//!     cargo run --release --example ablation -- [seeds]

use disentangle::corpus::{synth_generate, SynthConfig};
use disentangle::model::{Model, ModelConfig};
use disentangle::pipeline::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map_or(Ok(1), |s| s.parse())?;
    let variants = [("full", true, true), ("no speaker mask", false, true), ("no reference", true, false)];

    for (name, speaker_mask, reference_graph) in variants {
        let mut total = 0.0;
        for seed in 0..seeds {
            let data = synth_generate(&SynthConfig {
                n_utterances: 800,
                seed,
                ..Default::default()
            })?;
            let cfg = ModelConfig {
                window: 20,
                hidden: 32,
                recurrent: 16,
                hash_buckets: 1024,
                seed,
                speaker_mask,
                reference_graph,
                ..Default::default()
            };
            let mut model = Model::new(cfg)?;
            let tc = TrainConfig {
                epochs: 6,
                window: cfg.window,
                holdout_fraction: 0.2,
                seed,
                ..Default::default()
            };
            let report = train(&[data.dialogue], &mut model, &tc)?;
            total += report.trace.last().unwrap().accuracy;
        }
        println!("{name:<16} mean held-out accuracy {:.3}", total / seeds as f64);
    }
    Ok(())
}
