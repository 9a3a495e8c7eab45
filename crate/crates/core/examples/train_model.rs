//! Train the full model on a synthetic corpus and save a checkpoint.
//!
//!     cargo run --release --example train_model -- [epochs] [checkpoint]
//!
//! Uses a reduced window and hidden size so a few epochs finish in seconds;
//! the defaults (C = 50, D = 64) are what `disentangle train` uses.

use std::path::PathBuf;

use disentangle::corpus::{synth_generate, SynthConfig};
use disentangle::model::{Model, ModelConfig};
use disentangle::pipeline::{train_with_progress, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(Ok(4), |s| s.parse())?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "model.json".into()));

    let synth = synth_generate(&SynthConfig {
        n_utterances: 600,
        seed: 1,
        ..Default::default()
    })?;
    let model_cfg = ModelConfig {
        window: 20,
        hidden: 32,
        recurrent: 16,
        hash_buckets: 1024,
        seed: 1,
        ..Default::default()
    };
    let mut model = Model::new(model_cfg)?;
    println!("{} parameter tensors, {} values", model.params.len(), model.params.total_values());

    let cfg = TrainConfig {
        epochs,
        window: model_cfg.window,
        holdout_fraction: 0.2,
        seed: 1,
        ..Default::default()
    };
    let report = train_with_progress(&[synth.dialogue], &mut model, &cfg, |e| {
        println!("epoch {:>2}  loss {:.4}  held-out accuracy {:.3}", e.epoch, e.loss, e.accuracy);
    })?;
    println!("{} optimizer steps", report.steps);

    model.save(&out)?;
    println!("saved {}", out.display());
    Ok(())
}
