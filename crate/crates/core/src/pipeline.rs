//! Training over candidate windows, parent prediction and thread clustering.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Graph;
use crate::corpus::{build_windows, detect_mentions, CandidateWindow, Dialogue};
use crate::error::{Error, Result};
use crate::metrics::{cluster_links, MetricError, Partition};
use crate::model::Model;
use crate::optim::{AdamW, AdamWConfig};
use crate::tensor::TensorError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Candidate window width; must match the model.
    pub window: usize,
    /// Progress callback cadence, in epochs.
    pub report_every: usize,
    /// Tail fraction of each dialogue held out for accuracy.
    pub holdout_fraction: f64,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            lr: 1e-3,
            weight_decay: 0.01,
            seed: 0,
            window: 50,
            report_every: 1,
            holdout_fraction: 0.1,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.report_every == 0 {
            return Err(Error::Config("epochs, batch size and report cadence must be positive".into()));
        }
        if self.window < 2 {
            return Err(Error::Config(format!("window must be at least 2, got {}", self.window)));
        }
        if !self.lr.is_finite() || self.lr < 0.0 || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config("learning rate and weight decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!(
                "holdout fraction must lie in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's windows.
    pub loss: f64,
    /// Parent accuracy on the held-out windows; `NaN` when none are held out.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub trace: Vec<EpochStats>,
    pub steps: usize,
}

/// Windows of several dialogues, split into training and held-out sets.
pub struct WindowSet<'a> {
    pub dialogues: &'a [Dialogue],
    /// `(dialogue index, window)`.
    pub train: Vec<(usize, CandidateWindow)>,
    pub held_out: Vec<(usize, CandidateWindow)>,
}

impl<'a> WindowSet<'a> {
    /// The last `holdout_fraction` of each dialogue's utterances is held out;
    /// their windows still reach back into the training part.
    pub fn split(dialogues: &'a [Dialogue], window: usize, holdout_fraction: f64) -> Result<Self> {
        let mut train = Vec::new();
        let mut held_out = Vec::new();
        for (k, d) in dialogues.iter().enumerate() {
            if !d.is_annotated() {
                return Err(Error::Config(format!("dialogue {k} has no reply-to annotation")));
            }
            let cut = d.len() - (d.len() as f64 * holdout_fraction).round() as usize;
            let g = detect_mentions(d, window);
            for w in build_windows(d, &g, window) {
                if w.query < cut {
                    train.push((k, w));
                } else {
                    held_out.push((k, w));
                }
            }
        }
        Ok(Self {
            dialogues,
            train,
            held_out,
        })
    }
}

pub fn train(dialogues: &[Dialogue], model: &mut Model, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with_progress(dialogues, model, cfg, |_| {})
}

/// Trains in place; `progress` sees every `report_every`-th epoch.
pub fn train_with_progress(
    dialogues: &[Dialogue],
    model: &mut Model,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.window != model.config.window {
        return Err(TensorError::Shape {
            op: "window width",
            left: vec![model.config.window],
            right: vec![cfg.window],
        }
        .into());
    }
    let set = WindowSet::split(dialogues, cfg.window, cfg.holdout_fraction)?;
    let mut opt = AdamW::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..Default::default()
        },
        &model.params,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..set.train.len()).collect();
    let mut report = TrainReport::default();

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| report.steps >= m) {
                break;
            }
            model.params.zero_grad();
            for &i in batch {
                let (k, w) = &set.train[i];
                let mut g = Graph::new();
                let loss = model.window_loss(&mut g, w, &set.dialogues[*k])?;
                let v = g.value(loss).data()[0];
                if !v.is_finite() {
                    return Err(TensorError::NonFinite { op: "loss" }.into());
                }
                total += v;
                g.backward(loss, &mut model.params)?;
            }
            seen += batch.len();
            model.params.scale_grads(1.0 / batch.len() as f64);
            opt.step(&mut model.params);
            report.steps += 1;
        }
        if seen == 0 {
            break 'epochs;
        }
        let stats = EpochStats {
            epoch,
            loss: total / seen as f64,
            accuracy: accuracy(model, set.dialogues, &set.held_out)?,
        };
        if epoch % cfg.report_every == 0 || epoch == cfg.epochs {
            progress(&stats);
        }
        report.trace.push(stats);
    }
    Ok(report)
}

/// Fraction of windows whose predicted parent is the gold parent.
pub fn accuracy(model: &Model, dialogues: &[Dialogue], windows: &[(usize, CandidateWindow)]) -> Result<f64> {
    if windows.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0usize;
    for (k, w) in windows {
        let d = &dialogues[*k];
        let pred = predict_window(model, w, d)?;
        let gold = d.gold_links().expect("annotated")[&d.utterances()[w.query].id];
        if pred.parent == gold {
            hits += 1;
        }
    }
    Ok(hits as f64 / windows.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPrediction {
    pub child: u64,
    pub parent: u64,
    /// Probability the model gives the chosen slot.
    pub confidence: f64,
}

/// Highest-probability unpadded slot; exact ties go to the most recent.
pub fn predict_window(model: &Model, w: &CandidateWindow, d: &Dialogue) -> Result<LinkPrediction> {
    let probs = model.window_probs(w, d)?;
    let mut best = w.self_slot();
    for slot in (0..w.width()).rev() {
        if !w.is_pad(slot) && probs.data()[slot] > probs.data()[best] {
            best = slot;
        }
    }
    let utts = d.utterances();
    let parent = w.candidates[best].expect("unpadded slot");
    Ok(LinkPrediction {
        child: utts[w.query].id,
        parent: utts[parent].id,
        confidence: probs.data()[best],
    })
}

/// One prediction per utterance, in log order.
pub fn predict(dialogue: &Dialogue, model: &Model) -> Result<Vec<LinkPrediction>> {
    let c = model.config.window;
    let g = detect_mentions(dialogue, c);
    build_windows(dialogue, &g, c)
        .iter()
        .map(|w| predict_window(model, w, dialogue))
        .collect()
}

pub fn links_of(predictions: &[LinkPrediction]) -> Result<BTreeMap<u64, u64>> {
    let mut links = BTreeMap::new();
    for p in predictions {
        if links.insert(p.child, p.parent).is_some() {
            return Err(MetricError::Invalid(format!("utterance {} predicted twice", p.child)).into());
        }
    }
    Ok(links)
}

/// Threads as connected components of the predicted reply-to graph.
pub fn cluster(predictions: &[LinkPrediction]) -> Result<Partition> {
    Ok(cluster_links(&links_of(predictions)?)?)
}
