//! The full scoring model and its on-disk checkpoint.
//!
//! For one candidate window:
//!
//! ```text
//! H1 = encoder(window)                      C×D
//! H2 = fuse([H1, MHSA(H1, speaker mask)])   C×D
//! H3 = rgcn(H2, reference adjacency)        C×D
//! H4 = bi-SynLSTM(x1 = H1, x2 = H3)         C×2Dr
//! logits = siamese(H4)                      C
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{log_sum_exp, Graph, NodeId};
use crate::corpus::{CandidateWindow, Dialogue};
use crate::encoder::{EncoderConfig, HashedBowEncoder, WindowEncoder};
use crate::error::{Error, Result};
use crate::param::ParamSet;
use crate::structure::{bi_synlstm, MaskedAttentionLayer, RgcnLayer, SiameseScorer, SynLstmCell};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Candidate window width `C`.
    pub window: usize,
    pub hidden: usize,
    pub heads: usize,
    pub recurrent: usize,
    pub hash_buckets: usize,
    pub max_tokens: usize,
    pub seed: u64,
    /// When false the attention mask is all zero between unpadded slots.
    pub speaker_mask: bool,
    /// When false the graph convolution sees no edges.
    pub reference_graph: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 50,
            hidden: 64,
            heads: 4,
            recurrent: 32,
            hash_buckets: 4096,
            max_tokens: 128,
            seed: 0,
            speaker_mask: true,
            reference_graph: true,
        }
    }
}

impl ModelConfig {
    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            hidden: self.hidden,
            hash_buckets: self.hash_buckets,
            max_tokens: self.max_tokens,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!("window must be at least 2, got {}", self.window)));
        }
        if self.recurrent == 0 {
            return Err(Error::Config("recurrent size must be positive".into()));
        }
        self.encoder().validate()?;
        if self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub encoder: HashedBowEncoder,
    pub attention: MaskedAttentionLayer,
    pub rgcn: RgcnLayer,
    pub forward_cell: SynLstmCell,
    pub backward_cell: SynLstmCell,
    pub scorer: SiameseScorer,
}

/// Intermediate activations of one window, for inspection.
pub struct WindowActivations {
    pub h1: NodeId,
    pub h2: NodeId,
    pub h3: NodeId,
    pub h4: NodeId,
    pub logits: NodeId,
    pub attention: Vec<NodeId>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let d = config.hidden;
        let r = config.recurrent;
        let encoder = HashedBowEncoder::new(config.encoder(), &mut params, &mut rng)?;
        let attention = MaskedAttentionLayer::new(d, config.heads, &mut params, &mut rng)?;
        let rgcn = RgcnLayer::new(d, &mut params, &mut rng);
        let forward_cell = SynLstmCell::new("synlstm.fwd", d, r, &mut params, &mut rng);
        let backward_cell = SynLstmCell::new("synlstm.bwd", d, r, &mut params, &mut rng);
        let scorer = SiameseScorer::new(2 * r, &mut params);
        Ok(Self {
            config,
            params,
            encoder,
            attention,
            rgcn,
            forward_cell,
            backward_cell,
            scorer,
        })
    }

    fn check_window(&self, window: &CandidateWindow) -> Result<()> {
        if window.width() != self.config.window {
            return Err(Error::Config(format!(
                "window of width {} given to a model built for {}",
                window.width(),
                self.config.window
            )));
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, window: &CandidateWindow, dialogue: &Dialogue) -> Result<WindowActivations> {
        self.forward_with(&self.params, g, window, dialogue)
    }

    /// Forward pass reading values from `p`, which must be laid out like
    /// `self.params`.
    pub fn forward_with(
        &self,
        p: &ParamSet,
        g: &mut Graph,
        window: &CandidateWindow,
        dialogue: &Dialogue,
    ) -> Result<WindowActivations> {
        self.check_window(window)?;
        let c = window.width();
        let keep = window.unpadded();

        let h1 = self.encoder.encode_window(g, p, window, dialogue)?;
        let mask = if self.config.speaker_mask {
            window.speaker_mask.clone()
        } else {
            window.open_mask()
        };
        let att = self.attention.forward(g, p, h1, &mask)?;
        let h2 = g.mask_rows(att.fused, &keep)?;
        let h3 = if self.config.reference_graph {
            self.rgcn.forward(g, p, h2, &window.reference)?
        } else {
            self.rgcn.forward(g, p, h2, &vec![false; c * c])?
        };
        let h3 = g.mask_rows(h3, &keep)?;
        let h4 = bi_synlstm(g, p, h1, h3, &self.forward_cell, &self.backward_cell)?;
        let logits = self.scorer.forward(g, p, h4, &keep)?;
        Ok(WindowActivations {
            h1,
            h2,
            h3,
            h4,
            logits,
            attention: att.weights,
        })
    }

    pub fn window_logits(&self, g: &mut Graph, window: &CandidateWindow, dialogue: &Dialogue) -> Result<NodeId> {
        Ok(self.forward(g, window, dialogue)?.logits)
    }

    /// Cross-entropy of the window's logits against its gold slot.
    pub fn window_loss(&self, g: &mut Graph, window: &CandidateWindow, dialogue: &Dialogue) -> Result<NodeId> {
        let logits = self.window_logits(g, window, dialogue)?;
        Ok(g.cross_entropy(logits, window.gold_slot)?)
    }

    /// Slot probabilities for one window.
    pub fn window_probs(&self, window: &CandidateWindow, dialogue: &Dialogue) -> Result<Tensor> {
        let mut g = Graph::new();
        let logits = self.window_logits(&mut g, window, dialogue)?;
        let z = g.value(logits);
        let lse = log_sum_exp(z.data());
        Ok(z.map(|v| (v - lse).exp()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            config: self.config,
            tensors: self
                .params
                .iter()
                .map(|p| NamedTensor {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    data: p.value.data().to_vec(),
                })
                .collect(),
        };
        let io = |e: std::io::Error| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        serde_json::to_writer(&mut w, &ck).map_err(|e| checkpoint_err(path, e.to_string()))?;
        w.write_all(b"\n").map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let ck: Checkpoint =
            serde_json::from_reader(BufReader::new(f)).map_err(|e| checkpoint_err(path, e.to_string()))?;
        Self::from_checkpoint(ck).map_err(|e| match e {
            Error::Config(m) => checkpoint_err(path, m),
            other => other,
        })
    }

    fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let mut model = Self::new(ck.config)?;
        if ck.tensors.len() != model.params.len() {
            return Err(Error::Config(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                ck.tensors.len()
            )));
        }
        for (t, id) in ck.tensors.into_iter().zip(model.params.ids().collect::<Vec<_>>()) {
            let expected = model.params.get(id);
            if t.name != expected.name {
                return Err(Error::Config(format!("expected tensor {}, found {}", expected.name, t.name)));
            }
            if t.shape != expected.value.shape() {
                return Err(Error::Config(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    t.name,
                    t.shape,
                    expected.value.shape()
                )));
            }
            let value = Tensor::finite(&t.shape, t.data, "checkpoint")?;
            model.params.set_value(id, value)?;
        }
        Ok(model)
    }
}

fn checkpoint_err(path: &Path, message: String) -> Error {
    Error::Checkpoint {
        path: path.display().to_string(),
        message,
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_windows, detect_mentions, Utterance};

    fn small() -> ModelConfig {
        ModelConfig {
            window: 4,
            hidden: 8,
            heads: 2,
            recurrent: 3,
            hash_buckets: 64,
            ..Default::default()
        }
    }

    fn chat() -> Dialogue {
        let utts = vec![
            Utterance::new(0, "ann", "printer is offline again"),
            Utterance::new(1, "bob", "ann: check the cable"),
            Utterance::new(2, "cy", "anyone tried the new kernel"),
            Utterance::new(3, "ann", "bob: cable is fine"),
        ];
        Dialogue::new(utts, Some([(1, 0), (3, 1)].into_iter().collect())).unwrap()
    }

    #[test]
    fn shape_chain() {
        let m = Model::new(small()).unwrap();
        let d = chat();
        let ws = build_windows(&d, &detect_mentions(&d, 4), 4);
        for w in &ws {
            let mut g = Graph::new();
            let a = m.forward(&mut g, w, &d).unwrap();
            assert_eq!(g.value(a.h1).shape(), &[4, 8]);
            assert_eq!(g.value(a.h2).shape(), &[4, 8]);
            assert_eq!(g.value(a.h3).shape(), &[4, 8]);
            assert_eq!(g.value(a.h4).shape(), &[4, 6]);
            assert_eq!(g.value(a.logits).shape(), &[4]);
        }
    }

    #[test]
    fn untrained_scores_tie_on_unpadded_slots() {
        let m = Model::new(small()).unwrap();
        let d = chat();
        let w = &build_windows(&d, &detect_mentions(&d, 4), 4)[1];
        let p = m.window_probs(w, &d).unwrap();
        assert_eq!(p.data()[0], 0.0);
        assert_eq!(p.data()[1], 0.0);
        assert!((p.data()[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_window_width_is_rejected() {
        let m = Model::new(small()).unwrap();
        let d = chat();
        let w = &build_windows(&d, &detect_mentions(&d, 5), 5)[0];
        assert!(matches!(m.window_loss(&mut Graph::new(), w, &d), Err(Error::Config(_))));
    }

    #[test]
    fn checkpoint_round_trip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = Model::new(small()).unwrap();
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        for (a, b) in m.params.iter().zip(back.params.iter()) {
            assert_eq!(a.value, b.value);
        }

        let text = std::fs::read_to_string(&path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["tensors"][0]["shape"] = serde_json::json!([63, 8]);
        std::fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(Model::load(&path), Err(Error::Checkpoint { .. })));
    }
}
