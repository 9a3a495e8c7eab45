//! Utterance-pair encoders.
//!
//! An encoder turns a candidate window into one `D`-dimensional row per
//! (candidate, query) pair. That `C×D` matrix is the only thing the
//! structural layers see, so any implementation of [`WindowEncoder`] can be
//! dropped in front of them.
//!
//! [`HashedBowEncoder`] is the trainable default: tokens are hashed into a
//! fixed number of buckets, bucket embeddings are mean-pooled per utterance,
//! and `[candidate pool, query pool, same-speaker bit]` goes through one
//! affine layer and `tanh`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, NodeId};
use crate::corpus::{tokenize, CandidateWindow, Dialogue, Utterance};
use crate::param::{ParamId, ParamSet};
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub hash_buckets: usize,
    pub max_tokens: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            hash_buckets: 4096,
            max_tokens: 128,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.hash_buckets == 0 || self.max_tokens == 0 {
            return Err(TensorError::Config("encoder sizes must be positive".into()));
        }
        if !self.hidden.is_multiple_of(2) {
            return Err(TensorError::Config(format!("hidden size must be even, got {}", self.hidden)));
        }
        Ok(())
    }
}

/// Produces the `C×D` pair representation of a window.
pub trait WindowEncoder {
    fn hidden(&self) -> usize;

    fn encode_window(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        window: &CandidateWindow,
        dialogue: &Dialogue,
    ) -> Result<NodeId>;
}

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct HashedBowEncoder {
    pub config: EncoderConfig,
    pub embedding: ParamId,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
}

impl HashedBowEncoder {
    pub fn new(config: EncoderConfig, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        // A bucket lookup is a one-hot input, so each embedding row sees fan-in 1.
        let embedding = params.add_uniform("encoder.embedding", &[config.hash_buckets, d], 1, rng);
        let proj_w = params.add_uniform("encoder.proj.w", &[2 * d + 1, d], 2 * d + 1, rng);
        let proj_b = params.add_zeros("encoder.proj.b", &[d]);
        Ok(Self {
            config,
            embedding,
            proj_w,
            proj_b,
        })
    }

    /// Bucket indices of the first `max_tokens` tokens of `text`.
    pub fn buckets(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .into_iter()
            .take(self.config.max_tokens)
            .map(|t| (fnv1a(t.as_bytes()) % self.config.hash_buckets as u64) as usize)
            .collect()
    }

    fn encode_rows(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        candidates: &[Option<&Utterance>],
        query: &Utterance,
    ) -> Result<NodeId> {
        let c = candidates.len();
        let bags: Vec<Vec<usize>> = candidates
            .iter()
            .map(|u| u.map_or_else(Vec::new, |u| self.buckets(&u.text)))
            .collect();
        let same: Vec<f64> = candidates
            .iter()
            .map(|u| match u {
                Some(u) if u.speaker == query.speaker => 1.0,
                _ => 0.0,
            })
            .collect();
        let keep: Vec<bool> = candidates.iter().map(Option::is_some).collect();

        let cand = g.embed_mean(params, self.embedding, bags)?;
        let q = g.embed_mean(params, self.embedding, vec![self.buckets(&query.text)])?;
        let q = g.broadcast_rows(q, c)?;
        let bit = g.constant(Tensor::new(&[c, 1], same)?)?;
        let x = g.concat_cols(&[cand, q, bit])?;
        let w = g.param(params, self.proj_w);
        let b = g.param(params, self.proj_b);
        let z = g.matmul(x, w)?;
        let z = g.add_row(z, b)?;
        let h = g.tanh(z)?;
        g.mask_rows(h, &keep)
    }

    /// Encodes one (candidate, query) pair; a pad candidate gives zeros.
    pub fn encode_pair(&self, params: &ParamSet, candidate: Option<&Utterance>, query: &Utterance) -> Result<Tensor> {
        let mut g = Graph::new();
        let row = self.encode_rows(&mut g, params, &[candidate], query)?;
        g.value(row).reshape(&[self.config.hidden])
    }
}

impl WindowEncoder for HashedBowEncoder {
    fn hidden(&self) -> usize {
        self.config.hidden
    }

    fn encode_window(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        window: &CandidateWindow,
        dialogue: &Dialogue,
    ) -> Result<NodeId> {
        let utts = dialogue.utterances();
        let candidates: Vec<Option<&Utterance>> = window.candidates.iter().map(|c| c.map(|p| &utts[p])).collect();
        self.encode_rows(g, params, &candidates, &utts[window.query])
    }
}
