use crate::tensor::Tensor;

use super::{Dialogue, MentionGraph};

/// The `C` parent candidates of one query utterance.
///
/// Slots run oldest first and the query itself always sits in the last
/// slot; windows near the start of a dialogue are padded at the front.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateWindow {
    /// Dialogue position of the query utterance.
    pub query: usize,
    /// Dialogue position held by each slot; `None` for padding.
    pub candidates: Vec<Option<usize>>,
    /// `C×C`, 0 where two unpadded slots share a speaker, −∞ elsewhere.
    /// A padded slot sees only itself.
    pub speaker_mask: Tensor,
    /// Row-major `C×C`: `reference[p·C + q]` is set when the utterance in
    /// slot `q` mentions the speaker of the utterance in slot `p`, so each
    /// slot's neighbourhood is the set of utterances that refer to it.
    pub reference: Vec<bool>,
    /// Slot of the gold parent; the query's own slot when the parent lies
    /// outside the window (or the dialogue carries no annotation).
    pub gold_slot: usize,
}

impl CandidateWindow {
    pub fn width(&self) -> usize {
        self.candidates.len()
    }

    pub fn self_slot(&self) -> usize {
        self.candidates.len() - 1
    }

    pub fn is_pad(&self, slot: usize) -> bool {
        self.candidates[slot].is_none()
    }

    pub fn unpadded(&self) -> Vec<bool> {
        self.candidates.iter().map(Option::is_some).collect()
    }

    pub fn references(&self, p: usize, q: usize) -> bool {
        self.reference[p * self.width() + q]
    }

    /// The speaker mask with every entry set to 0 between unpadded slots.
    pub fn open_mask(&self) -> Tensor {
        let c = self.width();
        let keep = self.unpadded();
        let mut data = vec![f64::NEG_INFINITY; c * c];
        for p in 0..c {
            for q in 0..c {
                if p == q || (keep[p] && keep[q]) {
                    data[p * c + q] = 0.0;
                }
            }
        }
        Tensor::new(&[c, c], data).expect("square mask")
    }
}

/// One window per utterance, with speaker masks, reference adjacency and
/// gold slots. `width` must be at least 2.
pub fn build_windows(d: &Dialogue, g: &MentionGraph, width: usize) -> Vec<CandidateWindow> {
    assert!(width >= 2, "candidate window width must be at least 2");
    let utts = d.utterances();
    (0..utts.len())
        .map(|i| {
            let candidates: Vec<Option<usize>> = (0..width)
                .map(|slot| (i + slot + 1).checked_sub(width))
                .collect();

            let mut mask = vec![f64::NEG_INFINITY; width * width];
            let mut reference = vec![false; width * width];
            for p in 0..width {
                mask[p * width + p] = 0.0;
                let Some(up) = candidates[p] else { continue };
                for q in 0..width {
                    let Some(uq) = candidates[q] else { continue };
                    if utts[up].speaker == utts[uq].speaker {
                        mask[p * width + q] = 0.0;
                    }
                    if p != q && g.contains(utts[uq].id, utts[up].id) {
                        reference[p * width + q] = true;
                    }
                }
            }

            let self_slot = width - 1;
            let gold_slot = d
                .gold_parent_position(i)
                .and_then(|pp| candidates.iter().position(|c| *c == Some(pp)))
                .unwrap_or(self_slot);

            CandidateWindow {
                query: i,
                candidates,
                speaker_mask: Tensor::new(&[width, width], mask).expect("square mask"),
                reference,
                gold_slot,
            }
        })
        .collect()
}
