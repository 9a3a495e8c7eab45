//! Speaker-mention detection.
//!
//! An utterance references an earlier one when it names that utterance's
//! speaker as a whole token, compared case-insensitively. Tokens are maximal
//! runs of letters, digits, `_` and `-`; a whitespace-delimited chunk with a
//! trailing `:` or `,` removed also counts, so nicks with other characters
//! (`nick|away:`) still match in the usual IRC addressing form.

use std::collections::BTreeSet;

use super::Dialogue;

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Lower-cased tokens of `text` in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !is_token_char(c))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// True if `speaker` appears as a whole token of `text`.
pub fn mentions_speaker(text: &str, speaker: &str) -> bool {
    let speaker = speaker.to_lowercase();
    if speaker.is_empty() {
        return false;
    }
    if tokenize(text).contains(&speaker) {
        return true;
    }
    text.split_whitespace().any(|chunk| {
        let chunk = chunk.strip_suffix([':', ',']).unwrap_or(chunk);
        chunk.to_lowercase() == speaker
    })
}

/// Directed reference edges `(mentioning id, mentioned id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentionGraph {
    pub edges: BTreeSet<(u64, u64)>,
}

impl MentionGraph {
    pub fn contains(&self, from: u64, to: u64) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Links each utterance to the earlier utterances, at most `window − 1`
/// positions back, whose speaker it mentions.
pub fn detect_mentions(d: &Dialogue, window: usize) -> MentionGraph {
    let utts = d.utterances();
    let mut edges = BTreeSet::new();
    for (i, a) in utts.iter().enumerate() {
        let start = i.saturating_sub(window.saturating_sub(1));
        let mut named: Vec<(&str, bool)> = Vec::new();
        for b in &utts[start..i] {
            let hit = match named.iter().find(|(s, _)| *s == b.speaker) {
                Some(&(_, hit)) => hit,
                None => {
                    let hit = mentions_speaker(&a.text, &b.speaker);
                    named.push((&b.speaker, hit));
                    hit
                }
            };
            if hit {
                edges.insert((a.id, b.id));
            }
        }
    }
    MentionGraph { edges }
}
