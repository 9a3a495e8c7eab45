//! Chat-log data: utterances, annotated dialogues, mention graphs and the
//! candidate windows the model scores.

mod io;
mod mentions;
mod synth;
mod window;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use io::{
    load_dialogue, load_dialogue_files, load_links, load_utterances, read_links_file, write_links,
    write_links_file, write_utterances, write_utterances_file,
};
pub use mentions::{detect_mentions, mentions_speaker, tokenize, MentionGraph};
pub use synth::{synth_generate, SynthConfig, SynthDialogue};
pub use window::{build_windows, CandidateWindow};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{source_name} line {line}: {message}")]
    Parse {
        source_name: &'static str,
        line: usize,
        message: String,
    },
    #[error("invalid dialogue: {0}")]
    Invalid(String),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// One chat message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: u64,
    pub speaker: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<String>,
}

impl Utterance {
    pub fn new(id: u64, speaker: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id,
            speaker: speaker.into(),
            text: text.into(),
            ts: None,
        }
    }
}

/// Utterances in log order, optionally with one gold parent per utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    utterances: Vec<Utterance>,
    gold: Option<BTreeMap<u64, u64>>,
}

impl Dialogue {
    /// Validates ids and speakers; `gold` may omit utterances, which then
    /// link to themselves.
    pub fn new(utterances: Vec<Utterance>, gold: Option<BTreeMap<u64, u64>>) -> Result<Self> {
        for (i, u) in utterances.iter().enumerate() {
            if u.speaker.is_empty() {
                return Err(CorpusError::Invalid(format!("utterance {} has an empty speaker", u.id)));
            }
            if i > 0 && utterances[i - 1].id >= u.id {
                return Err(CorpusError::Invalid(format!(
                    "ids must be strictly increasing: {} follows {}",
                    u.id,
                    utterances[i - 1].id
                )));
            }
        }
        let gold = match gold {
            None => None,
            Some(links) => {
                let known: std::collections::BTreeSet<u64> = utterances.iter().map(|u| u.id).collect();
                for (&child, &parent) in &links {
                    if !known.contains(&child) || !known.contains(&parent) {
                        return Err(CorpusError::Invalid(format!("link {child}->{parent} names an unknown id")));
                    }
                    if parent > child {
                        return Err(CorpusError::Invalid(format!("parent {parent} comes after child {child}")));
                    }
                }
                let mut full = BTreeMap::new();
                for u in &utterances {
                    full.insert(u.id, *links.get(&u.id).unwrap_or(&u.id));
                }
                Some(full)
            }
        };
        Ok(Self { utterances, gold })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn is_annotated(&self) -> bool {
        self.gold.is_some()
    }

    /// Child id → parent id for every utterance, when annotated.
    pub fn gold_links(&self) -> Option<&BTreeMap<u64, u64>> {
        self.gold.as_ref()
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.utterances.binary_search_by_key(&id, |u| u.id).ok()
    }

    /// Gold parent position of the utterance at `pos`.
    pub fn gold_parent_position(&self, pos: usize) -> Option<usize> {
        let gold = self.gold.as_ref()?;
        let parent = gold[&self.utterances[pos].id];
        self.position_of(parent)
    }

    /// A copy restricted to the first `n` utterances.
    pub fn prefix(&self, n: usize) -> Self {
        let utterances = self.utterances[..n.min(self.len())].to_vec();
        let gold = self.gold.as_ref().map(|g| {
            utterances.iter().map(|u| (u.id, g[&u.id])).collect::<BTreeMap<_, _>>()
        });
        Self { utterances, gold }
    }

    pub fn without_annotations(&self) -> Self {
        Self {
            utterances: self.utterances.clone(),
            gold: None,
        }
    }
}
