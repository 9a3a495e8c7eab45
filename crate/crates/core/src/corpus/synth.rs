//! Synthetic tangled dialogues with known thread structure.
//!
//! Threads open at staggered points and then interleave at random. Each
//! thread has its own small vocabulary plus a shared filler vocabulary, and
//! a few participants drawn from the user pool. A reply picks one of the
//! speakers among the last few utterances of its thread and links to that
//! speaker's latest utterance there; with probability `mention_prob` the
//! text starts with that speaker's name (`name: ...`). Replies without a
//! mention link to the latest utterance of the thread.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Dialogue, Result, Utterance};

const NICKS: &[&str] = &[
    "regum", "ubotu", "jrib", "ikonia", "mneptok", "bazhang", "ompaul", "tomaw", "histo", "nalioth",
    "seveas", "dax", "pici", "wols", "lotuspsychje", "tritium", "ducasse", "genii", "bekks", "oerheks",
];

const FILLER: &[&str] = &[
    "the", "a", "it", "is", "i", "you", "to", "and", "but", "so", "just", "now", "then", "with",
    "that", "this", "ok", "yes", "no", "maybe",
];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_utterances: usize,
    pub n_users: usize,
    pub n_threads: usize,
    pub mention_prob: f64,
    pub seed: u64,
    /// Topic words per thread.
    pub topic_words: usize,
    /// Probability that a content word comes from the thread's topic pool.
    pub topic_prob: f64,
    /// How many recent thread utterances a reply may target.
    pub reply_horizon: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utterances: 200,
            n_users: 6,
            n_threads: 4,
            mention_prob: 0.9,
            seed: 0,
            topic_words: 12,
            topic_prob: 0.8,
            reply_horizon: 3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::Config(m));
        if self.n_users < 2 {
            return bad(format!("need at least 2 users, got {}", self.n_users));
        }
        if self.n_threads < 1 {
            return bad("need at least 1 thread".into());
        }
        if self.n_threads > self.n_utterances {
            return bad(format!(
                "{} threads cannot fit in {} utterances",
                self.n_threads, self.n_utterances
            ));
        }
        if !(0.0..=1.0).contains(&self.mention_prob) || !(0.0..=1.0).contains(&self.topic_prob) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if self.topic_words == 0 || self.reply_horizon == 0 {
            return bad("topic_words and reply_horizon must be positive".into());
        }
        Ok(())
    }
}

/// A generated dialogue plus the thread each utterance was generated in.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDialogue {
    pub dialogue: Dialogue,
    pub threads: Vec<usize>,
}

fn user_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let base = NICKS[i % NICKS.len()];
            if i < NICKS.len() {
                base.to_string()
            } else {
                format!("{base}{}", i / NICKS.len())
            }
        })
        .collect()
}

fn topic_vocabulary(n: usize, rng: &mut ChaCha8Rng, reserved: &BTreeSet<String>) -> Vec<String> {
    let mut seen = reserved.clone();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(2..=3);
        let word: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if seen.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDialogue> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let users = user_names(cfg.n_users);
    let mut reserved: BTreeSet<String> = users.iter().cloned().collect();
    reserved.extend(FILLER.iter().map(|s| s.to_string()));
    let vocab = topic_vocabulary(cfg.n_threads * cfg.topic_words, &mut rng, &reserved);
    let pools: Vec<&[String]> = vocab.chunks(cfg.topic_words).collect();

    let participants: Vec<Vec<usize>> = (0..cfg.n_threads)
        .map(|_| {
            let k = rng.gen_range(2..=cfg.n_users.min(3));
            let mut all: Vec<usize> = (0..cfg.n_users).collect();
            all.shuffle(&mut rng);
            all.truncate(k);
            all
        })
        .collect();

    let stride = (cfg.n_utterances / (2 * cfg.n_threads)).max(1);
    let opens: BTreeMap<usize, usize> = (0..cfg.n_threads).map(|t| (t * stride, t)).collect();

    let mut history: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_threads];
    let mut speakers: Vec<usize> = Vec::with_capacity(cfg.n_utterances);
    let mut threads = Vec::with_capacity(cfg.n_utterances);
    let mut utterances = Vec::with_capacity(cfg.n_utterances);
    let mut links = BTreeMap::new();
    let mut open: Vec<usize> = Vec::new();

    for pos in 0..cfg.n_utterances {
        let words = |rng: &mut ChaCha8Rng, thread: usize| -> Vec<String> {
            let n = rng.gen_range(4..=8);
            (0..n)
                .map(|_| {
                    if rng.gen_bool(cfg.topic_prob) {
                        pools[thread].choose(rng).unwrap().clone()
                    } else {
                        FILLER.choose(rng).unwrap().to_string()
                    }
                })
                .collect()
        };

        let (thread, speaker, parent, text) = if let Some(&t) = opens.get(&pos) {
            open.push(t);
            let speaker = *participants[t].choose(&mut rng).unwrap();
            (t, speaker, pos, words(&mut rng, t).join(" "))
        } else {
            let t = *open.choose(&mut rng).unwrap();
            let recent = &history[t][history[t].len().saturating_sub(cfg.reply_horizon)..];
            let mut recent_speakers: Vec<usize> = Vec::new();
            for &p in recent {
                if !recent_speakers.contains(&speakers[p]) {
                    recent_speakers.push(speakers[p]);
                }
            }
            let addressee = *recent_speakers.choose(&mut rng).unwrap();
            let mention = rng.gen_bool(cfg.mention_prob);
            let parent = if mention {
                *recent.iter().rev().find(|&&p| speakers[p] == addressee).unwrap()
            } else {
                *recent.last().unwrap()
            };
            let parent_speaker = speakers[parent];
            let choices: Vec<usize> = participants[t]
                .iter()
                .copied()
                .filter(|&u| u != parent_speaker)
                .collect();
            let speaker = *choices.choose(&mut rng).unwrap();
            let mut text = words(&mut rng, t).join(" ");
            if mention {
                text = format!("{}: {}", users[parent_speaker], text);
            }
            (t, speaker, parent, text)
        };

        history[thread].push(pos);
        speakers.push(speaker);
        threads.push(thread);
        links.insert(pos as u64, parent as u64);
        let mut u = Utterance::new(pos as u64, users[speaker].clone(), text);
        u.ts = Some(format!("{:02}:{:02}", (pos / 60) % 24, pos % 60));
        utterances.push(u);
    }

    Ok(SynthDialogue {
        dialogue: Dialogue::new(utterances, Some(links))?,
        threads,
    })
}
