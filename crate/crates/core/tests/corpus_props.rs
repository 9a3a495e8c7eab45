use std::collections::BTreeMap;

use disentangle::corpus::{
    build_windows, detect_mentions, load_dialogue, synth_generate, write_links, write_utterances, Dialogue,
    SynthConfig, Utterance,
};
use disentangle::metrics::{cluster_links, Partition};
use proptest::prelude::*;

const NAMES: [&str; 4] = ["ann", "bob", "cy", "dee"];

fn dialogue_strategy() -> impl Strategy<Value = Dialogue> {
    (1usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..4, n),
            prop::collection::vec((0usize..4, any::<bool>()), n),
            prop::collection::vec(0usize..40, n),
        )
            .prop_map(move |(spk, mention, back)| {
                let utts: Vec<Utterance> = (0..n)
                    .map(|i| {
                        let (m, on) = mention[i];
                        let text = if on { format!("{}: see above", NAMES[m]) } else { "nothing here".into() };
                        Utterance::new(3 * i as u64 + 1, NAMES[spk[i]], text)
                    })
                    .collect();
                let gold = (0..n)
                    .map(|i| (utts[i].id, utts[i.saturating_sub(back[i])].id))
                    .collect::<BTreeMap<_, _>>();
                Dialogue::new(utts, Some(gold)).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn window_invariants(d in dialogue_strategy(), c in 2usize..12) {
        let g = detect_mentions(&d, c);
        let ws = build_windows(&d, &g, c);
        prop_assert_eq!(ws.len(), d.len());
        for w in &ws {
            prop_assert_eq!(w.candidates[c - 1], Some(w.query));
            prop_assert!(w.gold_slot < c);
            let parent = d.gold_parent_position(w.query).unwrap();
            match w.candidates.iter().position(|&s| s == Some(parent)) {
                Some(slot) => prop_assert_eq!(w.gold_slot, slot),
                None => prop_assert_eq!(w.gold_slot, c - 1),
            }
            for p in 0..c {
                prop_assert_eq!(w.speaker_mask.at(p, p), 0.0);
                for q in 0..c {
                    if !w.is_pad(p) && !w.is_pad(q) {
                        prop_assert_eq!(w.speaker_mask.at(p, q), w.speaker_mask.at(q, p));
                    }
                    if (w.is_pad(p) || w.is_pad(q)) && p != q {
                        prop_assert!(w.speaker_mask.at(p, q) < -1e9);
                        prop_assert!(!w.references(p, q));
                    }
                }
            }
        }
    }

    #[test]
    fn mentions_point_backwards_within_horizon(d in dialogue_strategy(), c in 2usize..12) {
        let g = detect_mentions(&d, c);
        for &(a, b) in &g.edges {
            let pa = d.position_of(a).unwrap();
            let pb = d.position_of(b).unwrap();
            prop_assert!(pb < pa && pa - pb < c);
        }
    }

    #[test]
    fn serialisation_round_trip(d in dialogue_strategy()) {
        let mut log = Vec::new();
        let mut links = Vec::new();
        write_utterances(&mut log, d.utterances()).unwrap();
        write_links(&mut links, d.gold_links().unwrap()).unwrap();
        let back = load_dialogue(log.as_slice(), links.as_slice()).unwrap();
        prop_assert_eq!(&back, &d);
        let mut log2 = Vec::new();
        write_utterances(&mut log2, back.utterances()).unwrap();
        prop_assert_eq!(log, log2);
    }

    #[test]
    fn synth_gold_is_its_thread_partition(seed in 0u64..1000, threads in 1usize..5, n in 5usize..120) {
        let cfg = SynthConfig { n_utterances: n, n_threads: threads.min(n), seed, ..Default::default() };
        let s = synth_generate(&cfg).unwrap();
        let ids: Vec<u64> = s.dialogue.utterances().iter().map(|u| u.id).collect();
        let by_thread = Partition::from_labels(ids.iter().zip(&s.threads).map(|(&id, &t)| (id, t as u64))).unwrap();
        prop_assert_eq!(cluster_links(s.dialogue.gold_links().unwrap()).unwrap(), by_thread);
    }
}

#[test]
fn self_loop_when_parent_is_out_of_range() {
    let c = 50;
    let utts: Vec<Utterance> = (0..61).map(|i| Utterance::new(i, if i % 2 == 0 { "a" } else { "b" }, "x")).collect();
    let gold = [(60u64, 0u64)].into_iter().collect();
    let d = Dialogue::new(utts, Some(gold)).unwrap();
    let w = &build_windows(&d, &detect_mentions(&d, c), c)[60];
    assert_eq!(w.gold_slot, c - 1);
    assert_eq!(w.candidates[c - 1], Some(60));
}

#[test]
fn figure_one_mention() {
    let utts = vec![
        Utterance::new(1, "regum", "sound is broken"),
        Utterance::new(2, "jrib", "hello"),
        Utterance::new(3, "regum", "after upgrade"),
        Utterance::new(4, "ikonia", "regum: try apt"),
        Utterance::new(5, "x", "regumentation fails"),
    ];
    let d = Dialogue::new(utts, None).unwrap();
    let g = detect_mentions(&d, 50);
    assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(4, 1), (4, 3)]);
}

#[test]
fn synth_mention_prob_one_names_the_parent_speaker() {
    let s = synth_generate(&SynthConfig {
        n_utterances: 300,
        mention_prob: 1.0,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let d = &s.dialogue;
    let gold = d.gold_links().unwrap();
    for u in d.utterances() {
        let p = gold[&u.id];
        if p != u.id {
            let parent = &d.utterances()[d.position_of(p).unwrap()];
            assert!(disentangle::corpus::mentions_speaker(&u.text, &parent.speaker), "{u:?}");
        }
    }
}
