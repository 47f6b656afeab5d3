use driftlab::corpus::{ingest, IngestOptions};
use driftlab::synth::{
    full_schedule, generate_period, ground_truth, write_all, write_corpus, DriftSpec, DriftedWord, GROUND_TRUTH_FILE,
};

fn spec() -> DriftSpec {
    DriftSpec {
        vocab_size: 60,
        n_periods: 3,
        n_topics: 3,
        window: 2,
        sentences_per_period: 20_000,
        seed: 3,
        drifted: vec![DriftedWord { word: 4, source: 0, target: 2, schedule: full_schedule(3) }],
        ..DriftSpec::default()
    }
}

#[test]
fn empirical_frequencies_match_expectation() {
    let s = spec();
    for p in 0..3 {
        let sentences = generate_period(&s, p);
        let mut counts = vec![0f64; s.vocab_size];
        for &w in sentences.iter().flatten() {
            counts[w] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let tv: f64 = counts.iter().zip(s.expected_frequencies(p)).map(|(c, e)| (c / total - e).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "period {p}: total variation {tv}");
    }
}

#[test]
fn drifted_word_moves_between_topic_contexts() {
    let s = spec();
    let pools = s.context_pools();
    let share_in_target = |p: usize| {
        let (mut hits, mut all) = (0.0f64, 0.0f64);
        for sent in generate_period(&s, p).iter().filter(|x| x[s.window] == 4) {
            for (i, w) in sent.iter().enumerate() {
                if i != s.window {
                    all += 1.0;
                    if pools[2].contains(w) {
                        hits += 1.0;
                    }
                }
            }
        }
        hits / all
    };
    assert_eq!(share_in_target(0), 0.0);
    assert!((share_in_target(1) - 0.5).abs() < 0.1);
    assert_eq!(share_in_target(2), 1.0);
}

#[test]
fn output_is_deterministic_and_ingestible() {
    let s = DriftSpec { sentences_per_period: 500, ..spec() };
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_corpus(&s, &mut a).unwrap();
    write_corpus(&s, &mut b).unwrap();
    assert_eq!(a, b);
    let got = ingest(a.as_slice(), &s.period_config().unwrap(), &IngestOptions::default()).unwrap();
    assert_eq!(got.stats.skipped(), 0);

    let dir = tempfile::tempdir().unwrap();
    write_all(&s, dir.path(), 60).unwrap();
    let truth: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(GROUND_TRUTH_FILE)).unwrap()).unwrap();
    assert_eq!(truth["drifted_words"][0]["key"], "w0004#NOUN");
    assert_eq!(ground_truth(&s).stable_words.len(), 59);
}
