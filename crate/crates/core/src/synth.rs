//! Synthetic multi-period corpora with planted semantic and sentiment drift.
//!
//! The vocabulary is split into contiguous topic blocks. Every sentence has a
//! center word drawn uniformly from the vocabulary and `2 * window` context
//! words drawn from the stable words of one active topic. A stable center
//! always uses its own topic; a drifted center uses its target topic with
//! probability `schedule[period]` and its source topic otherwise.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentRecord, PeriodConfig, PeriodCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::senti::{Label, Polarity, SentimentExample, SentimentLexicon};
use crate::shift::REPORT_SCHEMA_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftedWord {
    /// Index into the vocabulary.
    pub word: usize,
    pub source: usize,
    pub target: usize,
    /// Probability of the target topic in each period; non-decreasing in `[0, 1]`.
    pub schedule: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSpec {
    pub vocab_size: usize,
    pub n_periods: usize,
    pub n_topics: usize,
    pub window: usize,
    pub sentences_per_period: usize,
    pub sentences_per_document: usize,
    pub seed: u64,
    pub start_year: i32,
    pub span_years: u32,
    pub drifted: Vec<DriftedWord>,
    /// Sentiment of each topic; when empty topics cycle negative, neutral, positive.
    pub topic_polarity: Vec<Label>,
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec {
            vocab_size: 1000,
            n_periods: 5,
            n_topics: 10,
            window: 4,
            sentences_per_period: 50_000,
            sentences_per_document: 20,
            seed: 1,
            start_year: 2000,
            span_years: 5,
            drifted: Vec::new(),
            topic_polarity: Vec::new(),
        }
    }
}

/// Linear ramp from 0 in the first period to 1 in the last.
pub fn full_schedule(n_periods: usize) -> Vec<f64> {
    if n_periods < 2 {
        return vec![1.0; n_periods];
    }
    (0..n_periods).map(|p| p as f64 / (n_periods - 1) as f64).collect()
}

const MINI_SPEC: &str = include_str!("../data/mini_spec.toml");

impl DriftSpec {
    /// Small corpus used by the CLI smoke tests and the `synth --preset mini` run.
    pub fn mini() -> Self {
        Self::from_toml_str(MINI_SPEC).expect("bundled mini spec is valid")
    }

    /// Drift-detection setup at the scale used for the end-to-end checks:
    /// 1000 words, 5 periods, 50k sentences per period and three drifted
    /// words on the full schedule.
    pub fn full(seed: u64) -> Self {
        DriftSpec {
            seed,
            window: 12,
            drifted: [(5, 0, 5), (205, 2, 7), (505, 5, 9)]
                .into_iter()
                .map(|(word, source, target)| DriftedWord {
                    word,
                    source,
                    target,
                    schedule: full_schedule(5),
                })
                .collect(),
            ..DriftSpec::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: DriftSpec = toml::from_str(s).map_err(|e| Error::Config(format!("drift spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("drift spec serializes")
    }

    pub fn topic_size(&self) -> usize {
        self.vocab_size / self.n_topics
    }

    /// Home topic of a word; the remainder words join the last topic.
    pub fn topic_of(&self, word: usize) -> usize {
        (word / self.topic_size()).min(self.n_topics - 1)
    }

    pub fn polarity_of_topic(&self, topic: usize) -> Label {
        if self.topic_polarity.is_empty() {
            Label::ALL[topic % 3]
        } else {
            self.topic_polarity[topic]
        }
    }

    pub fn word_name(&self, word: usize) -> String {
        let width = (self.vocab_size.saturating_sub(1)).to_string().len().max(4);
        format!("w{word:0width$}")
    }

    pub fn word_key(&self, word: usize) -> String {
        format!("{}#NOUN", self.word_name(word))
    }

    pub fn is_drifted(&self, word: usize) -> bool {
        self.drifted.iter().any(|d| d.word == word)
    }

    /// Stable words of each topic, the pools context words are drawn from.
    pub fn context_pools(&self) -> Vec<Vec<usize>> {
        let mut pools = vec![Vec::new(); self.n_topics];
        for w in 0..self.vocab_size {
            if !self.is_drifted(w) {
                pools[self.topic_of(w)].push(w);
            }
        }
        pools
    }

    pub fn stable_words(&self) -> Vec<usize> {
        (0..self.vocab_size).filter(|&w| !self.is_drifted(w)).collect()
    }

    pub fn period_config(&self) -> Result<PeriodConfig> {
        PeriodConfig::uniform(self.start_year, self.span_years, self.n_periods)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_periods == 0 || self.sentences_per_period == 0 || self.sentences_per_document == 0 {
            return bad("periods, sentences and sentences per document must be positive".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.n_topics == 0 || self.vocab_size < 2 * self.n_topics {
            return bad(format!(
                "vocabulary of {} words is too small for {} topics",
                self.vocab_size, self.n_topics
            ));
        }
        if self.span_years == 0 {
            return bad("span_years must be positive".into());
        }
        if !self.topic_polarity.is_empty() && self.topic_polarity.len() != self.n_topics {
            return bad(format!(
                "topic_polarity has {} entries for {} topics",
                self.topic_polarity.len(),
                self.n_topics
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for d in &self.drifted {
            if d.word >= self.vocab_size {
                return bad(format!("drifted word {} outside the vocabulary", d.word));
            }
            if !seen.insert(d.word) {
                return bad(format!("word {} drifts twice", d.word));
            }
            if d.source != self.topic_of(d.word) {
                return bad(format!(
                    "word {} belongs to topic {}, not source topic {}",
                    d.word,
                    self.topic_of(d.word),
                    d.source
                ));
            }
            if d.target >= self.n_topics || d.target == d.source {
                return bad(format!("word {}: target topic must differ from source", d.word));
            }
            if d.schedule.len() != self.n_periods {
                return bad(format!(
                    "word {}: schedule has {} values for {} periods",
                    d.word,
                    d.schedule.len(),
                    self.n_periods
                ));
            }
            if d.schedule.iter().any(|v| !(0.0..=1.0).contains(v)) || d.schedule.windows(2).any(|w| w[1] < w[0]) {
                return bad(format!("word {}: schedule must be non-decreasing within [0, 1]", d.word));
            }
        }
        if self.context_pools().iter().any(|p| p.len() < 2) {
            return bad("every topic needs at least two stable words".into());
        }
        Ok(())
    }

    /// Probability that a sentence in `period` has `topic` active.
    fn topic_weights(&self, period: usize) -> Vec<f64> {
        let v = self.vocab_size as f64;
        let mut w = vec![0.0; self.n_topics];
        for word in 0..self.vocab_size {
            match self.drifted.iter().find(|d| d.word == word) {
                Some(d) => {
                    let l = d.schedule[period];
                    w[d.source] += (1.0 - l) / v;
                    w[d.target] += l / v;
                }
                None => w[self.topic_of(word)] += 1.0 / v,
            }
        }
        w
    }

    /// Expected relative frequency of every word in `period`.
    pub fn expected_frequencies(&self, period: usize) -> Vec<f64> {
        let contexts = 2 * self.window;
        let per_sentence = (contexts + 1) as f64;
        let weights = self.topic_weights(period);
        let pools = self.context_pools();
        let mut f = vec![1.0 / self.vocab_size as f64 / per_sentence; self.vocab_size];
        for (t, pool) in pools.iter().enumerate() {
            let share = weights[t] * contexts as f64 / pool.len() as f64 / per_sentence;
            for &w in pool {
                f[w] += share;
            }
        }
        f
    }
}

/// Sentences of one period as word indices, center in the middle.
pub fn generate_period(spec: &DriftSpec, period: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(period as u64);
    let pools = spec.context_pools();
    let drift: Vec<Option<&DriftedWord>> = (0..spec.vocab_size)
        .map(|w| spec.drifted.iter().find(|d| d.word == w))
        .collect();
    (0..spec.sentences_per_period)
        .map(|_| {
            let center = rng.random_range(0..spec.vocab_size);
            let topic = match drift[center] {
                Some(d) if rng.random::<f64>() < d.schedule[period] => d.target,
                Some(d) => d.source,
                None => spec.topic_of(center),
            };
            let pool = &pools[topic];
            let mut sentence = Vec::with_capacity(2 * spec.window + 1);
            for i in 0..2 * spec.window {
                if i == spec.window {
                    sentence.push(center);
                }
                sentence.push(pool[rng.random_range(0..pool.len())]);
            }
            sentence
        })
        .collect()
}

/// One period as an in-memory corpus, equal to what ingesting the written
/// corpus produces for that period.
pub fn period_corpus(spec: &DriftSpec, period: usize) -> Result<PeriodCorpus> {
    spec.validate()?;
    let sentences = generate_period(spec, period);
    let mut counts = vec![0u64; spec.vocab_size];
    for &w in sentences.iter().flatten() {
        counts[w] += 1;
    }
    let counts: HashMap<String, u64> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| (spec.word_key(w), c))
        .collect();
    let vocab = Vocabulary::from_counts(counts, 1)?;
    let ids: Vec<u32> = (0..spec.vocab_size)
        .map(|w| vocab.id(&spec.word_key(w)).unwrap_or(u32::MAX))
        .collect();
    let mapped: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| s.iter().map(|&w| ids[w]).collect())
        .collect();
    PeriodCorpus::from_sentences(period, vocab, mapped)
}

pub fn period_corpora(spec: &DriftSpec) -> Result<Vec<PeriodCorpus>> {
    (0..spec.n_periods).into_par_iter().map(|p| period_corpus(spec, p)).collect()
}

fn period_documents(spec: &DriftSpec, config: &PeriodConfig, period: usize) -> Vec<DocumentRecord> {
    let (start, end) = config.boundaries()[period];
    let days = (end - start).num_days().max(0) + 1;
    generate_period(spec, period)
        .chunks(spec.sentences_per_document)
        .enumerate()
        .map(|(i, chunk)| {
            let date: NaiveDate = start + Duration::days(i as i64 % days);
            DocumentRecord {
                date: date.format("%Y-%m-%d").to_string(),
                sentences: chunk
                    .iter()
                    .map(|s| {
                        s.iter()
                            .map(|&w| {
                                let name = spec.word_name(w);
                                (name.clone(), name, "NOUN".to_owned())
                            })
                            .collect()
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Writes the corpus as JSON lines, period by period.
pub fn write_corpus<W: Write>(spec: &DriftSpec, mut out: W) -> Result<()> {
    spec.validate()?;
    let config = spec.period_config()?;
    let docs: Vec<Vec<DocumentRecord>> = (0..spec.n_periods)
        .into_par_iter()
        .map(|p| period_documents(spec, &config, p))
        .collect();
    for period in docs {
        for doc in period {
            serde_json::to_writer(&mut out, &doc)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWord {
    pub key: String,
    pub source: usize,
    pub target: usize,
    pub schedule: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema_version: u32,
    pub drifted_words: Vec<GroundTruthWord>,
    pub stable_words: Vec<String>,
    pub topic_polarity: Vec<Label>,
    pub seed: u64,
}

pub fn ground_truth(spec: &DriftSpec) -> GroundTruth {
    GroundTruth {
        schema_version: REPORT_SCHEMA_VERSION,
        drifted_words: spec
            .drifted
            .iter()
            .map(|d| GroundTruthWord {
                key: spec.word_key(d.word),
                source: d.source,
                target: d.target,
                schedule: d.schedule.clone(),
            })
            .collect(),
        stable_words: spec.stable_words().into_iter().map(|w| spec.word_key(w)).collect(),
        topic_polarity: (0..spec.n_topics).map(|t| spec.polarity_of_topic(t)).collect(),
        seed: spec.seed,
    }
}

/// Single-token labeled examples. A topic is drawn uniformly and the example
/// is labeled with its polarity; the token is a drifted word whose source is
/// that topic with probability `drift_share`, a stable word of the topic
/// otherwise.
pub fn sentiment_dataset(spec: &DriftSpec, n_examples: usize, drift_share: f64, seed: u64) -> Vec<SentimentExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools = spec.context_pools();
    (0..n_examples)
        .map(|_| {
            let topic = rng.random_range(0..spec.n_topics);
            let sources: Vec<&DriftedWord> = spec.drifted.iter().filter(|d| d.source == topic).collect();
            let word = if !sources.is_empty() && rng.random::<f64>() < drift_share {
                sources[rng.random_range(0..sources.len())].word
            } else {
                let pool = &pools[topic];
                pool[rng.random_range(0..pool.len())]
            };
            SentimentExample {
                tokens: vec![spec.word_key(word)],
                label: spec.polarity_of_topic(topic),
            }
        })
        .collect()
}

/// One example per drifted word, labeled with its source topic's polarity.
pub fn sentiment_probe(spec: &DriftSpec) -> Vec<SentimentExample> {
    spec.drifted
        .iter()
        .map(|d| SentimentExample {
            tokens: vec![spec.word_key(d.word)],
            label: spec.polarity_of_topic(d.source),
        })
        .collect()
}

pub fn write_sentiment_tsv<W: Write>(examples: &[SentimentExample], mut out: W) -> Result<()> {
    writeln!(out, "label\ttokens")?;
    for e in examples {
        writeln!(out, "{}\t{}", e.label.as_str(), e.tokens.join(" "))?;
    }
    Ok(())
}

/// Stable words of positive and negative topics.
pub fn sentiment_lexicon(spec: &DriftSpec) -> SentimentLexicon {
    let mut lex = SentimentLexicon::new();
    for w in spec.stable_words() {
        match spec.polarity_of_topic(spec.topic_of(w)) {
            Label::Positive => lex.insert(&spec.word_name(w), Polarity::Positive),
            Label::Negative => lex.insert(&spec.word_name(w), Polarity::Negative),
            Label::Neutral => {}
        }
    }
    lex
}

pub fn write_lexicon_tsv<W: Write>(spec: &DriftSpec, mut out: W) -> Result<()> {
    for w in spec.stable_words() {
        let p = match spec.polarity_of_topic(spec.topic_of(w)) {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Neutral => continue,
        };
        writeln!(out, "{}\t{p}", spec.word_name(w))?;
    }
    Ok(())
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const SENTIMENT_FILE: &str = "sentiment.tsv";
pub const SENTIMENT_PROBE_FILE: &str = "sentiment_probe.tsv";
/// Share of sentiment examples that use a drifted word.
pub const DRIFT_SHARE: f64 = 0.25;
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const SPEC_FILE: &str = "drift_spec.toml";
pub const PERIODS_FILE: &str = "periods.toml";

/// Writes corpus, ground truth, sentiment data and probe, lexicon, the drift spec itself and
/// the matching period configuration into `dir`. Returns the file names.
pub fn write_all(spec: &DriftSpec, dir: &Path, sentiment_examples: usize) -> Result<Vec<String>> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
    let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        let p = dir.join(name);
        std::fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io_at(&p, e))
    };
    write_corpus(spec, create(CORPUS_FILE)?)?;
    let mut gt = create(GROUND_TRUTH_FILE)?;
    serde_json::to_writer_pretty(&mut gt, &ground_truth(spec))?;
    gt.write_all(b"\n")?;
    gt.flush()?;
    let data = sentiment_dataset(spec, sentiment_examples, DRIFT_SHARE, spec.seed ^ 0x5e17);
    let mut s = create(SENTIMENT_FILE)?;
    write_sentiment_tsv(&data, &mut s)?;
    s.flush()?;
    let mut s = create(SENTIMENT_PROBE_FILE)?;
    write_sentiment_tsv(&sentiment_probe(spec), &mut s)?;
    s.flush()?;
    let mut l = create(LEXICON_FILE)?;
    write_lexicon_tsv(spec, &mut l)?;
    l.flush()?;
    let mut sp = create(SPEC_FILE)?;
    sp.write_all(spec.to_toml_string().as_bytes())?;
    sp.flush()?;
    let mut pc = create(PERIODS_FILE)?;
    pc.write_all(spec.period_config()?.to_toml_string().as_bytes())?;
    pc.flush()?;
    Ok([CORPUS_FILE, GROUND_TRUTH_FILE, SENTIMENT_FILE, SENTIMENT_PROBE_FILE, LEXICON_FILE, SPEC_FILE, PERIODS_FILE]
        .map(String::from)
        .to_vec())
}
