//! Corpus ingestion: annotated JSON-lines documents are keyed as `lemma#POS`,
//! bucketed into time periods, and turned into id sequences over a
//! per-period vocabulary.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Read};
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Part-of-speech tags. Tags outside the universal set collapse to `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum Pos {
    Noun,
    Propn,
    Verb,
    Aux,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Cconj,
    Sconj,
    Part,
    Intj,
    Sym,
    Punct,
    X,
    Other,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Propn => "PROPN",
            Pos::Verb => "VERB",
            Pos::Aux => "AUX",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Pron => "PRON",
            Pos::Det => "DET",
            Pos::Adp => "ADP",
            Pos::Num => "NUM",
            Pos::Cconj => "CCONJ",
            Pos::Sconj => "SCONJ",
            Pos::Part => "PART",
            Pos::Intj => "INTJ",
            Pos::Sym => "SYM",
            Pos::Punct => "PUNCT",
            Pos::X => "X",
            Pos::Other => "OTHER",
        }
    }

    pub fn from_tag(tag: &str) -> Pos {
        match tag.trim().to_ascii_uppercase().as_str() {
            "NOUN" => Pos::Noun,
            "PROPN" => Pos::Propn,
            "VERB" => Pos::Verb,
            "AUX" => Pos::Aux,
            "ADJ" => Pos::Adj,
            "ADV" => Pos::Adv,
            "PRON" => Pos::Pron,
            "DET" => Pos::Det,
            "ADP" => Pos::Adp,
            "NUM" => Pos::Num,
            "CCONJ" => Pos::Cconj,
            "SCONJ" => Pos::Sconj,
            "PART" => Pos::Part,
            "INTJ" => Pos::Intj,
            "SYM" => Pos::Sym,
            "PUNCT" => Pos::Punct,
            "X" => Pos::X,
            _ => Pos::Other,
        }
    }

    /// Extracts the tag from a `lemma#POS` key, if it has one.
    pub fn of_key(key: &str) -> Option<Pos> {
        key.rsplit_once('#').map(|(_, tag)| Pos::from_tag(tag))
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Pos> for String {
    fn from(p: Pos) -> String {
        p.as_str().to_owned()
    }
}

impl From<String> for Pos {
    fn from(s: String) -> Pos {
        Pos::from_tag(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedToken {
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
}

impl AnnotatedToken {
    pub fn new(surface: impl Into<String>, lemma: impl Into<String>, pos: Pos) -> Self {
        AnnotatedToken {
            surface: surface.into(),
            lemma: lemma.into(),
            pos,
        }
    }
}

/// Surface-form lemma overrides, keyed by (lowercased surface, POS).
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: HashMap<(String, Pos), String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, pos: Pos, lemma: &str) {
        self.entries
            .insert((surface.to_lowercase(), pos), lemma.to_owned());
    }

    pub fn get(&self, surface: &str, pos: Pos) -> Option<&str> {
        self.entries
            .get(&(surface.to_lowercase(), pos))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `surface<TAB>pos<TAB>lemma` lines. Later lines override earlier ones.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols.iter().any(|c| c.trim().is_empty()) {
                return Err(Error::Format(format!(
                    "lexicon line {}: expected 3 non-empty tab-separated columns",
                    lineno + 1
                )));
            }
            lex.insert(cols[0].trim(), Pos::from_tag(cols[1]), cols[2].trim());
        }
        Ok(lex)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
        Self::from_tsv(std::io::BufReader::new(file))
    }
}

/// Builds the vocabulary key for a token: `lowercase(lemma)#POS`.
///
/// A lexicon entry for the token's surface form and tag takes precedence over
/// the annotated lemma; an empty lemma falls back to the surface form.
pub fn lemma_key(token: &AnnotatedToken, lexicon: Option<&Lexicon>) -> String {
    let lemma = lexicon
        .and_then(|lex| lex.get(&token.surface, token.pos))
        .unwrap_or(&token.lemma);
    let base = if lemma.trim().is_empty() {
        token.surface.trim()
    } else {
        lemma.trim()
    };
    format!("{}#{}", base.to_lowercase(), token.pos)
}

/// Half-open `[start, end)` date ranges, one per period.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodConfig {
    boundaries: Vec<(NaiveDate, NaiveDate)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PeriodFile {
    Explicit {
        boundaries: Vec<(NaiveDate, NaiveDate)>,
    },
    Uniform {
        start_year: i32,
        span_years: u32,
        count: usize,
    },
}

impl PeriodConfig {
    pub fn new(boundaries: Vec<(NaiveDate, NaiveDate)>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::Config("at least one period is required".into()));
        }
        for (i, (start, end)) in boundaries.iter().enumerate() {
            if start >= end {
                return Err(Error::Config(format!(
                    "period {i}: start {start} is not before end {end}"
                )));
            }
            if i > 0 && boundaries[i - 1].1 > *start {
                return Err(Error::Config(format!(
                    "period {i} overlaps or precedes period {}",
                    i - 1
                )));
            }
        }
        Ok(PeriodConfig { boundaries })
    }

    /// `count` consecutive periods of `span_years` years starting January 1st of `start_year`.
    pub fn uniform(start_year: i32, span_years: u32, count: usize) -> Result<Self> {
        if span_years == 0 || count == 0 {
            return Err(Error::Config("span_years and count must be positive".into()));
        }
        let jan1 = |y: i32| {
            NaiveDate::from_ymd_opt(y, 1, 1)
                .ok_or_else(|| Error::Config(format!("year {y} out of range")))
        };
        let bounds = (0..count)
            .map(|i| {
                let s = start_year + (i as i32) * span_years as i32;
                Ok((jan1(s)?, jan1(s + span_years as i32)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bounds)
    }

    /// Parses either `boundaries = [["2000-01-01", "2005-01-01"], ...]` or
    /// `start_year`/`span_years`/`count` keys.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let parsed: PeriodFile =
            toml::from_str(s).map_err(|e| Error::Config(format!("period config: {e}")))?;
        Self::from_file_repr(parsed)
    }

    pub fn from_toml_value(v: toml::Value) -> Result<Self> {
        let parsed: PeriodFile = v
            .try_into()
            .map_err(|e| Error::Config(format!("period config: {e}")))?;
        Self::from_file_repr(parsed)
    }

    fn from_file_repr(parsed: PeriodFile) -> Result<Self> {
        match parsed {
            PeriodFile::Explicit { boundaries } => Self::new(boundaries),
            PeriodFile::Uniform {
                start_year,
                span_years,
                count,
            } => Self::uniform(start_year, span_years, count),
        }
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::from("boundaries = [\n");
        for (s, e) in &self.boundaries {
            out.push_str(&format!("  [\"{s}\", \"{e}\"],\n"));
        }
        out.push_str("]\n");
        out
    }

    pub fn count(&self) -> usize {
        self.boundaries.len()
    }

    pub fn boundaries(&self) -> &[(NaiveDate, NaiveDate)] {
        &self.boundaries
    }

    pub fn period_of(&self, date: NaiveDate) -> Option<usize> {
        let idx = self.boundaries.partition_point(|(start, _)| *start <= date);
        if idx == 0 {
            return None;
        }
        let (_, end) = self.boundaries[idx - 1];
        (date < end).then_some(idx - 1)
    }
}

/// Word keys with ids assigned by descending count, ties broken by key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    keys: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    keys: Vec<String>,
    counts: Vec<u64>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Vocabulary::from_sorted(r.keys, r.counts)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            keys: v.keys,
            counts: v.counts,
        }
    }
}

impl Vocabulary {
    /// Builds from raw counts, dropping entries below `min_count`.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if counts.is_empty() {
            return Err(Error::Empty("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut entries: Vec<(String, u64)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if entries.is_empty() {
            return Err(Error::Empty(format!(
                "no word reaches min_count {min_count}"
            )));
        }
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (keys, counts) = entries.into_iter().unzip();
        Ok(Self::from_sorted(keys, counts))
    }

    /// Trusts the caller's ordering. Used for deserialization and imported embeddings.
    pub fn from_sorted(keys: Vec<String>, counts: Vec<u64>) -> Self {
        assert_eq!(keys.len(), counts.len());
        let index = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();
        let total_tokens = counts.iter().sum();
        Vocabulary {
            keys,
            counts,
            index,
            total_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn id(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: u32) -> &str {
        &self.keys[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn count_of(&self, key: &str) -> u64 {
        self.id(key).map_or(0, |id| self.count(id))
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}

/// Counts a stream of keys and builds a vocabulary.
pub fn build_vocab<I, S>(stream: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for key in stream {
        let key = key.as_ref();
        if let Some(c) = counts.get_mut(key) {
            *c += 1;
        } else {
            counts.insert(key.to_owned(), 1);
        }
    }
    Vocabulary::from_counts(counts, min_count)
}

/// Probability of keeping one occurrence of a word under frequent-word subsampling:
/// `min(1, (sqrt(f/sample) + 1) * sample / f)` with `f = count / total`.
pub fn keep_probability(count: u64, total: u64, sample: f64) -> f64 {
    debug_assert!(count >= 1 && total >= count && sample > 0.0);
    let f = count as f64 / total as f64;
    (((f / sample).sqrt() + 1.0) * sample / f).min(1.0)
}

/// Per-word keep probabilities for one period's vocabulary.
#[derive(Clone, Debug)]
pub struct Subsampler {
    keep: Vec<f32>,
}

impl Subsampler {
    /// `sample <= 0` disables subsampling.
    pub fn new(vocab: &Vocabulary, sample: f64) -> Self {
        let total = vocab.total_tokens();
        let keep = vocab
            .counts()
            .iter()
            .map(|&c| {
                if sample <= 0.0 || c == 0 {
                    1.0
                } else {
                    keep_probability(c, total, sample) as f32
                }
            })
            .collect();
        Subsampler { keep }
    }

    pub fn keep_probability(&self, id: u32) -> f32 {
        self.keep[id as usize]
    }

    /// Appends the retained ids of `sentence` to `out`.
    pub fn filter_into<R: Rng>(&self, sentence: &[u32], rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        for &id in sentence {
            let p = self.keep[id as usize];
            if p >= 1.0 || rng.random::<f32>() < p {
                out.push(id);
            }
        }
    }
}

/// One period's token stream as word ids, with sentence boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodCorpus {
    pub period_index: usize,
    pub vocab: Vocabulary,
    tokens: Vec<u32>,
    offsets: Vec<usize>,
}

impl PeriodCorpus {
    /// Builds from sentences already mapped to ids of `vocab`. Empty sentences are dropped.
    pub fn from_sentences<I>(period_index: usize, vocab: Vocabulary, sentences: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<u32>>,
    {
        let mut tokens = Vec::new();
        let mut offsets = vec![0];
        for s in sentences {
            if s.is_empty() {
                continue;
            }
            if let Some(&bad) = s.iter().find(|&&id| id as usize >= vocab.len()) {
                return Err(Error::Format(format!(
                    "word id {bad} out of range for vocabulary of {}",
                    vocab.len()
                )));
            }
            tokens.extend_from_slice(&s);
            offsets.push(tokens.len());
        }
        Ok(PeriodCorpus {
            period_index,
            vocab,
            tokens,
            offsets,
        })
    }

    pub fn num_sentences(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sentence(&self, i: usize) -> &[u32] {
        &self.tokens[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.offsets.windows(2).map(|w| &self.tokens[w[0]..w[1]])
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }
}

/// One line of the corpus file.
#[derive(Debug, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub date: String,
    pub sentences: Vec<Vec<(String, String, String)>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub total_records: usize,
    pub ingested: usize,
    pub skipped_out_of_range: usize,
    pub skipped_malformed: usize,
    /// First few malformed-record diagnostics as (1-based line, reason).
    pub malformed_examples: Vec<(usize, String)>,
    pub documents_per_period: Vec<usize>,
}

impl IngestStats {
    pub fn skipped(&self) -> usize {
        self.skipped_out_of_range + self.skipped_malformed
    }
}

#[derive(Clone, Debug)]
pub struct IngestOptions<'a> {
    pub min_count: u64,
    pub lexicon: Option<&'a Lexicon>,
}

impl Default for IngestOptions<'_> {
    fn default() -> Self {
        IngestOptions {
            min_count: 1,
            lexicon: None,
        }
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub corpora: Vec<PeriodCorpus>,
    pub stats: IngestStats,
}

const MAX_MALFORMED_EXAMPLES: usize = 20;

enum Parsed {
    Doc {
        period: usize,
        sentences: Vec<Vec<String>>,
    },
    OutOfRange,
    Malformed(String),
}

fn parse_line(line: &str, config: &PeriodConfig, lexicon: Option<&Lexicon>) -> Parsed {
    let record: DocumentRecord = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return Parsed::Malformed(e.to_string()),
    };
    let date = match NaiveDate::parse_from_str(&record.date, "%Y-%m-%d") {
        Ok(d) => d,
        Err(e) => return Parsed::Malformed(format!("bad date `{}`: {e}", record.date)),
    };
    let Some(period) = config.period_of(date) else {
        return Parsed::OutOfRange;
    };
    let mut sentences = Vec::with_capacity(record.sentences.len());
    for sent in record.sentences {
        let mut keys = Vec::with_capacity(sent.len());
        for (surface, lemma, pos) in sent {
            if surface.is_empty() {
                return Parsed::Malformed("token with empty surface form".into());
            }
            let pos = Pos::from_tag(&pos);
            if pos == Pos::Punct {
                continue;
            }
            keys.push(lemma_key(&AnnotatedToken { surface, lemma, pos }, lexicon));
        }
        sentences.push(keys);
    }
    Parsed::Doc { period, sentences }
}

/// Reads JSON-lines documents and splits them into per-period corpora.
///
/// Malformed lines and documents dated outside every period are skipped and
/// counted. A period that receives no documents is an error.
pub fn ingest<R: Read>(
    reader: R,
    config: &PeriodConfig,
    options: &IngestOptions<'_>,
) -> Result<Ingested> {
    let lines: Vec<(usize, String)> = std::io::BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .collect::<std::io::Result<_>>()?;

    let parsed: Vec<(usize, Parsed)> = lines
        .par_iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| (*n, parse_line(l, config, options.lexicon)))
        .collect();

    let periods = config.count();
    let mut stats = IngestStats {
        documents_per_period: vec![0; periods],
        ..Default::default()
    };
    let mut per_period: Vec<Vec<Vec<String>>> = vec![Vec::new(); periods];
    for (lineno, p) in parsed {
        stats.total_records += 1;
        match p {
            Parsed::Doc { period, sentences } => {
                stats.ingested += 1;
                stats.documents_per_period[period] += 1;
                per_period[period].extend(sentences);
            }
            Parsed::OutOfRange => {
                log::debug!("line {lineno}: date outside configured periods");
                stats.skipped_out_of_range += 1;
            }
            Parsed::Malformed(reason) => {
                log::warn!("line {lineno}: skipping malformed record: {reason}");
                stats.skipped_malformed += 1;
                if stats.malformed_examples.len() < MAX_MALFORMED_EXAMPLES {
                    stats.malformed_examples.push((lineno, reason));
                }
            }
        }
    }

    if let Some(empty) = stats.documents_per_period.iter().position(|&n| n == 0) {
        let (s, e) = config.boundaries()[empty];
        return Err(Error::Empty(format!(
            "period {empty} ({s} to {e}) received no documents"
        )));
    }

    let corpora = per_period
        .into_par_iter()
        .enumerate()
        .map(|(period, sentences)| build_period(period, sentences, options.min_count))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ingested { corpora, stats })
}

pub fn ingest_path(
    path: &Path,
    config: &PeriodConfig,
    options: &IngestOptions<'_>,
) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    ingest(file, config, options)
}

fn build_period(period: usize, sentences: Vec<Vec<String>>, min_count: u64) -> Result<PeriodCorpus> {
    // Per-chunk counters merged by summation, so the result is independent of scheduling.
    let counts = sentences
        .par_chunks(1024)
        .map(|chunk| {
            let mut local: HashMap<&str, u64> = HashMap::new();
            for key in chunk.iter().flatten() {
                *local.entry(key.as_str()).or_insert(0) += 1;
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    let counts: HashMap<String, u64> = counts.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    let vocab = Vocabulary::from_counts(counts, min_count)
        .map_err(|e| Error::Empty(format!("period {period}: {e}")))?;
    let ids: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|k| vocab.id(k)).collect())
        .collect();
    PeriodCorpus::from_sentences(period, vocab, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(date: &str, sentences: &[&[(&str, &str, &str)]]) -> String {
        let rec = DocumentRecord {
            date: date.into(),
            sentences: sentences
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string(&rec).unwrap()
    }

    fn five_periods() -> PeriodConfig {
        PeriodConfig::uniform(2000, 5, 5).unwrap()
    }

    #[test]
    fn lemma_key_lowercases_and_appends_pos() {
        let t = AnnotatedToken::new("Maske", "maska", Pos::Noun);
        assert_eq!(lemma_key(&t, None), "maska#NOUN");
        let t = AnnotatedToken::new("Maske", "Maska", Pos::Noun);
        assert_eq!(lemma_key(&t, None), "maska#NOUN");
    }

    #[test]
    fn lemma_key_falls_back_to_surface() {
        let t = AnnotatedToken::new("X", "", Pos::Noun);
        assert_eq!(lemma_key(&t, None), "x#NOUN");
    }

    #[test]
    fn lexicon_overrides_annotated_lemma() {
        let mut lex = Lexicon::new();
        lex.insert("vodi", Pos::Verb, "voditi");
        let t = AnnotatedToken::new("vodi", "voda", Pos::Verb);
        assert_eq!(lemma_key(&t, Some(&lex)), "voditi#VERB");
        // different tag: no override
        let t = AnnotatedToken::new("vodi", "voda", Pos::Noun);
        assert_eq!(lemma_key(&t, Some(&lex)), "voda#NOUN");
    }

    #[test]
    fn lexicon_tsv_later_duplicates_win() {
        let tsv = "vodi\tVERB\tvoda\nvodi\tVERB\tvoditi\n\n";
        let lex = Lexicon::from_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(lex.get("vodi", Pos::Verb), Some("voditi"));
        assert!(Lexicon::from_tsv("a\tb\n".as_bytes()).is_err());
    }

    #[test]
    fn build_vocab_counts_and_orders() {
        let v = build_vocab(["a", "b", "a"], 1).unwrap();
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.count(0), 2);
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.count(1), 1);
        assert_eq!(v.total_tokens(), 3);

        let v = build_vocab(["a", "b", "a"], 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.total_tokens(), 2);
    }

    #[test]
    fn build_vocab_distinct_tokens() {
        let keys: Vec<String> = (0..1000).map(|i| format!("w{i:04}")).collect();
        let v = build_vocab(&keys, 1).unwrap();
        assert_eq!(v.len(), 1000);
        for (i, k) in v.keys().iter().enumerate() {
            assert_eq!(v.id(k), Some(i as u32));
        }
        // ties broken lexicographically
        assert_eq!(v.key(0), "w0000");
        assert_eq!(v.key(999), "w0999");
    }

    #[test]
    fn build_vocab_rejects_empty_and_zero_min_count() {
        assert!(build_vocab(Vec::<String>::new(), 1).is_err());
        assert!(build_vocab(["a"], 0).is_err());
    }

    #[test]
    fn keep_probability_examples() {
        let s = 1e-5;
        // f = sample exactly: (1 + 1) * 1 = 2, capped at 1
        assert_eq!(keep_probability(1, 100_000, s).min(1.0), 1.0);
        // f = 100 * sample: (10 + 1) / 100
        let p = keep_probability(100, 100_000, s);
        assert!((p - 0.11).abs() < 1e-12, "{p}");
        // f below sample
        assert_eq!(keep_probability(1, 1_000_000, s).min(1.0), 1.0);
    }

    #[test]
    fn period_bucketing() {
        let cfg = five_periods();
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        assert_eq!(cfg.period_of(d("2001-06-01")), Some(0));
        assert_eq!(cfg.period_of(d("2021-03-04")), Some(4));
        assert_eq!(cfg.period_of(d("2005-01-01")), Some(1));
        assert_eq!(cfg.period_of(d("2004-12-31")), Some(0));
        assert_eq!(cfg.period_of(d("1999-12-31")), None);
        assert_eq!(cfg.period_of(d("2025-01-01")), None);
    }

    #[test]
    fn period_config_rejects_overlap() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        assert!(PeriodConfig::new(vec![
            (d("2000-01-01"), d("2005-01-01")),
            (d("2004-01-01"), d("2008-01-01")),
        ])
        .is_err());
        assert!(PeriodConfig::new(vec![(d("2000-01-01"), d("2000-01-01"))]).is_err());
        assert!(PeriodConfig::new(vec![]).is_err());
    }

    #[test]
    fn period_config_toml_forms() {
        let a = PeriodConfig::from_toml_str("start_year = 2000\nspan_years = 5\ncount = 5\n").unwrap();
        let b = PeriodConfig::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(), 5);
    }

    #[test]
    fn ingest_assigns_periods_and_drops_punctuation() {
        let cfg = PeriodConfig::uniform(2000, 5, 2).unwrap();
        let input = [
            doc("2001-02-03", &[&[("Maske", "maska", "NOUN"), (".", ".", "PUNCT")]]),
            doc("2007-01-01", &[&[("vode", "voda", "NOUN")], &[("Maske", "maska", "NOUN")]]),
            doc("1999-01-01", &[&[("x", "x", "NOUN")]]),
            "{not json".to_string(),
        ]
        .join("\n");
        let out = ingest(input.as_bytes(), &cfg, &IngestOptions::default()).unwrap();
        assert_eq!(out.stats.total_records, 4);
        assert_eq!(out.stats.ingested, 2);
        assert_eq!(out.stats.skipped_out_of_range, 1);
        assert_eq!(out.stats.skipped_malformed, 1);
        assert_eq!(out.stats.malformed_examples[0].0, 4);
        assert_eq!(out.stats.ingested + out.stats.skipped(), out.stats.total_records);

        let p0 = &out.corpora[0];
        assert_eq!(p0.vocab.keys(), &["maska#NOUN".to_string()]);
        assert_eq!(p0.num_tokens(), 1);
        assert!(p0.vocab.id(".#PUNCT").is_none());

        let p1 = &out.corpora[1];
        assert_eq!(p1.num_sentences(), 2);
        assert_eq!(p1.vocab.len(), 2);
    }

    #[test]
    fn ingest_errors_on_empty_period() {
        let cfg = PeriodConfig::uniform(2000, 5, 5).unwrap();
        let input = doc("2001-01-01", &[&[("a", "a", "NOUN")]]);
        let err = ingest(input.as_bytes(), &cfg, &IngestOptions::default()).unwrap_err();
        assert!(err.to_string().contains("period 1"), "{err}");
    }

    #[test]
    fn ingest_flags_bad_dates_and_empty_surface() {
        let cfg = PeriodConfig::uniform(2000, 5, 1).unwrap();
        let input = [
            doc("2001-13-45", &[&[("a", "a", "NOUN")]]),
            doc("2001-01-01", &[&[("", "a", "NOUN")]]),
            doc("2001-01-01", &[&[("a", "a", "NOUN")]]),
        ]
        .join("\n");
        let out = ingest(input.as_bytes(), &cfg, &IngestOptions::default()).unwrap();
        assert_eq!(out.stats.skipped_malformed, 2);
        assert_eq!(out.stats.ingested, 1);
    }

    #[test]
    fn min_count_drops_rare_tokens_from_stream() {
        let cfg = PeriodConfig::uniform(2000, 5, 1).unwrap();
        let input = doc(
            "2001-01-01",
            &[&[("a", "a", "NOUN"), ("b", "b", "NOUN"), ("a", "a", "NOUN")]],
        );
        let out = ingest(
            input.as_bytes(),
            &cfg,
            &IngestOptions {
                min_count: 2,
                lexicon: None,
            },
        )
        .unwrap();
        assert_eq!(out.corpora[0].tokens(), &[0, 0]);
    }

    proptest! {
        #[test]
        fn keep_probability_non_increasing(c1 in 1u64..10_000, c2 in 1u64..10_000) {
            let total = 1_000_000;
            let s = 1e-5;
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let plo = keep_probability(lo, total, s).min(1.0);
            let phi = keep_probability(hi, total, s).min(1.0);
            prop_assert!(phi <= plo + 1e-15);
            if (lo as f64 / total as f64) <= s {
                prop_assert_eq!(plo, 1.0);
            }
        }

        #[test]
        fn vocab_ids_are_a_deterministic_bijection(words in proptest::collection::vec("[a-e]{1,2}", 1..200)) {
            let a = build_vocab(&words, 1).unwrap();
            let b = build_vocab(&words, 1).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.total_tokens() as usize, words.len());
            for (i, k) in a.keys().iter().enumerate() {
                prop_assert_eq!(a.id(k), Some(i as u32));
            }
            for w in a.counts().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn period_assignment_is_a_function(days in 0i64..12_000) {
            let cfg = five_periods();
            let date = NaiveDate::from_ymd_opt(1998, 1, 1).unwrap() + chrono::Duration::days(days);
            let matches = cfg.boundaries().iter().filter(|(s, e)| *s <= date && date < *e).count();
            prop_assert!(matches <= 1);
            prop_assert_eq!(cfg.period_of(date).is_some(), matches == 1);
        }

        #[test]
        fn keys_have_lowercase_lemma(surface in "[A-Za-zČčŠš]{1,8}", lemma in "[A-Za-zŽž]{0,8}") {
            let key = lemma_key(&AnnotatedToken::new(surface, lemma, Pos::Noun), None);
            let (l, tag) = key.rsplit_once('#').unwrap();
            prop_assert_eq!(l.to_lowercase(), l);
            prop_assert_eq!(tag, "NOUN");
        }
    }
}
