//! Per-period sentiment classifiers over averaged word vectors, and the
//! sentiment shift measured by feeding one period's classifier with
//! another period's aligned vectors.

pub mod logreg;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::align::AlignedChain;
use crate::corpus::PeriodCorpus;
use crate::error::{Error, Result};
use crate::sgns::WordVectors;
use crate::shift::REPORT_SCHEMA_VERSION;

pub use logreg::{FitReport, Objective, Softmax};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Neutral,
    Positive,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Negative, Label::Neutral, Label::Positive];

    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Neutral => 0.0,
            Label::Positive => 1.0,
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "neg" | "negative" => Some(Label::Negative),
            "neu" | "neutral" => Some(Label::Neutral),
            "pos" | "positive" => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "neg",
            Label::Neutral => "neu",
            Label::Positive => "pos",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentExample {
    pub tokens: Vec<String>,
    pub label: Label,
}

/// Rows of `label<TAB>space separated token keys`.
pub fn read_sentiment_tsv<R: BufRead>(reader: R) -> Result<Vec<SentimentExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("sentiment line {}: expected label<TAB>tokens", i + 1)))?;
        let Some(label) = Label::parse(label) else {
            if i == 0 && out.is_empty() {
                continue;
            }
            return Err(Error::Format(format!("sentiment line {}: unknown label `{label}`", i + 1)));
        };
        let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
        if tokens.is_empty() {
            return Err(Error::Format(format!("sentiment line {}: no tokens", i + 1)));
        }
        out.push(SentimentExample { tokens, label });
    }
    Ok(out)
}

pub fn read_sentiment_path(path: &Path) -> Result<Vec<SentimentExample>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    read_sentiment_tsv(std::io::BufReader::new(f))
}

/// Mean of the in-vocabulary token vectors. The flag is set, and the zero
/// vector returned, when no token is in the vocabulary.
pub fn featurize<V: WordVectors + ?Sized>(example: &SentimentExample, space: &V) -> (Vec<f64>, bool) {
    let dim = space.dim();
    let mut sum = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    let mut n = 0usize;
    for t in &example.tokens {
        if let Some(id) = space.vocab().id(t) {
            space.read_row(id, &mut row);
            sum.iter_mut().zip(&row).for_each(|(s, r)| *s += r);
            n += 1;
        }
    }
    if n == 0 {
        return (sum, true);
    }
    if n > 1 {
        let count = n as f64;
        sum.iter_mut().for_each(|s| *s /= count);
    }
    (sum, false)
}

fn featurize_all<V: WordVectors + ?Sized>(examples: &[SentimentExample], space: &V) -> Vec<Option<Vec<f64>>> {
    examples
        .par_iter()
        .map(|e| {
            let (x, oov) = featurize(e, space);
            (!oov).then_some(x)
        })
        .collect()
}

/// L2 strength equivalent to an inverse regularization strength `c` applied
/// to a summed loss over `n` examples.
pub fn reg_from_inverse_strength(c: f64, n: usize) -> f64 {
    1.0 / (c * n as f64)
}

pub const DEFAULT_INVERSE_STRENGTH: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentClassifier {
    pub training_period: usize,
    pub feature_dim: usize,
    /// Labels seen in training; row `k` of the model scores `labels[k]`.
    pub labels: Vec<Label>,
    pub model: Softmax,
    pub reg: f64,
    pub n_train: usize,
    pub n_train_excluded: usize,
}

impl SentimentClassifier {
    pub fn predict(&self, x: &[f64]) -> Label {
        let s = self.model.scores(x);
        let best = (0..s.len()).fold(0, |b, k| if s[k] > s[b] { k } else { b });
        self.labels[best]
    }

    /// Probability-weighted label value, `P(pos) - P(neg)`.
    pub fn expected_value(&self, x: &[f64]) -> f64 {
        self.model
            .probabilities(x)
            .iter()
            .zip(&self.labels)
            .map(|(p, l)| p * l.value())
            .sum()
    }
}

pub fn fit_features(
    x: &[Vec<f64>],
    y: &[Label],
    dim: usize,
    reg: f64,
    init: Option<&[f64]>,
) -> Result<(Vec<Label>, Softmax, FitReport)> {
    if !(reg.is_finite() && reg >= 0.0) {
        return Err(Error::Config(format!("regularization must be finite and >= 0, got {reg}")));
    }
    let mut labels: Vec<Label> = y.to_vec();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::Insufficient(
            "sentiment training needs examples of at least two classes".into(),
        ));
    }
    let index: HashMap<Label, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let yi: Vec<usize> = y.iter().map(|l| index[l]).collect();
    let obj = Objective {
        x,
        y: &yi,
        classes: labels.len(),
        dim,
        reg,
    };
    let (params, report) = logreg::fit(&obj, init)?;
    let model = Softmax {
        classes: labels.len(),
        dim,
        params,
    };
    Ok((labels, model, report))
}

/// Fits a multinomial logistic regression on averaged vectors. Examples
/// with no in-vocabulary token are left out.
pub fn train_classifier<V: WordVectors + ?Sized>(
    train_set: &[SentimentExample],
    space: &V,
    reg: f64,
    training_period: usize,
) -> Result<SentimentClassifier> {
    let feats = featurize_all(train_set, space);
    let (x, y): (Vec<Vec<f64>>, Vec<Label>) = feats
        .into_iter()
        .zip(train_set)
        .filter_map(|(f, e)| f.map(|f| (f, e.label)))
        .unzip();
    let excluded = train_set.len() - x.len();
    let (labels, model, report) = fit_features(&x, &y, space.dim(), reg, None)?;
    log::debug!(
        "classifier for period {training_period}: loss {:.6}, |grad| {:.2e}, {} iterations",
        report.loss,
        report.grad_norm,
        report.iterations
    );
    Ok(SentimentClassifier {
        training_period,
        feature_dim: space.dim(),
        labels,
        model,
        reg,
        n_train: x.len(),
        n_train_excluded: excluded,
    })
}

/// As [`train_classifier`], with the L2 strength derived from an inverse
/// strength `c` and the number of usable training examples.
pub fn train_with_inverse_strength<V: WordVectors + ?Sized>(
    train_set: &[SentimentExample],
    space: &V,
    c: f64,
    training_period: usize,
) -> Result<SentimentClassifier> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Config(format!("inverse regularization strength must be positive, got {c}")));
    }
    let usable = train_set
        .iter()
        .filter(|e| e.tokens.iter().any(|t| space.vocab().id(t).is_some()))
        .count();
    if usable == 0 {
        return Err(Error::Insufficient("no training example has an in-vocabulary token".into()));
    }
    train_classifier(train_set, space, reg_from_inverse_strength(c, usable), training_period)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentMode {
    #[default]
    Hard,
    Expected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSentiment {
    pub value: f64,
    pub n_used: usize,
    pub n_excluded: usize,
}

pub fn mean_sentiment<V: WordVectors + ?Sized>(
    classifier: &SentimentClassifier,
    test_set: &[SentimentExample],
    space: &V,
    mode: SentimentMode,
) -> Result<MeanSentiment> {
    if classifier.feature_dim != space.dim() {
        return Err(Error::Dimension {
            expected: classifier.feature_dim,
            found: space.dim(),
        });
    }
    let values: Vec<f64> = featurize_all(test_set, space)
        .into_iter()
        .flatten()
        .map(|x| match mode {
            SentimentMode::Hard => classifier.predict(&x).value(),
            SentimentMode::Expected => classifier.expected_value(&x),
        })
        .collect();
    if values.is_empty() {
        return Err(Error::Insufficient(
            "no test example has an in-vocabulary token".into(),
        ));
    }
    Ok(MeanSentiment {
        value: values.iter().sum::<f64>() / values.len() as f64,
        n_used: values.len(),
        n_excluded: test_set.len() - values.len(),
    })
}

/// `s(C_i, test, E_j) - s(C_i, test, E_i)`; exactly zero when `i == j`.
pub fn transfer_delta<A, B>(
    classifier: &SentimentClassifier,
    test_set: &[SentimentExample],
    own: &A,
    other: &B,
    same: bool,
    mode: SentimentMode,
) -> Result<(f64, f64)>
where
    A: WordVectors + ?Sized,
    B: WordVectors + ?Sized,
{
    let base = mean_sentiment(classifier, test_set, own, mode)?.value;
    if same {
        return Ok((0.0, base));
    }
    let moved = mean_sentiment(classifier, test_set, other, mode)?.value;
    Ok((moved - base, base))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentTransferMatrix {
    pub periods: Vec<usize>,
    /// `values[i][j]` is the shift of classifier `i` when fed period `j`.
    pub values: Vec<Vec<f64>>,
    /// `s(C_i, test, E_i)`.
    pub baselines: Vec<f64>,
    pub p_values: Option<Vec<Vec<Option<f64>>>>,
    pub mode: SentimentMode,
}

pub fn transfer_matrix(
    classifiers: &[SentimentClassifier],
    chain: &AlignedChain,
    test_set: &[SentimentExample],
    mode: SentimentMode,
) -> Result<SentimentTransferMatrix> {
    let p = chain.len();
    if classifiers.len() != p {
        return Err(Error::Config(format!(
            "{} classifiers for {p} periods",
            classifiers.len()
        )));
    }
    for c in classifiers {
        if c.feature_dim != chain.dim() {
            return Err(Error::Dimension {
                expected: chain.dim(),
                found: c.feature_dim,
            });
        }
    }
    let cells: Vec<(f64, f64)> = (0..p * p)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / p, cell % p);
            transfer_delta(&classifiers[i], test_set, chain.period(i), chain.period(j), i == j, mode)
        })
        .collect::<Result<_>>()?;
    let values = (0..p).map(|i| (0..p).map(|j| cells[i * p + j].0).collect()).collect();
    let baselines = (0..p).map(|i| cells[i * p + i].1).collect();
    Ok(SentimentTransferMatrix {
        periods: chain.periods.iter().map(|s| s.period_index).collect(),
        values,
        baselines,
        p_values: None,
        mode,
    })
}

/// Assigns each example to one of `folds` folds, stratified by label and
/// shuffled with `seed`.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for l in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == l).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Means whose spread is below this are treated as having zero variance.
pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

/// One-sided one-sample t-test of `mean > 0`. With zero variance the
/// p-value is 0 for a positive mean, 1 for a negative one and 0.5 at zero.
pub fn one_sided_p(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if samples.len() < 2 || sd <= ZERO_VARIANCE_EPS * mean.abs().max(1.0) {
        return if mean > ZERO_VARIANCE_EPS {
            0.0
        } else if mean < -ZERO_VARIANCE_EPS {
            1.0
        } else {
            0.5
        };
    }
    let t = mean / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("positive degrees of freedom");
    1.0 - dist.cdf(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub deltas: Vec<f64>,
    pub mean: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceOptions {
    pub folds: usize,
    /// Inverse regularization strength; the L2 strength is derived per fold
    /// from the training-split size.
    pub inverse_strength: f64,
    pub seed: u64,
    pub mode: SentimentMode,
}

impl Default for SignificanceOptions {
    fn default() -> Self {
        SignificanceOptions {
            folds: 10,
            inverse_strength: DEFAULT_INVERSE_STRENGTH,
            seed: 1,
            mode: SentimentMode::Hard,
        }
    }
}

/// Cross-validated `d(i <- j)`: per fold, a classifier for period `i` is
/// trained on the other folds and its shift measured on the held-out fold.
pub fn significance<A, B>(
    dataset: &[SentimentExample],
    own: &A,
    other: &B,
    same: bool,
    training_period: usize,
    opts: &SignificanceOptions,
) -> Result<Significance>
where
    A: WordVectors + ?Sized,
    B: WordVectors + ?Sized,
{
    if opts.folds < 2 {
        return Err(Error::Config("significance needs at least 2 folds".into()));
    }
    if dataset.len() < opts.folds {
        return Err(Error::Insufficient(format!(
            "{} examples cannot fill {} folds",
            dataset.len(),
            opts.folds
        )));
    }
    let labels: Vec<Label> = dataset.iter().map(|e| e.label).collect();
    let assignment = stratified_folds(&labels, opts.folds, opts.seed);
    let deltas = (0..opts.folds)
        .into_par_iter()
        .map(|fold| {
            let (train, test): (Vec<&SentimentExample>, Vec<&SentimentExample>) =
                dataset.iter().zip(&assignment).fold((Vec::new(), Vec::new()), |(mut tr, mut te), (e, &f)| {
                    if f == fold { te.push(e) } else { tr.push(e) }
                    (tr, te)
                });
            let train: Vec<SentimentExample> = train.into_iter().cloned().collect();
            let test: Vec<SentimentExample> = test.into_iter().cloned().collect();
            let clf = train_with_inverse_strength(&train, own, opts.inverse_strength, training_period).map_err(|e| match e {
                Error::Insufficient(m) => Error::Insufficient(format!("fold {fold}: {m}")),
                e => e,
            })?;
            transfer_delta(&clf, &test, own, other, same, opts.mode).map(|(d, _)| d)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let p = one_sided_p(&deltas);
    Ok(Significance { deltas, mean, p })
}

/// Fills `matrix.p_values` with cross-validated significance for every
/// off-diagonal cell.
pub fn attach_significance(
    matrix: &mut SentimentTransferMatrix,
    chain: &AlignedChain,
    dataset: &[SentimentExample],
    opts: &SignificanceOptions,
) -> Result<()> {
    let p = chain.len();
    let cells: Vec<Option<f64>> = (0..p * p)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / p, cell % p);
            if i == j {
                return Ok(None);
            }
            significance(dataset, chain.period(i), chain.period(j), false, i, opts).map(|s| Some(s.p))
        })
        .collect::<Result<_>>()?;
    matrix.p_values = Some(cells.chunks(p).map(<[_]>::to_vec).collect());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SentimentLexicon {
    entries: HashMap<String, Polarity>,
}

impl SentimentLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, polarity: Polarity) {
        self.entries.insert(word.to_lowercase(), polarity);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact key first, then the lemma part of a `lemma#POS` key.
    pub fn polarity(&self, key: &str) -> Option<Polarity> {
        if let Some(&p) = self.entries.get(key) {
            return Some(p);
        }
        let lemma = key.rsplit_once('#').map_or(key, |(l, _)| l);
        self.entries.get(lemma).copied()
    }

    /// Rows of `word<TAB>positive|negative`.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = SentimentLexicon::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, pol) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("lexicon line {}: expected word<TAB>polarity", i + 1)))?;
            let pol = match pol.trim().to_ascii_lowercase().as_str() {
                "positive" | "pos" => Polarity::Positive,
                "negative" | "neg" => Polarity::Negative,
                other => {
                    if i == 0 && lex.is_empty() {
                        continue;
                    }
                    return Err(Error::Format(format!("lexicon line {}: unknown polarity `{other}`", i + 1)));
                }
            };
            lex.insert(word.trim(), pol);
        }
        Ok(lex)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
        Self::from_tsv(std::io::BufReader::new(f))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveShare {
    pub period: usize,
    pub share: f64,
    pub positive: u64,
    pub covered: u64,
}

/// Positive tokens over tokens covered by the lexicon.
pub fn lexicon_positive_share(corpus: &PeriodCorpus, lexicon: &SentimentLexicon) -> Result<PositiveShare> {
    if lexicon.is_empty() {
        return Err(Error::Empty("sentiment lexicon".into()));
    }
    let polarity: Vec<Option<Polarity>> = corpus.vocab.keys().iter().map(|k| lexicon.polarity(k)).collect();
    let (mut positive, mut covered) = (0u64, 0u64);
    for &t in corpus.tokens() {
        if let Some(p) = polarity[t as usize] {
            covered += 1;
            if p == Polarity::Positive {
                positive += 1;
            }
        }
    }
    if covered == 0 {
        return Err(Error::Insufficient(format!(
            "no token of period {} is in the lexicon",
            corpus.period_index
        )));
    }
    Ok(PositiveShare {
        period: corpus.period_index,
        share: positive as f64 / covered as f64,
        positive,
        covered,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub matrix: SentimentTransferMatrix,
}

impl MatrixReport {
    pub fn new(matrix: SentimentTransferMatrix) -> Self {
        MatrixReport {
            schema_version: REPORT_SCHEMA_VERSION,
            matrix,
        }
    }

    /// Grid with classifier periods as rows and embedding periods as columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = &self.matrix;
        write!(w, "classifier")?;
        for p in &m.periods {
            write!(w, ",E{p}")?;
        }
        writeln!(w)?;
        for (i, row) in m.values.iter().enumerate() {
            write!(w, "C{}", m.periods[i])?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
