//! Intrinsic evaluation: rank correlation with human similarity ratings and
//! contrastive spread on synonym-choice items.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::Pos;
use crate::error::{Error, Result};
use crate::sgns::WordVectors;
use crate::shift::{cosine, REPORT_SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub word_a: String,
    pub word_b: String,
    pub human_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynonymItem {
    pub target: String,
    pub synonym: String,
    pub distractors: [String; 3],
    pub pos: Pos,
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::io_at(path, e))
}

fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#')))
}

/// Rows of `word_a<TAB>word_b<TAB>score`. A header row whose score column
/// does not parse is skipped.
pub fn read_similarity_tsv<R: BufRead>(reader: R) -> Result<Vec<SimilarityPair>> {
    let mut out = Vec::new();
    for (n, line) in data_lines(reader) {
        let line = line?;
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!("similarity line {n}: expected 3 columns")));
        }
        let score: f64 = match cols[2].parse() {
            Ok(s) => s,
            Err(_) if n == 1 && out.is_empty() => continue,
            Err(_) => return Err(Error::Format(format!("similarity line {n}: bad score `{}`", cols[2]))),
        };
        if !score.is_finite() {
            return Err(Error::Format(format!("similarity line {n}: score is not finite")));
        }
        if cols[0] == cols[1] {
            return Err(Error::Format(format!("similarity line {n}: identical words")));
        }
        out.push(SimilarityPair {
            word_a: cols[0].to_owned(),
            word_b: cols[1].to_owned(),
            human_score: score,
        });
    }
    Ok(out)
}

pub fn read_similarity_path(path: &Path) -> Result<Vec<SimilarityPair>> {
    read_similarity_tsv(open(path)?)
}

/// Rows of `target<TAB>pos<TAB>synonym<TAB>d1<TAB>d2<TAB>d3`.
pub fn read_synonym_tsv<R: BufRead>(reader: R) -> Result<Vec<SynonymItem>> {
    let mut out = Vec::new();
    for (n, line) in data_lines(reader) {
        let line = line?;
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(Error::Format(format!("synonym line {n}: expected 6 columns")));
        }
        if n == 1 && out.is_empty() && cols[0].eq_ignore_ascii_case("target") {
            continue;
        }
        let item = SynonymItem {
            target: cols[0].to_owned(),
            pos: Pos::from_tag(cols[1]),
            synonym: cols[2].to_owned(),
            distractors: [cols[3].to_owned(), cols[4].to_owned(), cols[5].to_owned()],
        };
        if item.distractors.contains(&item.synonym) {
            return Err(Error::Format(format!("synonym line {n}: synonym listed as distractor")));
        }
        if item.synonym == item.target || item.distractors.contains(&item.target) {
            return Err(Error::Format(format!("synonym line {n}: option equals target")));
        }
        out.push(item);
    }
    Ok(out)
}

pub fn read_synonym_path(path: &Path) -> Result<Vec<SynonymItem>> {
    read_synonym_tsv(open(path)?)
}

/// Maps dataset words onto vocabulary rows: an exact key first, then
/// `word#POS` when a POS is known, then any `word#*` variant (the most
/// frequent one, i.e. the lowest id).
pub struct KeyResolver<'a, V: WordVectors + ?Sized> {
    space: &'a V,
    bare: HashMap<&'a str, u32>,
}

impl<'a, V: WordVectors + ?Sized> KeyResolver<'a, V> {
    pub fn new(space: &'a V) -> Self {
        let mut bare = HashMap::new();
        for (id, key) in space.vocab().keys().iter().enumerate() {
            if let Some((lemma, _)) = key.rsplit_once('#') {
                bare.entry(lemma).or_insert(id as u32);
            }
        }
        KeyResolver { space, bare }
    }

    pub fn resolve(&self, word: &str, pos: Option<Pos>) -> Option<u32> {
        let vocab = self.space.vocab();
        if let Some(id) = vocab.id(word) {
            return Some(id);
        }
        if word.contains('#') {
            return None;
        }
        let lower = word.to_lowercase();
        if let Some(pos) = pos {
            if let Some(id) = vocab.id(&format!("{lower}#{}", pos.as_str())) {
                return Some(id);
            }
        }
        self.bare.get(lower.as_str()).copied()
    }

    pub fn vector(&self, word: &str, pos: Option<Pos>) -> Option<Vec<f64>> {
        self.resolve(word, pos).map(|id| self.space.row_f64(id))
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided p-value from `t = rho * sqrt((n-2)/(1-rho^2))` on n-2 degrees of freedom.
pub fn t_p_value(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// Two-sided permutation p-value, `(hits + 1) / (shuffles + 1)`.
pub fn permutation_p_value(x: &[f64], y: &[f64], shuffles: usize, seed: u64) -> f64 {
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let observed = pearson(&rx, &ry).abs();
    let hits: usize = (0..shuffles)
        .into_par_iter()
        .chunks(256)
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk[0] as u64);
            let mut perm = ry.clone();
            chunk
                .iter()
                .filter(|_| {
                    perm.shuffle(&mut rng);
                    pearson(&rx, &perm).abs() >= observed - 1e-12
                })
                .count()
        })
        .sum();
    (hits + 1) as f64 / (shuffles + 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    T,
    Permutation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p: f64,
    pub n_used: usize,
    pub n_skipped: usize,
}

/// Cosine similarities of the usable pairs and the matching human scores.
pub fn similarity_scores<V: WordVectors + ?Sized>(
    pairs: &[SimilarityPair],
    space: &V,
) -> (Vec<f64>, Vec<f64>, usize) {
    let resolver = KeyResolver::new(space);
    let scored: Vec<Option<(f64, f64)>> = pairs
        .par_iter()
        .map(|p| {
            let a = resolver.vector(&p.word_a, None)?;
            let b = resolver.vector(&p.word_b, None)?;
            cosine(&a, &b).ok().map(|c| (c, p.human_score))
        })
        .collect();
    let skipped = scored.iter().filter(|s| s.is_none()).count();
    let (model, human) = scored.into_iter().flatten().unzip();
    (model, human, skipped)
}

pub fn spearman<V: WordVectors + ?Sized>(pairs: &[SimilarityPair], space: &V) -> Result<SpearmanResult> {
    spearman_with(pairs, space, PValueMethod::T, 0)
}

pub fn spearman_with<V: WordVectors + ?Sized>(
    pairs: &[SimilarityPair],
    space: &V,
    method: PValueMethod,
    seed: u64,
) -> Result<SpearmanResult> {
    let (model, human, n_skipped) = similarity_scores(pairs, space);
    let n = model.len();
    if n < 3 {
        return Err(Error::Insufficient(format!(
            "need at least 3 in-vocabulary pairs, found {n}"
        )));
    }
    let rho = spearman_rho(&model, &human);
    let p = match method {
        PValueMethod::T => t_p_value(rho, n),
        PValueMethod::Permutation => permutation_p_value(&model, &human, DEFAULT_PERMUTATIONS, seed),
    };
    Ok(SpearmanResult {
        rho,
        p,
        n_used: n,
        n_skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadResult {
    pub pos: Pos,
    pub mean_spread: f64,
    pub n_used: usize,
    pub n_skipped: usize,
}

/// `cos(target, synonym)` minus the mean cosine to the three distractors.
pub fn item_spread(target: &[f64], synonym: &[f64], distractors: &[Vec<f64>]) -> Result<f64> {
    let s = cosine(target, synonym)?;
    let mut d = 0.0;
    for v in distractors {
        d += cosine(target, v)?;
    }
    Ok(s - d / distractors.len() as f64)
}

/// Mean spread over the usable items whose POS is `pos`.
pub fn contrastive_spread<V: WordVectors + ?Sized>(
    items: &[SynonymItem],
    space: &V,
    pos: Pos,
) -> Result<SpreadResult> {
    let resolver = KeyResolver::new(space);
    let relevant: Vec<&SynonymItem> = items.iter().filter(|it| it.pos == pos).collect();
    let spreads: Vec<Option<f64>> = relevant
        .par_iter()
        .map(|it| {
            let p = Some(it.pos);
            let t = resolver.vector(&it.target, p)?;
            let s = resolver.vector(&it.synonym, p)?;
            let ds = it
                .distractors
                .iter()
                .map(|d| resolver.vector(d, p))
                .collect::<Option<Vec<_>>>()?;
            item_spread(&t, &s, &ds).ok()
        })
        .collect();
    let used: Vec<f64> = spreads.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Insufficient(format!(
            "no usable synonym item with POS {}",
            pos.as_str()
        )));
    }
    Ok(SpreadResult {
        pos,
        mean_spread: used.iter().sum::<f64>() / used.len() as f64,
        n_used: used.len(),
        n_skipped: relevant.len() - used.len(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub result: T,
}

impl<T> EvalReport<T> {
    pub fn new(result: T) -> Self {
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            result,
        }
    }
}
