//! Cumulative semantic-shift scores and per-period nearest-neighbor traces
//! over an aligned chain.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::AlignedChain;
use crate::corpus::Pos;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Cosine similarity clamped to `[-1, 1]`. Zero vectors are an error.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Insufficient("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftScore {
    pub word: String,
    /// `(1 - cos(v_i, v_{i+1})) / 2` for each consecutive period pair.
    pub per_step: Vec<f64>,
    pub cumulative: f64,
}

impl ShiftScore {
    /// Index of the step with the largest shift (first on ties).
    pub fn max_step(&self) -> Option<usize> {
        self.per_step
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    }
}

/// Sum of halved cosine distances between a word's consecutive aligned vectors.
pub fn cumulative_shift(word: &str, chain: &AlignedChain) -> Result<ShiftScore> {
    let missing: Vec<usize> = chain
        .periods
        .iter()
        .filter(|p| p.vocab.id(word).is_none())
        .map(|p| p.period_index)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingWord {
            word: word.to_owned(),
            periods: missing,
        });
    }
    let vectors: Vec<&[f64]> = chain
        .periods
        .iter()
        .map(|p| p.vector(word).expect("checked above"))
        .collect();
    let per_step = vectors
        .windows(2)
        .map(|w| cosine(w[0], w[1]).map(|c| (1.0 - c) / 2.0))
        .collect::<Result<Vec<f64>>>()?;
    let cumulative = per_step.iter().sum();
    Ok(ShiftScore {
        word: word.to_owned(),
        per_step,
        cumulative,
    })
}

/// Occurrences of `word` summed over all periods of the chain.
pub fn total_count(word: &str, chain: &AlignedChain) -> u64 {
    chain.periods.iter().map(|p| p.vocab.count_of(word)).sum()
}

fn by_score_then_key(a: &ShiftScore, b: &ShiftScore) -> Ordering {
    b.cumulative
        .total_cmp(&a.cumulative)
        .then_with(|| a.word.cmp(&b.word))
}

/// Drops candidates seen fewer than `total_freq_floor` times overall, scores
/// the rest and returns the `top_k` largest shifts. Candidates absent from
/// some period cannot be scored and are skipped.
pub fn rank_candidates(
    candidates: &[String],
    chain: &AlignedChain,
    total_freq_floor: u64,
    top_k: usize,
) -> Result<Vec<ShiftScore>> {
    if top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let mut unique: Vec<&String> = candidates.iter().collect();
    unique.sort_unstable();
    unique.dedup();
    let mut scores = unique
        .par_iter()
        .filter(|w| total_count(w, chain) >= total_freq_floor)
        .filter_map(|w| match cumulative_shift(w, chain) {
            Ok(s) => Some(Ok(s)),
            Err(Error::MissingWord { word, periods }) => {
                log::warn!("skipping `{word}`: absent from periods {periods:?}");
                None
            }
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Err(Error::Empty(format!(
            "no candidate survives the total frequency floor of {total_freq_floor}"
        )));
    }
    scores.sort_by(by_score_then_key);
    scores.truncate(top_k);
    Ok(scores)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborQuery {
    pub pool_size: usize,
    pub keep: usize,
    pub pos_filter: Option<Pos>,
    pub per_period_freq_floor: u64,
}

impl Default for NeighborQuery {
    fn default() -> Self {
        NeighborQuery {
            pool_size: 1000,
            keep: 20,
            pos_filter: Some(Pos::Noun),
            per_period_freq_floor: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub key: String,
    pub sim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodNeighbors {
    pub index: usize,
    pub neighbors: Vec<Neighbor>,
    /// Set when fewer than `keep` neighbors survived the filters.
    pub short: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborTrace {
    pub word: String,
    pub periods: Vec<PeriodNeighbors>,
}

impl NeighborTrace {
    pub fn is_short(&self) -> bool {
        self.periods.iter().any(|p| p.short)
    }
}

fn pos_matches(key: &str, filter: Option<Pos>) -> bool {
    match filter {
        None => true,
        Some(pos) => Pos::of_key(key) == Some(pos),
    }
}

/// Nearest neighbors of `word` in each period, searched exhaustively over
/// the shared vocabulary.
///
/// Per period: the `pool_size` most similar shared words with the requested
/// POS are taken, words below the frequency floor in any period are dropped,
/// and the first `keep` survivors are returned. Ties are broken by key.
pub fn neighbor_trace(word: &str, chain: &AlignedChain, query: &NeighborQuery) -> Result<NeighborTrace> {
    let missing: Vec<usize> = chain
        .periods
        .iter()
        .filter(|p| p.vocab.id(word).is_none())
        .map(|p| p.period_index)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingWord {
            word: word.to_owned(),
            periods: missing,
        });
    }
    let shared = &chain.shared;
    let candidates: Vec<usize> = (0..shared.len())
        .filter(|&i| {
            let k = &shared.keys()[i];
            k != word && pos_matches(k, query.pos_filter)
        })
        .collect();
    let frequent = |i: usize| {
        chain
            .periods
            .iter()
            .enumerate()
            .all(|(p, space)| space.vocab.count(shared.rows(p)[i]) >= query.per_period_freq_floor)
    };

    let periods = chain
        .periods
        .par_iter()
        .enumerate()
        .map(|(p, space)| {
            let target = space.vector(word).expect("checked above");
            let rows = shared.rows(p);
            let mut scored: Vec<(usize, f64)> = candidates
                .iter()
                .filter_map(|&i| {
                    cosine(target, space.vectors.row(rows[i] as usize))
                        .ok()
                        .map(|s| (i, s))
                })
                .collect();
            if scored.is_empty() && !candidates.is_empty() {
                return Err(Error::Insufficient(format!(
                    "`{word}` has a zero vector in period {p}"
                )));
            }
            scored.sort_by(|a, b| {
                b.1.total_cmp(&a.1)
                    .then_with(|| shared.keys()[a.0].cmp(&shared.keys()[b.0]))
            });
            scored.truncate(query.pool_size);
            let neighbors: Vec<Neighbor> = scored
                .into_iter()
                .filter(|&(i, _)| frequent(i))
                .take(query.keep)
                .map(|(i, sim)| Neighbor {
                    key: shared.keys()[i].clone(),
                    sim,
                })
                .collect();
            let short = neighbors.len() < query.keep;
            if short {
                log::warn!(
                    "`{word}` period {p}: only {} of {} neighbors survived filtering",
                    neighbors.len(),
                    query.keep
                );
            }
            Ok(PeriodNeighbors {
                index: space.period_index,
                neighbors,
                short,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeighborTrace {
        word: word.to_owned(),
        periods,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ShiftReport {
    pub schema_version: u32,
    pub scores: Vec<ShiftScore>,
}

impl ShiftReport {
    pub fn new(scores: Vec<ShiftScore>) -> Self {
        ShiftReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scores,
        }
    }

    /// Columns: `word`, `step_1..step_k`, `cumulative`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let steps = self.scores.first().map_or(0, |s| s.per_step.len());
        write!(w, "word")?;
        for i in 1..=steps {
            write!(w, ",step_{i}")?;
        }
        writeln!(w, ",cumulative")?;
        for s in &self.scores {
            write!(w, "{}", csv_field(&s.word))?;
            for v in &s.per_step {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", s.cumulative)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NeighborReport {
    pub schema_version: u32,
    pub word: String,
    #[serde(rename = "D_c")]
    pub d_c: f64,
    pub periods: Vec<NeighborReportPeriod>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NeighborReportPeriod {
    pub index: usize,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborReport {
    pub fn new(trace: NeighborTrace, score: &ShiftScore) -> Self {
        NeighborReport {
            schema_version: REPORT_SCHEMA_VERSION,
            word: trace.word,
            d_c: score.cumulative,
            periods: trace
                .periods
                .into_iter()
                .map(|p| NeighborReportPeriod {
                    index: p.index,
                    neighbors: p.neighbors,
                })
                .collect(),
        }
    }
}
