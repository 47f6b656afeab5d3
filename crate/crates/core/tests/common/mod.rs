#![allow(dead_code)]

use driftlab::align::{AlignedChain, AlignedSpace};
use driftlab::corpus::Vocabulary;
use driftlab::matrix::Matrix;
use nalgebra::DMatrix;
use rand::Rng;

/// Orthogonal factor of a random square matrix.
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn keys(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:04}#NOUN")).collect()
}

pub fn aligned_space(index: usize, keys: &[String], counts: Vec<u64>, rows: Vec<Vec<f64>>) -> AlignedSpace {
    let dim = rows[0].len();
    AlignedSpace {
        period_index: index,
        vocab: Vocabulary::from_sorted(keys.to_vec(), counts),
        vectors: Matrix::from_vec(rows.len(), dim, rows.into_iter().flatten().collect()),
    }
}

/// Periods of random vectors over one shared vocabulary.
pub fn random_chain<R: Rng>(n_words: usize, dim: usize, periods: usize, rng: &mut R) -> AlignedChain {
    let k = keys(n_words);
    let spaces = (0..periods)
        .map(|p| {
            let rows = (0..n_words)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            aligned_space(p, &k, vec![100; n_words], rows)
        })
        .collect();
    AlignedChain::from_aligned(spaces, 1, true).unwrap()
}

/// Spearman correlation by counting ranks (ties averaged) and a direct
/// two-pass Pearson formula.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let below = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}
