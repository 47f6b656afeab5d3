//! Orthogonal Procrustes alignment of per-period spaces into the frame of
//! the most recent period.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::sgns::{EmbeddingSpace, WordVectors};

/// Keys present in every period, with each period's row index for them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedVocab {
    keys: Vec<String>,
    rows: Vec<Vec<u32>>,
    min_count: u64,
}

impl SharedVocab {
    /// Intersects vocabularies, keeping words with at least `min_count`
    /// occurrences in every period. Keys are sorted.
    pub fn build(vocabs: &[&Vocabulary], min_count: u64) -> Result<Self> {
        if vocabs.len() < 2 {
            return Err(Error::Insufficient(
                "a shared vocabulary needs at least two periods".into(),
            ));
        }
        let mut keys: Vec<String> = vocabs[0]
            .keys()
            .iter()
            .filter(|k| vocabs.iter().all(|v| v.id(k).is_some_and(|id| v.count(id) >= min_count)))
            .cloned()
            .collect();
        if keys.is_empty() {
            return Err(Error::Empty(format!(
                "no word occurs at least {min_count} times in all {} periods",
                vocabs.len()
            )));
        }
        keys.sort_unstable();
        let rows = vocabs
            .iter()
            .map(|v| keys.iter().map(|k| v.id(k).expect("key in every vocab")).collect())
            .collect();
        Ok(SharedVocab {
            keys,
            rows,
            min_count,
        })
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Row indices of the shared keys in `period`'s vocabulary.
    pub fn rows(&self, period: usize) -> &[u32] {
        &self.rows[period]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.binary_search_by(|k| k.as_str().cmp(key)).is_ok()
    }
}

pub fn shared_vocab(spaces: &[EmbeddingSpace], min_count_per_period: u64) -> Result<SharedVocab> {
    let vocabs: Vec<&Vocabulary> = spaces.iter().map(|s| &s.vocab).collect();
    SharedVocab::build(&vocabs, min_count_per_period)
}

/// Orthogonal `W` minimising `‖AW − B‖_F`: with `AᵀB = UΣVᵀ`, `W = UVᵀ`.
///
/// Reflections are allowed. A rank-deficient `AᵀB` still yields an
/// orthogonal `W`.
pub fn procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Format(format!(
            "procrustes: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("procrustes input contains NaN or infinity".into()));
    }
    let m = a.transpose() * b;
    let svd = m.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    Ok(u * v_t)
}

/// Largest absolute entry of `WᵀW − I`.
pub fn orthogonality_error(w: &DMatrix<f64>) -> f64 {
    let g = w.transpose() * w;
    let n = g.nrows();
    (g - DMatrix::<f64>::identity(n, n)).amax()
}

/// One period's vectors expressed in the anchor frame.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedSpace {
    pub period_index: usize,
    pub vocab: Vocabulary,
    pub vectors: Matrix<f64>,
}

impl AlignedSpace {
    pub fn vector(&self, key: &str) -> Option<&[f64]> {
        self.vocab.id(key).map(|id| self.vectors.row(id as usize))
    }
}

impl WordVectors for AlignedSpace {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn dim(&self) -> usize {
        self.vectors.cols()
    }

    fn read_row(&self, id: u32, out: &mut [f64]) {
        out.copy_from_slice(self.vectors.row(id as usize));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedChain {
    pub periods: Vec<AlignedSpace>,
    /// Rotation applied to each period (identity for the anchor).
    pub rotations: Vec<DMatrix<f64>>,
    pub anchor_index: usize,
    pub normalize: bool,
    pub shared: SharedVocab,
}

impl AlignedChain {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.periods[0].vectors.cols()
    }

    pub fn period(&self, i: usize) -> &AlignedSpace {
        &self.periods[i]
    }

    /// Wraps spaces that already share one frame, with identity rotations
    /// and the last period as anchor.
    pub fn from_aligned(periods: Vec<AlignedSpace>, min_count: u64, normalize: bool) -> Result<AlignedChain> {
        let vocabs: Vec<&Vocabulary> = periods.iter().map(|p| &p.vocab).collect();
        let shared = SharedVocab::build(&vocabs, min_count)?;
        let dim = periods[0].vectors.cols();
        if let Some(bad) = periods.iter().find(|p| p.vectors.cols() != dim || p.vectors.rows() != p.vocab.len()) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.vectors.cols(),
            });
        }
        let n = periods.len();
        Ok(AlignedChain {
            periods,
            rotations: vec![DMatrix::identity(dim, dim); n],
            anchor_index: n - 1,
            normalize,
            shared,
        })
    }

    /// Re-runs the alignment on the already-aligned vectors.
    pub fn realign(&self) -> Result<AlignedChain> {
        let vocabs: Vec<&Vocabulary> = self.periods.iter().map(|p| &p.vocab).collect();
        let mats: Vec<Matrix<f64>> = self.periods.iter().map(|p| p.vectors.clone()).collect();
        align_matrices(&vocabs, mats, &self.shared, self.normalize)
    }

    /// Applies the same orthogonal map to every period. Rotations compose.
    pub fn rotated(&self, w: &DMatrix<f64>) -> AlignedChain {
        let mut out = self.clone();
        for (p, r) in out.periods.iter_mut().zip(out.rotations.iter_mut()) {
            p.vectors = multiply(&p.vectors, w);
            *r = &*r * w;
        }
        out
    }
}

fn multiply(m: &Matrix<f64>, w: &DMatrix<f64>) -> Matrix<f64> {
    let a = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let prod = a * w;
    // nalgebra is column-major; the transpose's storage is the row-major product.
    let data = prod.transpose().as_slice().to_vec();
    Matrix::from_vec(m.rows(), w.ncols(), data)
}

fn gather_rows(m: &Matrix<f64>, rows: &[u32], normalize: bool) -> DMatrix<f64> {
    let d = m.cols();
    let mut out = DMatrix::zeros(rows.len(), d);
    for (i, &r) in rows.iter().enumerate() {
        let row = m.row(r as usize);
        let scale = if normalize {
            let n = norm(row);
            if n > 0.0 {
                1.0 / n
            } else {
                0.0
            }
        } else {
            1.0
        };
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v * scale;
        }
    }
    out
}

/// Aligns `spaces` (ordered oldest to newest) recursively onto the last one.
///
/// Period `t` is rotated to best match the already-aligned period `t + 1`
/// on the shared rows; the rotation is then applied to all of period `t`'s
/// rows. With `normalize`, the fit uses unit-length rows.
pub fn align_chain(spaces: &[EmbeddingSpace], shared: &SharedVocab, normalize: bool) -> Result<AlignedChain> {
    if spaces.len() != shared.rows.len() {
        return Err(Error::Config(format!(
            "shared vocabulary covers {} periods, got {} spaces",
            shared.rows.len(),
            spaces.len()
        )));
    }
    let vocabs: Vec<&Vocabulary> = spaces.iter().map(|s| &s.vocab).collect();
    let mats = spaces.iter().map(|s| s.input_vectors.to_f64()).collect();
    align_matrices(&vocabs, mats, shared, normalize)
}

fn align_matrices(
    vocabs: &[&Vocabulary],
    mut mats: Vec<Matrix<f64>>,
    shared: &SharedVocab,
    normalize: bool,
) -> Result<AlignedChain> {
    let n = mats.len();
    if n == 0 || shared.is_empty() {
        return Err(Error::Empty("nothing to align".into()));
    }
    let dim = mats[0].cols();
    if let Some(bad) = mats.iter().find(|m| m.cols() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: bad.cols(),
        });
    }
    let anchor = n - 1;
    let mut rotations = vec![DMatrix::<f64>::identity(dim, dim); n];
    for t in (0..anchor).rev() {
        let a = gather_rows(&mats[t], shared.rows(t), normalize);
        let b = gather_rows(&mats[t + 1], shared.rows(t + 1), normalize);
        let w = procrustes(&a, &b)?;
        mats[t] = multiply(&mats[t], &w);
        rotations[t] = w;
    }
    let periods = mats
        .into_iter()
        .zip(vocabs)
        .enumerate()
        .map(|(i, (vectors, vocab))| AlignedSpace {
            period_index: i,
            vocab: (*vocab).clone(),
            vectors,
        })
        .collect();
    Ok(AlignedChain {
        periods,
        rotations,
        anchor_index: anchor,
        normalize,
        shared: shared.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub schema_version: u32,
    pub anchor_index: usize,
    pub periods: Vec<ChainPeriodEntry>,
    pub normalize: bool,
    pub shared_vocab_size: usize,
    pub shared_min_count: u64,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPeriodEntry {
    pub index: usize,
    pub vocab_size: usize,
    /// Text export, float32 precision.
    pub text: String,
    /// Lossless binary (f64) copy used for reloading.
    pub binary: String,
    pub rotation: Vec<Vec<f64>>,
}

pub const CHAIN_MANIFEST: &str = "chain.json";

/// Writes per-period text and binary files plus `chain.json` into `dir`.
/// Returns the relative paths written.
pub fn write_chain(chain: &AlignedChain, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (p, w) in chain.periods.iter().zip(&chain.rotations) {
        let text = format!("aligned_period_{}.txt", p.period_index);
        let binary = format!("aligned_period_{}.bin", p.period_index);
        let create = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path).map_err(|e| Error::io_at(path, e))
        };
        crate::sgns::write_text(p, create(&text)?)?;
        crate::sgns::write_binary_f64(create(&binary)?, p.period_index, &p.vocab, &p.vectors)?;
        let rotation = (0..w.nrows())
            .map(|i| w.row(i).iter().copied().collect())
            .collect();
        entries.push(ChainPeriodEntry {
            index: p.period_index,
            vocab_size: p.vocab.len(),
            text: text.clone(),
            binary: binary.clone(),
            rotation,
        });
        written.push(text);
        written.push(binary);
    }
    let manifest = ChainManifest {
        schema_version: 1,
        anchor_index: chain.anchor_index,
        periods: entries,
        normalize: chain.normalize,
        shared_vocab_size: chain.shared.len(),
        shared_min_count: chain.shared.min_count(),
        dim: chain.dim(),
    };
    let path = dir.join(CHAIN_MANIFEST);
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&path, json).map_err(|e| Error::io_at(&path, e))?;
    written.push(CHAIN_MANIFEST.to_owned());
    Ok(written)
}

pub fn read_chain(dir: &Path) -> Result<AlignedChain> {
    let path = dir.join(CHAIN_MANIFEST);
    let raw = std::fs::read(&path).map_err(|e| Error::io_at(&path, e))?;
    let manifest: ChainManifest = serde_json::from_slice(&raw)?;
    let mut periods = Vec::new();
    let mut rotations = Vec::new();
    for entry in &manifest.periods {
        let path = dir.join(&entry.binary);
        let file = std::fs::File::open(&path).map_err(|e| Error::io_at(&path, e))?;
        let (index, vocab, vectors) = crate::sgns::read_binary_f64(file)?;
        if vectors.cols() != manifest.dim {
            return Err(Error::Dimension {
                expected: manifest.dim,
                found: vectors.cols(),
            });
        }
        periods.push(AlignedSpace {
            period_index: index,
            vocab,
            vectors,
        });
        let d = entry.rotation.len();
        let flat: Vec<f64> = entry.rotation.iter().flatten().copied().collect();
        if flat.len() != d * d {
            return Err(Error::Format("rotation matrix is not square".into()));
        }
        rotations.push(DMatrix::from_row_slice(d, d, &flat));
    }
    let vocabs: Vec<&Vocabulary> = periods.iter().map(|p| &p.vocab).collect();
    let shared = SharedVocab::build(&vocabs, manifest.shared_min_count)?;
    if shared.len() != manifest.shared_vocab_size {
        return Err(Error::Format(format!(
            "shared vocabulary has {} words, manifest records {}",
            shared.len(),
            manifest.shared_vocab_size
        )));
    }
    Ok(AlignedChain {
        periods,
        rotations,
        anchor_index: manifest.anchor_index,
        normalize: manifest.normalize,
        shared,
    })
}
