use crate::corpus::Vocabulary;
use crate::matrix::Matrix;

/// Read access to a keyed table of word vectors, widened to `f64`.
pub trait WordVectors: Sync {
    fn vocab(&self) -> &Vocabulary;

    fn dim(&self) -> usize;

    /// Copies row `id` into `out` (which must have length `dim()`).
    fn read_row(&self, id: u32, out: &mut [f64]);

    fn row_f64(&self, id: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.read_row(id, &mut out);
        out
    }

    fn lookup(&self, key: &str) -> Option<Vec<f64>> {
        self.vocab().id(key).map(|id| self.row_f64(id))
    }
}

/// Word vectors for one period: the exported input vectors plus the
/// context (output) vectors used during training.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSpace {
    pub vocab: Vocabulary,
    pub input_vectors: Matrix<f32>,
    pub output_vectors: Matrix<f32>,
    pub period_index: usize,
}

impl EmbeddingSpace {
    pub fn dim(&self) -> usize {
        self.input_vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vector(&self, key: &str) -> Option<&[f32]> {
        self.vocab.id(key).map(|id| self.input_vectors.row(id as usize))
    }

    pub fn is_finite(&self) -> bool {
        self.input_vectors.is_finite() && self.output_vectors.is_finite()
    }
}

impl WordVectors for EmbeddingSpace {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn dim(&self) -> usize {
        self.input_vectors.cols()
    }

    fn read_row(&self, id: u32, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(self.input_vectors.row(id as usize)) {
            *o = f64::from(v);
        }
    }
}
