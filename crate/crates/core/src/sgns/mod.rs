//! Skip-gram with negative sampling, trained with lock-free asynchronous SGD.

mod io;
mod kernel;
mod sampler;
mod space;

use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PeriodCorpus, Subsampler};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub(crate) use io::{read_binary_f64, write_binary_f64};
pub use io::{read_binary, read_embeddings, read_text, write_binary, write_text, BINARY_MAGIC};
pub use kernel::{pair_gradients, pair_loss, pair_step, sigmoid, softplus, target_step, PairGradients};
pub use sampler::{dynamic_window, lr_schedule, NegativeSampler, MIN_ALPHA_RATIO, NOISE_EXPONENT};
pub use space::{EmbeddingSpace, WordVectors};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub vector_size: usize,
    pub window: usize,
    pub negative: usize,
    pub sample: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            vector_size: 300,
            window: 4,
            negative: 5,
            sample: 1e-5,
            alpha: 0.02,
            epochs: 5,
            seed: 1,
            workers: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.vector_size == 0 {
            return bad("vector_size must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive and finite");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.sample >= 0.0 && self.sample.is_finite()) {
            return bad("sample must be non-negative and finite");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean pair loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs_per_epoch: Vec<u64>,
}

/// Applies one pair update to a trained or in-training space.
///
/// Panics if any id is outside the vocabulary.
pub fn sgns_pair_step(
    space: &mut EmbeddingSpace,
    center: u32,
    context: u32,
    negatives: &[u32],
    lr: f32,
) -> f32 {
    let n = space.len();
    assert!(
        (center as usize) < n && (context as usize) < n && negatives.iter().all(|&x| (x as usize) < n),
        "word id out of range for vocabulary of {n}"
    );
    pair_step(
        &mut space.input_vectors,
        &mut space.output_vectors,
        center,
        context,
        negatives,
        lr,
    )
}

pub fn train(corpus: &PeriodCorpus, hp: &Hyperparams) -> Result<EmbeddingSpace> {
    train_with_report(corpus, hp).map(|(space, _)| space)
}

/// Trains input and output vectors for one period.
///
/// With `workers > 1` sentence shards are processed concurrently and write
/// to the shared tables without locks; individual floats are stored
/// atomically, so updates may be lost but never torn. `workers == 1` is
/// bit-reproducible for a fixed seed.
pub fn train_with_report(corpus: &PeriodCorpus, hp: &Hyperparams) -> Result<(EmbeddingSpace, TrainReport)> {
    hp.validate()?;
    let vocab = &corpus.vocab;
    if vocab.is_empty() || corpus.is_empty() {
        return Err(Error::Empty(format!(
            "period {} has an empty vocabulary or token stream",
            corpus.period_index
        )));
    }
    let dim = hp.vector_size;
    let rows = vocab.len();

    let mut init_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let half = 0.5 / dim as f32;
    let input: Vec<f32> = (0..rows * dim)
        .map(|_| init_rng.random_range(-half..half))
        .collect();

    let ctx = TrainContext {
        corpus,
        hp,
        input: SharedMatrix::new(&input, dim),
        output: SharedMatrix::new(&vec![0.0; rows * dim], dim),
        sampler: NegativeSampler::new(vocab.counts())?,
        subsampler: Subsampler::new(vocab, hp.sample),
        processed: AtomicU64::new(0),
        total_work: (hp.epochs * corpus.num_tokens()) as u64,
        abort: AtomicBool::new(false),
    };

    let shards = shard_ranges(corpus.num_sentences(), hp.workers);
    let mut report = TrainReport::default();
    for epoch in 0..hp.epochs {
        let results: Vec<Result<ShardStats>> = if shards.len() == 1 {
            vec![ctx.run_shard(epoch, 0, shards[0].clone())]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = shards
                    .iter()
                    .enumerate()
                    .map(|(w, range)| {
                        let ctx = &ctx;
                        let range = range.clone();
                        scope.spawn(move || ctx.run_shard(epoch, w, range))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            })
        };
        let mut total = ShardStats::default();
        for r in results {
            let s = r?;
            total.loss += s.loss;
            total.pairs += s.pairs;
        }
        let mean = if total.pairs > 0 {
            total.loss / total.pairs as f64
        } else {
            0.0
        };
        log::debug!(
            "period {} epoch {}: {} pairs, mean loss {mean:.5}",
            corpus.period_index,
            epoch + 1,
            total.pairs
        );
        report.epoch_losses.push(mean);
        report.pairs_per_epoch.push(total.pairs);
    }

    let space = EmbeddingSpace {
        vocab: vocab.clone(),
        input_vectors: ctx.input.into_matrix(),
        output_vectors: ctx.output.into_matrix(),
        period_index: corpus.period_index,
    };
    if !space.is_finite() {
        return Err(Error::NonFinite(
            "trained vectors contain NaN or infinity".into(),
        ));
    }
    Ok((space, report))
}

fn shard_ranges(n: usize, workers: usize) -> Vec<Range<usize>> {
    let workers = workers.clamp(1, n.max(1));
    let per = n.div_ceil(workers);
    (0..workers)
        .map(|w| (w * per).min(n)..((w + 1) * per).min(n))
        .filter(|r| !r.is_empty() || n == 0)
        .collect()
}

/// Row-major f32 table stored as atomics so concurrent workers can update it.
struct SharedMatrix {
    data: Vec<AtomicU32>,
    cols: usize,
}

impl SharedMatrix {
    fn new(values: &[f32], cols: usize) -> Self {
        SharedMatrix {
            data: values.iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
            cols,
        }
    }

    #[inline]
    fn load(&self, row: u32, out: &mut [f32]) {
        let base = row as usize * self.cols;
        for (o, a) in out.iter_mut().zip(&self.data[base..base + self.cols]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn store(&self, row: u32, values: &[f32]) {
        let base = row as usize * self.cols;
        for (a, v) in self.data[base..base + self.cols].iter().zip(values) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_matrix(self) -> Matrix<f32> {
        let rows = self.data.len() / self.cols;
        let data = self
            .data
            .into_iter()
            .map(|a| f32::from_bits(a.into_inner()))
            .collect();
        Matrix::from_vec(rows, self.cols, data)
    }
}

#[derive(Default)]
struct ShardStats {
    loss: f64,
    pairs: u64,
}

struct TrainContext<'a> {
    corpus: &'a PeriodCorpus,
    hp: &'a Hyperparams,
    input: SharedMatrix,
    output: SharedMatrix,
    sampler: NegativeSampler,
    subsampler: Subsampler,
    processed: AtomicU64,
    total_work: u64,
    abort: AtomicBool,
}

impl TrainContext<'_> {
    fn run_shard(&self, epoch: usize, worker: usize, sentences: Range<usize>) -> Result<ShardStats> {
        let hp = self.hp;
        let dim = hp.vector_size;
        let stream = (epoch as u64) << 32 | worker as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x9E37_79B9_7F4A_7C15);
        rng.set_stream(stream);

        let mut kept = Vec::new();
        let mut v = vec![0.0f32; dim];
        let mut u = vec![0.0f32; dim];
        let mut step = vec![0.0f32; dim];
        let mut stats = ShardStats::default();

        for s in sentences {
            if self.abort.load(Ordering::Relaxed) {
                break;
            }
            let sentence = self.corpus.sentence(s);
            let done = self
                .processed
                .fetch_add(sentence.len() as u64, Ordering::Relaxed);
            let lr = lr_schedule(hp.alpha, done as f64 / self.total_work as f64) as f32;
            self.subsampler.filter_into(sentence, &mut rng, &mut kept);

            for pos in 0..kept.len() {
                let reach = dynamic_window(hp.window, &mut rng);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                let center = kept[pos];
                for (c, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if c == pos {
                        continue;
                    }
                    self.input.load(center, &mut v);
                    step.fill(0.0);

                    self.output.load(context, &mut u);
                    let mut loss = target_step(&v, &mut u, true, lr, &mut step);
                    self.output.store(context, &u);
                    for _ in 0..hp.negative {
                        let Some(n) = self.sampler.sample_excluding(center, &mut rng) else {
                            break;
                        };
                        self.output.load(n, &mut u);
                        loss += target_step(&v, &mut u, false, lr, &mut step);
                        self.output.store(n, &u);
                    }
                    for (x, d) in v.iter_mut().zip(&step) {
                        *x += d;
                    }
                    self.input.store(center, &v);

                    if !loss.is_finite() {
                        self.abort.store(true, Ordering::Relaxed);
                        return Err(Error::NonFinite(format!(
                            "period {}, epoch {}, sentence {s}: loss {loss} on pair ({center}, {context})",
                            self.corpus.period_index,
                            epoch + 1
                        )));
                    }
                    stats.loss += f64::from(loss);
                    stats.pairs += 1;
                }
            }
        }
        Ok(stats)
    }
}
