use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{cbow_update, DenseWeights, Example, Scratch, SharedWeights, Weights};
use super::vectors::WordVectors;
use super::vocab::{build_vocab, NoiseSampler, SentenceSource, Vocabulary};
use crate::error::{Error, Result};

/// Updates per training-log row.
pub const LOG_EVERY: u64 = 10_000;
const PARALLEL_BLOCK: usize = 8192;
const PARALLEL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbowHyperparams {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub initial_lr: f32,
    pub final_lr: f32,
    /// Zero disables frequency subsampling.
    pub subsample_threshold: f64,
    pub seed: u64,
}

impl Default for CbowHyperparams {
    fn default() -> Self {
        CbowHyperparams {
            dim: 300,
            window: 10,
            negative: 5,
            min_count: 5,
            epochs: 5,
            initial_lr: 0.025,
            final_lr: 1e-4,
            subsample_threshold: 1e-3,
            seed: 1,
        }
    }
}

impl CbowHyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.negative == 0 {
            return fail("negative must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.final_lr > 0.0 && self.final_lr <= self.initial_lr) {
            return fail("learning rates must satisfy 0 < final_lr <= initial_lr");
        }
        if !(self.subsample_threshold >= 0.0) {
            return fail("subsample_threshold must be non-negative");
        }
        Ok(())
    }

    /// Learning rate after `progress` ∈ [0, 1] of the expected updates.
    pub fn lr_at(&self, progress: f64) -> f32 {
        let p = progress.clamp(0.0, 1.0) as f32;
        (self.initial_lr - (self.initial_lr - self.final_lr) * p).max(self.final_lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    /// Single thread, bit-for-bit reproducible from the seed.
    #[default]
    Sequential,
    /// Lock-free updates from several threads; reproducible only in
    /// distribution.
    Parallel { threads: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub params: CbowHyperparams,
    pub vocab: Vocabulary,
    /// Input vectors, one row per vocabulary word.
    pub vectors: WordVectors,
    /// Negative-sampling output weights, row-major V×dim.
    pub output: Vec<f32>,
}

impl EmbeddingModel {
    pub fn all_finite(&self) -> bool {
        self.vectors.all_finite() && self.output.iter().all(|x| x.is_finite())
    }

    fn from_weights(params: &CbowHyperparams, vocab: Vocabulary, w: DenseWeights<f32>) -> Result<Self> {
        let vectors = WordVectors::new(vocab.words().to_vec(), w.dim, w.input)?;
        Ok(EmbeddingModel {
            params: params.clone(),
            vocab,
            vectors,
            output: w.output,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// Updates completed when the row was written.
    pub update: u64,
    pub lr: f32,
    /// Mean per-example loss since the previous row.
    pub mean_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    pub epoch_mean_loss: Vec<f64>,
    pub updates: u64,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "update,lr,mean_loss")?;
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.update, e.lr, e.mean_loss)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Default)]
struct LossWindow {
    sum: f64,
    n: u64,
}

/// Input rows uniform in (−0.5/dim, 0.5/dim), output rows zero.
pub fn init_weights(vocab: &Vocabulary, params: &CbowHyperparams) -> DenseWeights<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let dim = params.dim;
    let input = (0..vocab.len() * dim)
        .map(|_| (rng.random::<f32>() - 0.5) / dim as f32)
        .collect();
    DenseWeights {
        dim,
        input,
        output: vec![0.0; vocab.len() * dim],
    }
}

/// Everything the per-sentence loop needs that stays fixed during training.
struct Trainer<'a> {
    params: &'a CbowHyperparams,
    noise: NoiseSampler,
    /// Keep probability per word under frequency subsampling.
    keep: Vec<f64>,
    expected: f64,
}

struct Buffers {
    kept: Vec<u32>,
    context: Vec<u32>,
    targets: Vec<(u32, bool)>,
    scratch: Scratch<f32>,
}

impl Buffers {
    fn new(dim: usize) -> Self {
        Buffers {
            kept: Vec::new(),
            context: Vec::new(),
            targets: Vec::new(),
            scratch: Scratch::new(dim),
        }
    }
}

impl<'a> Trainer<'a> {
    fn new(params: &'a CbowHyperparams, vocab: &'a Vocabulary) -> Self {
        let t = params.subsample_threshold * vocab.total_tokens() as f64;
        let keep = vocab
            .counts()
            .iter()
            .map(|&c| {
                if t <= 0.0 {
                    1.0
                } else {
                    let f = c as f64;
                    ((f / t).sqrt() + 1.0) * t / f
                }
            })
            .collect();
        Trainer {
            params,
            noise: vocab.noise_sampler(),
            keep,
            expected: (params.epochs as u64 * vocab.total_tokens()) as f64,
        }
    }

    /// Trains on one encoded sentence; returns (loss sum, updates).
    fn sentence<W: Weights<f32>>(
        &self,
        w: &mut W,
        ids: &[u32],
        lr: f32,
        rng: &mut ChaCha8Rng,
        buf: &mut Buffers,
        mut per_update: impl FnMut(f64),
    ) -> (f64, u64) {
        buf.kept.clear();
        for &id in ids {
            let p = self.keep[id as usize];
            if p >= 1.0 || p >= rng.random::<f64>() {
                buf.kept.push(id);
            }
        }
        let n = buf.kept.len();
        let (mut loss, mut updates) = (0f64, 0u64);
        for t in 0..n {
            let b = rng.random_range(1..=self.params.window);
            let lo = t.saturating_sub(b);
            let hi = (t + b).min(n - 1);
            buf.context.clear();
            buf.context.extend((lo..=hi).filter(|&i| i != t).map(|i| buf.kept[i]));
            if buf.context.is_empty() {
                continue;
            }
            let centre = buf.kept[t];
            buf.targets.clear();
            buf.targets.push((centre, true));
            for _ in 0..self.params.negative {
                let neg = self.noise.sample(rng);
                if neg != centre {
                    buf.targets.push((neg, false));
                }
            }
            let ex = Example {
                context: &buf.context,
                targets: &buf.targets,
            };
            let l = cbow_update(w, ex, lr, &mut buf.scratch) as f64;
            loss += l;
            updates += 1;
            per_update(l);
        }
        (loss, updates)
    }

    fn lr(&self, words_done: u64) -> f32 {
        self.params.lr_at(words_done as f64 / (self.expected + 1.0))
    }
}

/// Builds the vocabulary from `source` and trains on it.
pub fn train_cbow<S: SentenceSource + ?Sized>(
    source: &S,
    params: &CbowHyperparams,
    mode: TrainMode,
) -> Result<(EmbeddingModel, TrainingLog)> {
    params.validate()?;
    let vocab = build_vocab(source, params.min_count)?;
    train_with_vocab(source, vocab, params, mode)
}

pub fn train_with_vocab<S: SentenceSource + ?Sized>(
    source: &S,
    vocab: Vocabulary,
    params: &CbowHyperparams,
    mode: TrainMode,
) -> Result<(EmbeddingModel, TrainingLog)> {
    params.validate()?;
    let weights = init_weights(&vocab, params);
    let (weights, log) = match mode {
        TrainMode::Sequential => train_sequential(source, &vocab, params, weights)?,
        TrainMode::Parallel { threads } => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Training(e.to_string()))?;
            pool.install(|| train_parallel(source, &vocab, params, weights))?
        }
    };
    let model = EmbeddingModel::from_weights(params, vocab, weights)?;
    if !model.all_finite() {
        return Err(Error::Training("training produced non-finite weights".into()));
    }
    Ok((model, log))
}

fn no_examples() -> Error {
    Error::Training("corpus yields no training examples after subsampling".into())
}

fn train_sequential<S: SentenceSource + ?Sized>(
    source: &S,
    vocab: &Vocabulary,
    params: &CbowHyperparams,
    mut w: DenseWeights<f32>,
) -> Result<(DenseWeights<f32>, TrainingLog)> {
    let trainer = Trainer::new(params, vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let mut buf = Buffers::new(params.dim);
    let mut log = TrainingLog::default();
    let mut window = LossWindow::default();
    let mut words_done = 0u64;
    for _ in 0..params.epochs {
        let (mut epoch_loss, mut epoch_updates) = (0f64, 0u64);
        for sentence in source.sentences()? {
            let ids = vocab.encode(&sentence?);
            let lr = trainer.lr(words_done);
            let entries = &mut log.entries;
            let updates_before = log.updates;
            let mut k = 0u64;
            let (loss, n) = trainer.sentence(&mut w, &ids, lr, &mut rng, &mut buf, |l| {
                window.sum += l;
                window.n += 1;
                k += 1;
                if window.n == LOG_EVERY {
                    entries.push(LogEntry {
                        update: updates_before + k,
                        lr,
                        mean_loss: window.sum / window.n as f64,
                    });
                    window = LossWindow::default();
                }
            });
            log.updates += n;
            epoch_loss += loss;
            epoch_updates += n;
            words_done += ids.len() as u64;
        }
        if epoch_updates == 0 {
            return Err(no_examples());
        }
        log.epoch_mean_loss.push(epoch_loss / epoch_updates as f64);
    }
    if window.n > 0 {
        log.entries.push(LogEntry {
            update: log.updates,
            lr: trainer.lr(words_done),
            mean_loss: window.sum / window.n as f64,
        });
    }
    Ok((w, log))
}

fn train_parallel<S: SentenceSource + ?Sized>(
    source: &S,
    vocab: &Vocabulary,
    params: &CbowHyperparams,
    w: DenseWeights<f32>,
) -> Result<(DenseWeights<f32>, TrainingLog)> {
    let trainer = Trainer::new(params, vocab);
    let shared = SharedWeights::new(w);
    let words_done = AtomicU64::new(0);
    let mut log = TrainingLog::default();
    let mut chunk_no = 0u64;
    for _ in 0..params.epochs {
        let (mut epoch_loss, mut epoch_updates) = (0f64, 0u64);
        let mut block: Vec<Vec<u32>> = Vec::with_capacity(PARALLEL_BLOCK);
        let mut sentences = source.sentences()?;
        loop {
            block.clear();
            for s in sentences.by_ref().take(PARALLEL_BLOCK) {
                block.push(vocab.encode(&s?));
            }
            if block.is_empty() {
                break;
            }
            let first_chunk = chunk_no;
            chunk_no += block.len().div_ceil(PARALLEL_CHUNK) as u64;
            let (loss, n) = block
                .par_chunks(PARALLEL_CHUNK)
                .enumerate()
                .map(|(i, chunk)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                    rng.set_stream(2 + first_chunk + i as u64);
                    let mut buf = Buffers::new(params.dim);
                    let mut handle = &shared;
                    let (mut loss, mut n) = (0f64, 0u64);
                    for ids in chunk {
                        let lr = trainer.lr(words_done.load(Ordering::Relaxed));
                        let (l, k) = trainer.sentence(&mut handle, ids, lr, &mut rng, &mut buf, |_| {});
                        words_done.fetch_add(ids.len() as u64, Ordering::Relaxed);
                        loss += l;
                        n += k;
                    }
                    (loss, n)
                })
                .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            log.updates += n;
            epoch_loss += loss;
            epoch_updates += n;
            if n > 0 {
                log.entries.push(LogEntry {
                    update: log.updates,
                    lr: trainer.lr(words_done.load(Ordering::Relaxed)),
                    mean_loss: loss / n as f64,
                });
            }
        }
        if epoch_updates == 0 {
            return Err(no_examples());
        }
        log.epoch_mean_loss.push(epoch_loss / epoch_updates as f64);
    }
    Ok((shared.into_dense(), log))
}
