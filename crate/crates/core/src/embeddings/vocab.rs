use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::corpus::stream_corpus;
use crate::error::{Error, Result};

pub const NOISE_POWER: f64 = 0.75;

/// Repeatable stream of tokenized training sentences.
pub trait SentenceSource: Sync {
    fn sentences(&self) -> Result<Box<dyn Iterator<Item = Result<Vec<String>>> + Send + '_>>;
}

impl SentenceSource for [Vec<String>] {
    fn sentences(&self) -> Result<Box<dyn Iterator<Item = Result<Vec<String>>> + Send + '_>> {
        Ok(Box::new(self.iter().cloned().map(Ok)))
    }
}

impl SentenceSource for Vec<Vec<String>> {
    fn sentences(&self) -> Result<Box<dyn Iterator<Item = Result<Vec<String>>> + Send + '_>> {
        self.as_slice().sentences()
    }
}

/// Case-folded surface forms of a CoNLL-U corpus file.
#[derive(Debug, Clone)]
pub struct CorpusForms {
    path: PathBuf,
}

impl CorpusForms {
    pub fn new(path: &Path) -> Self {
        CorpusForms {
            path: path.to_path_buf(),
        }
    }
}

impl SentenceSource for CorpusForms {
    fn sentences(&self) -> Result<Box<dyn Iterator<Item = Result<Vec<String>>> + Send + '_>> {
        let it = stream_corpus(&self.path)?;
        Ok(Box::new(it.map(|s| {
            s.map(|s| s.tokens.into_iter().map(|t| t.form.to_lowercase()).collect())
        })))
    }
}

/// Training vocabulary, most frequent word first (ties by word).
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    noise: Vec<f64>,
}

impl Vocabulary {
    /// Builds from raw counts, keeping words with count ≥ `min_count`.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::Training(format!("no word occurs at least {min_count} times")));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (words, counts): (Vec<String>, Vec<u64>) = kept.into_iter().unzip();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let total_tokens = counts.iter().sum();
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NOISE_POWER)).collect();
        let z: f64 = weights.iter().sum();
        let noise = weights.into_iter().map(|w| w / z).collect();
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
            noise,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Occurrences of in-vocabulary words.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Unigram counts raised to [`NOISE_POWER`], normalized.
    pub fn noise_distribution(&self) -> &[f64] {
        &self.noise
    }

    pub fn noise_sampler(&self) -> NoiseSampler {
        NoiseSampler {
            dist: WeightedIndex::new(&self.noise).expect("noise weights are positive"),
        }
    }

    pub fn encode(&self, sentence: &[String]) -> Vec<u32> {
        sentence.iter().filter_map(|w| self.id(w)).collect()
    }
}

/// Counts every token of `source` and applies the `min_count` threshold.
pub fn build_vocab<S: SentenceSource + ?Sized>(source: &S, min_count: u64) -> Result<Vocabulary> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for sentence in source.sentences()? {
        for w in sentence? {
            match counts.get_mut(&w) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(w, 1);
                }
            }
        }
    }
    Vocabulary::from_counts(counts, min_count)
}

#[derive(Debug, Clone)]
pub struct NoiseSampler {
    dist: WeightedIndex<f64>,
}

impl NoiseSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.dist.sample(rng) as u32
    }
}
