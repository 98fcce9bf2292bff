//! Main/reserve partition by seeded hashing of sentence ids.
//!
//! A sentence goes to the main part when `hash(seed, id)` mapped onto `[0, 1)`
//! falls below the ratio. The assignment depends only on the id and the seed,
//! so it needs no global shuffle and is identical across reruns and shardings.

use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;

use super::{create_corpus, open_corpus, read_corpus, AnnotatedSentence, ConlluWriter, ReadError};
use crate::error::{Error, Result};

pub const DEFAULT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitPart {
    Main,
    Reserve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitAssigner {
    ratio: f64,
    seed: u64,
}

impl SplitAssigner {
    pub fn new(ratio: f64, seed: u64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Parameter(format!(
                "split ratio must lie strictly inside (0, 1), got {ratio}"
            )));
        }
        Ok(SplitAssigner { ratio, seed })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Position of the id on the unit interval for this seed.
    pub fn unit(&self, id: &str) -> f64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write(id.as_bytes());
        (mix64(h.finish()) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn assign(&self, id: &str) -> SplitPart {
        if self.unit(id) < self.ratio {
            SplitPart::Main
        } else {
            SplitPart::Reserve
        }
    }
}

/// splitmix64 finalizer; FNV alone leaves the high bits poorly mixed for
/// short keys.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub main: u64,
    pub reserve: u64,
}

impl SplitCounts {
    pub fn total(&self) -> u64 {
        self.main + self.reserve
    }

    pub fn main_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.main as f64 / self.total() as f64
        }
    }
}

/// Routes every sentence of the stream to `sink` tagged with its part.
pub fn split_corpus<I, F>(sentences: I, assigner: &SplitAssigner, mut sink: F) -> Result<SplitCounts>
where
    I: IntoIterator<Item = Result<AnnotatedSentence>>,
    F: FnMut(SplitPart, AnnotatedSentence) -> Result<()>,
{
    let mut counts = SplitCounts::default();
    for s in sentences {
        let s = s?;
        let part = assigner.assign(&s.id);
        match part {
            SplitPart::Main => counts.main += 1,
            SplitPart::Reserve => counts.reserve += 1,
        }
        sink(part, s)?;
    }
    Ok(counts)
}

/// A corpus split persisted as two CoNLL-U files.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub main: PathBuf,
    pub reserve: PathBuf,
    pub seed: u64,
    pub ratio: f64,
    pub counts: SplitCounts,
    /// Input blocks that failed validation and were left out of both parts.
    pub rejected: u64,
}

/// Splits a corpus file into main and reserve files.
pub fn split_file(
    input: &Path,
    main: &Path,
    reserve: &Path,
    assigner: &SplitAssigner,
) -> Result<CorpusSplit> {
    let mut main_out = ConlluWriter::new(create_corpus(main)?);
    let mut reserve_out = ConlluWriter::new(create_corpus(reserve)?);
    let mut rejected = 0u64;
    let sentences = read_corpus(open_corpus(input)?).filter_map(|item| match item {
        Ok(s) => Some(Ok(s)),
        Err(ReadError::Rejected(e)) => {
            log::warn!("{}: {e}", input.display());
            rejected += 1;
            None
        }
        Err(ReadError::Io(e)) => Some(Err(Error::file(input, e))),
    });
    let counts = split_corpus(sentences, assigner, |part, s| {
        let (out, path) = match part {
            SplitPart::Main => (&mut main_out, main),
            SplitPart::Reserve => (&mut reserve_out, reserve),
        };
        out.write(&s)
            .map_err(|e| Error::file(path, std::io::Error::other(e.to_string())))
    })?;
    for (w, path) in [(main_out, main), (reserve_out, reserve)] {
        w.finish()
            .map_err(|e| Error::file(path, e.source))?
            .finish()
            .map_err(|e| Error::file(path, e))?;
    }
    Ok(CorpusSplit {
        main: main.to_path_buf(),
        reserve: reserve.to_path_buf(),
        seed: assigner.seed(),
        ratio: assigner.ratio(),
        counts,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_must_be_strictly_inside_unit_interval() {
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(SplitAssigner::new(bad, 1).is_err(), "{bad}");
        }
        assert!(SplitAssigner::new(0.8, 1).is_ok());
    }

    #[test]
    fn main_fraction_concentrates_around_ratio() {
        let a = SplitAssigner::new(0.8, 7).unwrap();
        let ids: Vec<String> = (0..100_000).map(|i| format!("s{i}")).collect();
        let main = ids.iter().filter(|id| a.assign(id) == SplitPart::Main).count();
        let frac = main as f64 / ids.len() as f64;
        assert!((frac - 0.8).abs() <= 0.01, "{frac}");

        let again = SplitAssigner::new(0.8, 7).unwrap();
        assert!(ids.iter().all(|id| a.assign(id) == again.assign(id)));
    }

    #[test]
    fn different_seeds_give_different_assignments() {
        let a = SplitAssigner::new(0.8, 7).unwrap();
        let b = SplitAssigner::new(0.8, 8).unwrap();
        let differ = (0..10).any(|i| {
            let id = format!("s{i}");
            a.assign(&id) != b.assign(&id)
        });
        assert!(differ);
    }
}
