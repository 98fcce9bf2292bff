//! Annotated corpora: the sentence model, CoNLL-U streaming I/O, seeded
//! main/reserve splitting and the wiki cleanup filters.
//!
//! Every operation here streams. Nothing holds more than one sentence (or, for
//! [`wiki::group_articles`], one article) in memory at a time.

mod conllu;
pub mod split;
pub mod wiki;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

pub use conllu::{
    read_corpus, write_corpus, ConlluReader, ConlluWriter, ReadError, SentenceError, Valid,
    WriteError,
};
pub use split::{split_corpus, CorpusSplit, SplitAssigner, SplitCounts, SplitPart};

use crate::error::{Error, Result};

/// One token row of an annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position within the sentence.
    pub index: u32,
    pub form: String,
    /// Case-folded lemma. Never empty.
    pub lemma: String,
    pub upos: String,
    /// Governor index, 0 for the root. `None` for lemma-only annotation.
    pub head: Option<u32>,
    pub deprel: Option<String>,
}

/// A lemmatized, optionally dependency-parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub id: String,
    /// Corpus or article identifier the sentence was drawn from.
    pub source: String,
    pub tokens: Vec<Token>,
}

impl AnnotatedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// True when every token carries a head, i.e. the sentence is eligible for
    /// syntactic matching.
    pub fn has_dependencies(&self) -> bool {
        !self.tokens.is_empty() && self.tokens.iter().all(|t| t.head.is_some())
    }

    /// Token at a 1-based index.
    pub fn token(&self, index: u32) -> Option<&Token> {
        index
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i as usize))
    }

    /// Checks the structural invariants: contiguous indices, non-empty folded
    /// lemmas, and either no dependency annotation or a single-rooted one with
    /// in-range heads.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err("sentence has no tokens".into());
        }
        let n = self.tokens.len() as u32;
        let mut with_head = 0usize;
        let mut roots = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            let expected = i as u32 + 1;
            if tok.index != expected {
                return Err(format!(
                    "token index {} out of sequence (expected {expected})",
                    tok.index
                ));
            }
            if tok.lemma.is_empty() {
                return Err(format!("token {expected} has an empty lemma"));
            }
            if let Some(head) = tok.head {
                with_head += 1;
                if head > n {
                    return Err(format!(
                        "token {expected} has head {head} outside sentence of length {n}"
                    ));
                }
                if head == tok.index {
                    return Err(format!("token {expected} is its own head"));
                }
                if head == 0 {
                    roots += 1;
                }
            }
        }
        if with_head != 0 && with_head != self.tokens.len() {
            return Err("dependency annotation present on some tokens only".into());
        }
        if with_head != 0 && roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        Ok(())
    }
}

/// Exact sentence and token counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: u64,
    pub tokens: u64,
}

impl CorpusStats {
    pub fn add(&mut self, sentence: &AnnotatedSentence) {
        self.sentences += 1;
        self.tokens += sentence.tokens.len() as u64;
    }
}

impl<'a> FromIterator<&'a AnnotatedSentence> for CorpusStats {
    fn from_iter<I: IntoIterator<Item = &'a AnnotatedSentence>>(iter: I) -> Self {
        let mut stats = CorpusStats::default();
        for s in iter {
            stats.add(s);
        }
        stats
    }
}

/// Counts sentences and tokens of a corpus stream. Rejected sentences are not
/// counted; I/O errors abort.
pub fn corpus_stats<R: BufRead>(reader: R) -> Result<CorpusStats> {
    let mut stats = CorpusStats::default();
    for item in read_corpus(reader) {
        match item {
            Ok(s) => stats.add(&s),
            Err(ReadError::Rejected(e)) => log::warn!("{e}"),
            Err(ReadError::Io(e)) => return Err(e.into()),
        }
    }
    Ok(stats)
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Opens a corpus file for buffered reading, decompressing `.gz` files.
pub fn open_corpus(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(file),
        )))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

/// Output file for a corpus; gzip-compressed when the path ends in `.gz`.
pub enum CorpusSink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl CorpusSink {
    /// Flushes buffers and, for gzip, writes the trailer.
    pub fn finish(self) -> io::Result<()> {
        match self {
            CorpusSink::Plain(mut w) => w.flush(),
            CorpusSink::Gzip(w) => w.finish()?.flush(),
        }
    }
}

impl Write for CorpusSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            CorpusSink::Plain(w) => w.write(buf),
            CorpusSink::Gzip(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            CorpusSink::Plain(w) => w.flush(),
            CorpusSink::Gzip(w) => w.flush(),
        }
    }
}

/// Creates a corpus file (and its parent directories) for writing.
pub fn create_corpus(path: &Path) -> Result<CorpusSink> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let buf = BufWriter::with_capacity(1 << 16, file);
    if is_gzip(path) {
        Ok(CorpusSink::Gzip(GzEncoder::new(buf, Compression::default())))
    } else {
        Ok(CorpusSink::Plain(buf))
    }
}

/// Streams the valid sentences of a corpus file, logging rejections.
pub fn stream_corpus(path: &Path) -> Result<impl Iterator<Item = Result<AnnotatedSentence>> + Send> {
    let owned = path.to_path_buf();
    let reader = open_corpus(path)?;
    Ok(read_corpus(reader).filter_map(move |item| match item {
        Ok(s) => Some(Ok(s)),
        Err(ReadError::Rejected(e)) => {
            log::warn!("{}: {e}", owned.display());
            None
        }
        Err(ReadError::Io(e)) => Some(Err(Error::file(&owned, e))),
    }))
}

/// Reads every valid sentence of a corpus file, logging rejections.
///
/// Loads the whole file; meant for fixtures and small corpora only.
pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let reader = open_corpus(path)?;
    let mut out = Vec::new();
    for item in read_corpus(reader) {
        match item {
            Ok(s) => out.push(s),
            Err(ReadError::Rejected(e)) => log::warn!("{}: {e}", path.display()),
            Err(ReadError::Io(e)) => return Err(Error::file(path, e)),
        }
    }
    Ok(out)
}

/// Writes sentences to a corpus file, returning the number of bytes written
/// before compression.
pub fn save_corpus<'a, I>(path: &Path, sentences: I) -> Result<u64>
where
    I: IntoIterator<Item = &'a AnnotatedSentence>,
{
    let mut out = create_corpus(path)?;
    let bytes = write_corpus(sentences, &mut out).map_err(|e| {
        Error::file(path, io::Error::new(e.source.kind(), e.to_string()))
    })?;
    out.finish().map_err(|e| Error::file(path, e))?;
    Ok(bytes)
}
