use std::fs::File;
use std::io::{BufReader, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{read_corpus, AnnotatedSentence, ConlluReader, ReadError};
use crate::error::{Error, Result};

/// Random-access source of replacement sentences.
///
/// Handles are positions in scan order; `fetch` must accept any handle that
/// `scan` produced.
pub trait ReserveStore {
    fn scan(&mut self, visit: &mut dyn FnMut(usize, &AnnotatedSentence)) -> Result<()>;
    fn fetch(&mut self, handle: usize) -> Result<AnnotatedSentence>;
}

impl ReserveStore for Vec<AnnotatedSentence> {
    fn scan(&mut self, visit: &mut dyn FnMut(usize, &AnnotatedSentence)) -> Result<()> {
        self.as_slice().iter().enumerate().for_each(|(i, s)| visit(i, s));
        Ok(())
    }

    fn fetch(&mut self, handle: usize) -> Result<AnnotatedSentence> {
        self.get(handle)
            .cloned()
            .ok_or_else(|| Error::Parameter(format!("reserve handle {handle} out of range")))
    }
}

/// An uncompressed reserve CoNLL-U file, read back by byte offset.
///
/// Only block offsets are kept in memory.
pub struct FileReserve {
    path: PathBuf,
    file: BufReader<File>,
    offsets: Vec<u64>,
}

impl FileReserve {
    pub fn open(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "gz") {
            return Err(Error::Config(format!(
                "{}: reserve corpus must be uncompressed for random access",
                path.display()
            )));
        }
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Ok(FileReserve {
            path: path.to_path_buf(),
            file: BufReader::with_capacity(1 << 16, file),
            offsets: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

impl ReserveStore for FileReserve {
    fn scan(&mut self, visit: &mut dyn FnMut(usize, &AnnotatedSentence)) -> Result<()> {
        self.offsets.clear();
        self.file.seek(SeekFrom::Start(0)).map_err(|e| Error::file(&self.path, e))?;
        let mut reader = ConlluReader::new(&mut self.file);
        while let Some(item) = reader.next_with_offset() {
            match item {
                Ok((offset, s)) => {
                    visit(self.offsets.len(), &s);
                    self.offsets.push(offset);
                }
                Err(ReadError::Rejected(e)) => log::warn!("{}: {e}", self.path.display()),
                Err(ReadError::Io(e)) => return Err(Error::file(&self.path, e)),
            }
        }
        Ok(())
    }

    fn fetch(&mut self, handle: usize) -> Result<AnnotatedSentence> {
        let offset = *self
            .offsets
            .get(handle)
            .ok_or_else(|| Error::Parameter(format!("reserve handle {handle} out of range")))?;
        self.file
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::file(&self.path, e))?;
        match read_corpus(&mut self.file).next() {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(Error::file(&self.path, std::io::Error::other(e.to_string()))),
            None => Err(Error::file(
                &self.path,
                std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "reserve file changed"),
            )),
        }
    }
}

/// Handles of clean reserve sentences, drawn uniformly without replacement.
#[derive(Debug, Clone)]
pub struct ReservePool {
    handles: Vec<usize>,
    drawn: usize,
}

impl ReservePool {
    pub fn new(handles: Vec<usize>) -> Self {
        ReservePool { handles, drawn: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.handles.len() - self.drawn
    }

    pub fn eligible(&self) -> usize {
        self.handles.len()
    }

    /// One step of a Fisher-Yates shuffle.
    pub fn draw(&mut self, rng: &mut ChaCha8Rng) -> Option<usize> {
        if self.drawn == self.handles.len() {
            return None;
        }
        let j = rng.random_range(self.drawn..self.handles.len());
        self.handles.swap(self.drawn, j);
        self.drawn += 1;
        Some(self.handles[self.drawn - 1])
    }
}
