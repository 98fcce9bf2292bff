use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Word → corpus lemma overrides for dataset words whose citation form
/// differs from the lemmatizer output ("legs" → "leg"). Words without an
/// entry map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaMap {
    map: HashMap<String, String>,
}

impl LemmaMap {
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        LemmaMap {
            map: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    pub fn lemma<'a>(&'a self, word: &'a str) -> &'a str {
        self.map.get(word).map_or(word, String::as_str)
    }

    /// The explicit entry for `word`, if any.
    pub fn get(&self, word: &str) -> Option<&str> {
        self.map.get(word).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Parses "word<TAB>lemma" lines; blank lines and '#' comments are skipped.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split('\t').collect::<Vec<_>>()[..] {
                [word, lemma] if !word.trim().is_empty() && !lemma.trim().is_empty() => {
                    map.insert(word.trim().to_lowercase(), lemma.trim().to_lowercase());
                }
                _ => return Err(Error::parse(i + 1, "expected \"word<TAB>lemma\"")),
            }
        }
        Ok(LemmaMap { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::parse(BufReader::new(file))
    }
}
