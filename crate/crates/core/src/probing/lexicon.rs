use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Lemma → part-of-speech tags, exported from a lexical database.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn insert(&mut self, lemma: &str, pos: &str) {
        self.entries
            .entry(lemma.to_lowercase())
            .or_default()
            .insert(pos.trim().to_lowercase());
    }

    pub fn pos(&self, lemma: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(lemma)
    }

    /// True if the lemma has at least one noun sense ("n" or "noun").
    pub fn has_noun(&self, lemma: &str) -> bool {
        self.pos(lemma)
            .is_some_and(|p| p.contains("n") || p.contains("noun"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses "lemma<TAB>pos1,pos2" lines. Repeated lemmas merge.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((lemma, tags)) = line.split_once('\t') else {
                return Err(Error::parse(i + 1, "expected \"lemma<TAB>pos,...\""));
            };
            if lemma.trim().is_empty() {
                return Err(Error::parse(i + 1, "empty lemma"));
            }
            for tag in tags.split(',').filter(|t| !t.trim().is_empty()) {
                lex.insert(lemma.trim(), tag);
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::parse(BufReader::new(file))
    }
}
