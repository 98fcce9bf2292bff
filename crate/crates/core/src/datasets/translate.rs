use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Language, TraitSubset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranslationTarget {
    Lemma(String),
    /// No usable single-word translation; the note says why.
    Drop { note: String },
}

/// Source lemma → target lemma (or drop), read from
/// "source<TAB>target|DROP<TAB>note" lines.
#[derive(Debug, Clone, Default)]
pub struct TranslationTable {
    entries: HashMap<String, TranslationTarget>,
}

impl TranslationTable {
    pub fn insert(&mut self, source: &str, target: TranslationTarget) {
        self.entries.insert(source.to_string(), target);
    }

    pub fn get(&self, source: &str) -> Option<&TranslationTarget> {
        self.entries.get(source)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = TranslationTable::default();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (line_no == 1 && line.starts_with("source\t")) {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::parse(line_no, format!("expected 2 or 3 columns, found {}", cols.len())));
            }
            let source = cols[0].trim();
            let target = cols[1].trim();
            let note = cols.get(2).map(|n| n.trim().to_string()).unwrap_or_default();
            if source.is_empty() || target.is_empty() {
                return Err(Error::parse(line_no, "empty source or target"));
            }
            let target = if target == "DROP" {
                TranslationTarget::Drop { note }
            } else if target.split_whitespace().count() != 1 {
                return Err(Error::parse(
                    line_no,
                    format!("target {target:?} is not a single token; mark it DROP"),
                ));
            } else {
                TranslationTarget::Lemma(target.to_string())
            };
            table.entries.insert(source.to_string(), target);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::parse(BufReader::new(file))
    }
}

/// Translates every concept and trait of the subset.
///
/// Pairs touching a DROP entry are removed. When two source lemmas of the
/// same role share a target, pairs of the later source (in sorted order) are
/// dropped. Returns the translated subset and one diagnostic per dropped
/// collision. Lemmas missing from the table are fatal.
pub fn apply_translation(
    subset: &TraitSubset,
    table: &TranslationTable,
    target_language: Language,
) -> Result<(TraitSubset, Vec<String>)> {
    let missing: BTreeSet<&str> = subset
        .pairs
        .iter()
        .flat_map(|p| [p.concept.as_str(), p.trait_word.as_str()])
        .filter(|l| table.get(l).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Dataset(format!(
            "translation table lacks {} lemma(s): {}",
            missing.len(),
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let mut diagnostics = Vec::new();
    // First source claiming each target, per role.
    let mut concept_owner: HashMap<String, String> = HashMap::new();
    let mut trait_owner: HashMap<String, String> = HashMap::new();
    let mut claim = |owners: &mut HashMap<String, String>, source: &str, target: &str| -> bool {
        let owner = owners
            .entry(target.to_string())
            .or_insert_with(|| source.to_string());
        if owner == source {
            true
        } else {
            diagnostics.push(format!(
                "{source} → {target} collides with {owner} → {target}; dropping pair"
            ));
            false
        }
    };

    let mut pairs = Vec::new();
    for p in &subset.pairs {
        let (TranslationTarget::Lemma(c), TranslationTarget::Lemma(t)) =
            (&table.entries[&p.concept], &table.entries[&p.trait_word])
        else {
            continue;
        };
        if !claim(&mut concept_owner, &p.concept, c) || !claim(&mut trait_owner, &p.trait_word, t) {
            continue;
        }
        let mut q = p.clone();
        q.concept = c.clone();
        q.trait_word = t.clone();
        pairs.push(q);
    }
    for d in &diagnostics {
        log::warn!("{d}");
    }
    Ok((TraitSubset::new(subset.trait_type, target_language, pairs), diagnostics))
}
