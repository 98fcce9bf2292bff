use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ConceptTraitPair, Language, TraitSubset, TraitType};
use crate::error::{Error, Result};

pub const SUBSET_HEADER: &str = "concept\ttrait\ttrait_type\tprod_freq\tlanguage";

/// Removes every concept that has more than one pair. Concepts are dropped
/// entirely rather than reduced to one trait.
pub fn dedupe_concepts(subset: TraitSubset) -> TraitSubset {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for p in &subset.pairs {
        *counts.entry(p.concept.clone()).or_insert(0) += 1;
    }
    subset.retain(|p| counts[&p.concept] == 1)
}

/// Keeps traits held by at least `min_concepts` distinct concepts. Single
/// pass: the output is not re-cut.
pub fn min_concept_cut(subset: TraitSubset, min_concepts: usize) -> TraitSubset {
    let mut per_trait: HashMap<String, Vec<&str>> = HashMap::new();
    for p in &subset.pairs {
        per_trait.entry(p.trait_word.clone()).or_default().push(&p.concept);
    }
    let keep: HashMap<String, bool> = per_trait
        .into_iter()
        .map(|(t, mut cs)| {
            cs.sort_unstable();
            cs.dedup();
            (t, cs.len() >= min_concepts)
        })
        .collect();
    subset.retain(|p| keep[&p.trait_word])
}

/// Table-style summary: concept count, trait count and per-trait concept
/// counts (descending, ties by name).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSummary {
    pub trait_type: TraitType,
    pub n_concepts: usize,
    pub n_traits: usize,
    pub traits: Vec<(String, usize)>,
}

impl SubsetSummary {
    pub fn of(subset: &TraitSubset) -> Self {
        let mut per_trait: HashMap<&str, usize> = HashMap::new();
        for p in &subset.pairs {
            *per_trait.entry(&p.trait_word).or_insert(0) += 1;
        }
        let mut traits: Vec<(String, usize)> =
            per_trait.into_iter().map(|(t, n)| (t.to_string(), n)).collect();
        traits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        SubsetSummary {
            trait_type: subset.trait_type,
            n_concepts: subset.concepts().len(),
            n_traits: traits.len(),
            traits,
        }
    }
}

impl fmt::Display for SubsetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.trait_type, self.n_concepts, self.n_traits)?;
        let listed: Vec<String> = self
            .traits
            .iter()
            .map(|(t, n)| format!("{t} ({n})"))
            .collect();
        if !listed.is_empty() {
            write!(f, "\t{}", listed.join(", "))?;
        }
        Ok(())
    }
}

pub fn write_subset<W: Write>(mut out: W, subset: &TraitSubset) -> Result<()> {
    writeln!(out, "{SUBSET_HEADER}")?;
    for p in &subset.pairs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            p.concept, p.trait_word, p.trait_type, p.prod_freq, subset.language
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a subset TSV. All rows must share one trait type and language; a
/// file without rows is rejected since neither can be determined.
pub fn read_subset<R: BufRead>(reader: R) -> Result<TraitSubset> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end_matches('\r') != SUBSET_HEADER {
        return Err(Error::parse(1, format!("expected header {SUBSET_HEADER:?}")));
    }
    let mut pairs = Vec::new();
    let mut kind: Option<(TraitType, Language)> = None;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::parse(line_no, format!("expected 5 columns, found {}", cols.len())));
        }
        let bad = |e: Error| Error::parse(line_no, e.to_string());
        let trait_type: TraitType = cols[2].parse().map_err(bad)?;
        let language: Language = cols[4].parse().map_err(bad)?;
        let prod_freq: u32 = cols[3]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid prod_freq {:?}", cols[3])))?;
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(Error::parse(line_no, "empty concept or trait"));
        }
        match kind {
            None => kind = Some((trait_type, language)),
            Some(k) if k != (trait_type, language) => {
                return Err(Error::parse(line_no, "mixed trait types or languages in one subset"));
            }
            _ => {}
        }
        pairs.push(ConceptTraitPair::new(cols[0], cols[1], trait_type, prod_freq));
    }
    let (trait_type, language) =
        kind.ok_or_else(|| Error::Dataset("subset file has no rows".into()))?;
    Ok(TraitSubset::new(trait_type, language, pairs))
}

pub fn save_subset(path: &Path, subset: &TraitSubset) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_subset(BufWriter::new(file), subset)
}

pub fn load_subset(path: &Path) -> Result<TraitSubset> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_subset(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => {
            Error::Dataset(format!("{}: line {line}: {message}", path.display()))
        }
        other => other,
    })
}
