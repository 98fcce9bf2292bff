//! Concept-trait datasets built from semantic feature norms.
//!
//! The build pipeline runs in a fixed order:
//! [`frequency_cut`] → [`normalize_features`] → [`extract_subset`] →
//! [`dedupe_concepts`] → [`min_concept_cut`]. [`build_subsets`] chains them
//! for every trait type in a [`HeuristicConfig`].

mod heuristics;
mod lemmas;
mod norms;
mod subset;
mod translate;

pub use heuristics::{build_subsets, extract_subset, BuiltSubset, HeuristicConfig, TraitHeuristic};
pub use lemmas::LemmaMap;
pub use norms::{
    frequency_cut, normalize_feature, normalize_features, parse_feature_norms, ColumnMap,
    FeatureNormRecord, NormsParse, RewriteRule,
};
pub use subset::{
    dedupe_concepts, load_subset, min_concept_cut, read_subset, save_subset, write_subset,
    SubsetSummary,
};
pub use translate::{apply_translation, TranslationTable, TranslationTarget};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const DEFAULT_MIN_FREQ: u32 = 10;
pub const DEFAULT_MIN_CONCEPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraitType {
    Colour,
    Components,
    Materials,
    SizeShape,
    Tactile,
}

impl TraitType {
    pub const ALL: [TraitType; 5] = [
        TraitType::Colour,
        TraitType::Components,
        TraitType::Materials,
        TraitType::SizeShape,
        TraitType::Tactile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraitType::Colour => "colour",
            TraitType::Components => "components",
            TraitType::Materials => "materials",
            TraitType::SizeShape => "size_shape",
            TraitType::Tactile => "tactile",
        }
    }
}

impl fmt::Display for TraitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraitType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        TraitType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Dataset(format!("unknown trait type {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Es,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Es => "es",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "en" => Ok(Language::En),
            "es" => Ok(Language::Es),
            _ => Err(Error::Dataset(format!("unknown language {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptTraitPair {
    pub concept: String,
    /// Bare trait word, e.g. "yellow" for the feature "is-yellow".
    pub trait_word: String,
    pub trait_type: TraitType,
    pub prod_freq: u32,
}

impl ConceptTraitPair {
    pub fn new(concept: &str, trait_word: &str, trait_type: TraitType, prod_freq: u32) -> Self {
        ConceptTraitPair {
            concept: concept.to_string(),
            trait_word: trait_word.to_string(),
            trait_type,
            prod_freq,
        }
    }
}

/// One trait type's concept-trait pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraitSubset {
    pub trait_type: TraitType,
    pub language: Language,
    /// Sorted by (concept, trait); no exact duplicates.
    pub pairs: Vec<ConceptTraitPair>,
}

impl TraitSubset {
    pub fn new(trait_type: TraitType, language: Language, mut pairs: Vec<ConceptTraitPair>) -> Self {
        pairs.sort();
        pairs.dedup();
        TraitSubset {
            trait_type,
            language,
            pairs,
        }
    }

    pub fn empty(trait_type: TraitType, language: Language) -> Self {
        Self::new(trait_type, language, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct concepts, sorted.
    pub fn concepts(&self) -> Vec<&str> {
        let mut c: Vec<&str> = self.pairs.iter().map(|p| p.concept.as_str()).collect();
        c.dedup();
        c
    }

    /// Distinct trait words, sorted.
    pub fn traits(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.pairs.iter().map(|p| p.trait_word.as_str()).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn retain(mut self, f: impl FnMut(&ConceptTraitPair) -> bool) -> Self {
        self.pairs.retain(f);
        self
    }

    pub fn summary(&self) -> SubsetSummary {
        SubsetSummary::of(self)
    }
}
