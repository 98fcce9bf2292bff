//! Trait-subset extraction rules, loaded from a TOML heuristic config.
//!
//! Each trait type has label filters (WB / BR classifications), feature-prefix
//! filters and explicit include/exclude lists. The manual curation steps of a
//! dataset build live in these lists so the build is reproducible data, not
//! code.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::norms::{frequency_cut, normalize_features, ColumnMap, FeatureNormRecord, RewriteRule};
use super::subset::{dedupe_concepts, min_concept_cut};
use super::{ConceptTraitPair, Language, TraitSubset, TraitType, DEFAULT_MIN_CONCEPTS, DEFAULT_MIN_FREQ};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraitHeuristic {
    /// Record passes when its WB label is one of these (empty: no filter).
    pub wb_labels: Vec<String>,
    /// Record passes when its BR label is one of these (empty: no filter).
    pub br_labels: Vec<String>,
    /// Feature must start with one of these (empty: no filter).
    pub feature_prefixes: Vec<String>,
    /// Always selected, regardless of the filters.
    pub include_features: Vec<String>,
    /// Never selected.
    pub exclude_features: Vec<String>,
    /// Drop features already selected by these trait types.
    pub exclude_selected_by: Vec<TraitType>,
    /// Overrides the config-wide prefixes stripped to obtain the trait word.
    pub strip_prefixes: Option<Vec<String>>,
}

impl TraitHeuristic {
    fn has_filters(&self) -> bool {
        !self.wb_labels.is_empty() || !self.br_labels.is_empty() || !self.feature_prefixes.is_empty()
    }

    fn selects(&self, r: &FeatureNormRecord) -> bool {
        if self.exclude_features.iter().any(|f| *f == r.feature) {
            return false;
        }
        if self.include_features.iter().any(|f| *f == r.feature) {
            return true;
        }
        if !self.has_filters() {
            return false;
        }
        let label_ok = |wanted: &[String], got: &Option<String>| {
            wanted.is_empty() || got.as_ref().is_some_and(|g| wanted.iter().any(|w| w == g))
        };
        label_ok(&self.wb_labels, &r.wb_label)
            && label_ok(&self.br_labels, &r.br_label)
            && (self.feature_prefixes.is_empty()
                || self.feature_prefixes.iter().any(|p| r.feature.starts_with(p.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteSpec {
    pub pattern: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub language: Language,
    pub min_freq: u32,
    pub min_concepts: usize,
    pub columns: ColumnMap,
    /// Ordered feature rewrites applied before extraction.
    pub rewrite: Vec<RewriteSpec>,
    /// Features removed from every subset.
    pub exclude_features: Vec<String>,
    /// Prefixes stripped from a feature to get the trait word; tried longest
    /// first.
    pub strip_prefixes: Vec<String>,
    pub traits: BTreeMap<TraitType, TraitHeuristic>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            language: Language::En,
            min_freq: DEFAULT_MIN_FREQ,
            min_concepts: DEFAULT_MIN_CONCEPTS,
            columns: ColumnMap::default(),
            rewrite: Vec::new(),
            exclude_features: Vec::new(),
            strip_prefixes: vec!["is-".into(), "has-".into()],
            traits: BTreeMap::new(),
        }
    }
}

impl HeuristicConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("heuristic config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn rewrite_rules(&self) -> Result<Vec<RewriteRule>> {
        self.rewrite
            .iter()
            .map(|r| RewriteRule::new(&r.pattern, &r.replacement))
            .collect()
    }

    fn heuristic(&self, trait_type: TraitType) -> Result<&TraitHeuristic> {
        self.traits.get(&trait_type).ok_or_else(|| {
            Error::Dataset(format!("no extraction heuristic configured for {trait_type}"))
        })
    }

    fn strip_prefixes_for(&self, h: &TraitHeuristic) -> Vec<String> {
        let mut p = h.strip_prefixes.clone().unwrap_or_else(|| self.strip_prefixes.clone());
        p.sort_by_key(|s| std::cmp::Reverse(s.len()));
        p
    }
}

/// Trait word of a feature by prefix stripping. Features with no known
/// prefix, or whose remainder is multiword, have none.
fn trait_word(feature: &str, prefixes: &[String]) -> std::result::Result<String, String> {
    let rest = prefixes
        .iter()
        .find_map(|p| feature.strip_prefix(p.as_str()))
        .ok_or_else(|| format!("feature {feature:?} matches no trait prefix"))?;
    if rest.is_empty() || rest.contains('-') {
        return Err(format!("feature {feature:?} does not reduce to a single trait word"));
    }
    Ok(rest.to_string())
}

/// Selects the records of one trait type and turns them into pairs.
///
/// Repeated (concept, trait) pairs, which arise when rewrites merge features,
/// collapse to one pair carrying the highest production frequency. The
/// second element lists features skipped because no trait word could be
/// derived.
pub fn extract_subset(
    records: &[FeatureNormRecord],
    trait_type: TraitType,
    config: &HeuristicConfig,
) -> Result<(TraitSubset, Vec<String>)> {
    let h = config.heuristic(trait_type)?;
    let blockers: Vec<&TraitHeuristic> = h
        .exclude_selected_by
        .iter()
        .filter(|t| **t != trait_type)
        .map(|t| config.heuristic(*t))
        .collect::<Result<_>>()?;
    let prefixes = config.strip_prefixes_for(h);

    let mut merged: HashMap<(String, String), u32> = HashMap::new();
    let mut diagnostics = Vec::new();
    let mut reported = HashSet::new();
    for r in records {
        if !h.selects(r) || blockers.iter().any(|b| b.selects(r)) {
            continue;
        }
        match trait_word(&r.feature, &prefixes) {
            Ok(t) => {
                let f = merged.entry((r.concept.clone(), t)).or_insert(0);
                *f = (*f).max(r.prod_freq);
            }
            Err(msg) => {
                if reported.insert(r.feature.clone()) {
                    log::debug!("{trait_type}: {msg}");
                    diagnostics.push(msg);
                }
            }
        }
    }
    let pairs = merged
        .into_iter()
        .map(|((concept, t), f)| ConceptTraitPair::new(&concept, &t, trait_type, f))
        .collect();
    Ok((TraitSubset::new(trait_type, config.language, pairs), diagnostics))
}

#[derive(Debug, Clone)]
pub struct BuiltSubset {
    /// Single-label subset: deduplicated and cut.
    pub subset: TraitSubset,
    /// Multi-label companion: extracted pairs under the same per-trait cut,
    /// without concept deduplication.
    pub multilabel: TraitSubset,
    pub diagnostics: Vec<String>,
}

/// Runs the whole build for every configured trait type, in canonical order.
pub fn build_subsets(records: Vec<FeatureNormRecord>, config: &HeuristicConfig) -> Result<Vec<BuiltSubset>> {
    let rules = config.rewrite_rules()?;
    let exclude: HashSet<String> = config.exclude_features.iter().cloned().collect();
    let records = frequency_cut(records, config.min_freq);
    let records = normalize_features(records, &rules, &exclude);
    let mut out = Vec::new();
    for trait_type in TraitType::ALL {
        if !config.traits.contains_key(&trait_type) {
            continue;
        }
        let (extracted, diagnostics) = extract_subset(&records, trait_type, config)?;
        let multilabel = min_concept_cut(extracted.clone(), config.min_concepts);
        let subset = min_concept_cut(dedupe_concepts(extracted), config.min_concepts);
        out.push(BuiltSubset {
            subset,
            multilabel,
            diagnostics,
        });
    }
    Ok(out)
}
