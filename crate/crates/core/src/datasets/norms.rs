use std::collections::HashSet;
use std::io::BufRead;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureNormRecord {
    pub concept: String,
    /// Lowercase, hyphenated feature, e.g. "is-yellow".
    pub feature: String,
    pub wb_label: Option<String>,
    pub br_label: Option<String>,
    /// Number of participants who produced the feature; at least 1.
    pub prod_freq: u32,
}

/// Header names of the columns to read. Defaults follow the McRae
/// `CONCS_FEATS_concstats_brm` distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub concept: String,
    pub feature: String,
    pub wb_label: Option<String>,
    pub br_label: Option<String>,
    pub prod_freq: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            concept: "Concept".into(),
            feature: "Feature".into(),
            wb_label: Some("WB_Label".into()),
            br_label: Some("BR_Label".into()),
            prod_freq: "Prod_Freq".into(),
        }
    }
}

/// Parsed records plus the rows that were rejected, as (line, reason).
#[derive(Debug, Clone, Default)]
pub struct NormsParse {
    pub records: Vec<FeatureNormRecord>,
    pub rejected: Vec<(usize, String)>,
}

/// Lowercases and hyphenates a feature string: "has_4_legs" → "has-4-legs".
pub fn normalize_feature(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.trim().chars() {
        let ch = if ch == '_' || ch.is_whitespace() { '-' } else { ch };
        if ch == '-' && (out.is_empty() || out.ends_with('-')) {
            continue;
        }
        out.extend(ch.to_lowercase());
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

fn label(raw: &str) -> Option<String> {
    let l = raw.trim();
    if l.is_empty() || l.eq_ignore_ascii_case("na") {
        None
    } else {
        Some(l.to_lowercase())
    }
}

/// Reads a tab-separated feature-norm table with a header row.
pub fn parse_feature_norms<R: BufRead>(reader: R, columns: &ColumnMap) -> Result<NormsParse> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::Dataset("feature-norm file is empty (no header)".into())),
    };
    let names: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let find = |name: &str| {
        names
            .iter()
            .position(|n| n.trim() == name)
            .ok_or_else(|| Error::Dataset(format!("feature-norm header lacks column {name:?}")))
    };
    let concept_col = find(&columns.concept)?;
    let feature_col = find(&columns.feature)?;
    let freq_col = find(&columns.prod_freq)?;
    let wb_col = columns.wb_label.as_deref().map(find).transpose()?;
    let br_col = columns.br_label.as_deref().map(find).transpose()?;

    let mut out = NormsParse::default();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let cell = |c: usize| cells.get(c).copied();
        let (Some(concept), Some(feature), Some(freq)) =
            (cell(concept_col), cell(feature_col), cell(freq_col))
        else {
            out.rejected.push((line_no, format!("row has only {} cells", cells.len())));
            continue;
        };
        let prod_freq = match freq.trim().parse::<u32>() {
            Ok(f) if f >= 1 => f,
            _ => {
                out.rejected
                    .push((line_no, format!("invalid production frequency {freq:?}")));
                continue;
            }
        };
        let feature = normalize_feature(feature);
        let concept = concept.trim().to_lowercase();
        if feature.is_empty() || concept.is_empty() {
            out.rejected.push((line_no, "empty concept or feature".into()));
            continue;
        }
        out.records.push(FeatureNormRecord {
            concept,
            feature,
            wb_label: wb_col.and_then(cell).and_then(label),
            br_label: br_col.and_then(cell).and_then(label),
            prod_freq,
        });
    }
    for (line, msg) in &out.rejected {
        log::warn!("feature norms line {line}: {msg}");
    }
    Ok(out)
}

/// Keeps records produced by at least `min_freq` participants.
pub fn frequency_cut(records: Vec<FeatureNormRecord>, min_freq: u32) -> Vec<FeatureNormRecord> {
    records.into_iter().filter(|r| r.prod_freq >= min_freq).collect()
}

/// A full-match regex rewrite of a normalized feature.
#[derive(Debug, Clone)]
pub struct RewriteRule {
    regex: Regex,
    replacement: String,
}

impl RewriteRule {
    pub fn new(pattern: &str, replacement: &str) -> Result<Self> {
        let regex = Regex::new(&format!("^(?:{pattern})$"))
            .map_err(|e| Error::Config(format!("bad rewrite pattern {pattern:?}: {e}")))?;
        Ok(RewriteRule {
            regex,
            replacement: replacement.to_string(),
        })
    }

    pub fn apply(&self, feature: &str) -> String {
        self.regex
            .replace(feature, self.replacement.as_str())
            .into_owned()
    }
}

/// Applies the rewrite rules in order, then drops records whose feature is on
/// the exclusion list.
pub fn normalize_features(
    records: Vec<FeatureNormRecord>,
    rules: &[RewriteRule],
    exclude: &HashSet<String>,
) -> Vec<FeatureNormRecord> {
    records
        .into_iter()
        .filter_map(|mut r| {
            for rule in rules {
                r.feature = rule.apply(&r.feature);
            }
            (!exclude.contains(&r.feature)).then_some(r)
        })
        .collect()
}
