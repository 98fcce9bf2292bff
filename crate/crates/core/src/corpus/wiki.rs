//! Wikipedia-specific cleanup: doc-tag stripping on extracted text and
//! pageview-based article filtering.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::iter::Peekable;
use std::path::Path;

use super::AnnotatedSentence;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_VIEWS: u64 = 10;

/// True for the line-anchored document boundary tags left by wiki extractors.
pub fn is_doc_tag(line: &str) -> bool {
    let line = line.trim_end_matches(['\n', '\r']);
    line.starts_with("<doc ") || line == "</doc>"
}

/// Drops document boundary tag lines; every other line passes unchanged.
pub fn strip_doc_tags<I, S>(lines: I) -> impl Iterator<Item = S>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    lines.into_iter().filter(|l| !is_doc_tag(l.as_ref()))
}

/// Article title to view count.
#[derive(Debug, Clone, Default)]
pub struct PageviewTable {
    counts: HashMap<String, u64>,
}

/// Titles are compared with underscores and spaces treated alike, since dump
/// files and extracted text disagree on which one they use.
fn normalize_title(title: &str) -> String {
    title.trim().replace('_', " ")
}

impl PageviewTable {
    /// Parses "title<TAB>count" lines. Repeated titles accumulate.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut counts = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (title, count) = line.rsplit_once('\t').ok_or_else(|| {
                Error::Config(format!("pageview table line {}: missing tab", i + 1))
            })?;
            let count: u64 = count.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "pageview table line {}: invalid view count {count:?}",
                    i + 1
                ))
            })?;
            *counts.entry(normalize_title(title)).or_insert(0) += count;
        }
        Ok(PageviewTable { counts })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            Error::Config(format!("cannot read pageview table {}: {e}", path.display()))
        })?;
        Self::parse(BufReader::new(file))
    }

    /// Views for a title; titles missing from the table have zero views.
    pub fn views(&self, title: &str) -> u64 {
        self.counts
            .get(&normalize_title(title))
            .copied()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArticleRecord {
    pub title: String,
    pub view_count: u64,
    pub sentences: Vec<AnnotatedSentence>,
}

/// Groups consecutive sentences sharing a `source` into articles and attaches
/// their view counts. Memory is bounded by the largest article.
pub fn group_articles<'t, I>(sentences: I, table: &'t PageviewTable) -> GroupArticles<'t, I::IntoIter>
where
    I: IntoIterator<Item = AnnotatedSentence>,
{
    GroupArticles {
        inner: sentences.into_iter().peekable(),
        table,
    }
}

pub struct GroupArticles<'t, I: Iterator<Item = AnnotatedSentence>> {
    inner: Peekable<I>,
    table: &'t PageviewTable,
}

impl<I: Iterator<Item = AnnotatedSentence>> Iterator for GroupArticles<'_, I> {
    type Item = ArticleRecord;

    fn next(&mut self) -> Option<ArticleRecord> {
        let first = self.inner.next()?;
        let title = first.source.clone();
        let mut sentences = vec![first];
        while let Some(s) = self.inner.next_if(|s| s.source == title) {
            sentences.push(s);
        }
        Some(ArticleRecord {
            view_count: self.table.views(&title),
            title,
            sentences,
        })
    }
}

/// Sentences of articles with at least `min_views` views, in input order.
pub fn filter_by_views<I>(articles: I, min_views: u64) -> impl Iterator<Item = AnnotatedSentence>
where
    I: IntoIterator<Item = ArticleRecord>,
{
    articles
        .into_iter()
        .filter(move |a| a.view_count >= min_views)
        .flat_map(|a| a.sentences)
}
