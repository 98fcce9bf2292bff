//! Co-occurrence removal with reserve-pool replacement.
//!
//! [`ablate`] streams the main split once. Matching runs in parallel per
//! batch; replacement draws happen in a sequential pass over each batch in
//! input order, so the output does not depend on the thread count.

mod matcher;
mod report;
mod reserve;

pub use matcher::{find_matches, CooccurrenceMatch, Matcher, RemovalMethod, DEFAULT_WINDOW};
pub use report::{parse_removal_table, removal_table, write_removal_table, AblationReport, REPORT_HEADER};
pub use reserve::{FileReserve, ReservePool, ReserveStore};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{create_corpus, stream_corpus, AnnotatedSentence, ConlluWriter, CorpusSplit};
use crate::datasets::{LemmaMap, TraitSubset};
use crate::error::{Error, Result};

const BATCH: usize = 4096;

/// Collects the reserve sentences with no match under (`matcher`, `method`).
pub fn index_reserve<R: ReserveStore>(
    reserve: &mut R,
    matcher: &Matcher<'_>,
    method: RemovalMethod,
) -> Result<ReservePool> {
    let mut clean = Vec::new();
    let mut batch: Vec<(usize, AnnotatedSentence)> = Vec::with_capacity(BATCH);
    let mut flush = |batch: &mut Vec<(usize, AnnotatedSentence)>| {
        let hits: Vec<bool> = batch.par_iter().map(|(_, s)| matcher.is_match(s, method)).collect();
        clean.extend(batch.drain(..).zip(hits).filter(|(_, hit)| !hit).map(|((h, _), _)| h));
    };
    reserve.scan(&mut |h, s| {
        batch.push((h, s.clone()));
        if batch.len() == BATCH {
            flush(&mut batch);
        }
    })?;
    flush(&mut batch);
    Ok(ReservePool::new(clean))
}

/// Replaces every main sentence that matches under (`subset`, `method`) with
/// an unused clean reserve sentence and passes the result to `sink`.
///
/// When the pool runs dry matching sentences are dropped, the report is
/// flagged and a warning logged.
pub fn ablate<I, R, F>(
    main: I,
    reserve: &mut R,
    subset: &TraitSubset,
    lemmas: &LemmaMap,
    method: RemovalMethod,
    seed: u64,
    mut sink: F,
) -> Result<AblationReport>
where
    I: IntoIterator<Item = Result<AnnotatedSentence>>,
    R: ReserveStore,
    F: FnMut(AnnotatedSentence) -> Result<()>,
{
    let matcher = Matcher::with_lemmas(subset, lemmas);
    let mut report = AblationReport::new(subset.trait_type, method);
    let mut pool = if matcher.is_empty() {
        ReservePool::new(Vec::new())
    } else {
        index_reserve(reserve, &matcher, method)?
    };
    report.reserve_eligible = pool.eligible() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut batch = Vec::with_capacity(BATCH);
    let mut process = |batch: &mut Vec<AnnotatedSentence>, report: &mut AblationReport| -> Result<()> {
        let hits: Vec<bool> = if matcher.is_empty() {
            vec![false; batch.len()]
        } else {
            batch.par_iter().map(|s| matcher.is_match(s, method)).collect()
        };
        for (s, hit) in batch.drain(..).zip(hits) {
            report.main_sentences += 1;
            if !hit {
                report.output_sentences += 1;
                sink(s)?;
                continue;
            }
            report.removed += 1;
            match pool.draw(&mut rng) {
                Some(h) => {
                    report.replaced += 1;
                    report.output_sentences += 1;
                    sink(reserve.fetch(h)?)?;
                }
                None => {
                    if !report.reserve_exhausted {
                        log::warn!(
                            "{} / {}: reserve exhausted after {} replacements; removing without replacement",
                            report.trait_type,
                            report.method,
                            report.replaced
                        );
                    }
                    report.reserve_exhausted = true;
                }
            }
        }
        Ok(())
    };
    for s in main {
        batch.push(s?);
        if batch.len() == BATCH {
            process(&mut batch, &mut report)?;
        }
    }
    process(&mut batch, &mut report)?;
    if report.reserve_exhausted {
        log::warn!(
            "{} / {}: {} of {} matching sentences were not replaced; sentence counts are unbalanced",
            report.trait_type,
            report.method,
            report.removed - report.replaced,
            report.removed
        );
    }
    Ok(report)
}

/// File-level [`ablate`]: reads the split's main and reserve parts and writes
/// the ablated corpus to `out`.
pub fn ablate_split(
    split: &CorpusSplit,
    subset: &TraitSubset,
    lemmas: &LemmaMap,
    method: RemovalMethod,
    seed: u64,
    out: &Path,
) -> Result<AblationReport> {
    let mut reserve = FileReserve::open(&split.reserve)?;
    let mut writer = ConlluWriter::new(create_corpus(out)?);
    let io_err = |e: crate::corpus::WriteError| Error::file(out, std::io::Error::other(e.to_string()));
    let report = ablate(
        stream_corpus(&split.main)?,
        &mut reserve,
        subset,
        lemmas,
        method,
        seed,
        |s| writer.write(&s).map_err(io_err),
    )?;
    writer
        .finish()
        .map_err(io_err)?
        .finish()
        .map_err(|e| Error::file(out, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use crate::datasets::{ConceptTraitPair, Language, TraitType};

    fn sentence(id: &str, lemmas: &[&str]) -> AnnotatedSentence {
        AnnotatedSentence {
            id: id.into(),
            source: String::new(),
            tokens: lemmas
                .iter()
                .enumerate()
                .map(|(i, l)| Token {
                    index: i as u32 + 1,
                    form: l.to_string(),
                    lemma: l.to_string(),
                    upos: "X".into(),
                    head: None,
                    deprel: None,
                })
                .collect(),
        }
    }

    fn banana() -> TraitSubset {
        TraitSubset::new(
            TraitType::Colour,
            Language::En,
            vec![ConceptTraitPair::new("banana", "yellow", TraitType::Colour, 13)],
        )
    }

    fn run(
        main: &[AnnotatedSentence],
        reserve: &mut Vec<AnnotatedSentence>,
        subset: &TraitSubset,
    ) -> (Vec<AnnotatedSentence>, AblationReport) {
        let mut out = Vec::new();
        let report = ablate(
            main.iter().cloned().map(Ok),
            reserve,
            subset,
            &LemmaMap::default(),
            RemovalMethod::Sentence,
            1,
            |s| {
                out.push(s);
                Ok(())
            },
        )
        .unwrap();
        (out, report)
    }

    #[test]
    fn one_match_is_replaced_by_a_clean_sentence() {
        let main = vec![
            sentence("m1", &["a", "ripe", "banana"]),
            sentence("m2", &["the", "yellow", "banana"]),
            sentence("m3", &["yellow", "paint"]),
            sentence("m4", &["nothing"]),
        ];
        let mut reserve = vec![
            sentence("r1", &["banana", "is", "yellow"]),
            sentence("r2", &["clean", "text"]),
        ];
        let (out, report) = run(&main, &mut reserve, &banana());
        let ids: Vec<&str> = out.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["m1", "r2", "m3", "m4"]);
        assert_eq!((report.removed, report.replaced, report.reserve_exhausted), (1, 1, false));
        assert_eq!(report.reserve_eligible, 1);
    }

    #[test]
    fn empty_subset_is_identity() {
        let main = vec![sentence("m1", &["banana", "yellow"]), sentence("m2", &["x"])];
        let empty = TraitSubset::empty(TraitType::Colour, Language::En);
        let (out, report) = run(&main, &mut Vec::new(), &empty);
        assert_eq!(out, main);
        assert_eq!(report.removed, 0);
    }

    #[test]
    fn exhaustion_is_flagged() {
        let main = vec![
            sentence("m1", &["banana", "yellow"]),
            sentence("m2", &["banana", "yellow"]),
        ];
        let mut reserve = vec![sentence("r1", &["clean"])];
        let (out, report) = run(&main, &mut reserve, &banana());
        assert_eq!(out.len(), 1);
        assert!(report.reserve_exhausted);
        assert_eq!((report.removed, report.replaced), (2, 1));
    }
}
