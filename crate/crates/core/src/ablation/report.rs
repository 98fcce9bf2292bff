use std::io::Write;

use super::RemovalMethod;
use crate::datasets::TraitType;
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "trait_type,method,removed,replaced,reserve_exhausted";

/// Accounting for one (trait type, method) ablation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationReport {
    pub trait_type: TraitType,
    pub method: RemovalMethod,
    /// Main-split sentences with at least one match.
    pub removed: u64,
    pub replaced: u64,
    pub reserve_exhausted: bool,
    pub main_sentences: u64,
    pub output_sentences: u64,
    /// Clean reserve sentences available before any draw.
    pub reserve_eligible: u64,
}

impl AblationReport {
    pub fn new(trait_type: TraitType, method: RemovalMethod) -> Self {
        AblationReport {
            trait_type,
            method,
            removed: 0,
            replaced: 0,
            reserve_exhausted: false,
            main_sentences: 0,
            output_sentences: 0,
            reserve_eligible: 0,
        }
    }
}

pub fn write_removal_table<W: Write>(mut out: W, reports: &[AblationReport]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.trait_type, r.method, r.removed, r.replaced, r.reserve_exhausted
        )?;
    }
    out.flush()?;
    Ok(())
}

/// The removal table as CSV text, one row per report in input order.
pub fn removal_table(reports: &[AblationReport]) -> String {
    let mut buf = Vec::new();
    write_removal_table(&mut buf, reports).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("table is ASCII")
}

/// Reads a removal table back. Columns beyond the five reported ones are not
/// stored, so the sentence totals of the returned reports are zero.
pub fn parse_removal_table(text: &str) -> Result<Vec<AblationReport>> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::parse(1, format!("expected header {REPORT_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let [trait_type, method, removed, replaced, exhausted] = cols[..] else {
            return Err(Error::parse(line_no, "expected 5 columns"));
        };
        let bad = |what: &str| Error::parse(line_no, format!("invalid {what}"));
        let mut r = AblationReport::new(
            trait_type.parse().map_err(|_| bad("trait type"))?,
            method.parse().map_err(|_| bad("method"))?,
        );
        r.removed = removed.parse().map_err(|_| bad("removed count"))?;
        r.replaced = replaced.parse().map_err(|_| bad("replaced count"))?;
        r.reserve_exhausted = exhausted.parse().map_err(|_| bad("reserve_exhausted"))?;
        out.push(r);
    }
    Ok(out)
}
