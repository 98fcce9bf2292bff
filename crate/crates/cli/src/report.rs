//! Accuracy tables, ΔAcc CSV and SVG distribution plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use traitcooc::ablation::RemovalMethod;
use traitcooc::datasets::TraitType;
use traitcooc::probing::{paired_delta, PairedDelta, ProbeKind, ProbeResult};

pub const DELTA_HEADER: &str = "probe,corpus,dataset,trait_type,method,with,without,delta_acc";

/// Order of first appearance.
fn ordered<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// With/without accuracy table for one probe: one row per (corpus, dataset,
/// trait type), a with and a without column per method, two decimals.
pub fn accuracy_table(results: &[ProbeResult], probe: ProbeKind) -> String {
    let rows: Vec<&ProbeResult> = results.iter().filter(|r| r.probe == probe).collect();
    let corpora = ordered(rows.iter().map(|r| r.corpus.as_str()));
    let datasets = ordered(rows.iter().map(|r| r.dataset.as_str()));
    let mut methods: Vec<RemovalMethod> = ordered(rows.iter().map(|r| r.method));
    methods.sort();
    let mut cells: BTreeMap<(&str, &str, TraitType, RemovalMethod, bool), f64> = BTreeMap::new();
    for r in &rows {
        cells.insert((&r.corpus, &r.dataset, r.trait_type, r.method, r.with_cooc), r.mean);
    }

    let mut out = String::from("corpus,dataset,trait_type");
    for m in &methods {
        write!(out, ",{m}_with,{m}_without").unwrap();
    }
    out.push('\n');
    for c in &corpora {
        for d in &datasets {
            for t in TraitType::ALL {
                if !rows.iter().any(|r| r.corpus == *c && r.dataset == *d && r.trait_type == t) {
                    continue;
                }
                write!(out, "{c},{d},{t}").unwrap();
                for &m in &methods {
                    for with in [true, false] {
                        match cells.get(&(*c, *d, t, m, with)) {
                            Some(v) => write!(out, ",{v:.2}").unwrap(),
                            None => out.push(','),
                        }
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_deltas<W: Write>(mut out: W, deltas: &[PairedDelta]) -> Result<()> {
    writeln!(out, "{DELTA_HEADER}")?;
    for d in deltas {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.probe, d.corpus, d.dataset, d.trait_type, d.method, d.with_acc, d.without_acc, d.delta_acc
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Deltas of one probe grouped by trait type, in canonical order.
pub fn by_trait_type(deltas: &[PairedDelta], probe: ProbeKind) -> Vec<(String, Vec<f64>)> {
    TraitType::ALL
        .iter()
        .map(|&t| {
            let v: Vec<f64> = deltas
                .iter()
                .filter(|d| d.probe == probe && d.trait_type == t)
                .map(|d| d.delta_acc)
                .collect();
            (t.to_string(), v)
        })
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

pub fn by_method(deltas: &[PairedDelta], probe: ProbeKind) -> Vec<(String, Vec<f64>)> {
    let mut groups: BTreeMap<RemovalMethod, Vec<f64>> = BTreeMap::new();
    for d in deltas.iter().filter(|d| d.probe == probe) {
        groups.entry(d.method).or_default().push(d.delta_acc);
    }
    groups.into_iter().map(|(m, v)| (m.to_string(), v)).collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PLOT_H: f64 = 260.0;
const TOP: f64 = 40.0;
const LEFT: f64 = 60.0;
const GROUP_W: f64 = 90.0;

/// Box plot with the individual values overlaid, one `<g class="group">` per
/// group and a dashed line at zero.
pub fn delta_plot(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let extent = groups
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let half = (extent * 1.1).max(0.05);
    let y = |v: f64| TOP + PLOT_H / 2.0 - v / half * (PLOT_H / 2.0);
    let width = LEFT + GROUP_W * groups.len().max(1) as f64 + 20.0;
    let height = TOP + PLOT_H + 50.0;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, width / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<g class="axis">"#).unwrap();
    writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, TOP + PLOT_H).unwrap();
    for tick in [-half, -half / 2.0, 0.0, half / 2.0, half] {
        let ty = y(tick);
        writeln!(s, r#"<line x1="{}" y1="{ty:.2}" x2="{LEFT}" y2="{ty:.2}" stroke="black"/>"#, LEFT - 4.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{tick:.3}</text>"#, LEFT - 6.0, ty + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">ΔAcc</text>"#, TOP + PLOT_H / 2.0, TOP + PLOT_H / 2.0).unwrap();
    writeln!(s, "</g>").unwrap();
    let zero = y(0.0);
    writeln!(
        s,
        r##"<line class="zero" x1="{LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        width - 20.0
    )
    .unwrap();

    for (i, (name, values)) in groups.iter().enumerate() {
        let cx = LEFT + GROUP_W * (i as f64 + 0.5);
        writeln!(s, r#"<g class="group" data-group="{}" data-n="{}">"#, escape(name), values.len()).unwrap();
        if !values.is_empty() {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let (q1, med, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75));
            let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
            let bw = GROUP_W * 0.5;
            writeln!(s, r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, y(hi), y(lo)).unwrap();
            writeln!(
                s,
                r##"<rect class="box" x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
                cx - bw / 2.0,
                y(q3),
                (y(q1) - y(q3)).max(0.0)
            )
            .unwrap();
            writeln!(
                s,
                r#"<line class="median" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
                cx - bw / 2.0,
                y(med),
                cx + bw / 2.0,
                y(med)
            )
            .unwrap();
            let spread = bw * 0.8;
            for (j, &v) in values.iter().enumerate() {
                // Deterministic horizontal spread in place of random jitter.
                let off = if values.len() == 1 { 0.0 } else { spread * (j as f64 / (values.len() - 1) as f64 - 0.5) };
                writeln!(
                    s,
                    r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e8c" fill-opacity="0.7"><title>{v}</title></circle>"##,
                    cx + off,
                    y(v)
                )
                .unwrap();
            }
        }
        writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + PLOT_H + 18.0, escape(name)).unwrap();
        writeln!(s, "</g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Files written by [`write_report`].
#[derive(Debug, Clone, Default)]
pub struct ReportFiles {
    pub tables: Vec<PathBuf>,
    pub deltas: PathBuf,
    pub figures: Vec<PathBuf>,
}

/// Pairs `results`, then writes the accuracy tables, the ΔAcc CSV and the
/// plots into `dir`. Unpaired rows are an error listing them.
pub fn write_report(results: &[ProbeResult], dir: &Path) -> Result<ReportFiles> {
    let deltas = paired_delta(results)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = ReportFiles {
        deltas: dir.join("delta.csv"),
        ..ReportFiles::default()
    };
    let mut buf = Vec::new();
    write_deltas(&mut buf, &deltas)?;
    std::fs::write(&files.deltas, buf)?;
    for probe in [ProbeKind::Multiclass, ProbeKind::Binary] {
        if !results.iter().any(|r| r.probe == probe) {
            continue;
        }
        let table = dir.join(format!("{probe}_table.csv"));
        std::fs::write(&table, accuracy_table(results, probe))?;
        files.tables.push(table);
        for (suffix, groups, label) in [
            ("by_trait_type", by_trait_type(&deltas, probe), "trait type"),
            ("by_method", by_method(&deltas, probe), "extraction method"),
        ] {
            let fig = dir.join(format!("{probe}_delta_{suffix}.svg"));
            std::fs::write(&fig, delta_plot(&format!("{probe} probe: ΔAcc by {label}"), &groups))?;
            files.figures.push(fig);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(t: TraitType, m: RemovalMethod, with: bool, mean: f64) -> ProbeResult {
        ProbeResult {
            probe: ProbeKind::Multiclass,
            corpus: "c".into(),
            dataset: "d".into(),
            trait_type: t,
            method: m,
            with_cooc: with,
            folds: vec![mean; 3],
            mean,
            n: 10,
            seed: 0,
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn table_layout() {
        let rows = vec![
            result(TraitType::Tactile, RemovalMethod::Syntactic, true, 0.6),
            result(TraitType::Tactile, RemovalMethod::Syntactic, false, 0.123),
            result(TraitType::Colour, RemovalMethod::Sentence, true, 0.35),
        ];
        let t = accuracy_table(&rows, ProbeKind::Multiclass);
        assert_eq!(
            t,
            "corpus,dataset,trait_type,sentence_with,sentence_without,syntactic_with,syntactic_without\n\
             c,d,colour,0.35,,,\n\
             c,d,tactile,,,0.60,0.12\n"
        );
        assert_eq!(accuracy_table(&rows, ProbeKind::Binary).lines().count(), 1);
    }

    #[test]
    fn zero_deltas_sit_on_the_zero_line() {
        let groups = vec![("colour".to_string(), vec![0.0; 4]), ("tactile".to_string(), vec![0.0, 0.0])];
        let svg = delta_plot("t", &groups);
        let zero = svg.lines().find(|l| l.contains(r#"class="zero""#)).unwrap();
        let y1 = zero.split("y1=\"").nth(1).unwrap().split('"').next().unwrap().to_string();
        let points: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="point""#)).collect();
        assert_eq!(points.len(), 6);
        for p in points {
            assert!(p.contains(&format!("cy=\"{y1}\"")), "{p}");
        }
        assert_eq!(svg.matches(r#"<g class="group""#).count(), 2);
    }

    #[test]
    fn unpaired_rows_are_rejected() {
        let rows = vec![result(TraitType::Colour, RemovalMethod::Sentence, true, 0.4)];
        let dir = tempfile::tempdir().unwrap();
        assert!(write_report(&rows, dir.path()).is_err());
    }
}
