//! The probe results CSV.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use traitcooc::probing::ProbeResult;

const KEY_COLUMNS: [&str; 6] = ["probe", "corpus", "dataset", "trait_type", "method", "with"];

pub fn header(folds: usize) -> Vec<String> {
    let mut h: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend((1..=folds).map(|f| format!("fold{f}")));
    h.extend(["mean", "n", "seed"].map(String::from));
    h
}

pub fn write_results<W: Write>(out: W, rows: &[ProbeResult]) -> Result<()> {
    let folds = rows.first().map_or(traitcooc::probing::DEFAULT_FOLDS, |r| r.folds.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(folds))?;
    for r in rows {
        if r.folds.len() != folds {
            bail!("rows disagree on the number of folds ({} vs {folds})", r.folds.len());
        }
        let mut rec = vec![
            r.probe.to_string(),
            r.corpus.clone(),
            r.dataset.clone(),
            r.trait_type.to_string(),
            r.method.to_string(),
            r.with_cooc.to_string(),
        ];
        rec.extend(r.folds.iter().map(|f| f.to_string()));
        rec.extend([r.mean.to_string(), r.n.to_string(), r.seed.to_string()]);
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ProbeResult>> {
    let mut rdr = csv::Reader::from_reader(input);
    let head: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let folds = head.iter().filter(|h| h.starts_with("fold")).count();
    if head != header(folds) {
        bail!("unexpected results header {:?}", head.join(","));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or_default();
        let parse_f = |j: usize| -> Result<f64> {
            field(j).parse().with_context(|| format!("line {line}: bad number {:?} in {}", field(j), head[j]))
        };
        let ctx = |what: &str| format!("line {line}: bad {what}");
        let fold_values = (6..6 + folds).map(parse_f).collect::<Result<Vec<_>>>()?;
        out.push(ProbeResult {
            probe: field(0).parse().with_context(|| ctx("probe"))?,
            corpus: field(1).to_string(),
            dataset: field(2).to_string(),
            trait_type: field(3).parse().with_context(|| ctx("trait_type"))?,
            method: field(4).parse().with_context(|| ctx("method"))?,
            with_cooc: field(5).parse().with_context(|| ctx("with"))?,
            folds: fold_values,
            mean: parse_f(6 + folds)?,
            n: field(7 + folds).parse().with_context(|| ctx("n"))?,
            seed: field(8 + folds).parse().with_context(|| ctx("seed"))?,
        });
    }
    Ok(out)
}

pub fn load_results(path: &Path) -> Result<Vec<ProbeResult>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_results(file).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use traitcooc::ablation::RemovalMethod;
    use traitcooc::datasets::TraitType;
    use traitcooc::probing::ProbeKind;

    fn row(with: bool) -> ProbeResult {
        ProbeResult {
            probe: ProbeKind::Binary,
            corpus: "c".into(),
            dataset: "d".into(),
            trait_type: TraitType::SizeShape,
            method: RemovalMethod::Window(10),
            with_cooc: with,
            folds: vec![0.1, 0.2, 1.0 / 3.0],
            mean: (0.1 + 0.2 + 1.0 / 3.0) / 3.0,
            n: 40,
            seed: u64::MAX,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(true), row(false)];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("probe,corpus,dataset,trait_type,method,with,fold1,fold2,fold3,mean,n,seed\n"));
        assert!(text.contains("binary,c,d,size_shape,window,true,"));
        assert_eq!(read_results(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn bad_rows_name_the_line() {
        let text = "probe,corpus,dataset,trait_type,method,with,fold1,fold2,fold3,mean,n,seed\n\
                    binary,c,d,colour,sentence,true,0.5,0.5,x,0.5,3,1\n";
        let err = format!("{:#}", read_results(text.as_bytes()).unwrap_err());
        assert!(err.contains("line 2") && err.contains("fold3"), "{err}");
        assert!(read_results("probe,corpus\n".as_bytes()).is_err());
    }
}
