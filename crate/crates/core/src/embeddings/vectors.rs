use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::datasets::LemmaMap;
use crate::error::{Error, Result};

/// A word → vector table: the published half of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    words: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    data: Vec<f32>,
}

/// How a lookup succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Surface,
    Lemma,
}

impl WordVectors {
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("vector dimension must be at least 1".into()));
        }
        if data.len() != words.len() * dim {
            return Err(Error::Parameter(format!(
                "{} words × {dim} dims needs {} values, got {}",
                words.len(),
                words.len() * dim,
                data.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Parameter(format!("duplicate word {w:?}")));
            }
        }
        Ok(WordVectors {
            words,
            index,
            dim,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Exact lookup of a case-folded word.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| self.row(i as usize))
    }

    /// Tries the word itself, then its entry in `lemmas`.
    pub fn resolve(&self, word: &str, lemmas: &LemmaMap) -> Option<(Resolution, &[f32])> {
        if let Some(v) = self.get(word) {
            return Some((Resolution::Surface, v));
        }
        lemmas
            .get(word)
            .and_then(|l| self.get(l))
            .map(|v| (Resolution::Lemma, v))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Exact lookup; absence is a value.
pub fn lookup<'a>(vectors: &'a WordVectors, word: &str) -> Option<&'a [f32]> {
    vectors.get(word)
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Writes the standard text format: "V dim", then "word v1 … v_dim" lines.
/// Values use the shortest representation that reads back bit-exactly.
pub fn write_vectors<W: Write>(mut out: W, vectors: &WordVectors) -> Result<()> {
    writeln!(out, "{} {}", vectors.len(), vectors.dim)?;
    for (i, w) in vectors.words.iter().enumerate() {
        out.write_all(w.as_bytes())?;
        for x in vectors.row(i) {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_vectors<R: BufRead>(reader: R) -> Result<WordVectors> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(1, "empty vector file"))?;
    let mut h = header.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(n)), Some(Ok(dim)), None) = (h.next(), h.next(), h.next()) else {
        return Err(Error::parse(1, format!("expected \"V dim\" header, found {header:?}")));
    };
    let mut words = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.trim_end().split(' ');
        let word = cols.next().unwrap_or_default().to_string();
        let before = data.len();
        for c in cols {
            let x: f32 = c
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid component {c:?}")))?;
            data.push(x);
        }
        if data.len() - before != dim {
            return Err(Error::parse(
                line_no,
                format!("expected {dim} components, found {}", data.len() - before),
            ));
        }
        words.push(word);
    }
    if words.len() != n {
        return Err(Error::Parameter(format!("header declares {n} vectors, file has {}", words.len())));
    }
    WordVectors::new(words, dim, data)
}

pub fn save_vectors(path: &Path, vectors: &WordVectors) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_vectors(BufWriter::new(file), vectors)
}

pub fn load_vectors(path: &Path) -> Result<WordVectors> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_vectors(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => {
            Error::Parameter(format!("{}: line {line}: {message}", path.display()))
        }
        other => other,
    })
}

/// Location of the hyperparameter record written next to a vector file.
pub fn params_path(vectors: &Path) -> PathBuf {
    let mut name = vectors.as_os_str().to_owned();
    name.push(".params.toml");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> WordVectors {
        WordVectors::new(
            vec!["a".into(), "b".into()],
            3,
            vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0, 0.0, -1e30],
        )
        .unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let v = toy();
        let mut buf = Vec::new();
        write_vectors(&mut buf, &v).unwrap();
        assert!(buf.starts_with(b"2 3\na 0.1 "));
        assert_eq!(read_vectors(&buf[..]).unwrap(), v);
    }

    #[test]
    fn short_file_is_rejected() {
        let text = format!("3 300\na{}\nb{}\n", " 0".repeat(300), " 0".repeat(300));
        assert!(read_vectors(text.as_bytes()).is_err());
        assert!(read_vectors(&b"1 2\na 0.5\n"[..]).is_err());
    }

    #[test]
    fn lookup_and_lemma_fallback() {
        let v = toy();
        assert_eq!(lookup(&v, "b").unwrap()[0], 1.0 / 3.0);
        assert!(lookup(&v, "c").is_none());
        let lemmas = LemmaMap::from_pairs([("bs", "b")]);
        assert_eq!(v.resolve("bs", &lemmas).unwrap().0, Resolution::Lemma);
        assert_eq!(v.resolve("a", &lemmas).unwrap().0, Resolution::Surface);
        assert!(v.resolve("zz", &lemmas).is_none());
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!(cosine(&[1.0, 0.0], &[0.0, 3.0]).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }
}
