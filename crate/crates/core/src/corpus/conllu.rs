use std::fmt;
use std::io::{self, BufRead, Write};

use super::{AnnotatedSentence, Token};

/// A sentence block that could not be accepted. Recoverable: the reader moves
/// on to the next block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceError {
    /// 1-based block number within the stream.
    pub block: usize,
    /// 1-based line number of the offending row (or block start).
    pub line: usize,
    pub sentence_id: Option<String>,
    pub message: String,
}

impl fmt::Display for SentenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sentence block {} (line {}", self.block, self.line)?;
        if let Some(id) = &self.sentence_id {
            write!(f, ", id {id}")?;
        }
        write!(f, ") rejected: {}", self.message)
    }
}

impl std::error::Error for SentenceError {}

#[derive(Debug)]
pub enum ReadError {
    Rejected(SentenceError),
    Io(io::Error),
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadError::Rejected(e) => e.fmt(f),
            ReadError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for ReadError {}

/// Streaming CoNLL-U reader. Yields one item per sentence block.
pub struct ConlluReader<R> {
    reader: R,
    line: String,
    line_no: usize,
    offset: u64,
    block_no: usize,
    current_doc: String,
    failed: bool,
}

/// Reads a CoNLL-U stream lazily.
pub fn read_corpus<R: BufRead>(reader: R) -> ConlluReader<R> {
    ConlluReader::new(reader)
}

enum Line {
    Eof,
    Blank,
    Content,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R) -> Self {
        ConlluReader {
            reader,
            line: String::new(),
            line_no: 0,
            offset: 0,
            block_no: 0,
            current_doc: String::new(),
            failed: false,
        }
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn read_line(&mut self) -> io::Result<Line> {
        self.line.clear();
        let n = self.reader.read_line(&mut self.line)?;
        if n == 0 {
            return Ok(Line::Eof);
        }
        self.line_no += 1;
        self.offset += n as u64;
        let trimmed = self.line.trim_end_matches(['\n', '\r']).len();
        self.line.truncate(trimmed);
        if self.line.trim().is_empty() {
            Ok(Line::Blank)
        } else {
            Ok(Line::Content)
        }
    }

    /// Like `next`, additionally returning the byte offset at which the block
    /// starts. Offsets are only meaningful for uncompressed input.
    pub fn next_with_offset(&mut self) -> Option<Result<(u64, AnnotatedSentence), ReadError>> {
        if self.failed {
            return None;
        }
        // Skip blank lines between blocks.
        let mut start;
        loop {
            start = self.offset;
            match self.read_line() {
                Ok(Line::Eof) => return None,
                Ok(Line::Blank) => continue,
                Ok(Line::Content) => break,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(ReadError::Io(e)));
                }
            }
        }
        self.block_no += 1;
        let block_line = self.line_no;
        let mut id: Option<String> = None;
        let mut source: Option<String> = None;
        let mut tokens = Vec::new();
        let mut error: Option<(usize, String)> = None;

        loop {
            if error.is_none() {
                if let Err(msg) = self.consume_line(&mut id, &mut source, &mut tokens) {
                    error = Some((self.line_no, msg));
                }
            }
            match self.read_line() {
                Ok(Line::Content) => {}
                Ok(Line::Eof) | Ok(Line::Blank) => break,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(ReadError::Io(e)));
                }
            }
        }

        let reject = |line: usize, message: String, id: &Option<String>, block: usize| {
            ReadError::Rejected(SentenceError {
                block,
                line,
                sentence_id: id.clone(),
                message,
            })
        };
        if let Some((line, msg)) = error {
            return Some(Err(reject(line, msg, &id, self.block_no)));
        }
        let sentence = AnnotatedSentence {
            id: id.clone().unwrap_or_else(|| self.block_no.to_string()),
            source: source.unwrap_or_else(|| self.current_doc.clone()),
            tokens,
        };
        if let Err(msg) = sentence.validate() {
            return Some(Err(reject(block_line, msg, &id, self.block_no)));
        }
        Some(Ok((start, sentence)))
    }

    fn consume_line(
        &mut self,
        id: &mut Option<String>,
        source: &mut Option<String>,
        tokens: &mut Vec<Token>,
    ) -> Result<(), String> {
        let line = self.line.as_str();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment_value(comment, "sent_id") {
                *id = Some(v.to_string());
            } else if let Some(v) = comment_value(comment, "source") {
                *source = Some(v.to_string());
            } else if let Some(v) = comment_value(comment, "newdoc id") {
                self.current_doc = v.to_string();
            }
            return Ok(());
        }
        if let Some(tok) = parse_token(line)? {
            tokens.push(tok);
        }
        Ok(())
    }

    /// Adapts the reader into a stream of valid sentences. Rejections are
    /// handed to `on_reject`; I/O errors are passed through.
    pub fn valid<F>(self, on_reject: F) -> Valid<R, F>
    where
        F: FnMut(SentenceError),
    {
        Valid {
            inner: self,
            on_reject,
        }
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<AnnotatedSentence, ReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_with_offset().map(|r| r.map(|(_, s)| s))
    }
}

pub struct Valid<R, F> {
    inner: ConlluReader<R>,
    on_reject: F,
}

impl<R: BufRead, F: FnMut(SentenceError)> Iterator for Valid<R, F> {
    type Item = io::Result<AnnotatedSentence>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.inner.next()? {
                Ok(s) => return Some(Ok(s)),
                Err(ReadError::Rejected(e)) => (self.on_reject)(e),
                Err(ReadError::Io(e)) => return Some(Err(e)),
            }
        }
    }
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.trim_start().strip_prefix(key)?;
    let rest = rest.trim_start().strip_prefix('=')?;
    Some(rest.trim())
}

fn optional(field: &str) -> Option<&str> {
    if field == "_" {
        None
    } else {
        Some(field)
    }
}

/// Parses one token row. Multiword ranges ("3-4") and empty nodes ("3.1")
/// yield `None`.
fn parse_token(line: &str) -> Result<Option<Token>, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(format!("expected 10 tab-separated columns, found {}", cols.len()));
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    let index: u32 = id
        .parse()
        .map_err(|_| format!("invalid token id {id:?}"))?;
    if index == 0 {
        return Err("token id 0 is reserved for the root".into());
    }
    let form = cols[1].to_string();
    let lemma = match optional(cols[2]) {
        Some(l) => l.to_lowercase(),
        None => form.to_lowercase(),
    };
    let head = match optional(cols[6]) {
        Some(h) => Some(
            h.parse::<u32>()
                .map_err(|_| format!("invalid head {h:?} for token {index}"))?,
        ),
        None => None,
    };
    Ok(Some(Token {
        index,
        form,
        lemma,
        upos: cols[3].to_string(),
        head,
        deprel: optional(cols[7]).map(str::to_string),
    }))
}

/// An I/O failure while writing, tagged with the last sentence fully written.
#[derive(Debug)]
pub struct WriteError {
    pub last_id: Option<String>,
    pub source: io::Error,
}

impl fmt::Display for WriteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.last_id {
            Some(id) => write!(f, "write failed after sentence {id}: {}", self.source),
            None => write!(f, "write failed before the first sentence: {}", self.source),
        }
    }
}

impl std::error::Error for WriteError {}

/// Streaming CoNLL-U writer.
pub struct ConlluWriter<W> {
    out: W,
    bytes: u64,
    last_id: Option<String>,
    buf: String,
}

impl<W: Write> ConlluWriter<W> {
    pub fn new(out: W) -> Self {
        ConlluWriter {
            out,
            bytes: 0,
            last_id: None,
            buf: String::new(),
        }
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes
    }

    pub fn write(&mut self, sentence: &AnnotatedSentence) -> Result<(), WriteError> {
        use std::fmt::Write as _;
        let buf = &mut self.buf;
        buf.clear();
        let _ = writeln!(buf, "# sent_id = {}", sentence.id);
        if !sentence.source.is_empty() {
            let _ = writeln!(buf, "# source = {}", sentence.source);
        }
        for t in &sentence.tokens {
            let head = t.head.map(|h| h.to_string());
            let _ = writeln!(
                buf,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index,
                t.form,
                t.lemma,
                t.upos,
                head.as_deref().unwrap_or("_"),
                t.deprel.as_deref().unwrap_or("_"),
            );
        }
        buf.push('\n');
        self.out
            .write_all(buf.as_bytes())
            .map_err(|source| WriteError {
                last_id: self.last_id.clone(),
                source,
            })?;
        self.bytes += buf.len() as u64;
        self.last_id = Some(sentence.id.clone());
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, WriteError> {
        self.out.flush().map_err(|source| WriteError {
            last_id: self.last_id.clone(),
            source,
        })?;
        Ok(self.out)
    }
}

/// Writes sentences as CoNLL-U and returns the byte count.
pub fn write_corpus<'a, I, W>(sentences: I, out: W) -> Result<u64, WriteError>
where
    I: IntoIterator<Item = &'a AnnotatedSentence>,
    W: Write,
{
    let mut writer = ConlluWriter::new(out);
    for s in sentences {
        writer.write(s)?;
    }
    let bytes = writer.bytes_written();
    writer.finish()?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRANERO: &str = "\
# sent_id = fig1
# text = Cerró la puerta del granero
1\tCerró\tcerrar\tVERB\t_\t_\t0\troot\t_\t_
2\tla\tel\tDET\t_\t_\t3\tdet\t_\t_
3\tpuerta\tpuerta\tNOUN\t_\t_\t1\tobj\t_\t_
4-5\tdel\t_\t_\t_\t_\t_\t_\t_\t_
4\tde\tde\tADP\t_\t_\t6\tcase\t_\t_
5\tel\tel\tDET\t_\t_\t6\tdet\t_\t_
6\tgranero\tgranero\tNOUN\t_\t_\t3\tnmod\t_\t_
";

    fn read_all(text: &str) -> Vec<Result<AnnotatedSentence, ReadError>> {
        read_corpus(text.as_bytes()).collect()
    }

    #[test]
    fn reads_split_contraction_as_six_tokens() {
        let out = read_all(GRANERO);
        assert_eq!(out.len(), 1);
        let s = out.into_iter().next().unwrap().unwrap();
        assert_eq!(s.id, "fig1");
        assert_eq!(s.tokens.len(), 6);
        let lemmas: Vec<_> = s.tokens.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas, ["cerrar", "el", "puerta", "de", "el", "granero"]);
        let granero = s.token(6).unwrap();
        assert_eq!(granero.head, Some(3));
        assert_eq!(granero.deprel.as_deref(), Some("nmod"));
    }

    #[test]
    fn empty_stream_yields_nothing() {
        assert!(read_all("").is_empty());
        assert!(read_all("\n\n\n").is_empty());
    }

    #[test]
    fn lemmas_are_case_folded_and_default_to_form() {
        let text = "1\tParis\tParis\tPROPN\t_\t_\t_\t_\t_\t_\n2\tDogs\t_\tNOUN\t_\t_\t_\t_\t_\t_\n";
        let s = read_all(text).remove(0).unwrap();
        assert_eq!(s.tokens[0].lemma, "paris");
        assert_eq!(s.tokens[0].form, "Paris");
        assert_eq!(s.tokens[1].lemma, "dogs");
        assert!(!s.has_dependencies());
        assert_eq!(s.id, "1");
    }

    fn block(id: usize, heads: [u32; 5]) -> String {
        let mut s = format!("# sent_id = b{id}\n");
        for (i, h) in heads.iter().enumerate() {
            s.push_str(&format!("{}\tw{i}\tw{i}\tX\t_\t_\t{h}\tdep\t_\t_\n", i + 1));
        }
        s.push('\n');
        s
    }

    #[test]
    fn out_of_range_head_rejects_only_that_block() {
        let text = [
            block(1, [0, 1, 1, 1, 1]),
            block(2, [0, 1, 9, 1, 1]),
            block(3, [2, 0, 2, 2, 2]),
        ]
        .concat();
        let out = read_all(&text);
        assert_eq!(out.len(), 3);
        assert!(out[0].is_ok());
        assert!(out[2].is_ok());
        match &out[1] {
            Err(ReadError::Rejected(e)) => {
                assert_eq!(e.block, 2);
                assert_eq!(e.sentence_id.as_deref(), Some("b2"));
                assert!(e.message.contains("head 9"), "{}", e.message);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn column_count_error_carries_line_number() {
        let text = "# sent_id = a\n1\tx\tx\tX\t_\t_\t0\troot\t_\t_\n2\tbroken\n\n";
        let out = read_all(text);
        match &out[0] {
            Err(ReadError::Rejected(e)) => {
                assert_eq!(e.line, 3);
                assert!(e.message.contains("10 tab-separated"));
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn newdoc_sets_source_until_overridden() {
        let text = "# newdoc id = art1\n1\ta\ta\tX\t_\t_\t_\t_\t_\t_\n\n\
                    1\tb\tb\tX\t_\t_\t_\t_\t_\t_\n\n\
                    # source = other\n1\tc\tc\tX\t_\t_\t_\t_\t_\t_\n\n";
        let sources: Vec<_> = read_all(text)
            .into_iter()
            .map(|s| s.unwrap().source)
            .collect();
        assert_eq!(sources, ["art1", "art1", "other"]);
    }

    #[test]
    fn figure_sentence_round_trips() {
        let original = read_all(GRANERO).remove(0).unwrap();
        let mut buf = Vec::new();
        let n = write_corpus([&original], &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let back = read_corpus(&buf[..]).next().unwrap().unwrap();
        assert_eq!(back, original);
    }

    #[test]
    fn empty_sequence_writes_nothing() {
        let mut buf = Vec::new();
        assert_eq!(write_corpus([], &mut buf).unwrap(), 0);
        assert!(buf.is_empty());
    }

    #[test]
    fn offsets_point_at_block_starts() {
        let text = [block(1, [0, 1, 1, 1, 1]), block(2, [0, 1, 1, 1, 1])].concat();
        let mut r = read_corpus(text.as_bytes());
        let (o1, _) = r.next_with_offset().unwrap().unwrap();
        let (o2, s2) = r.next_with_offset().unwrap().unwrap();
        assert_eq!(o1, 0);
        let again = read_corpus(&text.as_bytes()[o2 as usize..])
            .next()
            .unwrap()
            .unwrap();
        assert_eq!(again, s2);
    }

    struct FailingWriter;
    impl Write for FailingWriter {
        fn write(&mut self, _: &[u8]) -> io::Result<usize> {
            Err(io::Error::other("disk full"))
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_names_last_sentence() {
        let s = read_all(GRANERO).remove(0).unwrap();
        let mut w = ConlluWriter::new(Vec::new());
        w.write(&s).unwrap();
        let err = ConlluWriter {
            out: FailingWriter,
            bytes: 0,
            last_id: Some("fig1".into()),
            buf: String::new(),
        }
        .write(&s)
        .unwrap_err();
        assert_eq!(err.last_id.as_deref(), Some("fig1"));
    }
}
