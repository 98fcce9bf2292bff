use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::corpus::AnnotatedSentence;
use crate::datasets::{ConceptTraitPair, LemmaMap, TraitSubset};
use crate::error::Error;

pub const DEFAULT_WINDOW: usize = 10;

/// Granularity at which a concept-trait co-occurrence is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RemovalMethod {
    /// Concept and trait lemmas anywhere in the same sentence.
    Sentence,
    /// Token distance at most the given size.
    Window(usize),
    /// A dependency edge joins the two tokens, in either direction.
    Syntactic,
}

impl RemovalMethod {
    pub const STANDARD: [RemovalMethod; 3] = [
        RemovalMethod::Sentence,
        RemovalMethod::Window(DEFAULT_WINDOW),
        RemovalMethod::Syntactic,
    ];

    pub fn window(size: usize) -> Result<Self, Error> {
        if size == 0 {
            return Err(Error::Parameter("window size must be at least 1".into()));
        }
        Ok(RemovalMethod::Window(size))
    }
}

impl fmt::Display for RemovalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemovalMethod::Sentence => f.write_str("sentence"),
            RemovalMethod::Window(DEFAULT_WINDOW) => f.write_str("window"),
            RemovalMethod::Window(k) => write!(f, "window:{k}"),
            RemovalMethod::Syntactic => f.write_str("syntactic"),
        }
    }
}

impl FromStr for RemovalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sentence" => Ok(RemovalMethod::Sentence),
            "window" => Ok(RemovalMethod::Window(DEFAULT_WINDOW)),
            "syntactic" => Ok(RemovalMethod::Syntactic),
            _ => {
                if let Some(k) = s.strip_prefix("window:") {
                    let k = k
                        .parse()
                        .map_err(|_| Error::Parameter(format!("invalid window size in {s:?}")))?;
                    RemovalMethod::window(k)
                } else {
                    Err(Error::Parameter(format!("unknown removal method {s:?}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatch<'a> {
    pub sentence_id: String,
    pub pair: &'a ConceptTraitPair,
    /// 1-based token positions.
    pub concept_pos: u32,
    pub trait_pos: u32,
    pub method: RemovalMethod,
}

/// One-pass co-occurrence detector over a subset, indexed by concept lemma.
#[derive(Debug, Clone)]
pub struct Matcher<'a> {
    /// concept lemma → (pair, trait lemma)
    by_concept: HashMap<String, Vec<(&'a ConceptTraitPair, String)>>,
    watched: HashSet<String>,
}

impl<'a> Matcher<'a> {
    pub fn new(subset: &'a TraitSubset) -> Self {
        Self::with_lemmas(subset, &LemmaMap::default())
    }

    /// Matches pair words through `lemmas` first, so a dataset trait such as
    /// "legs" finds the corpus lemma "leg".
    pub fn with_lemmas(subset: &'a TraitSubset, lemmas: &LemmaMap) -> Self {
        let mut by_concept: HashMap<String, Vec<(&ConceptTraitPair, String)>> = HashMap::new();
        let mut watched = HashSet::new();
        for p in &subset.pairs {
            let c = lemmas.lemma(&p.concept).to_string();
            let t = lemmas.lemma(&p.trait_word).to_string();
            watched.insert(c.clone());
            watched.insert(t.clone());
            by_concept.entry(c).or_default().push((p, t));
        }
        Matcher { by_concept, watched }
    }

    pub fn is_empty(&self) -> bool {
        self.by_concept.is_empty()
    }

    fn positions<'s>(&self, sentence: &'s AnnotatedSentence) -> HashMap<&'s str, Vec<u32>> {
        let mut pos: HashMap<&str, Vec<u32>> = HashMap::new();
        for t in &sentence.tokens {
            if self.watched.contains(t.lemma.as_str()) {
                pos.entry(t.lemma.as_str()).or_default().push(t.index);
            }
        }
        pos
    }

    fn linked(sentence: &AnnotatedSentence, a: u32, b: u32) -> bool {
        let head = |i: u32| sentence.token(i).and_then(|t| t.head);
        head(a) == Some(b) || head(b) == Some(a)
    }

    fn accepts(sentence: &AnnotatedSentence, method: RemovalMethod, cp: u32, tp: u32) -> bool {
        match method {
            RemovalMethod::Sentence => true,
            RemovalMethod::Window(k) => cp.abs_diff(tp) as usize <= k,
            RemovalMethod::Syntactic => Self::linked(sentence, cp, tp),
        }
    }

    fn scan<F>(&self, sentence: &AnnotatedSentence, method: RemovalMethod, mut f: F)
    where
        F: FnMut(&'a ConceptTraitPair, u32, u32) -> bool,
    {
        if self.by_concept.is_empty()
            || (method == RemovalMethod::Syntactic && !sentence.has_dependencies())
        {
            return;
        }
        let pos = self.positions(sentence);
        for (lemma, concept_positions) in &pos {
            let Some(pairs) = self.by_concept.get(*lemma) else {
                continue;
            };
            for (pair, trait_lemma) in pairs {
                let Some(trait_positions) = pos.get(trait_lemma.as_str()) else {
                    continue;
                };
                for &cp in concept_positions {
                    for &tp in trait_positions {
                        if Self::accepts(sentence, method, cp, tp) && !f(pair, cp, tp) {
                            return;
                        }
                    }
                }
            }
        }
    }

    /// Every (pair, concept position, trait position) co-occurrence in the
    /// sentence, ordered by pair then positions.
    pub fn find_matches(&self, sentence: &AnnotatedSentence, method: RemovalMethod) -> Vec<CooccurrenceMatch<'a>> {
        let mut out = Vec::new();
        self.scan(sentence, method, |pair, cp, tp| {
            out.push(CooccurrenceMatch {
                sentence_id: sentence.id.clone(),
                pair,
                concept_pos: cp,
                trait_pos: tp,
                method,
            });
            true
        });
        out.sort_by(|a, b| {
            (a.pair, a.concept_pos, a.trait_pos).cmp(&(b.pair, b.concept_pos, b.trait_pos))
        });
        out
    }

    /// True when the sentence has at least one match; stops at the first.
    pub fn is_match(&self, sentence: &AnnotatedSentence, method: RemovalMethod) -> bool {
        let mut found = false;
        self.scan(sentence, method, |_, _, _| {
            found = true;
            false
        });
        found
    }
}

/// Convenience wrapper over [`Matcher::find_matches`].
pub fn find_matches<'a>(
    sentence: &AnnotatedSentence,
    subset: &'a TraitSubset,
    method: RemovalMethod,
) -> Vec<CooccurrenceMatch<'a>> {
    Matcher::new(subset).find_matches(sentence, method)
}
