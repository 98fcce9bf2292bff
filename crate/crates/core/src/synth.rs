//! Synthetic corpora with planted concept-trait co-occurrences.
//!
//! A [`PlantedWorld`] fixes the vocabulary: concepts grouped under traits,
//! control nouns, and filler words. [`generate_corpus`] writes sentences of
//! four kinds. Co-occurrence sentences hold one concept and its own trait;
//! noun sentences hold one concept or control noun, drawn from the same
//! pool; trait sentences hold one trait word; filler sentences hold neither.
//! Outside co-occurrence sentences, concepts and control nouns appear in
//! identical contexts, so direct co-occurrence is the only thing linking a
//! concept to its trait.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedSentence, Token};
use crate::datasets::{ConceptTraitPair, Language, TraitSubset, TraitType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    /// (trait type, number of traits, concepts per trait)
    pub trait_types: Vec<(TraitType, usize, usize)>,
    pub control_nouns: usize,
    pub fillers: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            trait_types: TraitType::ALL.iter().map(|&t| (t, 4, 12)).collect(),
            control_nouns: 240,
            fillers: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedWorld {
    pub pairs: Vec<ConceptTraitPair>,
    pub control_nouns: Vec<String>,
    pub fillers: Vec<String>,
}

impl PlantedWorld {
    /// Deterministic world; words are pseudo-words derived from their role
    /// ("kcl3" is concept 3 of colour, "rcl1" is colour trait 1).
    pub fn new(spec: &WorldSpec) -> Self {
        let mut pairs = Vec::new();
        for &(tt, n_traits, per_trait) in &spec.trait_types {
            let tag = match tt {
                TraitType::Colour => "cl",
                TraitType::Components => "cp",
                TraitType::Materials => "ma",
                TraitType::SizeShape => "ss",
                TraitType::Tactile => "ta",
            };
            for t in 0..n_traits {
                for k in 0..per_trait {
                    let concept = format!("k{tag}{}", t * per_trait + k);
                    let trait_word = format!("r{tag}{t}");
                    pairs.push(ConceptTraitPair::new(&concept, &trait_word, tt, 10 + k as u32));
                }
            }
        }
        pairs.sort();
        PlantedWorld {
            pairs,
            control_nouns: (0..spec.control_nouns).map(|i| format!("n{i}")).collect(),
            fillers: (0..spec.fillers).map(|i| format!("w{i}")).collect(),
        }
    }

    pub fn subset(&self, trait_type: TraitType, language: Language) -> TraitSubset {
        TraitSubset::new(
            trait_type,
            language,
            self.pairs.iter().filter(|p| p.trait_type == trait_type).cloned().collect(),
        )
    }

    pub fn trait_types(&self) -> Vec<TraitType> {
        let mut t: Vec<TraitType> = self.pairs.iter().map(|p| p.trait_type).collect();
        t.sort();
        t.dedup();
        t
    }

    fn concepts(&self) -> Vec<&str> {
        let mut c: Vec<&str> = self.pairs.iter().map(|p| p.concept.as_str()).collect();
        c.dedup();
        c
    }

    fn traits(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.pairs.iter().map(|p| p.trait_word.as_str()).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// Lexicon lines: concepts and control nouns are nouns, traits
    /// adjectives, fillers verbs.
    pub fn write_lexicon<W: Write>(&self, mut out: W) -> Result<()> {
        for c in self.concepts() {
            writeln!(out, "{c}\tn")?;
        }
        for n in &self.control_nouns {
            writeln!(out, "{n}\tn")?;
        }
        for t in self.traits() {
            writeln!(out, "{t}\ta")?;
        }
        for f in &self.fillers {
            writeln!(out, "{f}\tv")?;
        }
        out.flush()?;
        Ok(())
    }

    /// A feature-norm table for the world in the default column layout.
    /// Colour features carry BR label "visual-colour", components WB
    /// "external_component", materials WB "made_of", size_shape BR
    /// "visual-form_and_surface", tactile BR "tactile".
    pub fn write_norms<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "Concept\tFeature\tWB_Label\tBR_Label\tProd_Freq")?;
        for p in &self.pairs {
            let (feature, wb, br) = match p.trait_type {
                TraitType::Colour => (format!("is_{}", p.trait_word), "NA", "visual-colour"),
                TraitType::Components => (format!("has_{}", p.trait_word), "external_component", "visual-form_and_surface"),
                TraitType::Materials => (format!("made_of_{}", p.trait_word), "made_of", "visual-form_and_surface"),
                TraitType::SizeShape => (format!("is_{}", p.trait_word), "NA", "visual-form_and_surface"),
                TraitType::Tactile => (format!("is_{}", p.trait_word), "NA", "tactile"),
            };
            writeln!(out, "{}\t{feature}\t{wb}\t{br}\t{}", p.concept, p.prod_freq)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMix {
    pub cooccurrence: f64,
    pub noun: f64,
    pub trait_only: f64,
    pub filler: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Share of co-occurrences within 10 tokens; the rest are further apart.
    pub near: f64,
    /// Share of co-occurrences joined by a dependency edge.
    pub edge: f64,
    /// Share of sentences written without dependency columns.
    pub lemma_only: f64,
}

impl Default for SentenceMix {
    fn default() -> Self {
        SentenceMix {
            cooccurrence: 0.15,
            noun: 0.45,
            trait_only: 0.15,
            filler: 0.25,
            min_len: 5,
            max_len: 20,
            near: 0.6,
            edge: 0.4,
            lemma_only: 0.05,
        }
    }
}

const FAR: usize = 11;

struct Generator<'a> {
    world: &'a PlantedWorld,
    mix: &'a SentenceMix,
    nouns: Vec<&'a str>,
    traits: Vec<&'a str>,
    kinds: WeightedIndex<f64>,
    filler_dist: WeightedIndex<f64>,
}

impl<'a> Generator<'a> {
    fn new(world: &'a PlantedWorld, mix: &'a SentenceMix) -> Result<Self> {
        if world.pairs.is_empty() || world.fillers.is_empty() {
            return Err(Error::Parameter("world needs concepts and fillers".into()));
        }
        if mix.min_len < 2 || mix.max_len < mix.min_len {
            return Err(Error::Parameter("sentence lengths need 2 <= min_len <= max_len".into()));
        }
        let kinds = WeightedIndex::new([mix.cooccurrence, mix.noun, mix.trait_only, mix.filler])
            .map_err(|e| Error::Parameter(format!("sentence mix: {e}")))?;
        let filler_dist = WeightedIndex::new((0..world.fillers.len()).map(|r| 1.0 / (r as f64 + 1.0)))
            .expect("positive weights");
        let mut nouns = world.concepts();
        nouns.extend(world.control_nouns.iter().map(String::as_str));
        Ok(Generator {
            world,
            mix,
            nouns,
            traits: world.traits(),
            kinds,
            filler_dist,
        })
    }

    fn filler(&self, rng: &mut ChaCha8Rng) -> &'a str {
        &self.world.fillers[self.filler_dist.sample(rng)]
    }

    fn sentence(&self, id: String, rng: &mut ChaCha8Rng) -> AnnotatedSentence {
        let mut len = rng.random_range(self.mix.min_len..=self.mix.max_len);
        let mut words: Vec<(&str, &str)> = Vec::new();
        let mut planted: Option<(usize, usize, bool)> = None;
        match self.kinds.sample(rng) {
            0 => {
                let pair = self.world.pairs.choose(rng).expect("non-empty");
                let near = rng.random_bool(self.mix.near);
                if !near {
                    len = len.max(FAR + 2);
                }
                words = (0..len).map(|_| (self.filler(rng), "VERB")).collect();
                let (a, b) = if near {
                    let a = rng.random_range(0..len);
                    let mut b = rng.random_range(a.saturating_sub(10)..=(a + 10).min(len - 1));
                    while b == a {
                        b = rng.random_range(a.saturating_sub(10)..=(a + 10).min(len - 1));
                    }
                    (a, b)
                } else {
                    let a = rng.random_range(0..len - FAR);
                    (a, rng.random_range(a + FAR..len))
                };
                let (cp, tp) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                words[cp] = (pair.concept.as_str(), "NOUN");
                words[tp] = (pair.trait_word.as_str(), "ADJ");
                planted = Some((cp, tp, rng.random_bool(self.mix.edge)));
            }
            1 => {
                words = (0..len).map(|_| (self.filler(rng), "VERB")).collect();
                let at = rng.random_range(0..len);
                words[at] = (self.nouns.choose(rng).expect("non-empty"), "NOUN");
            }
            2 => {
                words = (0..len).map(|_| (self.filler(rng), "VERB")).collect();
                let at = rng.random_range(0..len);
                words[at] = (self.traits.choose(rng).expect("non-empty"), "ADJ");
            }
            _ => words.extend((0..len).map(|_| (self.filler(rng), "VERB"))),
        }
        let heads = if rng.random_bool(self.mix.lemma_only) {
            None
        } else {
            Some(random_tree(words.len(), planted, rng))
        };
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, &(lemma, upos))| {
                let mut form = lemma.to_string();
                if i == 0 {
                    form[..1].make_ascii_uppercase();
                }
                let head = heads.as_ref().map(|h| h[i]);
                let deprel = head.map(|h| {
                    let linked = planted.is_some_and(|(c, t, _)| {
                        (i == c && h as usize == t + 1) || (i == t && h as usize == c + 1)
                    });
                    if h == 0 {
                        "root"
                    } else if linked {
                        "nmod"
                    } else {
                        "dep"
                    }
                    .to_string()
                });
                Token {
                    index: i as u32 + 1,
                    form,
                    lemma: lemma.to_string(),
                    upos: upos.to_string(),
                    head,
                    deprel,
                }
            })
            .collect();
        AnnotatedSentence {
            id,
            source: "synth".into(),
            tokens,
        }
    }
}

/// Random recursive tree over `n` tokens, 1-based heads with 0 for the root.
/// With `planted = Some((c, t, edge))` (0-based positions) an edge between c
/// and t is present exactly when `edge` holds.
fn random_tree(n: usize, planted: Option<(usize, usize, bool)>, rng: &mut ChaCha8Rng) -> Vec<u32> {
    loop {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut heads = vec![0u32; n];
        for k in 1..n {
            heads[order[k]] = order[rng.random_range(0..k)] as u32 + 1;
        }
        let Some((c, t, edge)) = planted else {
            return heads;
        };
        let linked = |h: &[u32]| h[c] as usize == t + 1 || h[t] as usize == c + 1;
        if edge {
            let pos = |x: usize| order.iter().position(|&o| o == x).expect("in order");
            let (parent, child) = if pos(c) < pos(t) { (c, t) } else { (t, c) };
            heads[child] = parent as u32 + 1;
            return heads;
        }
        if !linked(&heads) {
            return heads;
        }
    }
}

/// `n` sentences with ids "s000000", "s000001", ….
pub fn generate_corpus(world: &PlantedWorld, mix: &SentenceMix, n: usize, seed: u64) -> Result<Vec<AnnotatedSentence>> {
    let generator = Generator::new(world, mix)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|i| generator.sentence(format!("s{i:06}"), &mut rng)).collect())
}

/// Token sentences for the embedding sanity check. Pair `i` is "p{i}a" and
/// "p{i}b"; every sentence holds one pair, `topic` context words private to
/// that pair ("p{i}c{j}", drawn from `topic` per pair) and uniform fillers
/// "f{j}" up to `len` tokens.
pub fn pair_corpus(pairs: usize, topic: usize, fillers: usize, n: usize, len: usize, seed: u64) -> Vec<Vec<String>> {
    assert!(pairs > 0 && fillers > 0 && len >= 2 + topic.min(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = rng.random_range(0..pairs);
            let mut s = vec![format!("p{p}a"), format!("p{p}b")];
            if topic > 0 {
                s.push(format!("p{p}c{}", rng.random_range(0..topic)));
            }
            while s.len() < len {
                s.push(format!("f{}", rng.random_range(0..fillers)));
            }
            for i in (1..s.len()).rev() {
                s.swap(i, rng.random_range(0..=i));
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablation::{Matcher, RemovalMethod};

    #[test]
    fn sentences_are_valid_and_reproducible() {
        let world = PlantedWorld::new(&WorldSpec::default());
        let a = generate_corpus(&world, &SentenceMix::default(), 2000, 4).unwrap();
        assert_eq!(a, generate_corpus(&world, &SentenceMix::default(), 2000, 4).unwrap());
        for s in &a {
            s.validate().unwrap();
        }
        let colour = world.subset(TraitType::Colour, Language::En);
        let m = Matcher::new(&colour);
        let count = |method| a.iter().filter(|s| m.is_match(s, method)).count();
        let (sent, win, syn) = (
            count(RemovalMethod::Sentence),
            count(RemovalMethod::Window(10)),
            count(RemovalMethod::Syntactic),
        );
        assert!(sent > win && win > syn && syn > 0, "{sent} {win} {syn}");
    }

    #[test]
    fn world_shape() {
        let world = PlantedWorld::new(&WorldSpec::default());
        let colour = world.subset(TraitType::Colour, Language::En);
        assert_eq!(colour.len(), 48);
        assert_eq!(colour.traits().len(), 4);
        assert_eq!(world.trait_types().len(), 5);
    }
}
