//! Probes for trait knowledge in word vectors.
//!
//! The multi-class probe predicts a concept's trait from its vector; the
//! binary probe separates related from sampled unrelated pairs using
//! `e_concept − e_trait`. Both report stratified k-fold accuracy.

mod folds;
mod lexicon;
mod svm;

pub use folds::{fold_split, stratified_folds, DEFAULT_FOLDS};
pub use lexicon::Lexicon;
pub use svm::{svm_objective, train_binary, train_linear_svm, BinarySvm, LinearSvm, LinearSvmParams, Matrix};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ablation::RemovalMethod;
use crate::datasets::{ConceptTraitPair, LemmaMap, TraitSubset, TraitType};
use crate::embeddings::WordVectors;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProbeKind {
    Multiclass,
    Binary,
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeKind::Multiclass => "multiclass",
            ProbeKind::Binary => "binary",
        })
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiclass" => Ok(ProbeKind::Multiclass),
            "binary" => Ok(ProbeKind::Binary),
            _ => Err(Error::Probe(format!("unknown probe kind {s:?}"))),
        }
    }
}

/// Per-fold and mean accuracy of one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvScore {
    pub folds: Vec<f64>,
    pub mean: f64,
    pub n: usize,
}

impl CvScore {
    pub fn new(folds: Vec<f64>, n: usize) -> Self {
        let mean = folds.iter().sum::<f64>() / folds.len() as f64;
        CvScore { folds, mean, n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub probe: ProbeKind,
    pub corpus: String,
    pub dataset: String,
    pub trait_type: TraitType,
    pub method: RemovalMethod,
    /// True for the model trained on the unablated corpus.
    pub with_cooc: bool,
    pub folds: Vec<f64>,
    pub mean: f64,
    pub n: usize,
    pub seed: u64,
}

/// Key shared by the two halves of a with/without comparison.
pub type CellKey = (ProbeKind, String, String, TraitType, RemovalMethod);

impl ProbeResult {
    pub fn key(&self) -> CellKey {
        (self.probe, self.corpus.clone(), self.dataset.clone(), self.trait_type, self.method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedDelta {
    pub probe: ProbeKind,
    pub corpus: String,
    pub dataset: String,
    pub trait_type: TraitType,
    pub method: RemovalMethod,
    pub with_acc: f64,
    pub without_acc: f64,
    /// `with_acc − without_acc`
    pub delta_acc: f64,
}

fn features(v: &[f32]) -> impl Iterator<Item = f64> + '_ {
    v.iter().map(|&x| x as f64)
}

/// Stratified k-fold accuracy of a one-vs-rest linear SVM.
pub fn cross_validate(x: &Matrix, labels: &[usize], k: usize, params: &LinearSvmParams, seed: u64) -> Result<CvScore> {
    let folds = stratified_folds(labels, k, seed)?;
    let mut acc = Vec::with_capacity(k);
    for f in 0..k {
        let (train, test) = fold_split(&folds, f);
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let model = train_linear_svm(&x.select(&train), &train_labels, params)?;
        acc.push(model.accuracy(&x.select(&test), &test_labels));
    }
    Ok(CvScore::new(acc, labels.len()))
}

/// Keeps pairs whose concept resolves in both models.
///
/// Under sentence and window removal a concept that is also one of the
/// subset's trait words cannot survive ablation, so it is removed from the
/// dataset as well. Returns the kept subset and one note per removed concept.
pub fn intersect_concepts(
    with: &WordVectors,
    without: &WordVectors,
    subset: &TraitSubset,
    lemmas: &LemmaMap,
    method: RemovalMethod,
) -> Result<(TraitSubset, Vec<String>)> {
    let traits: HashSet<&str> = subset.traits().into_iter().collect();
    let self_trait = !matches!(method, RemovalMethod::Syntactic);
    let mut notes = Vec::new();
    let mut dropped = BTreeSet::new();
    let kept = subset.clone().retain(|p| {
        let reason = if self_trait && traits.contains(p.concept.as_str()) {
            Some("is also a trait word")
        } else if with.resolve(&p.concept, lemmas).is_none() {
            Some("missing from the with-model")
        } else if without.resolve(&p.concept, lemmas).is_none() {
            Some("missing from the without-model")
        } else {
            None
        };
        if let Some(r) = reason {
            if dropped.insert(p.concept.clone()) {
                notes.push(format!("{}: {r}", p.concept));
            }
        }
        reason.is_none()
    });
    if kept.is_empty() {
        return Err(Error::Probe(format!(
            "{} / {method}: no concept of {} resolves in both models",
            subset.trait_type,
            subset.len()
        )));
    }
    Ok((kept, notes))
}

/// Multi-class trait prediction from raw concept vectors.
pub fn multiclass_probe(
    vectors: &WordVectors,
    subset: &TraitSubset,
    lemmas: &LemmaMap,
    k: usize,
    params: &LinearSvmParams,
    seed: u64,
) -> Result<CvScore> {
    let traits = subset.traits();
    let mut labels = Vec::with_capacity(subset.len());
    let mut data = Vec::with_capacity(subset.len() * vectors.dim());
    for p in &subset.pairs {
        let (_, v) = vectors
            .resolve(&p.concept, lemmas)
            .ok_or_else(|| Error::Probe(format!("concept {:?} has no vector", p.concept)))?;
        data.extend(features(v));
        labels.push(traits.binary_search(&p.trait_word.as_str()).expect("trait of subset"));
    }
    for (t, name) in traits.iter().enumerate() {
        let n = labels.iter().filter(|&&l| l == t).count();
        if n < k {
            return Err(Error::Probe(format!(
                "trait {name:?} has {n} concept(s), fewer than the {k} folds"
            )));
        }
    }
    if traits.len() < 2 {
        return Err(Error::Probe("multi-class probe needs at least two traits".into()));
    }
    let x = Matrix::new(labels.len(), vectors.dim(), data)?;
    cross_validate(&x, &labels, k, params, seed)
}

/// Sorted union of two vocabularies.
pub fn union_vocab(a: &WordVectors, b: &WordVectors) -> Vec<String> {
    let set: BTreeSet<&String> = a.words().iter().chain(b.words()).collect();
    set.into_iter().cloned().collect()
}

/// Draws `n` distinct unrelated pairs: words from `vocab` that are not
/// concepts of the subset and have a noun sense in `lexicon`, each given a
/// trait drawn uniformly from the subset's traits (never the word itself).
pub fn sample_negatives(
    vocab: &[String],
    lexicon: &Lexicon,
    subset: &TraitSubset,
    n: usize,
    seed: u64,
) -> Result<Vec<ConceptTraitPair>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let concepts: HashSet<&str> = subset.concepts().into_iter().collect();
    let traits = subset.traits();
    let eligible: Vec<&String> = vocab
        .iter()
        .filter(|w| !concepts.contains(w.as_str()) && lexicon.has_noun(w))
        .filter(|w| traits.iter().any(|t| t != w))
        .collect();
    if eligible.len() < n {
        return Err(Error::Probe(format!(
            "{}: need {n} negative words, only {} eligible",
            subset.trait_type,
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, eligible.len(), n);
    let mut out = Vec::with_capacity(n);
    for i in picks.iter() {
        let word = eligible[i];
        let choices: Vec<&str> = traits.iter().copied().filter(|t| t != word).collect();
        let t = choices[rng.random_range(0..choices.len())];
        out.push(ConceptTraitPair::new(word, t, subset.trait_type, 0));
    }
    Ok(out)
}

/// Related/unrelated classification on `e_concept − e_trait`.
///
/// Pairs with a missing vector are dropped, then the larger side is
/// subsampled so both classes stay the same size. Returns the score and one
/// diagnostic per dropped pair.
pub fn binary_probe(
    vectors: &WordVectors,
    positives: &TraitSubset,
    negatives: &[ConceptTraitPair],
    lemmas: &LemmaMap,
    k: usize,
    params: &LinearSvmParams,
    seed: u64,
) -> Result<(CvScore, Vec<String>)> {
    if positives.len() != negatives.len() {
        return Err(Error::Parameter(format!(
            "{} positives but {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    let mut notes = Vec::new();
    let mut diff = |p: &ConceptTraitPair, side: &str| -> Option<Vec<f64>> {
        let c = vectors.resolve(&p.concept, lemmas);
        let t = vectors.resolve(&p.trait_word, lemmas);
        match (c, t) {
            (Some((_, c)), Some((_, t))) => Some(features(c).zip(features(t)).map(|(a, b)| a - b).collect()),
            _ => {
                notes.push(format!("{side} pair ({}, {}) has no vector; dropped", p.concept, p.trait_word));
                None
            }
        }
    };
    let mut pos: Vec<Vec<f64>> = positives.pairs.iter().filter_map(|p| diff(p, "positive")).collect();
    let mut neg: Vec<Vec<f64>> = negatives.iter().filter_map(|p| diff(p, "negative")).collect();
    let m = pos.len().min(neg.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    for side in [&mut pos, &mut neg] {
        if side.len() > m {
            let mut keep: Vec<usize> = (0..side.len()).collect();
            keep.shuffle(&mut rng);
            keep.truncate(m);
            keep.sort_unstable();
            *side = keep.into_iter().map(|i| std::mem::take(&mut side[i])).collect();
        }
    }
    if m < k {
        return Err(Error::Probe(format!(
            "{}: only {m} resolvable pairs per class, fewer than the {k} folds",
            positives.trait_type
        )));
    }
    let labels: Vec<usize> = std::iter::repeat_n(1, m).chain(std::iter::repeat_n(0, m)).collect();
    let x = Matrix::from_rows(&[pos, neg].concat())?;
    Ok((cross_validate(&x, &labels, k, params, seed)?, notes))
}

/// Pairs every with-result with its without-result and subtracts.
pub fn paired_delta(results: &[ProbeResult]) -> Result<Vec<PairedDelta>> {
    let mut groups: BTreeMap<CellKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in results {
        let g = groups.entry(r.key()).or_default();
        if r.with_cooc { &mut g.0 } else { &mut g.1 }.push(r.mean);
    }
    let mut bad = Vec::new();
    let mut out = Vec::new();
    for ((probe, corpus, dataset, trait_type, method), (with, without)) in groups {
        if with.len() != 1 || without.len() != 1 {
            bad.push(format!(
                "{probe},{corpus},{dataset},{trait_type},{method} (with: {}, without: {})",
                with.len(),
                without.len()
            ));
            continue;
        }
        out.push(PairedDelta {
            probe,
            corpus,
            dataset,
            trait_type,
            method,
            with_acc: with[0],
            without_acc: without[0],
            delta_acc: with[0] - without[0],
        });
    }
    if !bad.is_empty() {
        return Err(Error::Probe(format!("unpaired results: {}", bad.join("; "))));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Language;

    fn vectors(rows: &[(&str, &[f32])]) -> WordVectors {
        let dim = rows[0].1.len();
        WordVectors::new(
            rows.iter().map(|(w, _)| w.to_string()).collect(),
            dim,
            rows.iter().flat_map(|(_, v)| v.iter().copied()).collect(),
        )
        .unwrap()
    }

    fn subset(pairs: &[(&str, &str)]) -> TraitSubset {
        TraitSubset::new(
            TraitType::Colour,
            Language::En,
            pairs.iter().map(|(c, t)| ConceptTraitPair::new(c, t, TraitType::Colour, 10)).collect(),
        )
    }

    #[test]
    fn negatives_require_a_noun_sense() {
        let vocab: Vec<String> = ["banana", "democracy", "quickly"].map(String::from).to_vec();
        let lex = Lexicon::parse(&b"democracy\tn\nquickly\tr\nbanana\tn\n"[..]).unwrap();
        let sub = subset(&[("banana", "yellow")]);
        let neg = sample_negatives(&vocab, &lex, &sub, 1, 0).unwrap();
        assert_eq!(neg, vec![ConceptTraitPair::new("democracy", "yellow", TraitType::Colour, 0)]);
        assert!(sample_negatives(&vocab, &lex, &sub, 0, 0).unwrap().is_empty());
        assert!(sample_negatives(&vocab, &lex, &sub, 2, 0).is_err());
    }

    #[test]
    fn orange_leaves_under_sentence_removal_only() {
        let v = vectors(&[("orange", &[1.0]), ("pumpkin", &[2.0]), ("crow", &[3.0])]);
        let sub = subset(&[("orange", "orange"), ("pumpkin", "orange"), ("crow", "black")]);
        let none = LemmaMap::default();
        let (kept, notes) = intersect_concepts(&v, &v, &sub, &none, RemovalMethod::Sentence).unwrap();
        assert_eq!(kept.concepts(), ["crow", "pumpkin"]);
        assert_eq!(notes, ["orange: is also a trait word"]);
        let (kept, _) = intersect_concepts(&v, &v, &sub, &none, RemovalMethod::Syntactic).unwrap();
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn missing_concepts_are_dropped_for_both() {
        let with = vectors(&[("a", &[1.0]), ("b", &[1.0])]);
        let without = vectors(&[("a", &[1.0])]);
        let sub = subset(&[("a", "red"), ("b", "red")]);
        let (kept, _) =
            intersect_concepts(&with, &without, &sub, &LemmaMap::default(), RemovalMethod::Window(10)).unwrap();
        assert_eq!(kept.concepts(), ["a"]);
        let empty = vectors(&[("z", &[1.0])]);
        assert!(intersect_concepts(&with, &empty, &sub, &LemmaMap::default(), RemovalMethod::Sentence).is_err());
    }

    fn result(with: bool, mean: f64) -> ProbeResult {
        ProbeResult {
            probe: ProbeKind::Multiclass,
            corpus: "umbc".into(),
            dataset: "mcrae".into(),
            trait_type: TraitType::Colour,
            method: RemovalMethod::Sentence,
            with_cooc: with,
            folds: vec![mean; 3],
            mean,
            n: 148,
            seed: 1,
        }
    }

    #[test]
    fn equal_accuracies_give_zero_delta() {
        let d = paired_delta(&[result(true, 0.35), result(false, 0.35)]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].delta_acc, 0.0);
        assert_eq!(format!("{:.2}", d[0].delta_acc), "0.00");
        assert!(paired_delta(&[result(true, 0.35)]).unwrap_err().to_string().contains("umbc"));
    }

    #[test]
    fn thin_trait_is_named() {
        let v = vectors(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0]), ("d", &[4.0])]);
        let sub = subset(&[("a", "red"), ("b", "red"), ("c", "red"), ("d", "blue")]);
        let err = multiclass_probe(&v, &sub, &LemmaMap::default(), 3, &LinearSvmParams::default(), 0).unwrap_err();
        assert!(err.to_string().contains("blue"));
    }
}
