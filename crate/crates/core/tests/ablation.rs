use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use traitcooc::ablation::{ablate, ablate_split, Matcher, RemovalMethod};
use traitcooc::corpus::split::split_file;
use traitcooc::corpus::{load_corpus, save_corpus, AnnotatedSentence, SplitAssigner, Token};
use traitcooc::datasets::{ConceptTraitPair, Language, LemmaMap, TraitSubset, TraitType};
use traitcooc::synth::{generate_corpus, PlantedWorld, SentenceMix, WorldSpec};

const LEMMAS: [&str; 10] = ["cat", "dog", "red", "black", "tail", "fur", "the", "run", "big", "orange"];

fn small_subset() -> TraitSubset {
    let p = |c, t| ConceptTraitPair::new(c, t, TraitType::Colour, 10);
    TraitSubset::new(
        TraitType::Colour,
        Language::En,
        vec![p("cat", "black"), p("dog", "red"), p("cat", "fur"), p("orange", "orange"), p("dog", "tail")],
    )
}

fn random_sentence(rng: &mut ChaCha8Rng, id: usize, max_len: usize) -> AnnotatedSentence {
    let n = rng.random_range(1..=max_len);
    let parsed = rng.random_bool(0.8);
    let root = rng.random_range(1..=n as u32);
    let tokens = (1..=n as u32)
        .map(|index| {
            let lemma = LEMMAS[rng.random_range(0..LEMMAS.len())].to_string();
            let head = if !parsed {
                None
            } else if index == root {
                Some(0)
            } else {
                // Any other token; trees are not required by the matcher.
                let mut h = rng.random_range(1..=n as u32);
                while h == index {
                    h = if h == n as u32 { 1 } else { h + 1 };
                }
                Some(h)
            };
            Token {
                index,
                form: lemma.clone(),
                lemma,
                upos: "X".into(),
                deprel: head.map(|_| "dep".into()),
                head,
            }
        })
        .collect();
    AnnotatedSentence { id: format!("r{id}"), source: "rand".into(), tokens }
}

/// (concept, trait, concept position, trait position) by exhaustive search.
fn oracle(s: &AnnotatedSentence, subset: &TraitSubset, method: RemovalMethod) -> BTreeSet<(String, String, u32, u32)> {
    let mut out = BTreeSet::new();
    if method == RemovalMethod::Syntactic && s.tokens.iter().any(|t| t.head.is_none()) {
        return out;
    }
    for p in &subset.pairs {
        for a in &s.tokens {
            for b in &s.tokens {
                if a.lemma != p.concept || b.lemma != p.trait_word {
                    continue;
                }
                let ok = match method {
                    RemovalMethod::Sentence => true,
                    RemovalMethod::Window(k) => (a.index as i64 - b.index as i64).unsigned_abs() as usize <= k,
                    RemovalMethod::Syntactic => a.head == Some(b.index) || b.head == Some(a.index),
                };
                if ok {
                    out.insert((p.concept.clone(), p.trait_word.clone(), a.index, b.index));
                }
            }
        }
    }
    out
}

#[test]
fn matcher_agrees_with_brute_force_on_500_sentences() {
    let subset = small_subset();
    let matcher = Matcher::new(&subset);
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let methods = [RemovalMethod::Sentence, RemovalMethod::Window(1), RemovalMethod::Window(10), RemovalMethod::Syntactic];
    let mut hits = 0;
    for i in 0..500 {
        let s = random_sentence(&mut rng, i, 30);
        for method in methods {
            let got: BTreeSet<_> = matcher
                .find_matches(&s, method)
                .into_iter()
                .map(|m| (m.pair.concept.clone(), m.pair.trait_word.clone(), m.concept_pos, m.trait_pos))
                .collect();
            let expected = oracle(&s, &subset, method);
            assert_eq!(got, expected, "sentence {i}, {method}");
            assert_eq!(matcher.is_match(&s, method), !expected.is_empty());
            hits += expected.len();
        }
    }
    assert!(hits > 1000, "oracle exercised only {hits} matches");
}

#[test]
fn narrower_methods_nest_inside_sentence() {
    let subset = small_subset();
    let matcher = Matcher::new(&subset);
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut violations = 0;
    for i in 0..10_000 {
        let s = random_sentence(&mut rng, i, 40);
        let sentence: BTreeSet<_> = matcher
            .find_matches(&s, RemovalMethod::Sentence)
            .into_iter()
            .map(|m| (m.pair, m.concept_pos, m.trait_pos))
            .collect();
        for method in [RemovalMethod::Window(10), RemovalMethod::Syntactic] {
            violations += matcher
                .find_matches(&s, method)
                .into_iter()
                .filter(|m| !sentence.contains(&(m.pair, m.concept_pos, m.trait_pos)))
                .count();
        }
    }
    assert_eq!(violations, 0);
}

fn planted() -> (PlantedWorld, Vec<AnnotatedSentence>, Vec<AnnotatedSentence>) {
    let world = PlantedWorld::new(&WorldSpec::default());
    let corpus = generate_corpus(&world, &SentenceMix::default(), 2000, 31).unwrap();
    let assigner = SplitAssigner::new(0.8, 3).unwrap();
    let (main, reserve) = corpus
        .into_iter()
        .partition(|s| assigner.assign(&s.id) == traitcooc::corpus::SplitPart::Main);
    (world, main, reserve)
}

fn run(
    main: &[AnnotatedSentence],
    reserve: &[AnnotatedSentence],
    subset: &TraitSubset,
    method: RemovalMethod,
    seed: u64,
) -> (traitcooc::ablation::AblationReport, Vec<AnnotatedSentence>) {
    let mut out = Vec::new();
    let mut store = reserve.to_vec();
    let report = ablate(main.iter().cloned().map(Ok), &mut store, subset, &LemmaMap::default(), method, seed, |s| {
        out.push(s);
        Ok(())
    })
    .unwrap();
    (report, out)
}

#[test]
fn planted_ablation_removes_exactly_the_oracle_count() {
    let (world, main, reserve) = planted();
    for tt in [TraitType::Colour, TraitType::Tactile] {
        let subset = world.subset(tt, Language::En);
        for method in RemovalMethod::STANDARD {
            let flagged = main.iter().filter(|s| !oracle(s, &subset, method).is_empty()).count();
            let clean_reserve = reserve.iter().filter(|s| oracle(s, &subset, method).is_empty()).count();
            assert!(flagged > 0, "{tt} {method}: nothing planted");
            let (report, out) = run(&main, &reserve, &subset, method, 9);
            assert_eq!(report.removed as usize, flagged, "{tt} {method}");
            assert_eq!(report.replaced as usize, flagged.min(clean_reserve));
            assert_eq!(report.reserve_exhausted, flagged > clean_reserve);
            assert_eq!(out.len(), main.len());
            let left = out.iter().filter(|s| !oracle(s, &subset, method).is_empty()).count();
            assert_eq!(left, 0, "{tt} {method}: rescan found matches");

            // Kept sentences stay in order; replacements are distinct reserve sentences.
            let kept: Vec<&str> = main
                .iter()
                .filter(|s| oracle(s, &subset, method).is_empty())
                .map(|s| s.id.as_str())
                .collect();
            let main_ids: BTreeSet<&str> = main.iter().map(|s| s.id.as_str()).collect();
            let out_kept: Vec<&str> = out.iter().map(|s| s.id.as_str()).filter(|id| main_ids.contains(id)).collect();
            assert_eq!(out_kept, kept);
            let drawn: BTreeSet<&str> = out.iter().map(|s| s.id.as_str()).filter(|id| !main_ids.contains(id)).collect();
            assert_eq!(drawn.len(), report.replaced as usize);

            let (again, out2) = run(&main, &reserve, &subset, method, 9);
            assert_eq!(again, report);
            assert_eq!(out2, out);
        }
    }
}

#[test]
fn exhausted_reserve_keeps_removing() {
    let (world, main, reserve) = planted();
    let subset = world.subset(TraitType::Colour, Language::En);
    let small: Vec<_> = reserve.into_iter().take(3).collect();
    let clean = small.iter().filter(|s| oracle(s, &subset, RemovalMethod::Sentence).is_empty()).count();
    let (report, out) = run(&main, &small, &subset, RemovalMethod::Sentence, 1);
    assert!(report.reserve_exhausted);
    assert_eq!(report.replaced as usize, clean);
    assert_eq!(out.len(), main.len() - report.removed as usize + clean);
    assert!(out.iter().all(|s| oracle(s, &subset, RemovalMethod::Sentence).is_empty()));
}

#[test]
fn file_backed_ablation_matches_in_memory() {
    let world = PlantedWorld::new(&WorldSpec::default());
    let corpus = generate_corpus(&world, &SentenceMix::default(), 2000, 31).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let all = dir.path().join("all.conllu");
    save_corpus(&all, &corpus).unwrap();
    let split = split_file(&all, &dir.path().join("main.conllu"), &dir.path().join("reserve.conllu"), &SplitAssigner::new(0.8, 3).unwrap()).unwrap();
    let subset = world.subset(TraitType::Materials, Language::En);
    let main = load_corpus(&split.main).unwrap();
    let reserve = load_corpus(&split.reserve).unwrap();
    for method in RemovalMethod::STANDARD {
        let out_path = dir.path().join(format!("out-{method}.conllu"));
        let report = ablate_split(&split, &subset, &LemmaMap::default(), method, 4, &out_path).unwrap();
        let (mem_report, mem_out) = run(&main, &reserve, &subset, method, 4);
        assert_eq!(report.removed, mem_report.removed);
        assert_eq!(report.replaced, mem_report.replaced);
        assert_eq!(load_corpus(&out_path).unwrap(), mem_out);
    }
}
