use std::collections::HashMap;
use std::io::BufReader;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use traitcooc::corpus::wiki::{filter_by_views, group_articles, strip_doc_tags, PageviewTable};
use traitcooc::corpus::{
    corpus_stats, load_corpus, read_corpus, save_corpus, split::split_file, write_corpus,
    AnnotatedSentence, ReadError, SplitAssigner, Token,
};
use traitcooc::synth::{generate_corpus, PlantedWorld, SentenceMix, WorldSpec};

fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,8}"
}

fn sentence() -> impl Strategy<Value = AnnotatedSentence> {
    (
        "s[0-9]{1,6}",
        prop::option::of("[A-Za-z_]{1,12}"),
        prop::collection::vec((word(), word(), "[A-Z]{1,5}"), 1..25),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(id, source, rows, parsed, seed)| {
            let n = rows.len() as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let root = rng.random_range(1..=n);
            let tokens = rows
                .into_iter()
                .enumerate()
                .map(|(i, (form, lemma, upos))| {
                    let index = i as u32 + 1;
                    let (head, deprel) = if !parsed {
                        (None, None)
                    } else if index == root {
                        (Some(0), Some("root".to_string()))
                    } else {
                        (Some(root), Some("dep".to_string()))
                    };
                    Token { index, form, lemma, upos, head, deprel }
                })
                .collect();
            AnnotatedSentence { id, source: source.unwrap_or_default(), tokens }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn conllu_round_trip(sentences in prop::collection::vec(sentence(), 1..4)) {
        let mut buf = Vec::new();
        write_corpus(&sentences, &mut buf).unwrap();
        let back: Vec<AnnotatedSentence> = read_corpus(&buf[..]).map(|r| r.unwrap()).collect();
        prop_assert_eq!(back, sentences);
    }

    #[test]
    fn split_is_a_deterministic_partition(
        ids in prop::collection::btree_set("[a-z0-9]{1,10}", 0..200),
        seed in any::<u64>(),
        ratio in 0.05f64..0.95,
    ) {
        let a = SplitAssigner::new(ratio, seed).unwrap();
        let b = SplitAssigner::new(ratio, seed).unwrap();
        for id in &ids {
            prop_assert_eq!(a.assign(id), b.assign(id));
        }
    }
}

#[test]
fn rejected_block_reports_position_and_reading_continues() {
    let text = "# sent_id = a\n1\tx\tx\tNOUN\t_\t_\t_\t_\t_\t_\n\n\
                # sent_id = b\n1\tx\tx\tNOUN\t_\t_\t_\t_\t_\t_\n3\ty\ty\tNOUN\t_\t_\t_\t_\t_\t_\n\n\
                # sent_id = c\n1\tz\tz\tNOUN\t_\t_\t_\t_\t_\t_\n";
    let items: Vec<_> = read_corpus(text.as_bytes()).collect();
    assert_eq!(items.len(), 3);
    assert_eq!(items[0].as_ref().unwrap().id, "a");
    match &items[1] {
        Err(ReadError::Rejected(e)) => {
            assert_eq!(e.block, 2);
            assert_eq!(e.sentence_id.as_deref(), Some("b"));
        }
        other => panic!("expected a rejection, got {other:?}"),
    }
    assert_eq!(items[2].as_ref().unwrap().id, "c");
}

#[test]
fn split_file_partitions_fixture_sentences() {
    let world = PlantedWorld::new(&WorldSpec::default());
    let corpus = generate_corpus(&world, &SentenceMix::default(), 3000, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("all.conllu");
    save_corpus(&input, &corpus).unwrap();
    let assigner = SplitAssigner::new(0.8, 11).unwrap();
    let split = split_file(&input, &dir.path().join("m.conllu"), &dir.path().join("r.conllu"), &assigner).unwrap();
    let main = load_corpus(&split.main).unwrap();
    let reserve = load_corpus(&split.reserve).unwrap();
    assert_eq!(main.len() + reserve.len(), corpus.len());
    assert_eq!(split.counts.main as usize, main.len());

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for s in main.iter().chain(&reserve) {
        *seen.entry(s.id.as_str()).or_default() += 1;
    }
    assert!(corpus.iter().all(|s| seen.get(s.id.as_str()) == Some(&1)));
    let frac = main.len() as f64 / corpus.len() as f64;
    // Binomial sd at n=3000 is under 0.008.
    assert!((frac - 0.8).abs() < 0.03, "main fraction {frac}");

    let again = split_file(&input, &dir.path().join("m2.conllu"), &dir.path().join("r2.conllu"), &assigner).unwrap();
    assert_eq!(std::fs::read(&split.main).unwrap(), std::fs::read(&again.main).unwrap());
    assert_eq!(std::fs::read(&split.reserve).unwrap(), std::fs::read(&again.reserve).unwrap());
}

#[test]
fn corpus_stats_agree_with_line_counts() {
    let world = PlantedWorld::new(&WorldSpec::default());
    let corpus = generate_corpus(&world, &SentenceMix::default(), 500, 9).unwrap();
    let mut buf = Vec::new();
    write_corpus(&corpus, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let token_lines = text
        .lines()
        .filter(|l| l.split('\t').next().is_some_and(|c| c.parse::<u32>().is_ok()))
        .count();
    let sent_id_lines = text.lines().filter(|l| l.starts_with("# sent_id")).count();
    let stats = corpus_stats(BufReader::new(&buf[..])).unwrap();
    assert_eq!(stats.sentences as usize, sent_id_lines);
    assert_eq!(stats.tokens as usize, token_lines);
}

#[test]
fn doc_tags_stripped_from_10k_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut lines = Vec::new();
    for i in 0..10_000 {
        let line = match rng.random_range(0..10) {
            0 => format!("<doc id=\"{i}\" url=\"https://x/{i}\" title=\"T{i}\">"),
            1 => "</doc>".to_string(),
            // Tags that are not line-anchored survive.
            2 => format!("text with </doc> inside {i}"),
            3 => format!(" <doc id=\"{i}\">"),
            _ => format!("plain line {i}"),
        };
        lines.push(line);
    }
    let expected: Vec<&String> = lines
        .iter()
        .filter(|l| !(l.starts_with("<doc ") || l.as_str() == "</doc>"))
        .collect();
    let got: Vec<&String> = strip_doc_tags(&lines).collect();
    assert_eq!(got, expected);
}

#[test]
fn pageview_filter_on_50_articles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut table_text = String::new();
    let mut views = HashMap::new();
    let mut sentences = Vec::new();
    for a in 0..50 {
        let title = format!("Article_{a}");
        // Some titles are absent from the table and count as zero views.
        if a % 7 != 0 {
            let v: u64 = rng.random_range(0..20);
            table_text.push_str(&format!("{}\t{v}\n", title.replace('_', " ")));
            views.insert(title.clone(), v);
        }
        for s in 0..rng.random_range(1..5) {
            sentences.push(AnnotatedSentence {
                id: format!("{a}-{s}"),
                source: title.clone(),
                tokens: vec![Token {
                    index: 1,
                    form: "x".into(),
                    lemma: "x".into(),
                    upos: "X".into(),
                    head: None,
                    deprel: None,
                }],
            });
        }
    }
    let table = PageviewTable::parse(table_text.as_bytes()).unwrap();
    for min_views in [0, 1, 10, 19, 25] {
        let expected: Vec<String> = sentences
            .iter()
            .filter(|s| views.get(&s.source).copied().unwrap_or(0) >= min_views)
            .map(|s| s.id.clone())
            .collect();
        let got: Vec<String> = filter_by_views(group_articles(sentences.clone(), &table), min_views)
            .map(|s| s.id)
            .collect();
        assert_eq!(got, expected, "min_views {min_views}");
    }
}

#[test]
fn bundled_fixture_matches_generator() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/synthetic_20k.conllu.gz");
    let bundled = load_corpus(std::path::Path::new(path)).unwrap();
    let world = PlantedWorld::new(&WorldSpec::default());
    let fresh = generate_corpus(&world, &SentenceMix::default(), 20_000, 20).unwrap();
    assert_eq!(bundled.len(), 20_000);
    assert!(bundled == fresh, "fixture drifted from the generator; regenerate it");
}

#[test]
fn gzip_round_trip() {
    let world = PlantedWorld::new(&WorldSpec::default());
    let corpus = generate_corpus(&world, &SentenceMix::default(), 200, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let gz = dir.path().join("c.conllu.gz");
    save_corpus(&gz, &corpus).unwrap();
    let mut head = [0u8; 2];
    std::fs::File::open(&gz)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut head))
        .unwrap();
    assert_eq!(head, [0x1f, 0x8b]);
    assert_eq!(load_corpus(&gz).unwrap(), corpus);
}
