use std::collections::HashMap;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use traitcooc::embeddings::{
    build_vocab, cbow_update, cosine, load_params, load_vectors, read_vectors, save_model,
    train_cbow, write_vectors, CbowHyperparams, DenseWeights, Example, Scratch, TrainMode,
    Vocabulary,
};
use traitcooc::synth::pair_corpus;

/// Negative-sampling loss written out directly, independent of the kernel.
fn reference_loss(w: &DenseWeights<f64>, context: &[u32], targets: &[(u32, bool)]) -> f64 {
    let d = w.dim;
    let mut h = vec![0.0; d];
    for &c in context {
        for k in 0..d {
            h[k] += w.input[c as usize * d + k] / context.len() as f64;
        }
    }
    targets
        .iter()
        .map(|&(j, label)| {
            let s: f64 = (0..d).map(|k| w.output[j as usize * d + k] * h[k]).sum();
            let p = 1.0 / (1.0 + (-s).exp());
            if label {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for config in 0..10 {
        let vocab = rng.random_range(4..30usize);
        let dim = rng.random_range(2..24usize);
        let ctx_len = rng.random_range(1..8usize);
        let negatives = rng.random_range(1..8usize);
        let context: Vec<u32> = (0..ctx_len).map(|_| rng.random_range(0..vocab as u32)).collect();
        let mut targets = vec![(rng.random_range(0..vocab as u32), true)];
        targets.extend((0..negatives).map(|_| (rng.random_range(0..vocab as u32), false)));
        let w = DenseWeights {
            dim,
            input: (0..vocab * dim).map(|_| rng.random_range(-0.8..0.8)).collect(),
            output: (0..vocab * dim).map(|_| rng.random_range(-0.8..0.8)).collect(),
        };

        let mut stepped = w.clone();
        let loss = cbow_update(&mut stepped, Example { context: &context, targets: &targets }, 1.0, &mut Scratch::new(dim));
        assert!((loss - reference_loss(&w, &context, &targets)).abs() < 1e-12);
        // With lr = 1 the step is exactly the negative gradient.
        let analytic: Vec<f64> = w
            .input
            .iter()
            .zip(&stepped.input)
            .chain(w.output.iter().zip(&stepped.output))
            .map(|(a, b)| a - b)
            .collect();

        let eps = 1e-5;
        let mut numeric = Vec::with_capacity(analytic.len());
        for which in 0..2 {
            for i in 0..vocab * dim {
                let mut plus = w.clone();
                let mut minus = w.clone();
                let (p, m) = if which == 0 {
                    (&mut plus.input[i], &mut minus.input[i])
                } else {
                    (&mut plus.output[i], &mut minus.output[i])
                };
                *p += eps;
                *m -= eps;
                numeric.push((reference_loss(&plus, &context, &targets) - reference_loss(&minus, &context, &targets)) / (2.0 * eps));
            }
        }
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let rel = norm(&diff) / norm(&numeric).max(1e-12);
        assert!(rel <= 1e-4, "config {config}: relative error {rel:e}");
    }
}

#[test]
fn noise_sampler_tracks_smoothed_unigram() {
    let counts: HashMap<String, u64> = [1u64, 2, 3, 5, 8, 13, 21, 34, 55, 89]
        .iter()
        .enumerate()
        .map(|(i, &c)| (format!("w{i}"), c))
        .collect();
    let vocab = Vocabulary::from_counts(counts.clone(), 1).unwrap();
    let z: f64 = counts.values().map(|&c| (c as f64).powf(0.75)).sum();
    let sampler = vocab.noise_sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1_000_000;
    let mut hist = vec![0u64; vocab.len()];
    for _ in 0..draws {
        hist[sampler.sample(&mut rng) as usize] += 1;
    }
    let tv: f64 = (0..vocab.len())
        .map(|id| {
            let expected = (counts[vocab.word(id as u32)] as f64).powf(0.75) / z;
            (hist[id] as f64 / draws as f64 - expected).abs()
        })
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.01, "total variation {tv}");
}

#[test]
fn vocabulary_matches_hash_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corpus: Vec<Vec<String>> = (0..2000)
        .map(|_| (0..rng.random_range(1..15)).map(|_| format!("t{}", rng.random_range(0..200u32).pow(2) / 400)).collect())
        .collect();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in &corpus {
        for t in s {
            *counts.entry(t).or_default() += 1;
        }
    }
    let vocab = build_vocab(&corpus, 3).unwrap();
    let kept: HashMap<&str, u64> = counts.iter().filter(|(_, &c)| c >= 3).map(|(w, &c)| (*w, c)).collect();
    assert_eq!(vocab.len(), kept.len());
    for (w, c) in &kept {
        assert_eq!(vocab.count(vocab.id(w).unwrap()), *c);
    }
    assert_eq!(vocab.total_tokens(), kept.values().sum::<u64>());
    assert!(vocab.counts().windows(2).all(|p| p[0] >= p[1]));
}

fn toy_params() -> CbowHyperparams {
    CbowHyperparams {
        dim: 32,
        window: 4,
        min_count: 1,
        epochs: 5,
        ..CbowHyperparams::default()
    }
}

#[test]
fn toy_training_is_finite_reproducible_and_learns() {
    let corpus = pair_corpus(20, 3, 60, 4000, 8, 3);
    let params = toy_params();
    let (a, log) = train_cbow(&corpus, &params, TrainMode::Sequential).unwrap();
    assert!(a.all_finite());
    assert_eq!(log.epoch_mean_loss.len(), 5);
    assert!(log.epoch_mean_loss.iter().all(|l| l.is_finite()));
    assert!(log.epoch_mean_loss[4] < log.epoch_mean_loss[0], "{:?}", log.epoch_mean_loss);
    assert!(!log.entries.is_empty());

    let (b, log_b) = train_cbow(&corpus, &params, TrainMode::Sequential).unwrap();
    let bits = |m: &traitcooc::embeddings::EmbeddingModel| -> Vec<u32> {
        m.vectors.as_slice().iter().chain(&m.output).map(|x| x.to_bits()).collect()
    };
    assert!(bits(&a) == bits(&b), "sequential retrain differs");
    assert_eq!(log.epoch_mean_loss, log_b.epoch_mean_loss);

    let (c, _) = train_cbow(&corpus, &CbowHyperparams { seed: 2, ..params.clone() }, TrainMode::Sequential).unwrap();
    assert!(bits(&a) != bits(&c));

    let (p, _) = train_cbow(&corpus, &params, TrainMode::Parallel { threads: 4 }).unwrap();
    assert!(p.all_finite());
}

#[test]
fn pair_words_end_up_closer_than_random_words() {
    let corpus = pair_corpus(30, 3, 200, 20_000, 10, 11);
    let params = CbowHyperparams {
        dim: 50,
        window: 5,
        min_count: 1,
        ..CbowHyperparams::default()
    };
    let (model, _) = train_cbow(&corpus, &params, TrainMode::Sequential).unwrap();
    let v = |w: &str| model.vectors.get(w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pair, mut random) = (0.0, 0.0);
    for i in 0..30 {
        pair += cosine(v(&format!("p{i}a")), v(&format!("p{i}b")));
        let mut j = rng.random_range(0..30);
        while j == i {
            j = rng.random_range(0..30);
        }
        random += cosine(v(&format!("p{i}a")), v(&format!("p{j}b")));
    }
    let margin = (pair - random) / 30.0;
    assert!(margin >= 0.2, "margin {margin}");
}

#[test]
fn saved_model_round_trips_and_numpy_reads_it() {
    let corpus = pair_corpus(5, 3, 20, 500, 6, 1);
    let (model, _) = train_cbow(&corpus, &toy_params(), TrainMode::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    save_model(&path, &model).unwrap();
    let back = load_vectors(&path).unwrap();
    assert!(back == model.vectors);
    assert_eq!(load_params(&path).unwrap(), model.params);

    let mut buf = Vec::new();
    write_vectors(&mut buf, &model.vectors).unwrap();
    assert!(read_vectors(&buf[..]).unwrap() == model.vectors);

    let script = r#"
import sys, numpy as np
with open(sys.argv[1]) as f:
    n, d = map(int, f.readline().split())
    words, rows = [], []
    for line in f:
        parts = line.rstrip("\n").split(" ")
        words.append(parts[0])
        rows.append(np.array(parts[1:], dtype=np.float32))
m = np.stack(rows)
assert m.shape == (n, d), m.shape
print(words[0], repr(float(m[0].sum())), repr(float(m.sum())))
"#;
    let out = match Command::new("python3").arg("-c").arg(script).arg(&path).output() {
        Ok(o) => o,
        Err(e) => panic!("python3 unavailable: {e}"),
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0], model.vectors.words()[0]);
    let row0: f32 = model.vectors.row(0).iter().sum();
    let py_row0: f64 = fields[1].parse().unwrap();
    assert!((py_row0 - row0 as f64).abs() < 1e-4, "{py_row0} vs {row0}");
}
