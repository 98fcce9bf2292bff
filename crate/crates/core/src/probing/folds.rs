use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 3;

/// Assigns each instance a fold in `0..k`, stratified by label: each class
/// is shuffled, classes are laid end to end, and position `i` goes to fold
/// `i % k`. Every fold then holds ⌊n_c/k⌋ or ⌈n_c/k⌉ members of class c.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Parameter("need at least 2 folds".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    let mut pos = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = pos % k;
            pos += 1;
        }
    }
    Ok(folds)
}

/// (train, test) index lists for fold `f`.
pub fn fold_split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}
