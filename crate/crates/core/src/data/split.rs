use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabelMap;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.05,
            val: 0.05,
            test: 0.90,
        }
    }
}

impl SplitFractions {
    /// `train` for training, `val` for validation, the remainder for test.
    pub fn with_train(train: f64, val: f64) -> Self {
        Self {
            train,
            val,
            test: 1.0 - train - val,
        }
    }
}

/// Train/val/test membership of every labeled pixel, as flat pixel indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

fn per_class_counts(n: usize, f: &SplitFractions) -> (usize, usize) {
    let want = |frac: f64| ((frac * n as f64).round() as usize).max(1);
    let train = want(f.train).min(n);
    let val = want(f.val).min(n - train);
    (train, val)
}

/// Per-class stratified split by seeded shuffle.
///
/// Class `c` with `n` labeled pixels gets `max(1, round(train·n))` training
/// and `max(1, round(val·n))` validation pixels, the rest going to test.
/// Classes too small for that are filled train first, then val, then test.
/// Unlabeled pixels never enter any split.
pub fn stratified_split(labels: &LabelMap, fractions: SplitFractions, seed: u64) -> Result<SplitAssignment> {
    let f = fractions;
    if [f.train, f.val, f.test].iter().any(|v| !(0.0..=1.0).contains(v))
        || (f.train + f.val + f.test - 1.0).abs() > 1e-9
    {
        return Err(Error::config(format!(
            "split fractions {}/{}/{} must be in [0,1] and sum to 1",
            f.train, f.val, f.test
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.classes + 1];
    for (i, &id) in labels.ids.iter().enumerate() {
        if id != 0 {
            by_class[id as usize].push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitAssignment {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (class, pixels) in by_class.iter_mut().enumerate().skip(1) {
        let n = pixels.len();
        if n < 3 {
            warn!("class {class} has only {n} labeled pixel(s); splitting train > val > test");
        }
        pixels.shuffle(&mut rng);
        let (nt, nv) = per_class_counts(n, &f);
        out.train.extend_from_slice(&pixels[..nt]);
        out.val.extend_from_slice(&pixels[nt..nt + nv]);
        out.test.extend_from_slice(&pixels[nt + nv..]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn one_class(n: usize) -> LabelMap {
        LabelMap::new(1, n, 1, vec![1; n]).unwrap()
    }

    #[test]
    fn hundred_pixels_split_five_five_ninety() {
        let s = stratified_split(&one_class(100), SplitFractions::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (5, 5, 90));
    }

    #[test]
    fn single_pixel_goes_to_train() {
        let s = stratified_split(&one_class(1), SplitFractions::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 0, 0));
        let s = stratified_split(&one_class(2), SplitFractions::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 0));
    }

    #[test]
    fn seeded_and_deterministic() {
        let labels = LabelMap::new(10, 20, 2, (0..200).map(|i| (i % 3) as u16).collect()).unwrap();
        let a = stratified_split(&labels, SplitFractions::default(), 7).unwrap();
        let b = stratified_split(&labels, SplitFractions::default(), 7).unwrap();
        let c = stratified_split(&labels, SplitFractions::default(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn partition_excludes_unlabeled() {
        let ids: Vec<u16> = (0..300).map(|i| (i % 4) as u16).collect();
        let labels = LabelMap::new(15, 20, 3, ids.clone()).unwrap();
        let s = stratified_split(&labels, SplitFractions::default(), 3).unwrap();
        assert_eq!(s.total(), labels.labeled_count());
        let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        assert_eq!(all.len(), s.total());
        assert!(all.iter().all(|&i| ids[i] != 0));
        let train_classes: HashSet<u16> = s.train.iter().map(|&i| ids[i]).collect();
        assert_eq!(train_classes.len(), 3);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let f = SplitFractions {
            train: 0.5,
            val: 0.5,
            test: 0.5,
        };
        assert!(stratified_split(&one_class(10), f, 0).is_err());
    }
}
