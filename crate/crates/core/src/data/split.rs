use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train : dev : test subject ratio (30 / 20 / 10 of 60 subjects).
pub const DEFAULT_RATIOS: [usize; 3] = [3, 2, 1];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffles subjects with `seed` and cuts them by `ratios`.
///
/// Sizes start at `floor(n · ratio / total)`; any split left empty is given
/// one subject, and the remainder goes to train first, then dev.
pub fn split_by_subject(subjects: &[String], ratios: [usize; 3], seed: u64) -> Result<SubjectSplit> {
    let n = subjects.len();
    if n < 3 {
        return Err(Error::Data(format!("need at least 3 subjects to split, got {n}")));
    }
    let total: usize = ratios.iter().sum();
    if ratios.contains(&0) {
        return Err(Error::Config(format!("split ratios {ratios:?} must all be positive")));
    }
    let mut sizes = ratios.map(|r| n * r / total);
    for s in sizes.iter_mut() {
        if *s == 0 {
            *s = 1;
        }
    }
    let mut assigned: usize = sizes.iter().sum();
    // Bumping empty splits can overshoot on tiny inputs; take back from the
    // largest split.
    while assigned > n {
        let largest = (0..3)
            .max_by_key(|&i| (sizes[i], usize::MAX - i))
            .expect("three splits");
        sizes[largest] -= 1;
        assigned -= 1;
    }
    let mut slot = 0;
    while assigned < n {
        sizes[slot % 2] += 1;
        assigned += 1;
        slot += 1;
    }

    let mut order = subjects.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test = order.split_off(sizes[0] + sizes[1]);
    let dev = order.split_off(sizes[0]);
    Ok(SubjectSplit {
        train: order,
        dev,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn subjects(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:03}")).collect()
    }

    fn sizes(s: &SubjectSplit) -> (usize, usize, usize) {
        (s.train.len(), s.dev.len(), s.test.len())
    }

    #[test]
    fn sixty_subjects_like_the_reference_protocol() {
        let s = split_by_subject(&subjects(60), DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(sizes(&s), (30, 20, 10));
    }

    #[test]
    fn small_counts() {
        let sz = |n| sizes(&split_by_subject(&subjects(n), DEFAULT_RATIOS, 1).unwrap());
        assert_eq!(sz(6), (3, 2, 1));
        assert_eq!(sz(3), (1, 1, 1));
        assert_eq!(sz(4), (2, 1, 1));
        assert_eq!(sz(20), (11, 6, 3));
        assert!(split_by_subject(&subjects(2), DEFAULT_RATIOS, 0).is_err());
    }

    #[test]
    fn disjoint_exhaustive_and_seeded() {
        for n in 3..40 {
            let all = subjects(n);
            let s = split_by_subject(&all, DEFAULT_RATIOS, n as u64).unwrap();
            let mut seen = HashSet::new();
            for id in s.train.iter().chain(&s.dev).chain(&s.test) {
                assert!(seen.insert(id.clone()), "{id} assigned twice");
            }
            assert_eq!(seen.len(), n);
            assert_eq!(s, split_by_subject(&all, DEFAULT_RATIOS, n as u64).unwrap());
        }
        let all = subjects(60);
        let a = split_by_subject(&all, DEFAULT_RATIOS, 1).unwrap();
        let b = split_by_subject(&all, DEFAULT_RATIOS, 2).unwrap();
        assert_ne!(a, b);
    }
}
