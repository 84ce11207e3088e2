use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BenchError;
use crate::domain::Instance;

/// Per label, shuffles that label's positions and sends the first
/// `ceil(n/2)` to fold A and the rest to fold B. Labels are visited in
/// sorted order with one generator. Both folds come back ascending.
pub fn stratified_two_fold_labels<S: AsRef<str>>(labels: &[S], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_ref()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        let half = idx.len().div_ceil(2);
        a.extend_from_slice(&idx[..half]);
        b.extend_from_slice(&idx[half..]);
    }
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Two folds stratified by action label.
pub fn stratified_two_fold(instances: &[Instance], seed: u64) -> (Vec<Instance>, Vec<Instance>) {
    let labels: Vec<String> = instances.iter().map(Instance::action_label).collect();
    let (a, b) = stratified_two_fold_labels(&labels, seed);
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| instances[i].clone()).collect();
    (pick(a), pick(b))
}

/// Fraction of positions where prediction and truth agree.
pub fn accuracy<P: AsRef<str>, T: AsRef<str>>(predictions: &[P], truths: &[T]) -> Result<f64, BenchError> {
    if predictions.len() != truths.len() {
        return Err(BenchError::LengthMismatch { predictions: predictions.len(), truths: truths.len() });
    }
    if truths.is_empty() {
        return Err(BenchError::Empty);
    }
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p.as_ref() == t.as_ref()).count();
    Ok(hits as f64 / truths.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_sizes() {
        let labels = ["a", "a", "a", "a", "b", "b", "b", "b", "b", "c"];
        let (a, b) = stratified_two_fold_labels(&labels, 1);
        let count = |f: &[usize], l: &str| f.iter().filter(|&&i| labels[i] == l).count();
        assert_eq!((count(&a, "a"), count(&b, "a")), (2, 2));
        assert_eq!((count(&a, "b"), count(&b, "b")), (3, 2));
        assert_eq!((count(&a, "c"), count(&b, "c")), (1, 0));
        assert_eq!(stratified_two_fold_labels(&labels, 1), (a, b));
    }

    #[test]
    fn accuracy_examples() {
        assert!((accuracy(&["a", "b", "a"], &["a", "a", "a"]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&["x", "y"], &["x", "y"]).unwrap(), 1.0);
        assert_eq!(accuracy(&["x", "y"], &["p", "q"]).unwrap(), 0.0);
        assert!(matches!(accuracy(&["x"], &["x", "y"]), Err(BenchError::LengthMismatch { .. })));
        assert!(matches!(accuracy::<&str, &str>(&[], &[]), Err(BenchError::Empty)));
    }

    proptest! {
        #[test]
        fn folds_partition_the_input(labels in proptest::collection::vec(0u8..6, 1..80), seed in any::<u64>()) {
            let labels: Vec<String> = labels.iter().map(|l| format!("l{l}")).collect();
            let (a, b) = stratified_two_fold_labels(&labels, seed);
            let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for l in labels.iter() {
                let na = a.iter().filter(|&&i| &labels[i] == l).count();
                let nb = b.iter().filter(|&&i| &labels[i] == l).count();
                prop_assert!(na == nb || na == nb + 1);
            }
        }
    }
}
