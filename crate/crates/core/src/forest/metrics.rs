//! Classification metrics.

/// Micro-averaged F1 over single-label multiclass predictions.
///
/// With exactly one label per sample, micro-precision, micro-recall, and
/// therefore micro-F1 all collapse to plain accuracy (every false positive
/// for one class is a false negative for another, so FP = FN in the pooled
/// counts). The score is computed as such.
///
/// Panics on empty or mismatched inputs — those are harness bugs.
pub fn micro_f1(predictions: &[usize], labels: &[usize]) -> f64 {
    assert!(
        !predictions.is_empty(),
        "micro_f1 of empty inputs is undefined"
    );
    assert_eq!(
        predictions.len(),
        labels.len(),
        "predictions and labels differ in length"
    );
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / predictions.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_is_one() {
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2]), 1.0);
    }

    #[test]
    fn all_wrong_is_zero() {
        assert_eq!(micro_f1(&[1, 2, 0], &[0, 1, 2]), 0.0);
    }

    #[test]
    fn three_of_four_is_three_quarters() {
        assert_eq!(micro_f1(&[0, 1, 1, 0], &[0, 1, 1, 1]), 0.75);
    }

    #[test]
    #[should_panic(expected = "empty")]
    fn empty_inputs_panic() {
        micro_f1(&[], &[]);
    }

    /// Pooled-count identity: computing micro-F1 the long way (TP, FP, FN
    /// per class, pooled) must agree with the accuracy shortcut.
    #[test]
    fn pooled_definition_agrees_with_accuracy() {
        let preds = [0usize, 1, 2, 2, 1, 0, 2, 1, 0, 0];
        let labels = [0usize, 1, 1, 2, 2, 0, 2, 1, 2, 0];
        let n_classes = 3;
        let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
        for c in 0..n_classes {
            for (&p, &l) in preds.iter().zip(&labels) {
                match (p == c, l == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fne += 1,
                    _ => {}
                }
            }
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fne) as f64;
        let pooled = 2.0 * precision * recall / (precision + recall);
        assert!((pooled - micro_f1(&preds, &labels)).abs() < 1e-15);
    }
}
