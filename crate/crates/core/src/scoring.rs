//! Segmentation scoring.

/// Fraction of positions where `pred == truth`.
pub fn exact_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / pred.len() as f64
}

/// Accuracy under the best one-to-one relabeling of predicted options onto
/// true labels. Predicted options left unmatched count as errors, so `K = 1`
/// scores the frequency of the majority true label.
pub fn permutation_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return 0.0;
    }
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let mut confusion = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let mut used = vec![false; kt];
    let best = best_assignment(&confusion, 0, &mut used);
    best as f64 / pred.len() as f64
}

fn best_assignment(confusion: &[Vec<usize>], row: usize, used: &mut [bool]) -> usize {
    if row == confusion.len() {
        return 0;
    }
    // leaving this predicted option unmatched
    let mut best = best_assignment(confusion, row + 1, used);
    for t in 0..used.len() {
        if used[t] || confusion[row][t] == 0 {
            continue;
        }
        used[t] = true;
        best = best.max(confusion[row][t] + best_assignment(confusion, row + 1, used));
        used[t] = false;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permuted_labels_score_perfectly() {
        let truth = [0, 0, 1, 1, 2, 2, 3];
        let pred = [2, 2, 0, 0, 3, 3, 1];
        assert_eq!(permutation_accuracy(&pred, &truth), 1.0);
        assert!(exact_accuracy(&pred, &truth) < 0.2);
    }

    #[test]
    fn single_option_scores_majority_frequency() {
        let truth = [0, 1, 1, 1, 2, 0, 1, 3];
        assert_eq!(permutation_accuracy(&[0; 8], &truth), 4.0 / 8.0);
    }

    #[test]
    fn two_predictions_cannot_share_a_label() {
        let truth = [0, 0, 0, 0];
        let pred = [0, 0, 1, 1];
        assert_eq!(permutation_accuracy(&pred, &truth), 0.5);
    }
}
