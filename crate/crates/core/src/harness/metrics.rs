use crate::error::{Error, Result};

/// Rank-based ROC AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Precondition(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of midranks of the positives (Mann-Whitney U).
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut hits = 0.0;
        let mut total = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    total += 1.0;
                    hits += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        hits / total
    }

    #[test]
    fn perfect_ranking() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties() {
        assert_eq!(roc_auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
    }

    #[test]
    fn pairwise_example() {
        // Positives 0.9, 0.4; negatives 0.2, 0.8: three of four pairs concordant.
        assert_eq!(roc_auc(&[0.9, 0.2, 0.8, 0.4], &[true, false, false, true]).unwrap(), 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn matches_pairwise_count_with_ties() {
        let scores = [0.1, 0.5, 0.5, 0.3, 0.5, 0.9, 0.1, 0.3];
        let labels = [false, true, false, true, true, false, true, false];
        assert!((roc_auc(&scores, &labels).unwrap() - pairwise(&scores, &labels)).abs() < 1e-15);
        let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        let distinct = [0.1, 0.7, 0.2, 0.9, 0.4, 0.35];
        let dl = [false, true, false, true, false, true];
        let inv: Vec<f64> = distinct.iter().map(|s| 1.0 - s).collect();
        assert!((roc_auc(&distinct, &dl).unwrap() + roc_auc(&inv, &dl).unwrap() - 1.0).abs() < 1e-15);
        assert!(roc_auc(&flipped, &labels).is_ok());
    }
}
