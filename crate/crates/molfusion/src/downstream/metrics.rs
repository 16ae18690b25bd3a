use super::DownstreamError;

/// Area under the ROC curve via the Mann-Whitney statistic:
/// (wins + 0.5 * ties) / (n_pos * n_neg), computed from midranks.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, DownstreamError> {
    if scores.len() != labels.len() {
        return Err(DownstreamError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(DownstreamError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // midranks over tie groups
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = midrank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64, DownstreamError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(DownstreamError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    let mse: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn perfect_separation_is_one() {
        let auc = roc_auc(&[0.9, 0.1], &[1, 0]).unwrap();
        assert_relative_eq!(auc, 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        let auc = roc_auc(&[0.3, 0.3, 0.3, 0.3], &[1, 0, 1, 0]).unwrap();
        assert_relative_eq!(auc, 0.5);
    }

    #[test]
    fn one_win_one_loss_of_two_pairs() {
        let auc = roc_auc(&[0.8, 0.6, 0.4], &[1, 0, 1]).unwrap();
        assert_relative_eq!(auc, 0.5);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(DownstreamError::SingleClass)
        ));
    }

    fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if li != 1 {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn matches_brute_force_pair_counting() {
        let mut rng = crate::rng::stream(17, "auc-test");
        for _ in 0..100 {
            let n = rng.gen_range(2..=50);
            // coarse score grid to force ties
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 0;
            labels[n - 1] = 1;
            let fast = roc_auc(&scores, &labels).unwrap();
            let slow = brute_force_auc(&scores, &labels);
            assert_relative_eq!(fast, slow, epsilon = 1e-12);
        }
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let scores = [0.1, 0.5, 0.2, 0.9, 0.3, 0.5];
        let labels = [0, 1, 0, 1, 1, 0];
        let a = roc_auc(&scores, &labels).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (5.0 * s).exp() - 2.0).collect();
        let b = roc_auc(&transformed, &labels).unwrap();
        assert_relative_eq!(a, b);
    }

    #[test]
    fn rmse_closed_forms() {
        assert_relative_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
        assert_relative_eq!(rmse(&[1.0], &[4.5]).unwrap(), 3.5);
    }

    #[test]
    fn rmse_length_mismatch() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }
}
