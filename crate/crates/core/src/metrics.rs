//! Ranking metrics for binary classifiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auprc: f64,
    pub auroc: f64,
    pub n_test: usize,
    pub positive_prevalence: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {i}")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Average precision: the sum of precision times recall increment over
/// descending score thresholds. Tied scores form one threshold.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut start = 0;
    while start < order.len() {
        let threshold = scores[order[start]];
        let mut end = start;
        while end < order.len() && scores[order[end]] == threshold {
            if labels[order[end]] {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        start = end;
    }
    Ok(ap)
}

/// Mann–Whitney AUROC computed from mid-ranks: concordant pairs plus half
/// of tied pairs, over all positive/negative pairs.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end share their mean
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let group_pos = order[start..end].iter().filter(|&&i| labels[i]).count();
        positive_rank_sum += mid_rank * group_pos as f64;
        start = end;
    }
    let u = positive_rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

pub fn evaluate(scores: &[f64], labels: &[bool]) -> Result<EvalResult> {
    let auprc = auprc(scores, labels)?;
    let auroc = auroc(scores, labels)?;
    let n = labels.len();
    Ok(EvalResult {
        auprc,
        auroc,
        n_test: n,
        positive_prevalence: labels.iter().filter(|&&l| l).count() as f64 / n as f64,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn perfect_ranking() {
        let s = [0.9, 0.8, 0.3, 0.1];
        let l = [true, true, false, false];
        assert_eq!(auprc(&s, &l).unwrap(), 1.0);
        assert_eq!(auroc(&s, &l).unwrap(), 1.0);
    }

    #[test]
    fn single_positive_ranked_last() {
        let s = [0.9, 0.8, 0.7, 0.1];
        let l = [false, false, false, true];
        assert!((auprc(&s, &l).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(auroc(&s, &l).unwrap(), 0.0);
    }

    #[test]
    fn all_tied_scores() {
        let s = [0.5; 6];
        let l = [true, false, false, true, false, false];
        assert_eq!(auroc(&s, &l).unwrap(), 0.5);
        // one threshold: recall 1 at precision 2/6
        assert!((auprc(&s, &l).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(auprc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
        assert!(matches!(auroc(&[0.1, 0.2], &[false, false]), Err(Error::SingleClass)));
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=12);
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            labels[0] = true;
            labels[1] = false;
            // coarse grid so ties are common
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let ap = auprc(&scores, &labels).unwrap();
            let roc = auroc(&scores, &labels).unwrap();
            assert!((ap - oracle::auprc_thresholds(&scores, &labels)).abs() < 1e-12);
            assert!((roc - oracle::auroc_pairs(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_scores_auprc_near_prevalence() {
        let mut total = 0.0;
        let mut prevalence = 0.0;
        for seed in 0..10 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.3)).collect();
            let scores: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
            let r = evaluate(&scores, &labels).unwrap();
            total += r.auprc;
            prevalence += r.positive_prevalence;
        }
        assert!((total / 10.0 - prevalence / 10.0).abs() < 0.03);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(
            raw in prop::collection::vec((0u8..20, any::<bool>()), 2..40)
        ) {
            let mut labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            labels[0] = true;
            labels[1] = false;
            let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 10.0).collect();
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((auprc(&scores, &labels).unwrap() - auprc(&warped, &labels).unwrap()).abs() < 1e-12);
            prop_assert!((auroc(&scores, &labels).unwrap() - auroc(&warped, &labels).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auroc_of_negated_scores(
            labels_raw in prop::collection::vec(any::<bool>(), 2..40),
            seed in any::<u64>()
        ) {
            let mut labels = labels_raw;
            labels[0] = true;
            labels[1] = false;
            // distinct scores
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut scores: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
            use rand::seq::SliceRandom;
            scores.shuffle(&mut rng);
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = auroc(&scores, &labels).unwrap();
            let b = auroc(&neg, &labels).unwrap();
            prop_assert!((a - (1.0 - b)).abs() < 1e-12);
        }
    }
}
