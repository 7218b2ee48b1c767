use crate::error::{Error, Result};
use crate::survival::chi2_sf_1df;

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, computed from mid-ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Argument("ROC AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // rank sums doubled to stay in integers: midrank of a tie block [i, j) is (i + 1 + j) / 2
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j) as u64;
        let pos_in_block = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        pos_rank_sum2 += midrank2 * pos_in_block;
        i = j;
    }
    let (np, nn) = (n_pos as u64, n_neg as u64);
    // 2·U = 2·R⁺ − n⁺(n⁺ + 1)
    let u2 = pos_rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

/// Paired comparison of two classifiers' correctness on the same cases.
#[derive(Debug, Clone, PartialEq)]
pub struct AucComparison {
    /// Cases where only A is correct, and where only B is correct.
    pub discordant: [usize; 2],
    pub statistic: f64,
    pub p_value: f64,
    /// Expected discordant cell count under the null is below 5.
    pub low_expected_count: bool,
    /// No discordant cases at all; `p_value` is 1.
    pub degenerate: bool,
}

/// Chi-square test (1 df) on the paired 2×2 table of (A correct, B correct).
/// Only the discordant cells carry information about a difference, so the
/// statistic is `(b − c)² / (b + c)`.
pub fn chisquare_auc_compare(preds_a: &[bool], preds_b: &[bool], labels: &[bool]) -> Result<AucComparison> {
    if preds_a.len() != labels.len() || preds_b.len() != labels.len() {
        return Err(Error::Argument("prediction vectors and labels differ in length".into()));
    }
    let (mut b, mut c) = (0usize, 0usize);
    for ((&a, &bb), &l) in preds_a.iter().zip(preds_b).zip(labels) {
        match (a == l, bb == l) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let discordant = (b + c) as f64;
    if b + c == 0 {
        return Ok(AucComparison {
            discordant: [b, c],
            statistic: 0.0,
            p_value: 1.0,
            low_expected_count: true,
            degenerate: true,
        });
    }
    let statistic = (b as f64 - c as f64).powi(2) / discordant;
    Ok(AucComparison {
        discordant: [b, c],
        statistic,
        p_value: chi2_sf_1df(statistic),
        low_expected_count: discordant / 2.0 < 5.0,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &labels).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &labels).unwrap(), 0.75);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn compare_identical_and_extreme() {
        let labels: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let r = chisquare_auc_compare(&labels, &labels, &labels).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(r.degenerate);

        let b: Vec<bool> = labels.iter().enumerate().map(|(i, &l)| if i < 50 { l } else { !l }).collect();
        let ab = chisquare_auc_compare(&labels, &b, &labels).unwrap();
        assert_eq!(ab.discordant, [50, 0]);
        assert_eq!(ab.statistic, 50.0);
        assert!(ab.p_value < 1e-4);
        let ba = chisquare_auc_compare(&b, &labels, &labels).unwrap();
        assert_eq!(ab.statistic, ba.statistic);
    }
}
