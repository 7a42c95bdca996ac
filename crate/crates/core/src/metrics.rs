//! Outlier-detection metrics over per-sample scores (higher = more outlying).

use std::cmp::Ordering;

use crate::error::{shape_err, Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(score_pos > score_neg) + 0.5 P(tie)`, exact via one sort and tie groups.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(shape_err(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain(format!(
            "AUROC needs both classes, got {n_pos} positive and {n_neg} negative labels"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // count pairs won by positives; a tie group contributes half of its mixed pairs
    let mut wins = 0.0f64;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0usize, 0usize);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        wins += pos_here as f64 * neg_below as f64 + 0.5 * (pos_here as f64 * neg_here as f64);
        neg_below += neg_here;
        i = j;
    }
    Ok(wins / (n_pos as f64 * n_neg as f64))
}

/// Number of true outliers among the `m` highest scores. Ties at the cut are
/// broken in favour of the lower index.
pub fn top_m_detection(scores: &[f64], labels: &[bool], m: usize) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(shape_err(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if m > scores.len() {
        return Err(Error::Domain(format!("m = {m} exceeds the {} samples", scores.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(order[..m].iter().filter(|&&i| labels[i]).count())
}
